import os
import subprocess
import sys

import numpy as np
import pytest

from sigfit import _kernels

pytestmark = pytest.mark.skipif(
    not _kernels.numba_impls, reason="numba backend unavailable"
)


def _inputs():
    rng = np.random.default_rng(5)
    x = np.linspace(0.0, 40.0, 333)
    sumsines = rng.uniform(-2, 2, 9)
    fourier = np.concatenate([rng.uniform(-2, 2, 7), [0.21]])
    poly = rng.uniform(-1, 1, 6)
    weibull = np.array([1.7, -0.5, 3.0, 42.0])
    return {
        "sumsines_eval": (x, sumsines),
        "sumsines_jac": (x, sumsines),
        "fourier_eval": (x, fourier),
        "fourier_jac": (x, fourier),
        "horner_eval": (x, poly),
        "weibull_eval": (x, weibull),
        "weibull_jac": (x, weibull),
    }


@pytest.mark.parametrize("name", sorted(_kernels._numpy_impls))
def test_backends_agree(name):
    x, p = _inputs()[name]
    reference = _kernels._numpy_impls[name](x, p)
    compiled = _kernels.numba_impls[name](x, p)
    np.testing.assert_allclose(compiled, reference, rtol=1e-12, atol=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, SIGFIT_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "import sigfit; print(sigfit.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_numba_when_available():
    assert _kernels.BACKEND == "numba"
    assert _kernels.sumsines_eval is _kernels.numba_impls["sumsines_eval"]


def test_compiled_lm_core_matches_generic_driver():
    from sigfit import ingest, models, solver, synth

    samples = synth.generate_samples(n_users=1, genuine=2, forged=1)
    for sample in samples:
        for channel in (1, 2):
            series = ingest.extract_channel(sample, channel)
            guess = models.initial_guess("sum-of-sines", series, 7)
            fast = solver.fit(solver.FitProblem(series, guess))
            core = _kernels.sumsines_lm_core
            _kernels.sumsines_lm_core = None
            try:
                generic = solver.fit(solver.FitProblem(series, guess))
            finally:
                _kernels.sumsines_lm_core = core
            assert fast.termination == generic.termination
            assert fast.iterations == generic.iterations
            assert fast.chi2 == pytest.approx(generic.chi2, rel=1e-9)
            np.testing.assert_allclose(
                fast.params.param_vector(), generic.params.param_vector(), rtol=1e-6
            )


def test_full_suite_runs_on_numpy_backend():
    # one end-to-end fit under the fallback backend, in a subprocess
    code = (
        "import numpy as np\n"
        "from sigfit import models, solver, _kernels\n"
        "assert _kernels.BACKEND == 'numpy'\n"
        "assert _kernels.sumsines_lm_core is None\n"
        "x = np.arange(120.0)\n"
        "true = models.SumOfSines(((2.0, 0.3, 0.5),))\n"
        "class S: abscissa = x; ordinate = models.evaluate(true, x)\n"
        "g = models.initial_guess('sum-of-sines', S, 1)\n"
        "r = solver.fit(solver.FitProblem(S, g))\n"
        "assert r.converged and r.chi2 < 1e-10, (r.termination, r.chi2)\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        env=dict(os.environ, SIGFIT_DISABLE_NUMBA="1"),
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0, out.stderr
