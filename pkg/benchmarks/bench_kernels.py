#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times each hot kernel (model values and Jacobians) at several series
lengths under both backends, plus one end-to-end fit. Run with
``SIGFIT_DISABLE_NUMBA=1`` to confirm the fallback path is the one being
exercised package-wide; this script always times both implementations
directly.

Usage: python benchmarks/bench_kernels.py [--sizes 250,500,1000,2000] [--repeats 200]
"""

import argparse
import time

import numpy as np

from sigfit import _kernels, models, solver

CASES = [
    ("sumsines_eval", lambda n: (np.arange(n, dtype=float), _sumsines_params())),
    ("sumsines_jac", lambda n: (np.arange(n, dtype=float), _sumsines_params())),
    ("fourier_eval", lambda n: (np.arange(n, dtype=float), _fourier_params())),
    ("fourier_jac", lambda n: (np.arange(n, dtype=float), _fourier_params())),
    ("horner_eval", lambda n: (np.arange(n, dtype=float), np.array([1e-6, -2e-3, 1.5, 40.0]))),
    ("weibull_eval", lambda n: (np.arange(n, dtype=float), np.array([2.0, -10.0, n / 2.0, 5e4]))),
    ("weibull_jac", lambda n: (np.arange(n, dtype=float), np.array([2.0, -10.0, n / 2.0, 5e4]))),
]


def _sumsines_params(n_terms=11):
    rng = np.random.default_rng(3)
    return np.column_stack(
        [rng.uniform(100, 2000, n_terms), rng.uniform(0.02, 0.9, n_terms), rng.uniform(0, 6, n_terms)]
    ).ravel()


def _fourier_params(n_terms=8):
    rng = np.random.default_rng(4)
    flat = [2000.0]
    for _ in range(n_terms):
        flat.extend(rng.uniform(-500, 500, 2))
    flat.append(0.02)
    return np.asarray(flat)


def _time(fn, args, repeats):
    fn(*args)  # warmup / JIT
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_kernels(sizes, repeats):
    if not _kernels.numba_impls:
        print("numba backend unavailable; only numpy timings shown")
    print(f"{'kernel':14s} {'N':>6s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, make in CASES:
        np_fn = getattr(_kernels, f"{name}_numpy")
        nb_fn = _kernels.numba_impls.get(name)
        for n in sizes:
            args = make(n)
            t_np = _time(np_fn, args, repeats)
            if nb_fn is None:
                print(f"{name:14s} {n:6d} {t_np * 1e6:9.1f}u {'-':>10s} {'-':>8s}")
                continue
            t_nb = _time(nb_fn, args, repeats)
            print(
                f"{name:14s} {n:6d} {t_np * 1e6:9.1f}u {t_nb * 1e6:9.1f}u {t_np / t_nb:7.1f}x"
            )


def bench_fit(n, repeats):
    """End-to-end 11-term fit: compiled LM driver vs generic python loop."""
    rng = np.random.default_rng(11)
    x = np.arange(n, dtype=float)
    y = (
        3500.0
        + 1200.0 * np.sin(0.035 * x + 1.0)
        + 500.0 * np.sin(0.18 * x + 0.4)
        + 240.0 * np.sin(0.41 * x + 2.2)
        + rng.normal(0, 20, n)
    )

    class _Series:
        abscissa = x
        ordinate = y

    guess = models.initial_guess("sum-of-sines", _Series, 11)
    config = solver.SolverConfig(max_iterations=12, chi2_abs_tol=1e-300, chi2_rel_tol=1e-300)
    problem = solver.FitProblem(_Series, guess)
    reps = max(repeats // 10, 3)
    t_fast = _time(lambda: solver.fit(problem, config), (), reps)
    core = _kernels.sumsines_lm_core
    _kernels.sumsines_lm_core = None
    try:
        t_generic = _time(lambda: solver.fit(problem, config), (), reps)
    finally:
        _kernels.sumsines_lm_core = core
    label = "compiled LM core" if core is not None else "generic only"
    print(
        f"\nfull 12-iteration fit, N={n}, backend={_kernels.BACKEND} ({label}): "
        f"{t_fast * 1e3:.2f} ms fast path, {t_generic * 1e3:.2f} ms generic python loop"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="250,500,1000,2000")
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    bench_kernels(sizes, args.repeats)
    bench_fit(sizes[-1], args.repeats)


if __name__ == "__main__":
    main()
