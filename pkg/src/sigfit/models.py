"""Curve model families: evaluation, analytic Jacobians, initial guesses.

Every family is a frozen dataclass exposing the same small surface:
``family`` tag, ``n_params``, ``param_vector()`` and ``with_vector()``.
Free functions (``evaluate``, ``jacobian``, ``initial_guess``) dispatch on
the family so solver code never special-cases model types.

Canonical parameter orders (frozen; feature-vector layout depends on them):

* SumOfSines          A_1, B_1, C_1, ..., A_n, B_n, C_n
* Fourier             a0, a_1, b_1, ..., a_n, b_n, omega (omega last,
                      dropped from the fitted vector when ``fixed_omega``)
* Polynomial          coefficients in descending degree
* Weibull             gamma, mu, alpha, amp
* Weibull2            beta, lam
* Parabola            a
* ScaledExponential   scale, rate
* Sine, Exponential   no parameters
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, InvalidParamsError, TooFewPointsError


@dataclass(frozen=True)
class SumOfSines:
    """f(x) = sum_i A_i * sin(B_i * x + C_i)."""

    terms: tuple  # of (amplitude, angular_frequency, phase)

    family = "sum-of-sines"

    @property
    def n(self):
        return len(self.terms)

    @property
    def n_params(self):
        return 3 * len(self.terms)

    def param_vector(self):
        return np.asarray([v for t in self.terms for v in t], dtype=float)

    def with_vector(self, vec):
        vec = np.asarray(vec, dtype=float)
        terms = tuple((vec[3 * i], vec[3 * i + 1], vec[3 * i + 2]) for i in range(len(vec) // 3))
        return SumOfSines(terms)

    def validate(self):
        if len(self.terms) < 1:
            raise InvalidParamsError("sum-of-sines needs at least one term")
        if any(len(t) != 3 for t in self.terms):
            raise InvalidParamsError("each sum-of-sines term is (amplitude, frequency, phase)")


@dataclass(frozen=True)
class Fourier:
    """f(x) = a0 + sum_i a_i*cos(i*omega*x) + b_i*sin(i*omega*x).

    ``omega`` is the fundamental frequency, fitted by default; with
    ``fixed_omega`` the model is linear in its remaining parameters.
    """

    a0: float
    terms: tuple  # of (a_i, b_i)
    omega: float
    fixed_omega: bool = False

    family = "fourier"

    @property
    def n(self):
        return len(self.terms)

    @property
    def n_params(self):
        return 2 * len(self.terms) + (1 if self.fixed_omega else 2)

    def param_vector(self):
        flat = [self.a0] + [v for t in self.terms for v in t]
        if not self.fixed_omega:
            flat.append(self.omega)
        return np.asarray(flat, dtype=float)

    def with_vector(self, vec):
        vec = np.asarray(vec, dtype=float)
        if self.fixed_omega:
            coeffs, omega = vec, self.omega
        else:
            coeffs, omega = vec[:-1], float(vec[-1])
        n = (len(coeffs) - 1) // 2
        terms = tuple((coeffs[2 * i + 1], coeffs[2 * i + 2]) for i in range(n))
        return Fourier(float(coeffs[0]), terms, omega, self.fixed_omega)

    def validate(self):
        if len(self.terms) < 1:
            raise InvalidParamsError("fourier needs at least one term")
        if any(len(t) != 2 for t in self.terms):
            raise InvalidParamsError("each fourier term is (a_i, b_i)")

    def packed(self):
        """Kernel layout [a0, a1, b1, ..., an, bn, omega], always with omega."""
        return np.asarray(
            [self.a0] + [v for t in self.terms for v in t] + [self.omega], dtype=float
        )


@dataclass(frozen=True)
class Polynomial:
    """f(x) = c_1*x^k + ... + c_k*x + c_{k+1}, coefficients descending.

    Discretized polynomial curves pair f with a band 0 <= y - f(x) <= w of
    width w; that width is documentation only here, nothing fits it.
    """

    coeffs: tuple

    family = "polynomial"

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def n_params(self):
        return len(self.coeffs)

    def param_vector(self):
        return np.asarray(self.coeffs, dtype=float)

    def with_vector(self, vec):
        return Polynomial(tuple(float(v) for v in vec))

    def validate(self):
        if len(self.coeffs) < 1:
            raise InvalidParamsError("polynomial needs at least one coefficient")
        if len(self.coeffs) > 1 and self.coeffs[0] == 0:
            raise InvalidParamsError("leading coefficient must be nonzero for degree > 0")


@dataclass(frozen=True)
class Weibull:
    """Weibull density with location and an amplitude multiplier.

    f(x) = amp * (gamma/alpha) * z^(gamma-1) * exp(-z^gamma), z = (x-mu)/alpha,
    and 0 for x < mu. ``amp`` scales the unit-mass density up to data range.
    """

    gamma: float
    mu: float
    alpha: float
    amp: float = 1.0

    family = "weibull"
    n_params = 4

    def param_vector(self):
        return np.asarray([self.gamma, self.mu, self.alpha, self.amp], dtype=float)

    def with_vector(self, vec):
        return Weibull(float(vec[0]), float(vec[1]), float(vec[2]), float(vec[3]))

    def validate(self):
        if not (self.gamma > 0 and self.alpha > 0):
            raise InvalidParamsError("weibull requires gamma > 0 and alpha > 0")


@dataclass(frozen=True)
class Weibull2:
    """Two-parameter Weibull in survival form: F(t) = exp(-(lam*t)^beta)."""

    beta: float
    lam: float

    family = "weibull2"
    n_params = 2

    def param_vector(self):
        return np.asarray([self.beta, self.lam], dtype=float)

    def with_vector(self, vec):
        return Weibull2(float(vec[0]), float(vec[1]))

    def validate(self):
        if not (self.beta > 0 and self.lam > 0):
            raise InvalidParamsError("weibull2 requires beta > 0 and lam > 0")


@dataclass(frozen=True)
class Parabola:
    """Real branch of y^2 = 4ax, i.e. y = 2*sqrt(a*x)."""

    a: float

    family = "parabola"
    n_params = 1

    def param_vector(self):
        return np.asarray([self.a], dtype=float)

    def with_vector(self, vec):
        return Parabola(float(vec[0]))

    def validate(self):
        pass


@dataclass(frozen=True)
class ScaledExponential:
    """f(x) = scale * exp(rate * x)."""

    scale: float
    rate: float

    family = "scaled-exponential"
    n_params = 2

    def param_vector(self):
        return np.asarray([self.scale, self.rate], dtype=float)

    def with_vector(self, vec):
        return ScaledExponential(float(vec[0]), float(vec[1]))

    def validate(self):
        pass


@dataclass(frozen=True)
class Sine:
    """Fixed reference curve y = sin(x); no parameters."""

    family = "sine"
    n_params = 0

    def param_vector(self):
        return np.zeros(0)

    def with_vector(self, vec):
        return self

    def validate(self):
        pass


@dataclass(frozen=True)
class Exponential:
    """Fixed reference curve y = e^x; no parameters."""

    family = "exponential"
    n_params = 0

    def param_vector(self):
        return np.zeros(0)

    def with_vector(self, vec):
        return self

    def validate(self):
        pass


FAMILIES = {
    cls.family: cls
    for cls in (
        SumOfSines,
        Fourier,
        Polynomial,
        Weibull,
        Weibull2,
        Parabola,
        ScaledExponential,
        Sine,
        Exponential,
    )
}


def _as_x(abscissa):
    x = np.asarray(abscissa, dtype=float)
    if x.size == 0:
        raise InvalidParamsError("abscissa must be non-empty")
    return x


def evaluate(params, abscissa):
    """Pointwise model values f(x_i) for one parameter set."""
    params.validate()
    x = _as_x(abscissa)
    if isinstance(params, SumOfSines):
        return _kernels.sumsines_eval(x, params.param_vector())
    if isinstance(params, Fourier):
        return _kernels.fourier_eval(x, params.packed())
    if isinstance(params, Polynomial):
        return _kernels.horner_eval(x, params.param_vector())
    if isinstance(params, Weibull):
        return _kernels.weibull_eval(x, params.param_vector())
    if isinstance(params, Weibull2):
        t = params.lam * x
        if np.any(t < 0):
            raise DomainError("weibull2 survival defined for t >= 0")
        return np.exp(-(t**params.beta))
    if isinstance(params, Parabola):
        arg = 4.0 * params.a * x
        if np.any(arg < 0):
            raise DomainError("parabola real branch needs a*x >= 0")
        return np.sqrt(arg)
    if isinstance(params, ScaledExponential):
        with np.errstate(over="ignore"):
            return params.scale * np.exp(params.rate * x)
    if isinstance(params, Sine):
        return np.sin(x)
    if isinstance(params, Exponential):
        with np.errstate(over="ignore"):
            return np.exp(x)
    raise InvalidParamsError(f"unknown model family: {params!r}")


def jacobian(params, abscissa):
    """N x P matrix of partials in the family's canonical parameter order."""
    params.validate()
    x = _as_x(abscissa)
    if isinstance(params, SumOfSines):
        return _kernels.sumsines_jac(x, params.param_vector())
    if isinstance(params, Fourier):
        full = _kernels.fourier_jac(x, params.packed())
        return full[:, :-1] if params.fixed_omega else full
    if isinstance(params, Polynomial):
        # row i = [x_i^k, ..., x_i, 1]
        return np.vander(x, N=len(params.coeffs), increasing=False)
    if isinstance(params, Weibull):
        return _kernels.weibull_jac(x, params.param_vector())
    if isinstance(params, Weibull2):
        t = params.lam * x
        if np.any(t < 0):
            raise DomainError("weibull2 survival defined for t >= 0")
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            tb = t**params.beta
            f = np.exp(-tb)
            jac = np.zeros((x.size, 2))
            pos = t > 0
            jac[pos, 0] = -f[pos] * tb[pos] * np.log(t[pos])
            jac[pos, 1] = -f[pos] * params.beta * tb[pos] / params.lam
        return jac
    if isinstance(params, Parabola):
        arg = 4.0 * params.a * x
        if np.any(arg < 0):
            raise DomainError("parabola real branch needs a*x >= 0")
        with np.errstate(divide="ignore"):
            col = np.where(arg > 0, 2.0 * x / np.sqrt(np.where(arg > 0, arg, 1.0)), 0.0)
        return col[:, None]
    if isinstance(params, ScaledExponential):
        with np.errstate(over="ignore"):
            e = np.exp(params.rate * x)
        return np.column_stack([e, params.scale * x * e])
    if isinstance(params, (Sine, Exponential)):
        return np.zeros((x.size, 0))
    raise InvalidParamsError(f"unknown model family: {params!r}")


def vector_funcs(params):
    """Raw-vector (eval, jac, feasible) callables for solver hot loops.

    ``eval``/``jac`` take (vec, x) and skip per-call dataclass rebuilds;
    ``feasible`` is the cheap family-invariant check used to reject
    infeasible trial steps without exceptions. Families without a kernel
    fast path fall back to the validated ``evaluate``/``jacobian`` pair.
    """
    if isinstance(params, SumOfSines):
        return (
            lambda v, x: _kernels.sumsines_eval(x, v),
            lambda v, x: _kernels.sumsines_jac(x, v),
            lambda v: True,
        )
    if isinstance(params, Fourier):
        if params.fixed_omega:
            omega = params.omega

            def ev(v, x):
                return _kernels.fourier_eval(x, np.append(v, omega))

            def ja(v, x):
                return _kernels.fourier_jac(x, np.append(v, omega))[:, :-1]

            return ev, ja, lambda v: True
        return (
            lambda v, x: _kernels.fourier_eval(x, v),
            lambda v, x: _kernels.fourier_jac(x, v),
            lambda v: True,
        )
    if isinstance(params, Polynomial):
        return (
            lambda v, x: _kernels.horner_eval(x, v),
            lambda v, x: np.vander(x, N=v.size, increasing=False),
            lambda v: v.size == 1 or v[0] != 0.0,
        )
    if isinstance(params, Weibull):
        return (
            lambda v, x: _kernels.weibull_eval(x, v),
            lambda v, x: _kernels.weibull_jac(x, v),
            lambda v: v[0] > 0.0 and v[2] > 0.0,
        )

    def ev(v, x):
        return evaluate(params.with_vector(v), x)

    def ja(v, x):
        return jacobian(params.with_vector(v), x)

    def feasible(v):
        try:
            params.with_vector(v).validate()
        except InvalidParamsError:
            return False
        return True

    return ev, ja, feasible


def _require_points(series, n_params):
    if len(series.ordinate) < 2 * n_params:
        raise TooFewPointsError(
            f"need at least {2 * n_params} points to seed {n_params} parameters, "
            f"got {len(series.ordinate)}"
        )


def _projection_peak(x, residual, w0, half_width, n_points=25):
    grid = w0 + half_width * np.linspace(-1.0, 1.0, n_points)
    grid = grid[grid > 0]
    if len(grid) == 0:
        return w0
    power = np.abs(np.exp(-1j * np.outer(grid, x)) @ residual)
    return float(grid[np.argmax(power)])


def _dominant_frequency(x, residual):
    """Refined angular frequency of the strongest DFT peak, or None.

    The coarse bin comes from the magnitude spectrum (uniform spacing at
    the mean gap assumed); the frequency is then polished by maximizing
    projection power on a two-stage zoom grid. Sub-percent bin accuracy
    matters: a slightly off frequency leaves coherent leakage that can
    outrank genuinely smaller tones.
    """
    n = len(residual)
    if n < 3:
        return None
    dx = (x[-1] - x[0]) / (n - 1)
    mags = np.abs(np.fft.rfft(residual))
    k = int(np.argmax(mags[1:])) + 1  # DC carries no tone
    if mags[k] == 0.0:
        return None
    bin_width = 2.0 * np.pi / (n * dx)
    w = _projection_peak(x, residual, k * bin_width, 0.6 * bin_width)
    return _projection_peak(x, residual, w, 0.06 * bin_width)


def _sine_design(x, freqs):
    cols = []
    for w in freqs:
        cols.extend([np.sin(w * x), np.cos(w * x)])
    return np.column_stack(cols)


def initial_guess(family, series, n_terms=1):
    """A feasible starting point aimed at the basin of a good fit.

    ``n_terms`` is the term count for sum-of-sines/fourier and the degree
    for polynomial; other families ignore it.
    """
    cls = FAMILIES[family] if isinstance(family, str) else family
    x = np.asarray(series.abscissa, dtype=float)
    y = np.asarray(series.ordinate, dtype=float)

    if cls is SumOfSines:
        _require_points(series, 3 * n_terms)
        return _guess_sumsines(x, y, n_terms)
    if cls is Fourier:
        _require_points(series, 2 * n_terms + 2)
        return _guess_fourier(x, y, n_terms)
    if cls is Polynomial:
        degree = n_terms
        _require_points(series, degree + 1)
        return Polynomial(tuple(np.polyfit(x, y, degree)))
    if cls is Weibull:
        _require_points(series, 4)
        return _guess_weibull(x, y)
    if cls is Weibull2:
        _require_points(series, 2)
        scale = max(float(np.mean(np.abs(x))), 1e-12)
        return Weibull2(1.0, 1.0 / scale)
    if cls is Parabola:
        _require_points(series, 1)
        return fit_parabola_scale(x, y)
    if cls is ScaledExponential:
        _require_points(series, 2)
        return _guess_scaled_exponential(x, y)
    if cls in (Sine, Exponential):
        return cls()
    raise InvalidParamsError(f"unknown model family: {family!r}")


def _guess_sumsines(x, y, n_terms):
    """Greedy tone seeding: pick the strongest residual frequency, refit all
    amplitudes and phases jointly by linear least squares, repeat.

    The first term starts at a small fraction of a period over the span:
    there sin(Bx) and cos(Bx) span nearly {x, 1}, so the term carries the
    level and linear trend the zero-mean family otherwise lacks, while the
    arc stays curved enough for its three partials to be independent.
    """
    span = max(float(x[-1] - x[0]), 1.0)
    b_level = 0.3 / span
    freqs = [b_level]
    coef, *_ = np.linalg.lstsq(_sine_design(x, freqs), y, rcond=None)
    residual = y - _sine_design(x, freqs) @ coef
    want = max(n_terms, 2) if n_terms == 1 else n_terms
    while len(freqs) < want:
        w = _dominant_frequency(x, residual)
        if w is None:
            break
        freqs.append(w)
        design = _sine_design(x, freqs)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        residual = y - design @ coef
    # cyclic reassignment: re-pick each tone against the others' residual,
    # so a slot wasted on leakage moves to a genuinely missed tone
    for _ in range(2 if len(freqs) > 2 else 0):
        for i in range(1, len(freqs)):
            others = _sine_design(x, freqs[:i] + freqs[i + 1 :])
            coef_o, *_ = np.linalg.lstsq(others, y, rcond=None)
            w = _dominant_frequency(x, y - others @ coef_o)
            if w is not None:
                freqs[i] = w
        design = _sine_design(x, freqs)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    if len(freqs) > 1:
        # the level slot must defend its place: on level-free data it is
        # better spent on one more tone
        others = _sine_design(x, freqs[1:])
        coef_o, *_ = np.linalg.lstsq(others, y, rcond=None)
        w = _dominant_frequency(x, y - others @ coef_o)
        if w is not None:
            challenger = [w] + freqs[1:]
            design_c = _sine_design(x, challenger)
            coef_c, *_ = np.linalg.lstsq(design_c, y, rcond=None)
            design = _sine_design(x, freqs)
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            if np.sum((y - design_c @ coef_c) ** 2) < np.sum((y - design @ coef) ** 2):
                freqs, coef = challenger, coef_c
    terms = [
        (math.hypot(float(coef[2 * i]), float(coef[2 * i + 1])),
         float(w),
         math.atan2(float(coef[2 * i + 1]), float(coef[2 * i])))
        for i, w in enumerate(freqs)
    ]
    if n_terms == 1:
        # a lone term goes to whichever component dominates
        return SumOfSines((max(terms, key=lambda t: abs(t[0])),))
    scale = max(float(np.std(y)), 1.0)
    i = 0
    while len(terms) < n_terms:  # short spectra: pad with distinct frequencies
        i += 1
        terms.append((1e-3 * scale, (0.5 + 0.25 * i) * np.pi / span, 0.0))
    return SumOfSines(tuple(terms[:n_terms]))


def _guess_fourier(x, y, n_terms):
    n = len(y)
    dx = (x[-1] - x[0]) / (n - 1) if n > 1 else 1.0
    omega = 2.0 * np.pi / (n * dx)
    spectrum = np.fft.rfft(y - np.mean(y))
    terms = []
    for i in range(1, n_terms + 1):
        if i < len(spectrum):
            c = (2.0 / n) * spectrum[i] * np.exp(-1j * i * omega * x[0])
            terms.append((float(c.real), float(-c.imag)))
        else:
            terms.append((0.0, 0.0))
    return Fourier(float(np.mean(y)), tuple(terms), float(omega))


def _guess_weibull(x, y):
    """Peak-anchored seed: bump at the strongest crest, half-max width.

    The usual peak-function start (anchor at the smoothed maximum, width
    from the half-maximum crossings) with a gamma=2 skew default.
    """
    span = max(float(x[-1] - x[0]), 1.0)
    if len(y) >= 5:
        kernel = np.ones(5) / 5.0
        smooth = np.convolve(y, kernel, mode="same")
    else:
        smooth = y
    k = int(np.argmax(smooth))
    peak = float(smooth[k])
    half = peak / 2.0
    left = k
    while left > 0 and smooth[left] > half:
        left -= 1
    right = k
    while right < len(y) - 1 and smooth[right] > half:
        right += 1
    width = float(x[right] - x[left]) if right > left else span / 4.0
    gamma = 2.0
    alpha = max(width, 1e-9 * span, 1e-12)
    mu = float(x[k]) - alpha / np.sqrt(2.0)  # gamma=2 mode sits at mu + alpha/sqrt(2)
    peak_density = 0.8577 / alpha  # unit-mass gamma=2 mode height
    return Weibull(gamma, mu, alpha, peak / peak_density)


def _guess_scaled_exponential(x, y):
    pos = y > 0
    if pos.sum() >= 2:
        rate, log_scale = np.polyfit(x[pos], np.log(y[pos]), 1)
        return ScaledExponential(float(np.exp(log_scale)), float(rate))
    scale = float(np.mean(np.abs(y)))
    return ScaledExponential(scale if scale > 0 else 1.0, 0.0)


def fit_parabola_scale(x, y):
    """Closed-form least squares of y = 2*sqrt(a*x) over a (a >= 0)."""
    if np.any(x < 0):
        raise DomainError("parabola real branch needs x >= 0")
    denom = 2.0 * float(np.sum(x))
    s = float(np.sum(y * np.sqrt(x))) / denom if denom > 0 else 0.0
    return Parabola(max(s, 0.0) ** 2)


def weibull_from_survival(params):
    """Density implied by the survival form: beta=gamma, lam=1/alpha, mu=0."""
    params.validate()
    return Weibull(params.beta, 0.0, 1.0 / params.lam, 1.0)


def canonicalize(params):
    """Deterministic representative of an equivalence class of parameters.

    Sum-of-sines terms admit sign/phase flips and reordering that leave the
    curve unchanged; fixing amplitude >= 0, frequency >= 0, phase in
    [-pi, pi] and sorting by frequency makes coefficient vectors comparable
    across independently fitted samples. Other families return unchanged.
    """
    if not isinstance(params, SumOfSines):
        return params
    terms = []
    for a, b, c in params.terms:
        if b < 0:
            a, b, c = -a, -b, -c
        if a < 0:
            a, c = -a, c + np.pi
        c = math.remainder(c, 2.0 * np.pi)  # wraps into [-pi, pi]
        terms.append((a, b, c))
    terms.sort(key=lambda t: (t[1], -t[0], t[2]))
    return SumOfSines(tuple(terms))


def params_to_dict(params):
    """JSON-ready dict: family tag plus the ordered coefficient array."""
    d = {"family": params.family, "coefficients": [float(v) for v in params.param_vector()]}
    if isinstance(params, Fourier):
        d["coefficients"] = [float(v) for v in params.packed()]
        d["fixed_omega"] = params.fixed_omega
    return d


def params_from_dict(d):
    family = d["family"]
    cls = FAMILIES[family]
    coeffs = np.asarray(d["coefficients"], dtype=float)
    if cls is Fourier:
        n = (len(coeffs) - 2) // 2
        terms = tuple((coeffs[2 * i + 1], coeffs[2 * i + 2]) for i in range(n))
        return Fourier(float(coeffs[0]), terms, float(coeffs[-1]), bool(d.get("fixed_omega", False)))
    if cls in (Sine, Exponential):
        return cls()
    return cls(()).with_vector(coeffs) if cls is SumOfSines else _from_vector(cls, coeffs)


def _from_vector(cls, coeffs):
    if cls is Polynomial:
        return Polynomial(tuple(float(v) for v in coeffs))
    if cls is Weibull:
        return Weibull(*[float(v) for v in coeffs])
    if cls is Weibull2:
        return Weibull2(float(coeffs[0]), float(coeffs[1]))
    if cls is Parabola:
        return Parabola(float(coeffs[0]))
    if cls is ScaledExponential:
        return ScaledExponential(float(coeffs[0]), float(coeffs[1]))
    raise InvalidParamsError(f"cannot rebuild family {cls!r}")


def params_to_json(params):
    """Serialize with shortest round-trip float text (decimal-exact)."""
    return json.dumps(params_to_dict(params))


def params_from_json(text):
    return params_from_dict(json.loads(text))
