"""Family selection by segment-wise area between sample and reference curves.

Each channel is tiled into fixed-size segments (default 20 points). Per
segment, every candidate family contributes a reference curve; the
discrete Riemann sum of the absolute gap |f - g| accumulates into a
per-family total, and families rank ascending by that total.

Reference-curve construction per segment works on the segment's abscissa
rescaled to [0, 1], which keeps the fixed forms on a sane scale:

* ``sinusoidal``   single-term sum-of-sines, fitted
* ``parabolic``    y = 2*sqrt(a*x), scale a fitted in closed form
* ``exponential``  literal y = e^x (its equation has nothing to fit)
* any model family tag: fitted per segment with a one-term guess

Absolute differences are used because real channels cross the reference
curves and signed areas would cancel. The first point of a segment has no
left neighbor, so its rectangle takes the following gap; all widths come
from the segment's own (unnormalized) abscissa.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import models, solver
from .errors import (
    InvalidParamsError,
    LengthMismatchError,
    SegmentTooSmallError,
    SingularNormalMatrixError,
)

log = logging.getLogger(__name__)

DEFAULT_SEGMENT_SIZE = 20

TABLE_CANDIDATES = ("sinusoidal", "exponential", "parabolic")

EQUATION_LABELS = {
    "sinusoidal": "y = sin x",
    "exponential": "y = e^x",
    "parabolic": "y^2 = 4ax",
    "sum-of-sines": "y = sum A_i sin(B_i x + C_i)",
    "fourier": "y = a0 + sum a_i cos(i w x) + b_i sin(i w x)",
    "polynomial": "y = a_1 x^k + ... + a_k x + a_{k+1}",
    "weibull": "Weibull density",
    "scaled-exponential": "y = p e^{q x}",
    "sine": "y = sin x",
}


@dataclass(frozen=True)
class Segment:
    segment_index: int
    abscissa: np.ndarray
    ordinate: np.ndarray

    @property
    def length(self):
        return len(self.ordinate)

    def unit_abscissa(self):
        x = self.abscissa
        return (x - x[0]) / (x[-1] - x[0])


@dataclass(frozen=True)
class AreaReport:
    family: str
    per_segment: tuple
    total: float


def segment(series, segment_size=DEFAULT_SEGMENT_SIZE):
    """Tile a series into ordered segments of ``segment_size`` points.

    All segments except possibly the last have exactly ``segment_size``
    points; a single trailing orphan point is merged into the final
    segment so every segment keeps at least 2 points. Concatenating the
    segments reproduces the series.
    """
    if segment_size < 2:
        raise SegmentTooSmallError(f"segment size {segment_size} < 2")
    n = len(series.ordinate)
    if n < 2:
        raise SegmentTooSmallError("series shorter than 2 points")
    x = np.asarray(series.abscissa, dtype=float)
    y = np.asarray(series.ordinate, dtype=float)
    bounds = list(range(0, n, segment_size)) + [n]
    if bounds[-1] - bounds[-2] == 1:  # orphan point joins the last full segment
        bounds.pop(-2)
    return [
        Segment(i, x[lo:hi], y[lo:hi])
        for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:]))
    ]


def area_between(seg, f_values, g_values):
    """Discrete Riemann sum of |f - g| over one segment.

    Widths are consecutive abscissa gaps; the first point uses the
    following gap so every point owns a rectangle.
    """
    f = np.asarray(f_values, dtype=float)
    g = np.asarray(g_values, dtype=float)
    if len(f) != seg.length or len(g) != seg.length:
        raise LengthMismatchError("curve values must align with the segment")
    widths = np.empty(seg.length)
    widths[1:] = np.diff(seg.abscissa)
    widths[0] = widths[1] if seg.length > 1 else 0.0
    return float(np.abs(f - g) @ widths)


_SEGMENT_FIT_CONFIG = solver.SolverConfig(max_iterations=100)


def _fit_segment_sine(u, y):
    series = _MiniSeries(u, y)
    if len(y) >= 6:
        guess = models.initial_guess("sum-of-sines", series, 1)
    else:
        guess = _level_sine(y)
    if len(y) >= guess.n_params:
        try:
            return solver.fit(solver.FitProblem(series, guess), _SEGMENT_FIT_CONFIG).params
        except SingularNormalMatrixError:
            pass
    return guess


def _level_sine(y):
    return models.SumOfSines(((float(np.mean(y)), 1e-3, np.pi / 2.0),))


@dataclass(frozen=True)
class _MiniSeries:
    abscissa: np.ndarray
    ordinate: np.ndarray


def reference_curve(candidate, seg, exponential_mode="fixed"):
    """Candidate curve values on one segment's unit abscissa."""
    u = seg.unit_abscissa()
    y = seg.ordinate
    if candidate == "sinusoidal":
        return models.evaluate(_fit_segment_sine(u, y), u)
    if candidate == "parabolic":
        return models.evaluate(models.fit_parabola_scale(u, y), u)
    if candidate == "exponential":
        if exponential_mode == "fitted":
            return models.evaluate(_fit_generic(u, y, "scaled-exponential"), u)
        return np.exp(u)
    if candidate == "sine":
        return np.sin(u)
    if candidate in models.FAMILIES:
        return models.evaluate(_fit_generic(u, y, candidate), u)
    raise InvalidParamsError(f"unknown candidate {candidate!r}")


def _fit_generic(u, y, family):
    series = _MiniSeries(u, y)
    guess = models.initial_guess(family, series, 1)
    if guess.n_params == 0 or len(y) < guess.n_params:
        return guess
    return solver.fit(solver.FitProblem(series, guess), _SEGMENT_FIT_CONFIG).params


def rank_families(
    series,
    candidates=TABLE_CANDIDATES,
    segment_size=DEFAULT_SEGMENT_SIZE,
    exponential_mode="fixed",
):
    """Rank candidate families ascending by total area between curves.

    A candidate whose per-segment fit fails is excluded with a warning;
    the ranking never fails as a whole. Smallest total wins.
    """
    if not candidates:
        raise InvalidParamsError("need at least one candidate family")
    segments = segment(series, segment_size)
    results = []
    for candidate in candidates:
        per_segment = []
        try:
            for seg in segments:
                g = reference_curve(candidate, seg, exponential_mode)
                per_segment.append(area_between(seg, seg.ordinate, g))
        except Exception as exc:  # noqa: BLE001 - candidate exclusion is the contract
            log.warning("candidate %r excluded: %s: %s", candidate, type(exc).__name__, exc)
            continue
        results.append((candidate, AreaReport(candidate, tuple(per_segment), sum(per_segment))))
    results.sort(key=lambda item: item[1].total)
    return results


RANKING_CSV_HEADER = "family,equation,total_area"


def ranking_csv(rankings):
    """CSV mirroring the family/equation/area layout, ascending by area."""
    lines = [RANKING_CSV_HEADER]
    for family, report in rankings:
        label = EQUATION_LABELS.get(family, family)
        lines.append(f'{family},"{label}",{report.total:.17g}')
    return "\n".join(lines) + "\n"
