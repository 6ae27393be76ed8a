"""Goodness-of-fit statistics: SSE, R-squared, adjusted R-squared, RMSE.

RMSE uses the degrees-of-freedom denominator sqrt(SSE / (N - P)), the
curve-fitting-toolbox convention, so SSE / RMSE^2 == N - P holds exactly
on every report. R-squared may be negative (a fit worse than the mean);
constant data makes it undefined, which is reported as a flag rather than
an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .errors import LengthMismatchError, TooFewPointsError


@dataclass(frozen=True)
class GofReport:
    sse: float
    r_squared: float
    adjusted_r_squared: float
    rmse: float
    n_points: int
    n_params: int
    degenerate_variance: bool = False  # SST == 0: R-squared undefined


def gof_report(series, params):
    """Statistics of one fitted parameter set against its series."""
    y = np.asarray(series.ordinate, dtype=float)
    f = models.evaluate(params, series.abscissa)
    if len(f) != len(y):
        raise LengthMismatchError("model values and ordinate lengths differ")
    n = len(y)
    p = params.n_params
    if n <= p:
        raise TooFewPointsError(f"need more points ({n}) than parameters ({p})")
    resid = y - f
    sse = float(resid @ resid)
    centered = y - np.mean(y)
    sst = float(centered @ centered)
    rmse = float(np.sqrt(sse / (n - p)))
    if sst == 0.0:
        return GofReport(sse, np.nan, np.nan, rmse, n, p, degenerate_variance=True)
    r2 = 1.0 - sse / sst
    if n - p - 1 > 0:
        adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)
    else:
        adj = np.nan
    return GofReport(sse, r2, adj, rmse, n, p)


GOF_CSV_HEADER = "family,algorithm,sse,r_squared,adjusted_r_squared,rmse"


def gof_csv_row(family, algorithm, report):
    """One CSV row in the family/algorithm/SSE/R2/adjR2/RMSE layout."""
    values = (report.sse, report.r_squared, report.adjusted_r_squared, report.rmse)
    return f"{family},{algorithm}," + ",".join(f"{v:.17g}" for v in values)
