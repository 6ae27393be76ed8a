"""sigfit: fixed-length coefficient vectors from variable-length pen-capture
time series, via chi-square curve fitting with model-family selection and a
verification-quality harness."""

from ._kernels import BACKEND
from .errors import SigfitError
from .gof import GofReport, gof_report
from .ingest import (
    ChannelSeries,
    SignaturePoint,
    SignatureSample,
    extract_channel,
    load_dataset,
    parse_sample,
)
from .models import FAMILIES, evaluate, initial_guess, jacobian
from .pipeline import (
    FeatureVector,
    PipelineConfig,
    preprocess_sample,
    runtime_scaling_probe,
    uniformize_dataset,
)
from .selection import AreaReport, Segment, area_between, rank_families, segment
from .solver import (
    FitProblem,
    FitResult,
    SolverConfig,
    chi_square,
    chi_square_gradient,
    fit,
    fit_series,
    lm_step,
)
from .verify import Protocol, compare_preprocessors, roc_and_eer, score_trials

__version__ = "0.1.0"

__all__ = [
    "AreaReport",
    "BACKEND",
    "ChannelSeries",
    "FAMILIES",
    "FeatureVector",
    "FitProblem",
    "FitResult",
    "GofReport",
    "PipelineConfig",
    "Protocol",
    "Segment",
    "SigfitError",
    "SignaturePoint",
    "SignatureSample",
    "SolverConfig",
    "__version__",
    "area_between",
    "chi_square",
    "chi_square_gradient",
    "compare_preprocessors",
    "evaluate",
    "extract_channel",
    "fit",
    "fit_series",
    "gof_report",
    "initial_guess",
    "jacobian",
    "lm_step",
    "load_dataset",
    "parse_sample",
    "preprocess_sample",
    "rank_families",
    "roc_and_eer",
    "runtime_scaling_probe",
    "score_trials",
    "segment",
    "uniformize_dataset",
]
