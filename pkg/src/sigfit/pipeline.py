"""Batch preprocessing: every channel of every sample into one fixed-length
coefficient vector.

Non-timestamp channels are fitted with an ``n_terms`` sum-of-sines (default
11 terms, 33 coefficients); the timestamp channel uses a low-degree
polynomial whose coefficients sit at the front of an equally wide,
zero-padded block. With the default 7 channels the vector is 7 x 33 = 231
coefficients, identical for every sample regardless of its point count.

The alternative ``per_segment_fit`` mode splits each channel into a fixed
number of near-equal parts (default 11) and fits a single-term sinusoid
per part, again 3 coefficients each, so the vector length is preserved at
the default settings. The part count is fixed rather than the part size
because a fixed size would make the vector length depend on the sample.

A failed channel fit emits a zero block plus an error flag in the batch
report; one bad channel never aborts a sample, and one bad sample never
aborts a batch.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import gof, models, solver
from .errors import NonFiniteValueError, SigfitError
from .ingest import extract_channel, N_CHANNELS, _user_sort_key
from .solver import SolverConfig


@dataclass(frozen=True)
class PipelineConfig:
    n_terms: int = 11
    timestamp_channel: int | None = 3
    timestamp_family: str = "polynomial"
    timestamp_degree: int = 1
    segment_size: int = 20
    channels: tuple = tuple(range(1, N_CHANNELS + 1))
    solver: SolverConfig = field(default_factory=SolverConfig)
    abscissa: str = "index"
    per_segment_fit: bool = False
    n_segments: int = 11

    def validate(self):
        if self.n_terms < 1:
            raise SigfitError("n_terms must be >= 1")
        if self.timestamp_channel is not None and self.timestamp_channel not in self.channels:
            raise SigfitError("timestamp_channel must be one of channels, or None")
        if self.per_segment_fit and self.n_segments < 1:
            raise SigfitError("n_segments must be >= 1")

    @property
    def block_width(self):
        return 3 * (self.n_segments if self.per_segment_fit else self.n_terms)

    @property
    def vector_length(self):
        return len(self.channels) * self.block_width

    def layout(self):
        """Per-channel (channel, family, width) tuples; frozen for a run."""
        mode = "segmented-" if self.per_segment_fit else ""
        out = []
        for c in self.channels:
            family = (
                self.timestamp_family
                if (not self.per_segment_fit and c == self.timestamp_channel)
                else "sum-of-sines"
            )
            out.append((c, mode + family, self.block_width))
        return tuple(out)


@dataclass(frozen=True)
class ChannelFit:
    channel: int
    family: str
    termination: str
    r_squared: float
    rmse: float
    iterations: int
    error: str | None = None

    def to_dict(self):
        return {
            "channel": self.channel,
            "family": self.family,
            "termination": self.termination,
            "r_squared": None if np.isnan(self.r_squared) else self.r_squared,
            "rmse": None if np.isnan(self.rmse) else self.rmse,
            "iterations": self.iterations,
            "error": self.error,
        }


@dataclass(frozen=True)
class FeatureVector:
    user_id: str
    sample_index: int
    label: str
    blocks: tuple  # one float array per channel, each block_width long
    layout: tuple  # (channel, family, width) per block
    channel_fits: tuple = ()

    @property
    def values(self):
        return np.concatenate(self.blocks) if self.blocks else np.zeros(0)

    def __len__(self):
        return sum(len(b) for b in self.blocks)


def _rescaled_guess(guess):
    # documented single retry: halve amplitudes to pull evaluation back to range
    vec = guess.param_vector()
    if isinstance(guess, models.SumOfSines):
        vec = vec.copy()
        vec[0::3] *= 0.5
    else:
        vec = 0.5 * vec
    return guess.with_vector(vec)


def _fit_channel(series, family, n_terms, config):
    guess = models.initial_guess(family, series, n_terms)
    try:
        return solver.fit(solver.FitProblem(series, guess), config)
    except NonFiniteValueError:
        return solver.fit(solver.FitProblem(series, _rescaled_guess(guess)), config)


def _gof_safe(series, params):
    try:
        report = gof.gof_report(series, params)
        return report.r_squared, report.rmse
    except SigfitError:
        return np.nan, np.nan


def _whole_channel_block(series, channel, config):
    timestamp = channel == config.timestamp_channel
    family = config.timestamp_family if timestamp else "sum-of-sines"
    n_terms = config.timestamp_degree if timestamp else config.n_terms
    result = _fit_channel(series, family, n_terms, config.solver)
    params = models.canonicalize(result.params)
    coeffs = params.param_vector()
    block = np.zeros(config.block_width)
    block[: len(coeffs)] = coeffs
    r2, rmse = _gof_safe(series, params)
    info = ChannelFit(channel, family, result.termination, r2, rmse, result.iterations)
    return block, info


def _segmented_block(series, channel, config):
    x = np.asarray(series.abscissa, dtype=float)
    y = np.asarray(series.ordinate, dtype=float)
    parts = np.array_split(np.arange(len(y)), config.n_segments)
    coeffs = []
    predictions = np.empty_like(y)
    iterations = 0
    termination = solver.CONVERGED
    timestamp = channel == config.timestamp_channel
    for idx in parts:
        if len(idx) < 2:
            raise SigfitError(
                f"{len(y)} points cannot be split into {config.n_segments} parts of >= 2"
            )
        u = x[idx]
        u = (u - u[0]) / (u[-1] - u[0])
        part = _PartSeries(u, y[idx])
        if timestamp:
            result = _fit_channel(part, config.timestamp_family, 1, config.solver)
            vec = result.params.param_vector()
            part_coeffs = np.zeros(3)
            part_coeffs[: len(vec)] = vec
        else:
            result = _fit_channel(part, "sum-of-sines", 1, config.solver)
            part_coeffs = models.canonicalize(result.params).param_vector()
        coeffs.append(part_coeffs)
        predictions[idx] = models.evaluate(result.params, u)
        iterations += result.iterations
        if result.termination != solver.CONVERGED:
            termination = result.termination
    block = np.concatenate(coeffs)
    r2, rmse = _stitched_gof(y, predictions, 3 * config.n_segments)
    family = ("segmented-" + config.timestamp_family) if timestamp else "segmented-sum-of-sines"
    info = ChannelFit(channel, family, termination, r2, rmse, iterations)
    return block, info


@dataclass(frozen=True)
class _PartSeries:
    abscissa: np.ndarray
    ordinate: np.ndarray


def _stitched_gof(y, pred, n_params):
    resid = y - pred
    sse = float(resid @ resid)
    centered = y - np.mean(y)
    sst = float(centered @ centered)
    dof = len(y) - n_params
    rmse = float(np.sqrt(sse / dof)) if dof > 0 else np.nan
    r2 = 1.0 - sse / sst if sst > 0 else np.nan
    return r2, rmse


def preprocess_sample(sample, config=None):
    """Fit every configured channel and pack coefficients per the layout."""
    config = config or PipelineConfig()
    config.validate()
    blocks = []
    infos = []
    for channel in config.channels:
        series = extract_channel(sample, channel, config.abscissa)
        try:
            if config.per_segment_fit:
                block, info = _segmented_block(series, channel, config)
            else:
                block, info = _whole_channel_block(series, channel, config)
        except SigfitError as exc:
            block = np.zeros(config.block_width)
            info = ChannelFit(
                channel,
                "sum-of-sines",
                "failed",
                np.nan,
                np.nan,
                0,
                error=f"{type(exc).__name__}: {exc}",
            )
        blocks.append(block)
        infos.append(info)
    return FeatureVector(
        sample.user_id,
        sample.sample_index,
        sample.label,
        tuple(blocks),
        config.layout(),
        tuple(infos),
    )


@dataclass
class BatchResult:
    vectors: list
    report: dict


def _preprocess_star(args):
    sample, config = args
    return preprocess_sample(sample, config)


def uniformize_dataset(samples, config=None, jobs=1):
    """One vector per sample, identical length and layout across the run.

    Per-sample failures land in the report, never abort the batch. Output
    order is deterministic: sorted by (user_id, sample_index).
    """
    config = config or PipelineConfig()
    config.validate()
    samples = sorted(samples, key=lambda s: (_user_sort_key(s.user_id), s.sample_index))
    if jobs > 1 and len(samples) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            vectors = list(pool.map(_preprocess_star, ((s, config) for s in samples), chunksize=4))
    else:
        vectors = [preprocess_sample(s, config) for s in samples]
    entries = []
    for vec in vectors:
        failed = [cf for cf in vec.channel_fits if cf.error]
        entries.append(
            {
                "user_id": vec.user_id,
                "sample_index": vec.sample_index,
                "label": vec.label,
                "channels": [cf.to_dict() for cf in vec.channel_fits],
                "failed_channels": [cf.channel for cf in failed],
            }
        )
    report = {
        "n_samples": len(samples),
        "n_vectors": len(vectors),
        "vector_length": config.vector_length,
        "samples": entries,
    }
    return BatchResult(vectors, report)


@dataclass(frozen=True)
class ProbeResult:
    timings: tuple  # (size, median seconds) pairs
    slope: float | None  # log-log least squares slope, None for a single size


def runtime_scaling_probe(sizes, config=None, repeats=5, max_iterations=12, seed=7):
    """Median wall time of a capped-iteration fit at each series size.

    Synthetic multi-tone channels keep every run busy for the full
    iteration cap so the probe reflects per-iteration cost. The log-log
    slope estimates the scaling exponent (1.0 = linear in series length).
    """
    base = (config or PipelineConfig()).solver
    probe_config = replace(
        base, max_iterations=max_iterations, chi2_abs_tol=1e-300, chi2_rel_tol=1e-300
    )
    rng = np.random.default_rng(seed)
    timings = []
    for size in sizes:
        x = np.arange(size, dtype=float)
        y = (
            4000.0
            + 900.0 * np.sin(0.021 * x + 0.3)
            + 350.0 * np.sin(0.143 * x + 1.1)
            + 180.0 * np.sin(0.31 * x + 2.0)
            + rng.normal(0.0, 20.0, size)
        )
        series = _PartSeries(x, y)
        guess = models.initial_guess("sum-of-sines", series, 11)
        problem = solver.FitProblem(series, guess)
        solver.fit(problem, probe_config)  # warmup: JIT and caches
        reps = []
        for _ in range(max(repeats, 1)):
            t0 = time.perf_counter()
            solver.fit(problem, probe_config)
            reps.append(time.perf_counter() - t0)
        timings.append((int(size), float(np.median(reps))))
    distinct = sorted({s for s, _ in timings})
    if len(distinct) < 2:
        return ProbeResult(tuple(timings), None)
    logs = np.log([s for s, _ in timings])
    logt = np.log([t for _, t in timings])
    slope = float(np.polyfit(logs, logt, 1)[0])
    return ProbeResult(tuple(timings), slope)


def vectors_csv_header(config):
    cols = ["user_id", "sample_index", "label"]
    for channel, family, width in config.layout():
        cols.extend(f"ch{channel}_c{j + 1:02d}" for j in range(width))
    return ",".join(cols)


def vectors_to_csv(vectors, config):
    """CSV with 17-significant-digit coefficients; one row per sample."""
    lines = [vectors_csv_header(config)]
    for vec in vectors:
        cells = [vec.user_id, str(vec.sample_index), vec.label]
        cells.extend(f"{v:.17g}" for v in vec.values)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def vectors_to_json(vectors):
    """Structured block form of the same vectors."""
    return [
        {
            "user_id": vec.user_id,
            "sample_index": vec.sample_index,
            "label": vec.label,
            "blocks": [
                {"channel": layout[0], "family": layout[1], "coefficients": [float(v) for v in block]}
                for layout, block in zip(vec.layout, vec.blocks)
            ],
        }
        for vec in vectors
    ]
