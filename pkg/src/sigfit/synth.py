"""Deterministic generator of SVC2004-format pen-capture samples.

Produces signature-like multi-channel series for development, tests and
benchmarks when no real capture data is on disk: coordinate channels are a
level plus a few sinusoidal strokes with drift and sensor noise,
timestamps tick at a fixed device interval, the button channel carries a
handful of pen-up gaps, and angle/pressure channels move slowly. Genuine
samples of one user share a latent template with small jitter; forgeries
perturb the same template much harder, mimicking a skilled forger who
reproduces shape but not dynamics.

Everything derives from ``numpy.random.SeedSequence`` spawned per (seed,
user, sample), so a given seed always yields byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import FORGED, GENUINE, SignatureSample

DEFAULT_SEED = 20040501
DEVICE_TICK_MS = 10


@dataclass(frozen=True)
class _Tone:
    amp: float
    freq: float
    phase: float


def _tones(rng, n, amp_range, freq_range):
    freqs = rng.uniform(*freq_range, size=n)
    return tuple(
        _Tone(rng.uniform(*amp_range), f, rng.uniform(0, 2 * np.pi)) for f in freqs
    )


@dataclass(frozen=True)
class _CoordTemplate:
    level: float
    tones: tuple


def _separated_frequencies(rng, n, lo=0.035, spacing=0.093, jitter=0.008):
    """n angular frequencies on a jittered lattice, coarse strokes first.

    Guaranteed pairwise separation of ``spacing - jitter``: tones closer
    than a couple of DFT bins at the shortest sample lengths are not
    resolvable and would not appear in real pen strokes anyway.
    """
    return [float(lo + i * spacing + rng.uniform(0.0, jitter)) for i in range(n)]


def _coord_template(rng):
    """Stroke-like trajectory: one big slow sweep plus decaying harmonics.

    Ten separated tones, so a pen trace is rich but still representable by
    an eleven-term periodic model. Swing is large relative to the level,
    as on a real tablet where the pen crosses most of the surface.
    """
    freqs = _separated_frequencies(rng, 10)
    amp0 = rng.uniform(1100, 1900)
    tones = tuple(
        _Tone(amp0 * (j + 1) ** -0.75 * rng.uniform(0.7, 1.3), f, rng.uniform(0, 2 * np.pi))
        for j, f in enumerate(freqs)
    )
    swing = np.sqrt(0.5 * sum(t.amp**2 for t in tones))
    return _CoordTemplate(
        level=swing * rng.uniform(1.4, 2.2),
        tones=tones,
    )


def _angle_template(rng, level_range, amp0_range):
    """Orientation channels: slow posture drift plus stroke-rate tremor."""
    freqs = _separated_frequencies(rng, 10)
    amp0 = rng.uniform(*amp0_range)
    tones = tuple(
        _Tone(amp0 * (j + 1) ** -0.9 * rng.uniform(0.6, 1.4), f, rng.uniform(0, 2 * np.pi))
        for j, f in enumerate(freqs)
    )
    return _CoordTemplate(level=rng.uniform(*level_range), tones=tones)


@dataclass(frozen=True)
class UserTemplate:
    user_id: str
    x: _CoordTemplate
    y: _CoordTemplate
    azimuth: _CoordTemplate
    altitude: _CoordTemplate
    pressure_peak: float
    pressure_tone: _Tone
    n_points: int


def make_user_template(user_id, rng):
    return UserTemplate(
        user_id=user_id,
        x=_coord_template(rng),
        y=_coord_template(rng),
        azimuth=_angle_template(rng, (900, 1900), (40, 160)),
        altitude=_angle_template(rng, (400, 800), (20, 90)),
        pressure_peak=rng.uniform(350, 900),
        pressure_tone=_Tone(rng.uniform(20, 80), rng.uniform(0.05, 0.25), rng.uniform(0, 2 * np.pi)),
        n_points=int(rng.integers(210, 290)),
    )


def _jitter_coord(tpl, rng, forged):
    if forged:
        level = tpl.level + rng.uniform(-500, 500)
        scale = lambda: rng.uniform(0.55, 1.45)  # noqa: E731
        fscale = lambda: rng.uniform(0.96, 1.04)  # noqa: E731
        dphase = lambda: rng.uniform(-0.7, 0.7)  # noqa: E731
    else:
        level = tpl.level + rng.uniform(-50, 50)
        scale = lambda: rng.uniform(0.93, 1.07)  # noqa: E731
        fscale = lambda: rng.uniform(0.99, 1.01)  # noqa: E731
        dphase = lambda: rng.uniform(-0.12, 0.12)  # noqa: E731
    tones = [
        _Tone(t.amp * scale(), t.freq * fscale(), t.phase + dphase()) for t in tpl.tones
    ]
    return level, tones


def _coord_series(tpl, idx, rng, forged, noise_sd=20.0):
    level, tones = _jitter_coord(tpl, rng, forged)
    y = np.full(idx.size, level)
    for t in tones:
        y = y + t.amp * np.sin(t.freq * idx + t.phase)
    return y + rng.normal(0, noise_sd, idx.size)


def _button_series(n, rng):
    b = np.ones(n, dtype=np.int64)
    for _ in range(int(rng.integers(2, 5))):
        start = int(rng.integers(5, max(n - 8, 6)))
        b[start : start + int(rng.integers(2, 7))] = 0
    return b


def make_sample(template, sample_index, rng, forged=False, n_points=None):
    """One capture from a user template; genuine jitter or forger error."""
    if n_points is None:
        n_points = template.n_points + int(rng.integers(-15, 16))
    n = max(int(n_points), 16)
    idx = np.arange(n, dtype=float)
    x = _coord_series(template.x, idx, rng, forged)
    y = _coord_series(template.y, idx, rng, forged)
    t0 = 75_000_000 + int(rng.integers(0, 5_000_000))
    ticks = np.full(n, DEVICE_TICK_MS, dtype=np.int64)
    ticks[rng.random(n) < 0.02] += DEVICE_TICK_MS  # occasional dropped frame
    ticks[0] = 0
    timestamps = t0 + np.cumsum(ticks)
    button = _button_series(n, rng)
    az = _coord_series(template.azimuth, idx, rng, forged, noise_sd=6.0)
    alt = _coord_series(template.altitude, idx, rng, forged, noise_sd=5.0)
    envelope = np.sin(np.pi * (idx + 1) / (n + 1)) ** 0.5
    pressure = template.pressure_peak * envelope + template.pressure_tone.amp * np.sin(
        template.pressure_tone.freq * idx + template.pressure_tone.phase
    )
    pressure = pressure * button + rng.normal(0, 4, n)
    data = np.column_stack(
        [
            np.rint(x),
            np.rint(y),
            timestamps,
            button,
            np.rint(np.maximum(az, 0)),
            np.rint(np.maximum(alt, 0)),
            np.rint(np.maximum(pressure, 0)),
        ]
    ).astype(np.int64)
    label = FORGED if forged else GENUINE
    return SignatureSample(template.user_id, sample_index, label, data)


def generate_samples(n_users=12, seed=DEFAULT_SEED, genuine=20, forged=20, table_variety=True):
    """In-memory dataset: ``genuine`` + ``forged`` samples per user.

    With ``table_variety`` the first user's first two genuine samples are
    pinned at 500 and 270 points so batches always contain markedly
    different lengths.
    """
    samples = []
    for u in range(1, n_users + 1):
        user_id = str(u)
        user_rng = np.random.default_rng(np.random.SeedSequence([seed, u, 0]))
        template = make_user_template(user_id, user_rng)
        for s in range(1, genuine + forged + 1):
            rng = np.random.default_rng(np.random.SeedSequence([seed, u, s]))
            is_forged = s > genuine
            n_points = None
            if table_variety and u == 1 and s == 1:
                n_points = 500
            elif table_variety and u == 1 and s == 2:
                n_points = 270
            samples.append(make_sample(template, s, rng, is_forged, n_points))
    return samples


def write_dataset(root, n_users=12, seed=DEFAULT_SEED, genuine=20, forged=20, table_variety=True):
    """Write U<user>S<sample>.TXT files; returns the list of paths."""
    from .ingest import serialize_sample

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for sample in generate_samples(n_users, seed, genuine, forged, table_variety):
        path = root / f"U{sample.user_id}S{sample.sample_index}.TXT"
        path.write_text(serialize_sample(sample))
        paths.append(path)
    return paths
