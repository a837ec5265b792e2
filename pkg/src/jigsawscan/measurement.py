"""Flat-brush scanning: every image column is measured by the same basis.

Noise is drawn from a per-column stream seeded by ``SeedSequence([seed,
column, channel])`` (PCG64, numpy's ``Generator.normal``).  Channel 0 is
the signed acquisition; channels 1 and 2 are the positive and negative
halves of a differential acquisition.  Because every column owns its
stream, results do not depend on the order columns are evaluated in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .patterns import BasisSplit, SensingBasis, check_mode


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian noise on measured values.

    With ``relative=True`` the variance is a fraction of the measured-signal
    power per sample, ``Var(c) / N`` over all noiseless measured values, so
    a given setting means the same per-pixel signal-to-noise in both modes.
    """

    variance: float = 0.0
    seed: int = 0
    relative: bool = False

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("noise seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measured vectors, one per image column, stored as an M x count array."""

    columns: np.ndarray
    N: int
    ordering: str
    mode: str
    variance: float
    seed: int

    @property
    def M(self) -> int:
        return self.columns.shape[0]

    @property
    def count(self) -> int:
        return self.columns.shape[1]


def column_stream(seed: int, column: int, channel: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, column, channel]))


def add_gaussian_noise(vector: np.ndarray, variance: float, stream: np.random.Generator) -> np.ndarray:
    if variance < 0:
        raise ValueError(f"noise variance must be >= 0, got {variance}")
    vector = np.asarray(vector, dtype=float)
    if variance == 0:
        return vector.copy()
    return vector + stream.normal(0.0, np.sqrt(variance), size=vector.shape)


def effective_variance(clean: np.ndarray, noise: NoiseConfig) -> float:
    """Absolute variance for ``noise`` given the noiseless measurements."""
    if not noise.relative or noise.variance == 0:
        return float(noise.variance)
    n = clean.shape[0]
    return float(noise.variance * np.var(clean) / n)


def _noisy(clean: np.ndarray, variance: float, seed: int, channel: int) -> np.ndarray:
    if variance == 0:
        return clean
    out = np.empty_like(clean)
    for i in range(clean.shape[1]):
        out[:, i] = add_gaussian_noise(clean[:, i], variance, column_stream(seed, i, channel))
    return out


def _check_height(image: np.ndarray, n: int) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("measured image must be 2-D")
    if image.shape[0] != n:
        raise ValueError(f"basis signal length {n} does not match image height {image.shape[0]}")
    return image


def measure_columns(
    image: np.ndarray, basis: SensingBasis, noise: NoiseConfig = NoiseConfig(), mode: str = "col"
) -> MeasurementSet:
    """``c_i = basis @ image[:, i] + e_i`` for every column ``i``."""
    check_mode(mode)
    image = _check_height(image, basis.N)
    clean = basis.matrix.astype(float) @ image
    variance = effective_variance(clean, noise)
    cols = _noisy(clean, variance, noise.seed, 0)
    return MeasurementSet(cols, basis.N, basis.ordering, mode, variance, noise.seed)


def measure_differential(
    image: np.ndarray,
    split: BasisSplit,
    noise: NoiseConfig = NoiseConfig(),
    mode: str = "col",
    ordering: str = "natural",
) -> MeasurementSet:
    """Measure with the positive and negative binary halves, return their difference.

    The two halves get independent noise draws, so the differential noise
    variance is twice the per-acquisition variance.
    """
    check_mode(mode)
    pos = split.positive.astype(float)
    neg = split.negative.astype(float)
    image = _check_height(image, pos.shape[1])
    c_pos = pos @ image
    c_neg = neg @ image
    variance = effective_variance(c_pos - c_neg, noise)
    diff = _noisy(c_pos, variance, noise.seed, 1) - _noisy(c_neg, variance, noise.seed, 2)
    return MeasurementSet(diff, pos.shape[1], ordering, mode, variance, noise.seed)
