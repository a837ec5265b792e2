"""Image-quality metrics and parameter sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .measurement import NoiseConfig
from .pipeline import PipelineConfig, run_pipeline
from .scene import Scene

TWO_PI = 2 * np.pi
PEAK = 255.0
# MSE below this (8-bit units squared) is floating-point residue, not error
EXACT_MSE = 1e-18
CSV_HEADER = (
    "mode",
    "method",
    "ratio",
    "noise_variance",
    "seed",
    "subject",
    "mse",
    "psnr_db",
    "masked_pixels",
)


def normalize_u8(values: np.ndarray) -> np.ndarray:
    """Affine map of [min, max] onto [0, 255] without rounding.

    A constant map has no range to stretch and maps to zeros.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot normalize a map with non-finite values")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) * (PEAK / (hi - lo))


def phase_to_u8(phase: np.ndarray) -> np.ndarray:
    """Fixed scaling of the phase range [0, 2*pi) onto [0, 255]."""
    return np.asarray(phase, dtype=float) * (PEAK / TWO_PI)


def reflectivity_to_u8(values: np.ndarray, scale: str = "range") -> np.ndarray:
    """Reflectivity on the 8-bit scale.

    ``range`` maps the physical range [0, 1] onto [0, 255], like the phase
    maps.  ``minmax`` stretches each map on its own (:func:`normalize_u8`);
    that rewards reconstructions whose contrast has collapsed, so it is not
    the default.
    """
    if scale == "range":
        return np.asarray(values, dtype=float) * PEAK
    if scale == "minmax":
        return normalize_u8(values)
    raise ValueError(f"reflectivity scale must be 'range' or 'minmax', got {scale!r}")


@dataclass(frozen=True)
class PsnrReport:
    psnr: float
    mse: float
    p: int
    q: int
    pixels: int
    masked_pixels: int = 0
    subject: str = ""
    mode: str = ""
    method: str = ""
    sampling_ratio: float = 1.0
    noise_variance: float = 0.0
    seed: int = 0

    @property
    def infinite(self) -> bool:
        return self.mse == 0

    def csv_row(self) -> list[str]:
        return [
            self.mode,
            self.method,
            repr(float(self.sampling_ratio)),
            repr(float(self.noise_variance)),
            str(self.seed),
            self.subject,
            repr(float(self.mse)),
            "inf" if self.infinite else repr(float(self.psnr)),
            str(self.masked_pixels),
        ]


def psnr(reference: np.ndarray, test: np.ndarray, mask: np.ndarray | None = None, **tags) -> PsnrReport:
    """Peak signal-to-noise ratio of two maps already scaled to [0, 255].

    ``mask`` marks pixels to include; excluded pixels are counted in
    ``masked_pixels`` and do not enter the mean.
    """
    reference = np.asarray(reference, dtype=float)
    test = np.asarray(test, dtype=float)
    if reference.shape != test.shape:
        raise ValueError(f"PSNR needs equal dimensions, got {reference.shape} and {test.shape}")
    keep = np.ones(reference.shape, bool) if mask is None else np.asarray(mask, bool)
    n = int(keep.sum())
    if n == 0:
        raise ValueError("PSNR mask excludes every pixel")
    err = (test - reference)[keep]
    mse = float(np.mean(err**2))
    if mse < EXACT_MSE:
        mse = 0.0
    value = np.inf if mse == 0 else 10 * np.log10(PEAK**2 / mse)
    p, q = reference.shape
    return PsnrReport(value, mse, p, q, n, reference.size - n, **tags)


def quality_reports(
    true_reflectivity, true_phase, reflectivity, phase, valid, scale: str = "range", **tags
) -> tuple[PsnrReport, PsnrReport]:
    """PSNR of recovered phase and reflectivity against ground truth."""
    rp = psnr(phase_to_u8(true_phase), phase_to_u8(phase), valid, subject="phase", **tags)
    rr = psnr(
        reflectivity_to_u8(true_reflectivity, scale),
        reflectivity_to_u8(reflectivity, scale),
        valid,
        subject="reflectivity",
        **tags,
    )
    return rp, rr


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def sweep(
    scene: Scene,
    modes,
    ratios,
    variances,
    seeds,
    cfg: PipelineConfig = PipelineConfig(),
    relative: bool = False,
    scale: str = "range",
) -> tuple[str, list[PsnrReport]]:
    """Run the full pipeline over a grid and report PSNR per cell and subject.

    Variances are absolute, or fractions of the measured-signal power per
    sample when ``relative`` is set; the CSV records them as given.
    """
    if scene.channels != 1:
        raise ValueError("sweeps run on gray scenes")
    for r in ratios:
        if not 0 < r <= 1:
            raise ValueError(f"sampling ratio must be in (0, 1], got {r}")
    for v in variances:
        if v < 0:
            raise ValueError(f"noise variance must be >= 0, got {v}")
    reports = []
    for mode in sorted(set(modes)):
        for ratio in sorted(set(ratios)):
            for var in sorted(set(variances)):
                for seed in sorted(set(seeds)):
                    cell = replace(
                        cfg,
                        mode=mode,
                        ratio=ratio,
                        noise=NoiseConfig(var, seed, relative),
                    )
                    result = run_pipeline(scene, cell)
                    maps = result.maps
                    reports.extend(
                        quality_reports(
                            scene.reflectivity,
                            scene.phase,
                            maps.reflectivity,
                            maps.phase,
                            maps.valid,
                            scale=scale,
                            mode=mode,
                            method=cell.solver.method,
                            sampling_ratio=ratio,
                            noise_variance=var,
                            seed=seed,
                        )
                    )
    return reports_to_csv(reports), reports
