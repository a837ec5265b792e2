"""Moving-scene model: reflectivity plus depth phase, stretching and modulation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .patterns import (
    STRETCH,
    ArrangementMatrix,
    FringeParams,
    carrier_phase,
    check_mode,
)

TWO_PI = 2 * np.pi
GENERATORS = ("gaussian-bump", "ramp", "steps", "checkerboard")


@dataclass(frozen=True, eq=False)
class Scene:
    """Reflectivity ``R`` in [0, 1] and scene phase in [0, 2*pi).

    ``reflectivity`` is H x W (gray) or H x W x 3 (RGB); the phase map is
    always H x W and shared by all channels.
    """

    reflectivity: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.reflectivity, dtype=float)
        p = np.asarray(self.phase, dtype=float)
        if p.ndim != 2 or r.shape[:2] != p.shape or r.ndim not in (2, 3):
            raise ValueError(
                f"reflectivity {r.shape} and phase {p.shape} dimensions do not match"
            )
        if r.ndim == 3 and r.shape[2] != 3:
            raise ValueError("color reflectivity needs exactly 3 channels")
        if min(p.shape) < 1:
            raise ValueError("scene must have at least one pixel")
        if not np.all(np.isfinite(r)) or r.min() < 0 or r.max() > 1:
            raise ValueError("reflectivity values must lie in [0, 1]")
        if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() >= TWO_PI:
            raise ValueError("phase values must lie in [0, 2*pi)")
        object.__setattr__(self, "reflectivity", r)
        object.__setattr__(self, "phase", p)

    @property
    def shape(self) -> tuple[int, int]:
        return self.phase.shape

    @property
    def channels(self) -> int:
        return 1 if self.reflectivity.ndim == 2 else 3

    def channel(self, i: int) -> "Scene":
        if self.channels == 1:
            if i != 0:
                raise IndexError(i)
            return self
        return Scene(self.reflectivity[:, :, i], self.phase)


def _load_reflectivity(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] == b"FMAP":
        return formats.decode_fmap(data, path)
    return formats.decode_pnm(data, path).astype(float) / 255.0


def load_scene(reflectivity_path, phase_path) -> Scene:
    """Read a scene from a PGM/PPM/FMAP reflectivity and an FMAP phase map."""
    r = _load_reflectivity(reflectivity_path)
    p = formats.read_fmap(phase_path)
    if r.shape[:2] != p.shape:
        raise ValueError(
            f"reflectivity {r.shape[:2]} and phase {p.shape} dimensions do not match"
        )
    if p.min() < 0 or p.max() >= TWO_PI:
        raise ValueError(f"{phase_path}: phase values must lie in [0, 2*pi)")
    return Scene(r, p)


def _gaussian_bump(height: int, width: int) -> np.ndarray:
    u, v = np.indices((height, width), dtype=float)
    sigma = min(height, width) / 6
    d2 = (u - height // 2) ** 2 + (v - width // 2) ** 2
    return 0.9 * TWO_PI * np.exp(-d2 / (2 * sigma**2))


def synthesize_scene(generator: str, height: int, width: int, seed: int = 0) -> Scene:
    """Desk-scale synthetic scenes.

    All built-in generators are closed-form, so ``seed`` never changes the
    output; it is accepted so callers can treat generators uniformly.
    """
    if generator not in GENERATORS:
        raise ValueError(f"unknown scene generator {generator!r}; choose from {GENERATORS}")
    if height < 8 or width < 8:
        raise ValueError(f"synthetic scenes need at least 8x8 pixels, got {height}x{width}")
    u, v = np.indices((height, width), dtype=float)
    across = 0.2 + 0.6 * v / (width - 1)

    if generator in ("gaussian-bump", "checkerboard"):
        phase = _gaussian_bump(height, width)
        if generator == "gaussian-bump":
            gu, gv = np.gradient(phase)
            g = np.hypot(gu, gv)
            refl = 0.25 + 0.5 * (1 - g / g.max())
        else:
            tiles = ((u // 8) + (v // 8)) % 2
            refl = np.where(tiles == 0, 0.2, 0.8)
    elif generator == "ramp":
        phase = 0.9 * TWO_PI * u / (height - 1)
        refl = across
    else:
        levels = np.array([0, np.pi / 2, np.pi, 3 * np.pi / 2])
        phase = levels[np.minimum((4 * v) // width, 3).astype(int)]
        refl = across
    return Scene(refl, phase)


def stretch_scene(scene: Scene, mode: str) -> Scene:
    """Replicate every column (mode col) or row (mode row) four times."""
    axis = 1 if check_mode(mode) == "col" else 0
    return Scene(
        np.repeat(scene.reflectivity, STRETCH, axis=axis),
        np.repeat(scene.phase, STRETCH, axis=axis),
    )


def modulate_scene(
    stretched: Scene, params: FringeParams, arr: ArrangementMatrix, mode: str
) -> np.ndarray:
    """Radiance of the stretched scene under the co-moving jigsaw fringe.

    Returns ``R*a + R*b*cos(carrier + phi0 + phase + k*pi/2)`` per pixel.
    Only gray scenes; run color channels one at a time.
    """
    check_mode(mode)
    if stretched.channels != 1:
        raise ValueError("modulate_scene takes one reflectivity channel at a time")
    shape = stretched.shape
    axis_len = shape[1] if mode == "col" else shape[0]
    if axis_len % STRETCH:
        raise ValueError(
            f"stretched {mode} axis length {axis_len} is not divisible by {STRETCH}"
        )
    theta = carrier_phase(params, mode, shape)
    k = arr.phase_index(shape)
    r = stretched.reflectivity
    return r * params.a + r * params.b * np.cos(theta + params.phi0 + stretched.phase + k * np.pi / 2)
