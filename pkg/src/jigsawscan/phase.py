"""Four-step phase extraction from a reconstructed jigsaw image.

A phase stack is a ``(4, H, W)`` array holding the four phase-shift
images ``F_0 .. F_3`` at scene resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import to_u8
from .patterns import STRETCH, ArrangementMatrix, FringeParams, check_mode
from .scene import Scene, modulate_scene, stretch_scene

TWO_PI = 2 * np.pi
ATAN_EPS = 1e-12


def wrap(x):
    """Fold angles into (-pi, pi]."""
    return x - TWO_PI * np.ceil((x - np.pi) / TWO_PI)


def _cell_index(arr: ArrangementMatrix, mode: str, shape: tuple[int, int]):
    """Stretched-grid index arrays for every (k, scene row, scene col)."""
    h, w = shape
    k, u, x = np.indices((STRETCH, h, w))
    if mode == "col":
        # within-cell column whose arrangement entry is k on row u
        return u, STRETCH * x + (k - u - arr.offset) % STRETCH
    return STRETCH * u + (k - x - arr.offset) % STRETCH, x


def _scene_shape(stretched_shape, mode):
    h, w = stretched_shape
    if mode == "col":
        if w % STRETCH:
            raise ValueError(f"image width {w} is not divisible by {STRETCH}")
        return h, w // STRETCH
    if h % STRETCH:
        raise ValueError(f"image height {h} is not divisible by {STRETCH}")
    return h // STRETCH, w


def deinterleave(image: np.ndarray, arr: ArrangementMatrix, mode: str) -> np.ndarray:
    """Split a stretched jigsaw image into its four phase-step images."""
    check_mode(mode)
    image = np.asarray(image, dtype=float)
    rows, cols = _cell_index(arr, mode, _scene_shape(image.shape, mode))
    return image[rows, cols]


def interleave(stack: np.ndarray, arr: ArrangementMatrix, mode: str) -> np.ndarray:
    """Inverse of :func:`deinterleave`."""
    check_mode(mode)
    stack = np.asarray(stack, dtype=float)
    _, h, w = stack.shape
    out_shape = (h, STRETCH * w) if mode == "col" else (STRETCH * h, w)
    out = np.empty(out_shape)
    rows, cols = _cell_index(arr, mode, (h, w))
    out[rows, cols] = stack
    return out


def wrapped_phase(stack: np.ndarray, eps: float = ATAN_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Four-step arctangent; returns (phase in (-pi, pi], validity mask).

    Pixels where both ``F3 - F1`` and ``F0 - F2`` are below ``eps`` in
    magnitude carry no modulation; they are set to 0 and marked invalid.
    """
    f0, f1, f2, f3 = stack
    num = f3 - f1
    den = f0 - f2
    valid = (np.abs(num) >= eps) | (np.abs(den) >= eps)
    phase = np.where(valid, wrap(np.arctan2(num, den)), 0.0)
    return phase, valid


def _forward_fill(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace invalid samples along axis 0 by the last valid one (row 0 is kept)."""
    ok = valid.copy()
    ok[0] = True
    idx = np.where(ok, np.arange(values.shape[0])[:, None], 0)
    idx = np.maximum.accumulate(idx, axis=0)
    return np.take_along_axis(values, idx, axis=0)


def _itoh_turns(filled: np.ndarray) -> np.ndarray:
    """Whole turns added along axis 0 so successive differences fall in (-pi, pi].

    Returns integer counts, with row 0 at zero.  Adding ``2*pi*turns`` to
    ``filled`` integrates the folded differences without accumulating
    rounding, so already continuous data comes back unchanged.
    """
    d = np.diff(filled, axis=0)
    turns = np.rint((wrap(d) - d) / TWO_PI)
    out = np.zeros(filled.shape)
    out[1:] = np.cumsum(turns, axis=0)
    return out


def unwrap_2d(wrapped: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Itoh sequential unwrapping seeded at the image centre.

    The middle row is unwrapped outward from its centre, then every column
    is unwrapped up and down from that row.  Invalid pixels repeat the
    last valid value on their path, so they inherit the running integral
    and contribute no jump.
    """
    wrapped = np.asarray(wrapped, dtype=float)
    valid = np.ones(wrapped.shape, bool) if mask is None else np.asarray(mask, bool)
    h, w = wrapped.shape
    mr, mc = h // 2, w // 2

    row = wrapped[mr, :, None]
    row_ok = valid[mr, :, None]
    right = _forward_fill(row[mc:], row_ok[mc:])
    left = _forward_fill(row[mc::-1], row_ok[mc::-1])
    mid = np.concatenate([left[:0:-1], right])[:, 0]
    mid_turns = np.concatenate([_itoh_turns(left)[:0:-1], _itoh_turns(right)])[:, 0]

    # the middle row enters each column path already filled
    seeded = wrapped.copy()
    seeded[mr] = mid
    ok = valid.copy()
    ok[mr] = True

    out = np.empty_like(wrapped)
    down = _forward_fill(seeded[mr:], ok[mr:])
    out[mr:] = down + TWO_PI * (mid_turns + _itoh_turns(down))
    up = _forward_fill(seeded[mr::-1], ok[mr::-1])
    out[: mr + 1] = (up + TWO_PI * (mid_turns + _itoh_turns(up)))[::-1]
    return out


def phase_difference(unwrapped: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Scene phase: difference folded per pixel into [0, 2*pi)."""
    d = np.asarray(unwrapped, float) - np.asarray(reference, float)
    out = d - TWO_PI * np.floor(d / TWO_PI)
    # tiny negative d rounds up to exactly 2*pi
    return np.where(out >= TWO_PI, 0.0, out)


def reference_phase_maps(
    params: FringeParams, arr: ArrangementMatrix, mode: str, shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Wrapped and unwrapped carrier phase, from the pipeline on a flat unit scene."""
    unit = Scene(np.ones(shape), np.zeros(shape))
    image = modulate_scene(stretch_scene(unit, mode), params, arr, mode)
    wrapped, valid = wrapped_phase(deinterleave(image, arr, mode))
    return wrapped, unwrap_2d(wrapped, valid)


def analytic_reference(params: FringeParams, shape: tuple[int, int]) -> np.ndarray:
    """Unwrapped carrier ``2*pi*(f_u*x + f_v*y) + phi0`` on scene coordinates.

    Equals the numerically unwrapped reference up to a constant multiple of
    2*pi when the carrier is cell-constant.
    """
    y, x = np.indices(shape, dtype=float)
    return 2 * np.pi * params.f_u * x + 2 * np.pi * params.f_v * y + params.phi0


def recover_reflectivity(
    stack: np.ndarray, params: FringeParams, method: str = "quadrature", cos_eps: float = 1e-3
) -> np.ndarray:
    """Surface reflectivity from the four phase-step images.

    ``quadrature`` uses the modulation amplitude, ``hypot(F3-F1, F0-F2) / 2b``.
    ``division`` divides each ``F_k`` by its modulated illumination
    ``a + b*cos(phase' + k*pi/2)`` and averages the samples whose cosine
    exceeds ``cos_eps`` in magnitude; pixels with none are set to 0.
    """
    if not params.b > 0:
        raise ValueError("modulation amplitude b must be > 0")
    stack = np.asarray(stack, dtype=float)
    f0, f1, f2, f3 = stack
    if method == "quadrature":
        return np.hypot(f3 - f1, f0 - f2) / (2 * params.b)
    if method != "division":
        raise ValueError(f"unknown reflectivity method {method!r}")
    phase, _ = wrapped_phase(stack)
    k = np.arange(STRETCH)[:, None, None]
    cos = np.cos(phase + k * np.pi / 2)
    illum = params.a + params.b * cos
    use = np.abs(cos) > cos_eps
    ratios = np.where(use, stack / np.where(use, illum, 1.0), 0.0)
    count = use.sum(axis=0)
    return np.where(count > 0, ratios.sum(axis=0) / np.maximum(count, 1), 0.0)


@dataclass(frozen=True, eq=False)
class PhaseMaps:
    wrapped: np.ndarray
    unwrapped: np.ndarray
    reference_wrapped: np.ndarray
    reference_unwrapped: np.ndarray
    phase: np.ndarray
    reflectivity: np.ndarray
    valid: np.ndarray


def extract_phase(
    image: np.ndarray,
    params: FringeParams,
    arr: ArrangementMatrix,
    mode: str,
    reference: str = "numeric",
    reflectivity_method: str = "quadrature",
) -> PhaseMaps:
    """Run de-interleave, arctangent, unwrapping, reference removal and reflectivity."""
    stack = deinterleave(image, arr, mode)
    wrapped, valid = wrapped_phase(stack)
    unwrapped = unwrap_2d(wrapped, valid)
    shape = wrapped.shape
    if reference == "numeric":
        ref_wrapped, ref_unwrapped = reference_phase_maps(params, arr, mode, shape)
    elif reference == "analytic":
        ref_unwrapped = analytic_reference(params, shape)
        ref_wrapped = wrap(ref_unwrapped)
    else:
        raise ValueError(f"reference must be 'numeric' or 'analytic', got {reference!r}")
    return PhaseMaps(
        wrapped=wrapped,
        unwrapped=unwrapped,
        reference_wrapped=ref_wrapped,
        reference_unwrapped=ref_unwrapped,
        phase=phase_difference(unwrapped, ref_unwrapped),
        reflectivity=recover_reflectivity(stack, params, reflectivity_method),
        valid=valid,
    )


def merge_color(channels) -> np.ndarray:
    """Pack three maps into an H x W x 3 uint8 image on one shared scale."""
    maps = [np.asarray(c, dtype=float) for c in channels]
    if len(maps) != 3:
        raise ValueError("merge_color needs exactly three channels")
    if any(m.shape != maps[0].shape for m in maps):
        raise ValueError("color channels must share dimensions")
    cube = np.stack(maps, axis=-1)
    lo, hi = cube.min(), cube.max()
    if hi == lo:
        scaled = np.zeros_like(cube)
    else:
        scaled = (cube - lo) * (255.0 / (hi - lo))
    return to_u8(scaled)
