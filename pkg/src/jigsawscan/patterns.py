"""Illumination and sensing patterns.

Phase-shift fringes, the 4x4 Latin-square arrangements used to interleave
the four phase steps into one frame, Hadamard sensing bases and their
cake-cutting reordering, truncation and positive/negative splitting.

Coordinates follow image convention: ``u`` is the row index from the top,
``v`` the column index from the left, origin top-left.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STRETCH = 4
MODES = ("col", "row")
CARRIER_MODES = ("cell-constant", "per-pixel")
ORDERINGS = ("natural", "cake-cutting")


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class FringeParams:
    """Parameters of the sinusoidal fringe ``a + b*cos(2*pi*(f_u*v + f_v*u) + phi0)``.

    ``f_u`` is the frequency along columns (cycles per pixel step in ``v``),
    ``f_v`` the frequency along rows.  ``a`` and ``b`` are spatial constants.
    """

    f_u: float = 1 / 50
    f_v: float = 1 / 50
    phi0: float = 3 * np.pi / 2
    a: float = 0.0
    b: float = 1.0
    carrier_mode: str = "cell-constant"

    def __post_init__(self):
        if not (np.isfinite(self.f_u) and np.isfinite(self.f_v)):
            raise ValueError("fringe frequencies must be finite")
        if not np.isfinite(self.phi0):
            raise ValueError("phi0 must be finite")
        if not self.b > 0:
            raise ValueError(f"modulation amplitude b must be > 0, got {self.b}")
        if not self.a >= 0:
            raise ValueError(f"background a must be >= 0, got {self.a}")
        if self.carrier_mode not in CARRIER_MODES:
            raise ValueError(
                f"carrier_mode must be one of {CARRIER_MODES}, got {self.carrier_mode!r}"
            )


@dataclass(frozen=True)
class ArrangementMatrix:
    """4x4 Latin square assigning a phase index to every pixel of a cell.

    ``entries[r, c] = (r + c + offset) % 4``.  Offset 0 stitches the four
    phase steps along the first row and loop-shifts left on each next row.
    """

    offset: int

    def __post_init__(self):
        if self.offset not in (0, 1, 2, 3):
            raise ValueError(f"arrangement offset must be in 0..3, got {self.offset}")

    @property
    def entries(self) -> np.ndarray:
        r, c = np.indices((STRETCH, STRETCH))
        return (r + c + self.offset) % STRETCH

    def phase_index(self, shape: tuple[int, int]) -> np.ndarray:
        """Phase step index for every pixel of a ``shape`` grid (cell tiling)."""
        u, v = np.indices(shape)
        return (u + v + self.offset) % STRETCH


def arrangement_matrix(variant: int) -> ArrangementMatrix:
    if isinstance(variant, bool) or int(variant) != variant:
        raise ValueError(f"arrangement variant must be an integer, got {variant!r}")
    return ArrangementMatrix(int(variant))


def _check_dims(height: int, width: int, minimum: int = 1):
    if height < minimum or width < minimum:
        raise ValueError(f"dimensions must be >= {minimum}, got {height}x{width}")


def phase_shift_fringe(params: FringeParams, k: int, height: int, width: int) -> np.ndarray:
    """Plain (non-interleaved) phase-shift fringe ``I_k`` of size height x width."""
    if k not in (0, 1, 2, 3):
        raise ValueError(f"phase index k must be in 0..3, got {k}")
    _check_dims(height, width)
    u, v = np.indices((height, width), dtype=float)
    theta = 2 * np.pi * params.f_u * v + 2 * np.pi * params.f_v * u
    return params.a + params.b * np.cos(theta + params.phi0 + k * np.pi / 2)


def carrier_phase(params: FringeParams, mode: str, shape: tuple[int, int]) -> np.ndarray:
    """Carrier phase (without ``phi0``) on a stretched grid.

    In cell-constant mode the stretched axis is quantized to scene cells so
    the four samples of one scene point share the same carrier phase.
    """
    check_mode(mode)
    u, v = np.indices(shape, dtype=float)
    if params.carrier_mode == "cell-constant":
        if mode == "col":
            v = np.floor(v / STRETCH)
        else:
            u = np.floor(u / STRETCH)
    return 2 * np.pi * params.f_u * v + 2 * np.pi * params.f_v * u


def jigsaw_fringe(
    params: FringeParams, arr: ArrangementMatrix, mode: str, height: int, width: int
) -> np.ndarray:
    """Single-frame fringe with the four phase steps interleaved per ``arr``."""
    _check_dims(height, width, STRETCH)
    theta = carrier_phase(params, mode, (height, width))
    k = arr.phase_index((height, width))
    return params.a + params.b * np.cos(theta + params.phi0 + k * np.pi / 2)


@dataclass(frozen=True, eq=False)
class SensingBasis:
    """Signed +-1 measurement matrix.

    ``rows`` holds the natural Hadamard index of every row, so reordered and
    truncated bases keep track of where they came from.
    """

    matrix: np.ndarray
    ordering: str = "natural"
    rows: np.ndarray = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2:
            raise ValueError("basis matrix must be 2-D")
        if not np.all((m == 1) | (m == -1)):
            raise ValueError("basis entries must be +1 or -1")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        object.__setattr__(self, "matrix", m.astype(np.int8))
        if self.rows is None:
            object.__setattr__(self, "rows", np.arange(m.shape[0]))

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    @property
    def sampling_ratio(self) -> float:
        return self.M / self.N

    @property
    def is_complete(self) -> bool:
        return self.M == self.N


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def hadamard_matrix(order: int) -> SensingBasis:
    """Naturally ordered Hadamard matrix by the Kronecker recursion."""
    if isinstance(order, bool) or int(order) != order or not _is_power_of_two(int(order)):
        raise ValueError(f"Hadamard order must be a power of two, got {order!r}")
    h = np.ones((1, 1), dtype=np.int8)
    h2 = np.array([[1, 1], [1, -1]], dtype=np.int8)
    while h.shape[0] < order:
        h = np.kron(h2, h)
    return SensingBasis(h, "natural")


def block_counts(matrix: np.ndarray) -> np.ndarray:
    """Number of maximal constant runs in every row."""
    matrix = np.asarray(matrix)
    return 1 + np.count_nonzero(np.diff(matrix, axis=1), axis=1)


def cake_cutting_permutation(basis: SensingBasis) -> SensingBasis:
    """Reorder rows by ascending block count, ties by natural index."""
    if basis.ordering != "natural" or not basis.is_complete:
        raise ValueError("cake-cutting reordering expects a complete natural Hadamard basis")
    counts = block_counts(basis.matrix)
    perm = np.lexsort((basis.rows, counts))
    return SensingBasis(basis.matrix[perm], "cake-cutting", basis.rows[perm])


def truncate_basis(basis: SensingBasis, ratio: float) -> SensingBasis:
    """Keep the first ``round(ratio * N)`` rows in the current order."""
    if not 0 < ratio <= 1:
        raise ValueError(f"sampling ratio must be in (0, 1], got {ratio}")
    m = int(round(ratio * basis.N))
    if m < 1:
        raise ValueError(f"sampling ratio {ratio} keeps no rows of an order-{basis.N} basis")
    m = min(m, basis.M)
    return SensingBasis(basis.matrix[:m], basis.ordering, basis.rows[:m])


def make_basis(n: int, ordering: str = "natural", ratio: float = 1.0) -> SensingBasis:
    basis = hadamard_matrix(n)
    if ordering == "cake-cutting":
        basis = cake_cutting_permutation(basis)
    elif ordering != "natural":
        raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    return truncate_basis(basis, ratio)


@dataclass(frozen=True, eq=False)
class BasisSplit:
    positive: np.ndarray
    negative: np.ndarray


def split_positive_negative(basis: SensingBasis | np.ndarray) -> BasisSplit:
    """Complementary binary matrices ``(1+T)/2`` and ``(1-T)/2``."""
    t = basis.matrix if isinstance(basis, SensingBasis) else np.asarray(basis)
    if not np.all((t == 1) | (t == -1)):
        raise ValueError("positive/negative split needs entries in {+1, -1}")
    t = t.astype(np.int8)
    return BasisSplit((1 + t) // 2, (1 - t) // 2)
