"""Column-wise recovery of the modulated image from flat-brush measurements.

Every column is solved on its own, either by exact Hadamard inversion
(complete bases) or by 1-D total-variation compressed sensing, and the
results are placed side by side.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .measurement import MeasurementSet
from .patterns import SensingBasis

METHODS = ("hadamard-inverse", "tv")


@dataclass(frozen=True)
class SolverConfig:
    """Reconstruction settings.

    ``tv_weight`` is the data-fidelity weight ``mu`` of
    ``TV(w) + mu/2 * ||A w - c||^2``.  ``penalty`` scales the ADMM
    augmented-Lagrangian parameter, ``rho = penalty * mu * N``.
    ``workers`` is a scheduling hint only; output does not depend on it.
    """

    method: str = "hadamard-inverse"
    tv_weight: float = 2.0**5
    max_iterations: int = 500
    tolerance: float = 1e-6
    workers: int = 1
    penalty: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.tv_weight > 0:
            raise ValueError("tv_weight must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.penalty > 0:
            raise ValueError("penalty must be > 0")


def hadamard_inverse_column(c: np.ndarray, basis: SensingBasis) -> np.ndarray:
    """``w = basis.T @ c / N``; exact for any row order of a complete basis."""
    if not basis.is_complete:
        raise ValueError(
            f"basis is {basis.M}x{basis.N}; only complete bases are invertible, use method 'tv'"
        )
    c = np.asarray(c, dtype=float)
    if c.shape[0] != basis.M:
        raise ValueError(f"measurement length {c.shape[0]} does not match basis rows {basis.M}")
    return basis.matrix.T.astype(float) @ c / basis.N


def _diff_adjoint(y: np.ndarray) -> np.ndarray:
    # transpose of the one-sided forward difference (no wrap-around)
    return -np.diff(np.pad(y, 1))


def _soft(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def tv_objective(w: np.ndarray, a: np.ndarray, c: np.ndarray, mu: float) -> float:
    r = a @ w - c
    return float(np.abs(np.diff(w)).sum() + 0.5 * mu * (r @ r))


@dataclass
class TVResult:
    x: np.ndarray
    converged: bool
    iterations: int
    objective: float
    # objective of the best iterate so far, one entry per iteration
    history: list = field(default_factory=list)


class TVSolver:
    """ADMM for ``min_w ||D w||_1 + mu/2 ||A w - c||^2`` with a fixed basis.

    Splitting ``z = D w`` gives alternating exact linear solves in ``w``
    and soft-thresholding in ``z``.  The linear system matrix
    ``mu A^T A + rho D^T D`` is the same for every column, so it is
    inverted once per basis.  It is nonsingular because the all-ones row
    is always kept and ``D`` only annihilates constants.
    """

    def __init__(self, basis: SensingBasis, cfg: SolverConfig = SolverConfig()):
        if basis.M > basis.N:
            raise ValueError("TV solver needs M <= N")
        self.cfg = cfg
        self.a = basis.matrix.astype(float)
        self.n = basis.N
        mu = cfg.tv_weight
        self.rho = cfg.penalty * mu * self.n
        n = self.n
        d = np.diff(np.eye(n), axis=0)
        k_inv = np.linalg.inv(mu * self.a.T @ self.a + self.rho * d.T @ d)
        self._data_gain = mu * k_inv @ self.a.T
        self._split_gain = self.rho * k_inv @ d.T

    def solve(self, c: np.ndarray) -> TVResult:
        cfg = self.cfg
        mu = cfg.tv_weight
        c = np.asarray(c, dtype=float)
        if c.shape != (self.a.shape[0],):
            raise ValueError(f"measurement length {c.shape} does not match basis rows {self.a.shape[0]}")
        w = self.a.T @ c / self.n
        z = np.diff(w)
        u = np.zeros_like(z)
        base = self._data_gain @ c

        best, best_obj = w, tv_objective(w, self.a, c, mu)
        history = []
        converged = False
        it = 0
        for it in range(1, cfg.max_iterations + 1):
            w_new = base + self._split_gain @ (z - u)
            dw = np.diff(w_new)
            v = dw + u
            z = _soft(v, 1.0 / self.rho)
            u = v - z

            obj = tv_objective(w_new, self.a, c, mu)
            if obj <= best_obj:
                best, best_obj = w_new, obj
            history.append(best_obj)

            change = np.linalg.norm(w_new - w) / max(np.linalg.norm(w), np.finfo(float).tiny)
            residual = np.linalg.norm(dw - z) / max(
                np.linalg.norm(dw), np.linalg.norm(z), np.finfo(float).tiny
            )
            w = w_new
            if change < cfg.tolerance and residual < cfg.tolerance:
                converged = True
                break
        return TVResult(best.copy(), converged, it, best_obj, history)


def tv_solve_column(c: np.ndarray, basis: SensingBasis, cfg: SolverConfig = SolverConfig(method="tv")) -> TVResult:
    return TVSolver(basis, cfg).solve(c)


@dataclass(frozen=True, eq=False)
class Reconstruction:
    image: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def reconstruct_image(ms: MeasurementSet, basis: SensingBasis, cfg: SolverConfig = SolverConfig()) -> Reconstruction:
    """Solve every measured column independently and stitch them into an image."""
    if (ms.M, ms.N) != (basis.M, basis.N) or ms.ordering != basis.ordering:
        raise ValueError(
            f"basis {basis.ordering} {basis.M}x{basis.N} does not match measurements "
            f"{ms.ordering} {ms.M}x{ms.N}"
        )
    count = ms.count
    if cfg.method == "hadamard-inverse":
        if not basis.is_complete:
            raise ValueError(
                f"sampling ratio {basis.sampling_ratio:g} < 1 cannot be inverted; use method 'tv'"
            )
        image = basis.matrix.T.astype(float) @ ms.columns / basis.N
        return Reconstruction(image, np.ones(count, bool), np.zeros(count, int))

    solver = TVSolver(basis, cfg)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(solver.solve, ms.columns.T))
    image = np.stack([r.x for r in results], axis=1)
    return Reconstruction(
        image,
        np.array([r.converged for r in results]),
        np.array([r.iterations for r in results]),
    )
