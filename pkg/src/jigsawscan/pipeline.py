"""In-memory simulation and recovery pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measurement import MeasurementSet, NoiseConfig, measure_columns
from .patterns import (
    STRETCH,
    FringeParams,
    SensingBasis,
    arrangement_matrix,
    check_mode,
    make_basis,
)
from .phase import PhaseMaps, extract_phase
from .reconstruct import Reconstruction, SolverConfig, reconstruct_image
from .scene import Scene, modulate_scene, stretch_scene


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "col"
    variant: int = 0
    params: FringeParams = field(default_factory=FringeParams)
    ratio: float = 1.0
    ordering: str = "natural"
    solver: SolverConfig = field(default_factory=SolverConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    reference: str = "numeric"
    reflectivity_method: str = "quadrature"

    def __post_init__(self):
        check_mode(self.mode)
        arrangement_matrix(self.variant)
        if not 0 < self.ratio <= 1:
            raise ValueError(f"sampling ratio must be in (0, 1], got {self.ratio}")
        if self.ratio < 1 and self.solver.method == "hadamard-inverse":
            raise ValueError("sub-sampled runs need method 'tv'")


def signal_length(scene_shape: tuple[int, int], mode: str) -> int:
    """Column length of the measured (stretched) image."""
    h, _ = scene_shape
    return h if check_mode(mode) == "col" else STRETCH * h


def build_basis(scene_shape, cfg: PipelineConfig) -> SensingBasis:
    return make_basis(signal_length(scene_shape, cfg.mode), cfg.ordering, cfg.ratio)


@dataclass(frozen=True, eq=False)
class Simulation:
    modulated: np.ndarray
    basis: SensingBasis
    measurements: MeasurementSet


def simulate(scene: Scene, cfg: PipelineConfig) -> Simulation:
    """Stretch, modulate and measure a gray scene."""
    arr = arrangement_matrix(cfg.variant)
    stretched = stretch_scene(scene, cfg.mode)
    modulated = modulate_scene(stretched, cfg.params, arr, cfg.mode)
    basis = build_basis(scene.shape, cfg)
    ms = measure_columns(modulated, basis, cfg.noise, cfg.mode)
    return Simulation(modulated, basis, ms)


def recover(ms: MeasurementSet, basis: SensingBasis, cfg: PipelineConfig) -> tuple[Reconstruction, PhaseMaps]:
    recon = reconstruct_image(ms, basis, cfg.solver)
    maps = extract_phase(
        recon.image,
        cfg.params,
        arrangement_matrix(cfg.variant),
        cfg.mode,
        reference=cfg.reference,
        reflectivity_method=cfg.reflectivity_method,
    )
    return recon, maps


@dataclass(frozen=True, eq=False)
class PipelineResult:
    simulation: Simulation
    reconstruction: Reconstruction
    maps: PhaseMaps


def run_pipeline(scene: Scene, cfg: PipelineConfig) -> PipelineResult:
    """Full gray pipeline from scene to phase and reflectivity maps."""
    if scene.channels != 1:
        raise ValueError("run_pipeline takes a gray scene; use run_color_pipeline")
    sim = simulate(scene, cfg)
    recon, maps = recover(sim.measurements, sim.basis, cfg)
    return PipelineResult(sim, recon, maps)


def gray_scene(scene: Scene) -> Scene:
    """Channel-mean reflectivity with the shared phase map."""
    if scene.channels == 1:
        return scene
    return Scene(scene.reflectivity.mean(axis=2), scene.phase)


@dataclass(frozen=True, eq=False)
class ColorResult:
    channels: list
    gray: PipelineResult

    @property
    def phase(self) -> np.ndarray:
        return self.gray.maps.phase

    @property
    def reflectivity(self) -> np.ndarray:
        return np.stack([c.maps.reflectivity for c in self.channels], axis=-1)


def run_color_pipeline(scene: Scene, cfg: PipelineConfig) -> ColorResult:
    """Three independent gray runs on R, G, B plus one run for the shared phase.

    The shared phase map comes from the gray run on the channel-mean
    reflectivity; every channel uses the same noise seed as that run.
    """
    if scene.channels != 3:
        raise ValueError("run_color_pipeline needs a 3-channel scene")
    runs = [run_pipeline(scene.channel(i), cfg) for i in range(3)]
    return ColorResult(runs, run_pipeline(gray_scene(scene), cfg))
