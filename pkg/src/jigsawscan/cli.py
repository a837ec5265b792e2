"""Command-line interface.

Every subcommand reads and writes files in ``--out``; ``pipeline`` runs the
stages in order through those same files, so a staged run reproduces the
one-shot outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 data or file error,
4 solver non-convergence under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .measurement import MeasurementSet, NoiseConfig, measure_columns
from .metrics import quality_reports, reports_to_csv, sweep
from .patterns import (
    STRETCH,
    FringeParams,
    arrangement_matrix,
    jigsaw_fringe,
)
from .phase import extract_phase, merge_color
from .pipeline import PipelineConfig, build_basis, gray_scene
from .reconstruct import SolverConfig, reconstruct_image
from .scene import GENERATORS, Scene, load_scene, modulate_scene, stretch_scene, synthesize_scene

log = logging.getLogger("jigsawscan")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
STAGES = ("patterns", "simulate", "reconstruct", "phase", "metrics", "sweep", "pipeline")
CHANNEL_TAGS = ("r", "g", "b")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--mode", choices=("col", "row"), default="col")
    p.add_argument("--variant", type=int, choices=range(4), default=0)
    p.add_argument("--fu", type=float, default=1 / 50)
    p.add_argument("--fv", type=float, default=1 / 50)
    p.add_argument("--phi0", type=float, default=3 * np.pi / 2)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--carrier", choices=("cell", "pixel"), default="cell")
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--ordering", choices=("natural", "cake"), default="natural")
    p.add_argument("--method", choices=("hadamard", "tv"), default="hadamard")
    p.add_argument("--tv-weight", type=float, default=2.0**5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--noise-var", type=float, help="absolute noise variance")
    noise.add_argument("--noise-rel", type=float, help="variance as a fraction of signal power per sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene", help="reflectivity file (PGM, PPM or FMAP)")
    p.add_argument("--scene-phase", help="phase file (FMAP, radians)")
    p.add_argument("--gen", choices=GENERATORS, default="gaussian-bump")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--reference", choices=("numeric", "analytic"), default="numeric")
    p.add_argument("--psnr-scale", choices=("range", "minmax"), default="range",
                   help="8-bit scaling of reflectivity before PSNR")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="exit 4 if any column fails to converge")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="jigsawscan",
        description="Jigsaw-fringe flat-brush scanning simulator and reconstructor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "patterns": "write the jigsaw fringe and the sensing basis",
        "simulate": "modulate and measure the scene",
        "reconstruct": "recover the modulated image from measurements",
        "phase": "extract phase and reflectivity maps",
        "metrics": "PSNR of the recovered maps against ground truth",
        "sweep": "PSNR over a grid of modes, ratios, noise levels and seeds",
        "pipeline": "run every stage in order",
    }
    for name in STAGES:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "sweep":
            sp.add_argument("--modes", default="col,row")
            sp.add_argument("--ratios", default="1")
            sp.add_argument("--variances", default="0")
            sp.add_argument("--seeds", default="0")
    return parser


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command in STAGES:
        try:
            defaults = read_config_file(known.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        sub = parser._subparsers._group_actions[0].choices[known.command]
        dests = {a.dest: a for a in sub._actions}
        unknown = sorted(set(defaults) - set(dests))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        for key in [k for k, v in defaults.items() if isinstance(dests[k], argparse._StoreTrueAction)]:
            defaults[key] = defaults[key].lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    # a noise flag on the command line overrides the other noise key from a file
    flags = {a.split("=", 1)[0] for a in argv}
    if args.noise_var is not None and args.noise_rel is not None:
        if "--noise-var" in flags:
            args.noise_rel = None
        elif "--noise-rel" in flags:
            args.noise_var = None
        else:
            parser.error("config sets both noise-var and noise-rel")
    return args


def pipeline_config(args) -> PipelineConfig:
    params = FringeParams(
        f_u=args.fu,
        f_v=args.fv,
        phi0=args.phi0,
        a=args.a,
        b=args.b,
        carrier_mode="cell-constant" if args.carrier == "cell" else "per-pixel",
    )
    solver = SolverConfig(
        method="hadamard-inverse" if args.method == "hadamard" else "tv",
        tv_weight=args.tv_weight,
        max_iterations=args.max_iter,
        tolerance=args.tol,
        workers=args.workers,
    )
    if args.noise_rel is not None:
        noise = NoiseConfig(args.noise_rel, args.seed, relative=True)
    else:
        noise = NoiseConfig(args.noise_var or 0.0, args.seed)
    return PipelineConfig(
        mode=args.mode,
        variant=args.variant,
        params=params,
        ratio=args.ratio,
        ordering="cake-cutting" if args.ordering == "cake" else "natural",
        solver=solver,
        noise=noise,
        reference=args.reference,
    )


def _scene(args) -> Scene:
    if args.scene or args.scene_phase:
        if not (args.scene and args.scene_phase):
            raise ValueError("--scene and --scene-phase must be given together")
        scene = load_scene(args.scene, args.scene_phase)
    else:
        scene = synthesize_scene(args.gen, args.height, args.width, args.seed)
    if args.channels == 3 and scene.channels == 1:
        scene = Scene(np.repeat(scene.reflectivity[:, :, None], 3, axis=2), scene.phase)
    if args.channels == 1 and scene.channels == 3:
        raise ValueError("color reflectivity given but --channels is 1")
    return scene


def _runs(args) -> list[str]:
    """File suffixes: the gray run, plus one per color channel."""
    return [""] if args.channels == 1 else ["", *(f"_{t}" for t in CHANNEL_TAGS)]


def _gray_parts(scene: Scene) -> dict:
    parts = {"": gray_scene(scene)}
    if scene.channels == 3:
        for i, t in enumerate(CHANNEL_TAGS):
            parts[f"_{t}"] = scene.channel(i)
    return parts


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def stage_patterns(args, cfg: PipelineConfig, out: Path) -> None:
    scene = _scene(args)
    h, w = scene.shape
    sh, sw = (h, STRETCH * w) if cfg.mode == "col" else (STRETCH * h, w)
    fringe = jigsaw_fringe(cfg.params, arrangement_matrix(cfg.variant), cfg.mode, sh, sw)
    formats.write_fmap(out / "fringe.fmap", fringe)
    formats.write_hmat(out / "basis.hmat", build_basis(scene.shape, cfg).matrix)


def stage_simulate(args, cfg: PipelineConfig, out: Path) -> None:
    scene = _scene(args)
    formats.write_fmap(out / "scene_phase.fmap", scene.phase)
    basis = build_basis(scene.shape, cfg)
    arr = arrangement_matrix(cfg.variant)
    for suffix, part in _gray_parts(scene).items():
        formats.write_fmap(out / f"scene_reflectivity{suffix}.fmap", part.reflectivity)
        modulated = modulate_scene(stretch_scene(part, cfg.mode), cfg.params, arr, cfg.mode)
        formats.write_fmap(out / f"modulated{suffix}.fmap", modulated)
        ms = measure_columns(modulated, basis, cfg.noise, cfg.mode)
        (out / f"measurements{suffix}.mset").write_bytes(
            formats.encode_mset(ms.columns, ms.N, ms.mode, ms.variance, ms.seed)
        )


def stage_reconstruct(args, cfg: PipelineConfig, out: Path) -> bool:
    all_ok = True
    for suffix in _runs(args):
        data = formats.decode_mset((out / f"measurements{suffix}.mset").read_bytes())
        if data["mode"] != cfg.mode:
            raise ValueError(f"measurements were taken in mode {data['mode']}, config says {cfg.mode}")
        n = data["N"]
        scene_h = n if cfg.mode == "col" else n // STRETCH
        basis = build_basis((scene_h, 1), cfg)
        ms = MeasurementSet(data["columns"], n, basis.ordering, data["mode"], data["variance"], data["seed"])
        recon = reconstruct_image(ms, basis, cfg.solver)
        formats.write_fmap(out / f"reconstruction{suffix}.fmap", recon.image)
        _write_json(
            out / f"reconstruction{suffix}.json",
            {
                "method": cfg.solver.method,
                "M": basis.M,
                "N": basis.N,
                "converged_columns": int(recon.converged.sum()),
                "columns": int(recon.converged.size),
                "max_iterations_used": int(recon.iterations.max()),
            },
        )
        all_ok &= recon.all_converged
    return all_ok


def stage_phase(args, cfg: PipelineConfig, out: Path) -> None:
    arr = arrangement_matrix(cfg.variant)
    reflectivities = []
    for suffix in _runs(args):
        image = formats.read_fmap(out / f"reconstruction{suffix}.fmap")
        maps = extract_phase(image, cfg.params, arr, cfg.mode, reference=cfg.reference)
        formats.write_fmap(out / f"reflectivity{suffix}.fmap", maps.reflectivity)
        if suffix:
            reflectivities.append(maps.reflectivity)
            continue
        formats.write_fmap(out / "wrapped.fmap", maps.wrapped)
        formats.write_fmap(out / "unwrapped.fmap", maps.unwrapped)
        formats.write_fmap(out / "reference_wrapped.fmap", maps.reference_wrapped)
        formats.write_fmap(out / "reference_unwrapped.fmap", maps.reference_unwrapped)
        formats.write_fmap(out / "phase.fmap", maps.phase)
        formats.write_pnm(out / "mask.pgm", np.where(maps.valid, 255, 0).astype(np.uint8))
        formats.write_mesh(out / "phase_mesh.txt", maps.phase)
    if reflectivities:
        formats.write_pnm(out / "reflectivity.ppm", merge_color(reflectivities))


def stage_metrics(args, cfg: PipelineConfig, out: Path) -> None:
    true_phase = formats.read_fmap(out / "scene_phase.fmap")
    phase = formats.read_fmap(out / "phase.fmap")
    valid = formats.read_pnm(out / "mask.pgm") > 0
    tags = dict(
        mode=cfg.mode,
        method=cfg.solver.method,
        sampling_ratio=cfg.ratio,
        noise_variance=cfg.noise.variance,
        seed=cfg.noise.seed,
    )
    reports = []
    for suffix in _runs(args):
        true_r = formats.read_fmap(out / f"scene_reflectivity{suffix}.fmap")
        refl = formats.read_fmap(out / f"reflectivity{suffix}.fmap")
        rp, rr = quality_reports(true_r, true_phase, refl, phase, valid, args.psnr_scale, **tags)
        if not suffix:
            reports.append(rp)
        reports.append(replace(rr, subject=f"reflectivity{suffix}"))
    (out / "metrics.csv").write_text(reports_to_csv(reports))


def stage_sweep(args, cfg: PipelineConfig, out: Path) -> None:
    scene = gray_scene(_scene(args))
    relative = args.noise_rel is not None
    csv_text, _ = sweep(
        scene,
        args.modes.split(","),
        _floats(args.ratios),
        _floats(args.variances),
        _ints(args.seeds),
        cfg,
        relative=relative,
        scale=args.psnr_scale,
    )
    (out / "sweep.csv").write_text(csv_text)


def stage_pipeline(args, cfg: PipelineConfig, out: Path) -> bool:
    stage_patterns(args, cfg, out)
    stage_simulate(args, cfg, out)
    ok = stage_reconstruct(args, cfg, out)
    stage_phase(args, cfg, out)
    stage_metrics(args, cfg, out)
    return ok


HANDLERS = {
    "patterns": stage_patterns,
    "simulate": stage_simulate,
    "reconstruct": stage_reconstruct,
    "phase": stage_phase,
    "metrics": stage_metrics,
    "sweep": stage_sweep,
    "pipeline": stage_pipeline,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    try:
        cfg = pipeline_config(args)
        if args.workers < 1:
            raise ValueError("--workers must be >= 1")
    except ValueError as exc:
        print(f"jigsawscan: error [config] {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        log.info("running %s into %s", args.command, out)
        ok = HANDLERS[args.command](args, cfg, out)
    except (ValueError, OSError) as exc:
        print(f"jigsawscan: error [{args.command}] {exc}", file=sys.stderr)
        return EXIT_DATA
    if ok is False and args.strict:
        print(f"jigsawscan: error [{args.command}] solver did not converge", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
