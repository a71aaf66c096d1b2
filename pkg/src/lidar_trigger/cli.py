"""
Command-line interface.

    lidar-trigger materials score [--db FILE] [--lambda W] [--grid-points N]
    lidar-trigger trigger synth --depth D --out FILE.bin [--config FILE]
    lidar-trigger poison run --dataset DIR --out DIR [--config FILE]
    lidar-trigger validate [--samples N] [--seed S]
    lidar-trigger inspect FRAME.bin [--manifest FILE]

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Reports are JSON with sorted keys.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .intensity import (
    MIN_VALIDATION_SAMPLES,
    IntensityMode,
    azimuthal_expectation_quadrature,
    hemispheric_expectation_quadrature,
    monte_carlo_constants,
    validate_approximation,
)
from .kitti_io import KittiFormatError, load_point_cloud, save_point_cloud, PointCloudFrame
from .materials import (
    DEFAULT_TRADEOFF,
    MaterialSpec,
    builtin_database,
    default_angle_grid,
    load_database,
    rank_materials,
)
from .optics import ComplexIndex
from .poison import LayoutError, NoEligibleFramesError, PoisonConfig, PoisonManifest, run_pipeline
from .trigger import TriggerConfig, synthesize_patch

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

QUADRATURE_NODES = 100_000
QUADRATURE_TOL = 1e-6
MC_SIGMAS = 3.0
EXACT_TOL = 1e-12


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} {path} is not valid JSON: {exc}") from None


def _database(args):
    if getattr(args, "db", None) is None:
        return builtin_database()
    try:
        return load_database(args.db)
    except OSError as exc:
        raise DataError(f"cannot read material database {args.db}: {exc.strerror}") from None
    except ValueError as exc:
        raise DataError(f"material database {args.db}: {exc}") from None


# -- materials score ---------------------------------------------------------

def cmd_materials_score(args) -> int:
    if not 0.0 <= args.tradeoff <= 1.0:
        raise UsageError("--lambda must lie in [0, 1]")
    if args.grid_points < 1:
        raise UsageError("--grid-points must be >= 1")
    db = _database(args)
    grid = default_angle_grid(args.grid_points)
    scores = rank_materials(db, args.tradeoff, grid)

    print(f"{'rank':>4}  {'material':<20} {'avg_specular':>12} {'avg_diffuse':>11} {'score':>7}")
    for s in scores:
        print(f"{s.rank:>4}  {s.material_name:<20} {s.avg_specular:>12.4f} {s.avg_diffuse:>11.4f} "
              f"{s.combined_score:>7.4f}")
    if args.report:
        _write_json(args.report, {
            "lambda_w": args.tradeoff,
            "grid_points": args.grid_points,
            "grid_degrees": [0.0, 80.0],
            "materials": [m.to_dict() for m in db],
            "scores": [s.to_dict() for s in scores],
        })
    return EXIT_OK


# -- trigger synth -----------------------------------------------------------

def _trigger_config(args) -> TriggerConfig:
    obj = {}
    if args.config:
        data = _read_json(args.config, "config")
        if not isinstance(data, dict):
            raise DataError(f"config {args.config} must be a JSON object")
        obj = dict(data.get("trigger", data))
    for key, attr in (("w", "w"), ("h", "h"), ("s", "s"), ("m_l", "m_l"), ("material", "material")):
        v = getattr(args, attr, None)
        if v is not None:
            obj[key] = v
    mode = obj.get("intensity_mode", {})
    mode = {"kind": mode} if isinstance(mode, str) else dict(mode)
    if args.intensity_mode is not None:
        mode["kind"] = args.intensity_mode
    if args.fixed_value is not None:
        mode["fixed_value"] = args.fixed_value
    if args.intensity_seed is not None:
        mode["seed"] = args.intensity_seed
    obj["intensity_mode"] = mode
    try:
        return TriggerConfig.from_dict(obj, _database(args))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid trigger config: {exc}") from None


def cmd_trigger_synth(args) -> int:
    config = _trigger_config(args)
    if not (math.isfinite(args.depth) and args.depth > 0):
        raise DataError(f"depth must be strictly positive, got {args.depth}")
    patch = synthesize_patch(config, args.depth)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_point_cloud(out, PointCloudFrame(out.stem, patch.points.astype(np.float32)))
    intensity = patch.points[:, 3]
    sidecar = out.with_suffix(".json")
    _write_json(sidecar, {
        "depth": patch.depth,
        "n_y": patch.n_y,
        "n_z": patch.n_z,
        "point_count": len(patch),
        "intensity": {
            "min": float(intensity.min()),
            "max": float(intensity.max()),
            "mean": float(intensity.mean()),
        },
        "config": config.to_dict(),
    })
    print(f"wrote {len(patch)} points ({patch.n_y} x {patch.n_z}) to {out}")
    return EXIT_OK


# -- poison run --------------------------------------------------------------

def _poison_config(args) -> PoisonConfig:
    obj = {}
    if args.config:
        obj = _read_json(args.config, "config")
        if not isinstance(obj, dict):
            raise DataError(f"config {args.config} must be a JSON object")
    overrides = {
        "poison_rate": args.poison_rate,
        "target_class": args.target_class,
        "placement_height_fraction": args.placement_height_fraction,
        "max_depth": args.max_depth,
        "seed": args.seed,
        "depth_metric": args.depth_metric,
    }
    obj.update({k: v for k, v in overrides.items() if v is not None})
    objective = obj.get("objective", {})
    objective = {"kind": objective} if isinstance(objective, str) else dict(objective)
    if args.objective is not None:
        objective["kind"] = args.objective
    if args.scale_factor is not None:
        objective["scale_factor"] = args.scale_factor
    obj["objective"] = objective
    try:
        return PoisonConfig.from_dict(obj, _database(args))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid poison config: {exc}") from None


def cmd_poison(args) -> int:
    config = _poison_config(args)
    try:
        manifest = run_pipeline(args.dataset, args.out, config, workers=args.workers)
    except LayoutError as exc:
        raise DataError(str(exc)) from None
    except (NoEligibleFramesError, KittiFormatError) as exc:
        raise DataError(str(exc)) from None
    print(f"eligible frames: {manifest.eligible_count}")
    print(f"poisoned frames: {len(manifest.poisoned_frames)}")
    print(f"objective: {config.objective.kind}"
          + (f" (scale {config.objective.scale_factor:g})" if config.objective.kind == "resizing" else ""))
    print(f"manifest: {Path(args.out) / 'poison_manifest.json'}")
    return EXIT_OK


# -- validate ----------------------------------------------------------------

def run_validation(samples: int, seed: int, nodes: int = QUADRATURE_NODES) -> dict:
    """All quadrature and Monte-Carlo checks behind ``validate``."""
    checks = []

    def check(name, value, expected, tolerance, kind):
        checks.append({
            "name": name,
            "value": value,
            "expected": expected,
            "deviation": abs(value - expected),
            "tolerance": tolerance,
            "tolerance_kind": kind,
            "passed": abs(value - expected) <= tolerance,
        })

    check("azimuthal_quadrature", azimuthal_expectation_quadrature(nodes), 1 / math.pi,
          QUADRATURE_TOL, "absolute")
    check("hemispheric_quadrature", hemispheric_expectation_quadrature(nodes), 4 / 3,
          QUADRATURE_TOL, "absolute")
    mc = monte_carlo_constants(samples, seed)
    check("azimuthal_monte_carlo", mc["azimuthal"][0], 1 / math.pi,
          MC_SIGMAS * mc["azimuthal"][1], "3 standard errors")
    check("hemispheric_monte_carlo", mc["hemispheric"][0], 4 / 3,
          MC_SIGMAS * mc["hemispheric"][1], "3 standard errors")

    materials = builtin_database() + [MaterialSpec("LambertianReference", ComplexIndex(1.5), 1.0, 0.0)]
    reports = {}
    for i, m in enumerate(materials):
        rep = validate_approximation(m, samples, seed + 1 + i)
        reports[m.name] = rep.to_dict()
        if m.roughness == 0:
            check(f"approximation_{m.name}", rep.sampled_mean_diffuse, rep.closed_form_diffuse,
                  EXACT_TOL, "absolute")
        else:
            check(f"approximation_{m.name}", rep.sampled_mean_diffuse, rep.closed_form_diffuse,
                  MC_SIGMAS * rep.std_error, "3 standard errors")
    return {
        "samples": samples,
        "seed": seed,
        "quadrature_nodes": nodes,
        "checks": checks,
        "materials": reports,
        "passed": all(c["passed"] for c in checks),
    }


def cmd_validate(args) -> int:
    if args.samples < MIN_VALIDATION_SAMPLES:
        raise UsageError(f"--samples must be >= {MIN_VALIDATION_SAMPLES}")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    report = run_validation(args.samples, args.seed)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status}  {c['name']:<36} value={c['value']:.9f} expected={c['expected']:.9f} "
              f"dev={c['deviation']:.2e} tol={c['tolerance']:.2e}")
    if args.report:
        _write_json(args.report, report)
    if not report["passed"]:
        failing = ", ".join(c["name"] for c in report["checks"] if not c["passed"])
        raise DataError(f"tolerance check failed: {failing}")
    return EXIT_OK


# -- inspect -----------------------------------------------------------------

def cmd_inspect(args) -> int:
    try:
        frame = load_point_cloud(args.frame)
    except OSError as exc:
        raise DataError(f"cannot read {args.frame}: {exc.strerror}") from None
    except KittiFormatError as exc:
        raise DataError(str(exc)) from None
    intensity = frame.intensity.astype(float)
    counts, edges = np.histogram(intensity, bins=10, range=(0.0, 1.0))
    outside = int(np.sum((intensity < 0) | (intensity > 1)))
    print(f"frame: {frame.frame_id}")
    print(f"points: {len(frame)}")
    print("intensity histogram:")
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        print(f"  [{lo:.1f}, {hi:.1f}{']' if hi == 1.0 else ')'} {c}")
    if outside:
        print(f"intensity outside [0, 1]: {outside}")
    if args.manifest:
        try:
            manifest = PoisonManifest.from_dict(_read_json(args.manifest, "manifest"))
        except (KeyError, TypeError) as exc:
            raise DataError(f"manifest {args.manifest} is malformed: {exc}") from None
        entry = manifest.entry(frame.frame_id)
        if entry is None:
            print("poisoned: no")
        else:
            print("poisoned: yes")
            for key in ("target_index", "depth", "n_y", "n_z", "injected_point_count",
                        "original_dims", "rewritten_dims"):
                print(f"  {key}: {entry.get(key)}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lidar-trigger", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    materials = sub.add_parser("materials", help="material database commands")
    msub = materials.add_subparsers(dest="action", required=True, parser_class=_Parser)
    score = msub.add_parser("score", help="score and rank trigger materials")
    score.add_argument("--db", help="JSON material database overriding the builtin set")
    score.add_argument("--lambda", dest="tradeoff", type=float, default=DEFAULT_TRADEOFF,
                       help="weight on specular reflectance (default 0.2)")
    score.add_argument("--grid-points", type=int, default=81,
                       help="uniform incidence angles over [0, 80] degrees (default 81)")
    score.add_argument("--report", default="materials_score.json", help="JSON report path ('' to skip)")
    score.set_defaults(func=cmd_materials_score)

    trigger = sub.add_parser("trigger", help="trigger synthesis")
    tsub = trigger.add_subparsers(dest="action", required=True, parser_class=_Parser)
    synth = tsub.add_parser("synth", help="write a synthesized trigger patch as a .bin")
    synth.add_argument("--config", help="pipeline or trigger JSON config")
    synth.add_argument("--depth", type=float, required=True, help="target depth in metres")
    synth.add_argument("--out", required=True, help="output .bin path; a .json sidecar is written next to it")
    _trigger_flags(synth)
    synth.set_defaults(func=cmd_trigger_synth)

    poison = sub.add_parser("poison", help="dataset poisoning")
    psub = poison.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = psub.add_parser("run", help="write a poisoned copy of a KITTI-layout dataset")
    run.add_argument("--dataset", required=True, help="directory holding velodyne/, label_2/, calib/")
    run.add_argument("--out", required=True, help="output dataset directory")
    run.add_argument("--config", help="pipeline JSON config")
    run.add_argument("--poison-rate", type=float)
    run.add_argument("--target-class")
    run.add_argument("--objective", choices=["resizing", "disappearance"])
    run.add_argument("--scale-factor", type=float)
    run.add_argument("--placement-height-fraction", type=float)
    run.add_argument("--max-depth", type=float)
    run.add_argument("--depth-metric", choices=["euclidean", "forward"])
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--db", help="JSON material database for material lookups")
    run.set_defaults(func=cmd_poison)

    validate = sub.add_parser("validate", help="check the angle-independent intensity derivation")
    validate.add_argument("--samples", type=int, default=1_000_000)
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--report", default="validation_report.json", help="JSON report path ('' to skip)")
    validate.set_defaults(func=cmd_validate)

    inspect = sub.add_parser("inspect", help="summarise a velodyne .bin file")
    inspect.add_argument("frame")
    inspect.add_argument("--manifest", help="poison manifest to look the frame up in")
    inspect.set_defaults(func=cmd_inspect)
    return parser


def _trigger_flags(p):
    p.add_argument("--w", type=float, help="trigger width in metres")
    p.add_argument("--h", type=float, help="trigger height in metres")
    p.add_argument("--s", type=float, help="range scaling constant")
    p.add_argument("--m-l", dest="m_l", type=int, help="minimum points per axis")
    p.add_argument("--material", help="material name")
    p.add_argument("--intensity-mode", choices=["brdf", "fixed", "random", "none"])
    p.add_argument("--fixed-value", type=float)
    p.add_argument("--intensity-seed", type=int)
    p.add_argument("--db", help="JSON material database for material lookups")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
