"""Command-line front end.

Subcommands: gen (synthetic objects), annotate (contact maps from a hand
pose), optimize (grasp synthesis), evaluate (quality metrics), bench (the
full suite with optional ablations).  Every command is deterministic given
its config and seed; the resolved config is echoed into each output
artifact.  Errors print a machine-readable JSON object on stderr and exit
nonzero.  File formats are documented in docs/formats.md.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import (
    ABLATION_FLAGS,
    RunConfig,
    apply_ablation,
    load_run_config,
    run_config_from_dict,
)
from .contact import ObjectCloud, annotate, load_contact_map, save_contact_map
from .errors import GraspSynthError, InvalidArgumentError, ParseError
from .hand import HandPose, fk_state, forward_kinematics, rest_pose
from .io import dump_json, load_json, save_hand_surface
from .metrics import evaluate_grasp
from .objects import (
    GRASP_STYLES,
    SHAPE_SUITE,
    ObjectSpec,
    load_object,
    make_object,
    save_object,
    scripted_reference_grasp,
)
from .optimizer import OptimConfig, optimize


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    optimizer = cfg.optimizer.to_dict()
    if getattr(args, "seed", None) is not None:
        optimizer["seed"] = args.seed
    if getattr(args, "directions", None) is not None:
        optimizer["directions"] = args.directions
    if getattr(args, "iters", None) is not None:
        optimizer["iterations"] = args.iters
    if getattr(args, "drop_p", None) is not None:
        optimizer["drop"] = {**optimizer["drop"], "probability": args.drop_p}
    if getattr(args, "finger_weights", None) is not None:
        parts = [float(v) for v in args.finger_weights.split(",")]
        if len(parts) != 5:
            raise InvalidArgumentError(
                "finger-weights needs five comma-separated values (thumb,index,middle,ring,pinky)"
            )
        optimizer["finger_weights"] = parts
    if getattr(args, "trajectory", False):
        optimizer["trajectory_every"] = 25
    cfg = run_config_from_dict({**cfg.to_dict(), "optimizer": optimizer})
    if getattr(args, "ablate", None):
        cfg = apply_ablation(cfg, args.ablate)
    return cfg


def cmd_gen(args) -> int:
    out = Path(args.out)
    if args.suite:
        for name, spec, _style in SHAPE_SUITE:
            obj = make_object(
                ObjectSpec(spec.kind, spec.dimensions, spec.count, seed=args.seed)
            )
            save_object(obj, out / name)
        return 0
    if not args.kind:
        raise InvalidArgumentError("either --suite or --kind is required")
    dims = tuple(float(v) for v in args.dims.split(","))
    spec = ObjectSpec(args.kind, dims, count=args.count, seed=args.seed)
    obj = make_object(spec)
    save_object(obj, out)
    dump_json(spec.to_dict(), out / "spec.json")
    return 0


def _load_pose(path) -> HandPose:
    data = load_json(path)
    if "pose" in data:
        data = data["pose"]
    try:
        return HandPose.from_dict(data)
    except KeyError as exc:
        raise ParseError(f"missing pose field {exc}", path=path) from None


def cmd_annotate(args) -> int:
    cfg = _load_config(args)
    obj = load_object(args.object)
    if args.hand_pose:
        pose = _load_pose(args.hand_pose)
    elif args.style:
        pose = scripted_reference_grasp(obj, args.style)
    else:
        raise InvalidArgumentError("provide --hand-pose or --style")
    surface = forward_kinematics(pose)
    k = args.k if args.k is not None else cfg.annotation.k_neighbors
    labeled = annotate(
        surface, obj.cloud, k_neighbors=k, contact_radius=cfg.annotation.contact_radius
    )
    save_contact_map(labeled, args.out)
    if args.hand_out:
        save_hand_surface(surface, args.hand_out)
    return 0


def cmd_optimize(args) -> int:
    cfg = _load_config(args)
    cloud = load_contact_map(args.map)
    cloud.require_labels()
    result = optimize(cloud, cfg.optimizer)
    out = Path(args.out)
    payload = {
        "config": cfg.to_dict(),
        "result": result.to_dict(),
    }
    dump_json(payload, out / "result.json")
    if cfg.optimizer.trajectory_every > 0:
        for iteration, pose in result.trajectory:
            save_hand_surface(
                fk_state(pose).surface,
                out / f"trajectory_{iteration:04d}.ply",
                comments=[f"iteration {iteration}"],
            )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    obj = load_object(args.object)
    pose = _load_pose(args.grasp)
    bundle = evaluate_grasp(pose, obj, cfg.simulation)
    dump_json({"config": cfg.to_dict(), "metrics": bundle.to_dict()}, args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    ablations = ["none"]
    if args.ablate_all:
        ablations += list(ABLATION_FLAGS)
    elif args.ablate:
        ablations = [args.ablate]
    shapes = args.shapes.split(",") if args.shapes else None

    def progress(row):
        if not args.quiet:
            flag = "ok " if row["success"] else "FAIL"
            print(
                f"[{flag}] {row['ablation']:>4} {row['shape']:9s} seed={row['seed']} "
                f"vol={row['volume_cm3']:6.2f} disp={row['displacement_cm']:7.2f}",
                file=sys.stderr,
            )

    rows = bench_mod.run_benchmark(
        cfg,
        seeds=range(args.seeds),
        shapes=shapes,
        ablations=ablations,
        workers=args.workers,
        progress=progress,
    )
    out = Path(args.out)
    bench_mod.write_reports(rows, out)
    dump_json(cfg.to_dict(), out / "config.json")
    for line in bench_mod.summarize(rows):
        print(
            f"{line['ablation']:>4}: {line['successes']}/{line['runs']} "
            f"({line['success_rate']:.0%})"
        )
    return 0


def cmd_hand(args) -> int:
    pose = _load_pose(args.pose) if args.pose else rest_pose()
    save_hand_surface(forward_kinematics(pose), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graspsynth",
        description="Fingertip contact maps and directional-consistency grasp optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic object (cloud + solid)")
    p.add_argument("--kind", choices=["sphere", "box", "cylinder", "capsule"])
    p.add_argument("--dims", help="comma-separated dimensions in metres")
    p.add_argument("--count", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suite", action="store_true", help="emit the whole shape suite")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("annotate", help="label an object cloud from a hand pose")
    p.add_argument("--object", required=True, help="object directory from gen")
    p.add_argument("--hand-pose", help="pose JSON file")
    p.add_argument("--style", choices=list(GRASP_STYLES), help="scripted grasp instead of a pose file")
    p.add_argument("--k", type=int)
    p.add_argument("--config")
    p.add_argument("--hand-out", help="also write the posed hand surface PLY")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("optimize", help="synthesize a grasp for a contact map")
    p.add_argument("--map", required=True, help="labelled contact-map PLY")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--directions", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--drop-p", type=float)
    p.add_argument("--finger-weights", help="five reals: thumb,index,middle,ring,pinky")
    p.add_argument("--ablate", choices=list(ABLATION_FLAGS))
    p.add_argument("--trajectory", action="store_true", help="export pose snapshots every 25 iterations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="penetration/displacement metrics for a grasp")
    p.add_argument("--grasp", required=True, help="result JSON (or pose JSON)")
    p.add_argument("--object", required=True, help="object directory from gen")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="run the benchmark suite")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--shapes", help="comma-separated subset of suite shapes")
    p.add_argument("--ablate", choices=list(ABLATION_FLAGS))
    p.add_argument("--ablate-all", action="store_true")
    p.add_argument("--workers", type=int)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--directions", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--drop-p", type=float)
    p.add_argument("--finger-weights")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("hand", help="export the hand surface for a pose")
    p.add_argument("--pose", help="pose JSON (default: rest pose)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hand)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        json.dump({"error": "parse", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except InvalidArgumentError as exc:
        json.dump({"error": "invalid-argument", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except GraspSynthError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
