"""Command-line entry points for headless runs, sweeps, and the live service."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import engine as engine_mod
from . import server as server_mod
from .psl import CameraPose, project
from .storyboard import export_storyboard


def _setup_logging() -> None:
    level = os.environ.get("ANNOUNCER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        engine_mod.run_headless(args.scenario, args.config, args.duration, args.seed, args.out)
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON in input file: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    try:
        cfg, duration = engine_mod.load_engine_config(args.scenario, args.config, args.seed)
        if args.prefs is not None:
            from dataclasses import replace

            cfg = replace(cfg, prefs_path=str(args.prefs))
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON in input file: {exc}", file=sys.stderr)
        return 2
    run_for = args.duration if args.duration is not None else None
    try:
        asyncio.run(
            server_mod.serve(
                cfg, host=args.host, port=args.port, speed=args.speed, duration=run_for
            )
        )
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    try:
        summary = engine_mod.sweep(
            args.param,
            [float(v) for v in args.values],
            args.out,
            scenario_path=args.scenario,
            config_path=args.config,
            duration=args.duration,
            seed=args.seed,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0


def _cmd_verify_threshold(args: argparse.Namespace) -> int:
    rate = engine_mod.verify_threshold(args.n, args.f, args.trials, seed=args.seed)
    print(f"{rate:.4f}")
    return 0


def _cmd_storyboard(args: argparse.Namespace) -> int:
    try:
        written = export_storyboard(args.log, args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{len(written)} frames")
    return 0


def _cmd_golden(args: argparse.Namespace) -> int:
    """Reference projection vectors for cross-checking external renderers."""
    vectors = []
    poses = [
        CameraPose(position=(0.0, 0.0, 1.6), focus=(5.0, 0.0, 1.6), fov=math.radians(50.0)),
        CameraPose(position=(3.0, -2.0, 2.5), focus=(1.0, 1.0, 1.4), fov=math.radians(50.0)),
        CameraPose(position=(60.0, 40.0, 25.0), focus=(55.0, 38.0, 0.0), fov=math.radians(50.0)),
        CameraPose(position=(-4.0, 6.0, 0.9), focus=(2.0, 2.0, 1.8), fov=math.radians(65.0)),
    ]
    points = [
        (5.0, 0.0, 1.6),
        (4.0, 1.0, 1.0),
        (2.0, 2.0, 0.0),
        (50.0, 35.0, 1.7),
        (0.0, 0.0, 0.0),
        (-2.0, -2.0, 1.0),
        (1.5, 0.5, 3.0),
    ]
    for pi, pose in enumerate(poses):
        for point in points:
            (px, py), visible = project(pose, point, (1920, 1080))
            vectors.append(
                {
                    "pose": {
                        "pos": list(pose.position),
                        "focus": list(pose.focus),
                        "fov": pose.fov,
                    },
                    "point": list(point),
                    "px": None if math.isnan(px) else px,
                    "py": None if math.isnan(py) else py,
                    "visible": visible,
                }
            )
    Path(args.out).write_text(json.dumps(vectors, indent=1))
    print(f"{len(vectors)} vectors")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="announcer")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="headless run writing a shot log")
    run.add_argument("--scenario", type=Path, default=None)
    run.add_argument("--config", type=Path, default=None)
    run.add_argument("--duration", type=float, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", type=Path, required=True)
    run.set_defaults(func=_cmd_run)

    serve = sub.add_parser("serve", help="live streaming service")
    serve.add_argument("--scenario", type=Path, default=None)
    serve.add_argument("--config", type=Path, default=None)
    serve.add_argument("--seed", type=int, default=None)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=7654)
    serve.add_argument("--speed", type=float, default=1.0, help="sim seconds per wall second")
    serve.add_argument("--duration", type=float, default=None)
    serve.add_argument("--prefs", type=Path, default=None,
                       help="JSON file persisting per-session composition preferences")
    serve.set_defaults(func=_cmd_serve)

    sweep = sub.add_parser("sweep", help="parameter sweep with per-value logs")
    sweep.add_argument("--param", choices=engine_mod.SWEEP_PARAMS, required=True)
    sweep.add_argument("--values", nargs="+", required=True)
    sweep.add_argument("--scenario", type=Path, default=None)
    sweep.add_argument("--config", type=Path, default=None)
    sweep.add_argument("--duration", type=float, default=60.0)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", type=Path, required=True)
    sweep.set_defaults(func=_cmd_sweep)

    verify = sub.add_parser("verify-threshold", help="Monte-Carlo hit-rate check")
    verify.add_argument("--n", type=int, required=True)
    verify.add_argument("--f", type=float, required=True)
    verify.add_argument("--trials", type=int, default=100_000)
    verify.add_argument("--seed", type=int, default=12345)
    verify.set_defaults(func=_cmd_verify_threshold)

    storyboard = sub.add_parser("storyboard", help="SVG frame per hold phase of a log")
    storyboard.add_argument("--log", type=Path, required=True)
    storyboard.add_argument("--out", type=Path, required=True)
    storyboard.set_defaults(func=_cmd_storyboard)

    golden = sub.add_parser("golden", help="export reference projection vectors")
    golden.add_argument("--out", type=Path, required=True)
    golden.set_defaults(func=_cmd_golden)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
