"""Command-line front end: run, sweep, eval, report, teleop, config."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .core import DisturbanceLevel
from .env import AUTO2_THRESHOLDS, EnvConfig
from .harness import cmd_eval, cmd_report, cmd_run, cmd_sweep
from .learner import normalize_method
from .teleop import TeleopSession, serve


def _load_or_default(args) -> config_mod.ExperimentConfig:
    cfg = config_mod.load_config(args.config) if args.config else config_mod.ExperimentConfig()
    if getattr(args, "seeds", None):
        cfg = replace(cfg, seeds=tuple(args.seeds))
    if getattr(args, "methods", None):
        cfg = replace(cfg, methods=tuple(normalize_method(m) for m in args.methods))
    if getattr(args, "n_objects", None):
        cfg = config_mod.with_env(cfg, n_objects=args.n_objects)
    if getattr(args, "threshold", None):
        cfg = config_mod.with_env(cfg, auto2_threshold=AUTO2_THRESHOLDS[args.threshold.upper()])
    return cfg


def _add_common(p):
    p.add_argument("--config", type=Path, help="experiment config JSON file")
    p.add_argument("--seeds", type=int, nargs="+", help="override the config's seed list")
    p.add_argument("--methods", nargs="+", help="override the config's method list")
    p.add_argument("--output", type=Path, help="artifact directory")
    p.add_argument("--workers", type=int, default=1, help="parallel cell processes")
    p.add_argument("--n-objects", type=int, choices=(1, 2, 3), help="override object count")
    p.add_argument("--threshold", choices=("L", "M", "S"), help="override the carry hand-off design")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dipa",
        description="Robust imitation learning from partially automated demonstrations",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every (method, seed) of a config")
    _add_common(p_run)
    p_run.add_argument("--from-demos", type=Path, help="fit from existing trajectory files instead of collecting")

    p_sweep = sub.add_parser("sweep", help="run the p1 (task length) or p2 (threshold design) grid")
    p_sweep.add_argument("--suite", choices=("p1", "p2"), required=True)
    _add_common(p_sweep)

    p_eval = sub.add_parser("eval", help="evaluate a stored policy bundle")
    p_eval.add_argument("--bundle", type=Path, required=True, help="bundle checkpoint directory")
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--config", type=Path, help="experiment config JSON (for the env section)")
    p_eval.add_argument("--n-objects", type=int, choices=(1, 2, 3))
    p_eval.add_argument("--threshold", choices=("L", "M", "S"))

    p_report = sub.add_parser("report", help="aggregate artifacts into CSV tables")
    p_report.add_argument("--artifacts", type=Path, required=True)
    p_report.add_argument("--output", type=Path, help="where to write the CSVs (default: artifacts dir)")

    p_tele = sub.add_parser("teleop", help="host a live demonstration session")
    p_tele.add_argument("--port", type=int, default=8765)
    p_tele.add_argument("--host", default="127.0.0.1")
    p_tele.add_argument("--sigma", type=float, nargs="+", default=[0.0], help="disturbance variance (1 or 4 values)")
    p_tele.add_argument("--seed", type=int, default=0)
    p_tele.add_argument("--outdir", type=Path, default=Path("demos"))
    p_tele.add_argument("--n-objects", type=int, choices=(1, 2, 3), default=1)
    p_tele.add_argument("--threshold", choices=("L", "M", "S"), default="L")

    p_cfg = sub.add_parser("config", help="configuration helpers")
    cfg_sub = p_cfg.add_subparsers(dest="config_command", required=True)
    cfg_sub.add_parser("print-defaults", help="print the default experiment config as JSON")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "config":
        print(config_mod.default_config_json())
        return 0

    if args.command == "run":
        cfg = _load_or_default(args)
        if args.from_demos:
            from .harness import train_from_demos

            out = train_from_demos(cfg, args.from_demos, args.output)
            print(f"artifacts written to {out}")
            return 0
        out = cmd_run(cfg, out_dir=args.output, workers=args.workers)
        print(f"artifacts written to {out}")
        return 0

    if args.command == "sweep":
        cfg = _load_or_default(args)
        out = cmd_sweep(cfg, args.suite, out_dir=args.output, workers=args.workers)
        print(f"artifacts written to {out}")
        return 0

    if args.command == "eval":
        env_cfg = EnvConfig()
        if args.config:
            env_cfg = config_mod.load_config(args.config).env
        if args.n_objects:
            env_cfg = replace(env_cfg, n_objects=args.n_objects, t_max=None)
        if args.threshold:
            env_cfg = replace(env_cfg, auto2_threshold=AUTO2_THRESHOLDS[args.threshold.upper()])
        metrics = cmd_eval(args.bundle, env_cfg, args.episodes, args.seed)
        print(json.dumps(metrics.to_dict(), indent=2))
        return 0

    if args.command == "report":
        paths = cmd_report(args.artifacts, out_dir=args.output)
        for name, path in paths.items():
            print(f"{name}: {path}")
        return 0

    if args.command == "teleop":
        values = args.sigma if len(args.sigma) == 4 else [args.sigma[0]] * 4
        sigma = DisturbanceLevel(tuple(values), iteration_k=1 if not any(values) else 2)
        session = TeleopSession(
            env_config=EnvConfig(
                n_objects=args.n_objects, auto2_threshold=AUTO2_THRESHOLDS[args.threshold.upper()]
            ),
            sigma=sigma,
            seed=args.seed,
            out_dir=args.outdir,
        )
        print(f"teleop session on ws://{args.host}:{args.port} (sigma={values}, seed={args.seed})")
        try:
            asyncio.run(serve(session, host=args.host, port=args.port))
        except KeyboardInterrupt:
            print("stopped")
        return 0

    parser.error(f"unhandled command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
