"""Command-line entry points for worlds, sampling, training, and serving."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import runs as runs_mod
from . import world as world_mod
from .runs import RunConfig, load_config_file


def _base_config(args, need_out: bool = True) -> RunConfig:
    if getattr(args, "config", None):
        try:
            cfg = load_config_file(args.config)
        except ValueError as exc:
            print(f"config errors:\n  {exc}", file=sys.stderr)
            raise SystemExit(2)
    else:
        cfg = RunConfig()
    if getattr(args, "preset", None):
        cfg.preset = args.preset
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    errors = cfg.validate()
    if need_out and not cfg.out_dir:
        errors.append("out_dir: required (use --out)")
    if errors:
        print("config errors:", file=sys.stderr)
        for e in errors:
            print(f"  - {e}", file=sys.stderr)
        raise SystemExit(2)
    return cfg


def _add_common(p, out: bool = True):
    p.add_argument("--config", help="YAML/JSON run config file")
    p.add_argument("--preset", help="world preset name")
    p.add_argument("--seed", type=int, default=None)
    if out:
        p.add_argument("--out", help="run output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="censorlab",
        description="Censored diffusion sampling laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_world = sub.add_parser("world", help="list or show world presets")
    world_sub = p_world.add_subparsers(dest="world_command", required=True)
    world_sub.add_parser("list")
    p_show = world_sub.add_parser("show")
    p_show.add_argument("name")

    p_sample = sub.add_parser("sample", help="unguided or exact-guided sampling")
    _add_common(p_sample)
    p_sample.add_argument("--n", type=int, default=1000)
    p_sample.add_argument("--guided", action="store_true",
                          help="guide with the exact oracle reward")

    p_train = sub.add_parser("train-reward", help="train one reward model")
    _add_common(p_train)
    p_train.add_argument("--quota", default="10,10",
                         help="malign,benign labels to keep")

    p_ens = sub.add_parser("ensemble", help="train the bootstrap reward ensemble")
    _add_common(p_ens)

    p_imit = sub.add_parser("imitate", help="multi-round feedback loop (oracle)")
    _add_common(p_imit)
    p_imit.add_argument("--rounds", type=int, default=None)
    p_imit.add_argument("--quota", default=None, help="malign,benign per round")
    p_imit.add_argument("--annotator", choices=["oracle"], default="oracle")
    p_imit.add_argument("--eval-n", type=int, default=0)

    p_rej = sub.add_parser("reject", help="rejection-sampling baseline")
    _add_common(p_rej)
    p_rej.add_argument("--threshold", type=float, default=0.5)
    p_rej.add_argument("--n-target", type=int, default=1000)

    p_eval = sub.add_parser("eval", help="multi-arm comparison")
    _add_common(p_eval)
    p_eval.add_argument("--arms", default="baseline,ensemble")
    p_eval.add_argument("--trials", type=int, default=5)
    p_eval.add_argument("--n", type=int, default=500)

    p_plot = sub.add_parser("plotdata", help="emit plot-ready CSV from a run")
    p_plot.add_argument("--run", required=True, help="run directory")
    p_plot.add_argument("--kind", choices=["arms", "rounds", "drift"], default="arms")
    p_plot.add_argument("--out", help="output CSV path (default: stdout)")

    p_replay = sub.add_parser("replay", help="re-execute a run record")
    p_replay.add_argument("--run", required=True)

    p_serve = sub.add_parser("serve", help="run the annotation service")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--run-id", default="run")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)

    if args.command == "world":
        if args.world_command == "list":
            for name in world_mod.list_presets():
                w = world_mod.make_preset(name)
                print(f"{name}: {w.n_components} modes, "
                      f"malign mass {w.malign_mass:.3f}")
        else:
            w = world_mod.make_preset(args.name)
            print(json.dumps(
                {"name": args.name, "malign_mass": w.malign_mass,
                 "components": w.to_records()}, indent=2))
        return 0

    if args.command == "sample":
        cfg = _base_config(args)
        out = runs_mod.run_sample(cfg, args.n, guided=args.guided)
        print(json.dumps(out, indent=2))
        return 0

    if args.command == "train-reward":
        cfg = _base_config(args)
        qm, qb = (int(v) for v in args.quota.split(","))
        cfg.feedback = {**cfg.feedback, "quota": [qm, qb]}
        print(json.dumps(runs_mod.run_train_reward(cfg), indent=2))
        return 0

    if args.command == "ensemble":
        cfg = _base_config(args)
        print(json.dumps(runs_mod.run_ensemble(cfg), indent=2))
        return 0

    if args.command == "imitate":
        cfg = _base_config(args)
        if args.rounds is not None:
            cfg.feedback = {**cfg.feedback, "rounds": args.rounds}
        if args.quota is not None:
            qm, qb = (int(v) for v in args.quota.split(","))
            cfg.feedback = {**cfg.feedback, "quota": [qm, qb]}
        if args.eval_n:
            cfg.eval = {**cfg.eval, "n": args.eval_n}
        print(json.dumps(runs_mod.run_imitate(cfg), indent=2))
        return 0

    if args.command == "reject":
        cfg = _base_config(args)
        print(json.dumps(runs_mod.run_reject(cfg, args.threshold, args.n_target),
                         indent=2))
        return 0

    if args.command == "eval":
        cfg = _base_config(args)
        arms = [a.strip() for a in args.arms.split(",") if a.strip()]
        out = runs_mod.run_eval(cfg, arms, args.trials, args.n)
        print(json.dumps(out, indent=2))
        return 0

    if args.command == "plotdata":
        from pathlib import Path

        run_dir = Path(args.run)
        if args.kind == "drift":
            raw = json.loads((run_dir / "config.json").read_text())
            cfg = RunConfig.from_dict(raw)
            text = runs_mod.drift_field_csv(cfg, times=[0.1, 0.5, 0.9])
        else:
            src = run_dir / "metrics" / f"{args.kind}.csv"
            if not src.exists():
                print(f"no {src} in run", file=sys.stderr)
                return 2
            text = src.read_text()
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0

    if args.command == "replay":
        out = runs_mod.replay(args.run)
        print(json.dumps(out, indent=2))
        return 0 if out["identical"] else 1

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        cfg = load_config_file(args.config)
        app = create_app({args.run_id: cfg})
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
