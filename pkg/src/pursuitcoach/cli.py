"""Command-line entry point.

Subcommands: run (headless cycle per seed, scripted oracle), serve (live
session service), replay (re-run a recorded session headlessly), ablate
(single-modality variants vs the full cycle). Exit codes: 0 success,
1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import orchestrator, session
from .config import STAGE_ORDER, CycleConfig, StagePlan, load_config
from .errors import ConfigError, PursuitCoachError

ABLATE_STAGES = {
    "lfd-only": ("demonstration", "rl"),
    "lfi-only": ("intervention", "rl"),
    "lfe-only": ("evaluation", "rl"),
    "full": STAGE_ORDER,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pursuitcoach")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config YAML")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, action="append", default=None,
                       help="seed override; repeatable")
        p.add_argument("--episodes", type=int, default=None,
                       help="override every stage's episode cap")

    p_run = sub.add_parser("run", help="headless cycle with the scripted oracle")
    common(p_run)

    p_serve = sub.add_parser("serve", help="live session service for a human trainer")
    common(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--tick-ms", type=int, default=300)

    p_replay = sub.add_parser("replay", help="re-run a recorded session headlessly")
    common(p_replay)
    p_replay.add_argument("--log", required=True, help="session log to replay")

    p_ablate = sub.add_parser("ablate", help="run a single-modality variant")
    common(p_ablate)
    p_ablate.add_argument("--mode", required=True, choices=sorted(ABLATE_STAGES))
    return parser


def _apply_overrides(config: CycleConfig, args) -> CycleConfig:
    if args.out is not None:
        config = dataclasses.replace(config, output_dir=args.out)
    if args.seed:
        config = dataclasses.replace(config, seeds=tuple(args.seed))
    if args.episodes is not None:
        stages = {
            name: StagePlan(switch=plan.switch, cap=max(args.episodes, plan.switch.min_episodes))
            for name, plan in config.stages.items()
        }
        config = dataclasses.replace(config, stages=stages)
    config.validate()
    return config


def _run_seeds(config: CycleConfig, stages, mode: str | None) -> int:
    os.makedirs(config.output_dir, exist_ok=True)
    reports = []
    for seed in config.seeds:
        oracle = orchestrator.make_oracle(config, seed)
        report = orchestrator.run_cycle(config, oracle, seed, stages=stages)
        orchestrator.write_metrics(
            report.records, os.path.join(config.output_dir, f"metrics_seed{seed}.csv")
        )
        reports.append(report)
        print(f"seed {seed}: {len(report.records)} episodes, "
              f"final greedy score {report.final_eval_score}")
    extra = {"mode": mode} if mode else None
    orchestrator.write_summary(
        reports, os.path.join(config.output_dir, "summary.json"), extra=extra
    )
    return 0


def _cmd_run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    return _run_seeds(config, stages=None, mode=None)


def _cmd_ablate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    return _run_seeds(config, stages=ABLATE_STAGES[args.mode], mode=args.mode)


def _cmd_serve(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    os.makedirs(config.output_dir, exist_ok=True)
    seed = config.seeds[0]
    session_log = os.path.join(config.output_dir, f"session_seed{seed}.ndjson")
    print(f"serving on ws://{args.host}:{args.port} (tick {args.tick_ms} ms); "
          f"session log: {session_log}")
    session.serve(
        config, seed, host=args.host, port=args.port, tick_ms=args.tick_ms,
        session_log=session_log, out_dir=config.output_dir,
    )
    return 0


def _cmd_replay(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    os.makedirs(config.output_dir, exist_ok=True)
    source, seed = session.replay_session(args.log, config)
    report = orchestrator.run_cycle(config, source, seed)
    orchestrator.write_metrics(
        report.records, os.path.join(config.output_dir, f"metrics_seed{seed}.csv")
    )
    orchestrator.write_summary(
        [report], os.path.join(config.output_dir, "summary.json"), extra={"replayed": args.log}
    )
    print(f"replayed seed {seed}: {len(report.records)} episodes")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "serve": _cmd_serve,
        "replay": _cmd_replay,
        "ablate": _cmd_ablate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except PursuitCoachError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
