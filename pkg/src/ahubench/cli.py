"""Command-line interface.

    ahubench simulate --mode onoff --out traj.csv
    ahubench train --timesteps 300000 --seed 42 --out ppo.json
    ahubench evaluate --mode ppo --policy ppo.json
    ahubench compare --policy ppo=ppo.json --policy ppo-econ=econ.json --out report.json
    ahubench validate-scenario --scenario nominal.toml

Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ahubench.control import Mode
from ahubench.errors import AhuBenchError, ConfigError
from ahubench.harness import compare, run_episode
from ahubench.rl.policy import Policy, policy_load, policy_save
from ahubench.rl.ppo import PPOTrainer
from ahubench.scenario import Scenario, load_scenario

log = logging.getLogger("ahubench")

MODE_CHOICES = [m.value for m in Mode]
LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, *, mode: bool = True) -> None:
    p.add_argument("--scenario", type=Path, help="TOML scenario file (defaults: built-in nominal day)")
    if mode:
        p.add_argument("--mode", choices=MODE_CHOICES, help="controller mode")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float, help="physics step in seconds")
    p.add_argument("--control-interval", type=float, help="agent control interval in seconds")
    p.add_argument("--quiet", action="store_true", help="suppress non-essential output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ahubench", description="AHU control benchmark: physics, PPO training, comparison")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one episode and write the trajectory CSV")
    _common(p)
    p.add_argument("--policy", type=Path, help="policy file for learned modes")
    p.add_argument("--out", type=Path, required=True, help="trajectory CSV path")

    p = sub.add_parser("train", help="train a PPO policy")
    _common(p)
    p.add_argument("--timesteps", type=int, help="agent steps to train for")
    p.add_argument("--out", type=Path, required=True, help="policy JSON path")
    p.add_argument("--progress", type=Path, help="training progress CSV path")

    p = sub.add_parser("evaluate", help="metrics for a saved policy")
    _common(p)
    p.add_argument("--policy", type=Path, required=True)
    p.add_argument("--out", type=Path, help="metrics JSON path (default: stdout)")

    p = sub.add_parser("compare", help="run several controllers on one scenario")
    _common(p, mode=False)
    p.add_argument("--mode", choices=MODE_CHOICES, action="append",
                   help="mode to include (repeatable; default: all four)")
    p.add_argument("--policy", action="append", default=[], metavar="[MODE=]PATH",
                   help="policy for a learned mode; a bare PATH applies to every learned mode")
    p.add_argument("--timesteps", type=int, help="training length with --train-missing")
    p.add_argument("--train-missing", action="store_true",
                   help="train policies for learned modes that have none (kept in memory)")
    p.add_argument("--out", type=Path, help="report JSON path")

    p = sub.add_parser("validate-scenario", help="parse a scenario and print the resolved config")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--quiet", action="store_true")
    return parser


def _configure_logging(quiet: bool) -> None:
    level_name = os.environ.get("AHU_LOG", "warning").strip().lower()
    level = LOG_LEVELS.get(level_name, logging.WARNING)
    if quiet:
        level = max(level, logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
                        force=True)


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario)
    mode = getattr(args, "mode", None)
    return sc.with_overrides(
        mode=mode if isinstance(mode, str) else None,
        dt=args.dt, seed=args.seed, timesteps=getattr(args, "timesteps", None),
        control_interval=args.control_interval)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _metrics_json(metrics) -> str:
    return json.dumps(metrics.to_dict(), indent=2) + "\n"


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    mode = sc.controller.mode
    policy = None
    if mode.is_rl:
        if args.policy is None:
            raise UsageError(f"simulate --mode {mode.value} needs --policy")
        policy = policy_load(args.policy)
    traj, metrics = run_episode(mode, policy, sc, args.control_interval)
    traj.to_csv(args.out)
    if not args.quiet:
        sys.stdout.write(_metrics_json(metrics))
    return 0


def _train(sc: Scenario, mode: Mode, progress: Path | None = None) -> Policy:
    rl_mode = mode if mode.is_rl else Mode.PPO_FIXED
    trainer = PPOTrainer(sc, sc.ppo, rl_mode)
    log.info("training %s for %d timesteps (seed %d)", rl_mode.value, sc.ppo.total_timesteps, sc.ppo.seed)
    policy = trainer.train()
    if progress is not None:
        trainer.write_progress(progress)
    return policy


def cmd_train(args) -> int:
    sc = _scenario(args)
    mode = Mode.parse(args.mode) if args.mode else Mode.PPO_FIXED
    if not mode.is_rl:
        raise UsageError("train --mode must be ppo or ppo-econ")
    policy = _train(sc, mode, args.progress)
    policy_save(policy, args.out)
    if not args.quiet:
        print(f"wrote {args.out} ({policy.metadata['timesteps']} timesteps)")
    return 0


def cmd_evaluate(args) -> int:
    sc = _scenario(args)
    policy = policy_load(args.policy)
    mode = Mode.parse(args.mode) if args.mode else Mode.parse(policy.metadata.get("mode", "ppo"))
    if not mode.is_rl:
        raise UsageError("evaluate --mode must be ppo or ppo-econ")
    _, metrics = run_episode(mode, policy, sc, args.control_interval)
    _emit(_metrics_json(metrics), args.out)
    return 0


def _parse_policy_flags(values: list[str], modes: list[Mode]) -> dict[Mode, Path]:
    paths: dict[Mode, Path] = {}
    for item in values:
        if "=" in item:
            key, _, path = item.partition("=")
            try:
                mode = Mode.parse(key)
            except ConfigError as exc:
                raise UsageError(f"--policy {item}: {exc}") from None
            if not mode.is_rl:
                raise UsageError(f"--policy {item}: {mode.value} is not a learned mode")
            paths[mode] = Path(path)
        else:
            for mode in modes:
                if mode.is_rl:
                    paths.setdefault(mode, Path(item))
    return paths


def cmd_compare(args) -> int:
    sc = _scenario(args)
    modes = [Mode.parse(m) for m in args.mode] if args.mode else list(Mode)
    paths = _parse_policy_flags(args.policy, modes)
    policies: dict[Mode, Policy] = {}
    for mode in modes:
        if not mode.is_rl:
            continue
        if mode in paths:
            policies[mode] = policy_load(paths[mode])
        elif args.train_missing:
            policies[mode] = _train(sc, mode)
        else:
            raise UsageError(f"no policy for mode {mode.value}; pass --policy or --train-missing")
    report = compare(modes, policies, sc)
    if args.out is not None:
        args.out.write_text(report.to_json(), encoding="utf-8")
    if not args.quiet:
        sys.stdout.write(report.table())
    return 0


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    if not args.quiet:
        sys.stdout.write(json.dumps(sc.to_dict(), indent=2) + "\n")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "validate-scenario": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    _configure_logging(getattr(args, "quiet", False))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (AhuBenchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
