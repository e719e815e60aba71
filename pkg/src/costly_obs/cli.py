"""Command line: ``costly-obs {train,fit-dynamics,analyze,sweep,make-paper}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .agents import DqnConfig
from .dynamics import format_metrics
from .env import CostMode, EnvConfig, Variant
from .errors import ConfigurationError

log = logging.getLogger("costly_obs")


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _variant_list(text: str) -> list[Variant]:
    try:
        return [Variant(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step-cap", type=int, default=20_000)
    p.add_argument("--cost-mode", choices=[m.value for m in CostMode], default=CostMode.PER_VARIABLE.value)


def _add_dqn_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epsilon-init", type=float, default=1.0)
    p.add_argument("--epsilon-decay", type=float, default=0.995)
    p.add_argument("--epsilon-min", type=float, default=0.01)
    p.add_argument("--epsilon-per-step", action="store_true")
    p.add_argument("--replay-capacity", type=int, default=50_000)
    p.add_argument("--target-sync", type=int, default=1000)
    p.add_argument("--hidden", type=_int_list, default=[64, 64])
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")


def _dqn_kw(a) -> dict:
    return dict(episodes=a.episodes, lr=a.lr, gamma=a.gamma, batch_size=a.batch_size,
                epsilon_init=a.epsilon_init, epsilon_decay=a.epsilon_decay, epsilon_min=a.epsilon_min,
                epsilon_per_step=a.epsilon_per_step, replay_capacity=a.replay_capacity,
                target_sync_interval=a.target_sync, hidden=tuple(a.hidden), optimizer=a.optimizer)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="costly-obs", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file overriding flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one DQN run")
    p.add_argument("--variant", choices=[v.value for v in Variant] + ["vanilla"], required=True)
    p.add_argument("--obs-cost", type=float, default=-8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dynamics-model", help="model file from fit-dynamics (dynamics-counters only)")
    p.add_argument("--out", help="run directory (default: $COSTLY_OBS_OUT/<variant>_cost<c>_seed<s>)")
    _add_env_flags(p)
    _add_dqn_flags(p)

    p = sub.add_parser("fit-dynamics", help="train the forward dynamics model on a transition log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--hidden", type=_int_list, default=[64, 64])

    p = sub.add_parser("analyze", help="write analysis tables and plots for run directories")
    p.add_argument("--run", help="run directory to analyze")
    p.add_argument("--compare", nargs="+", metavar="DIR", help="overlay learning curves of these runs")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.add_argument("--window", type=int, default=25)
    p.add_argument("--data-range", action="store_true", help="brackets span visited positions only")

    p = sub.add_parser("sweep", help="train the cross-product of variants x costs x seeds")
    p.add_argument("--variants", type=_variant_list,
                   default=[Variant.LOCF_NO_COUNTERS, Variant.LOCF_WITH_COUNTERS, Variant.DYNAMICS_WITH_COUNTERS])
    p.add_argument("--obs-costs", type=_float_list, default=[-8.0])
    p.add_argument("--seeds", type=_int_list, default=[1])
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--dynamics-model")
    p.add_argument("--dynamics-epochs", type=int, default=50)
    p.add_argument("--out")
    _add_env_flags(p)
    _add_dqn_flags(p)

    p = sub.add_parser("make-paper", help="three-variant pipeline plus analysis and comparison")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--obs-cost", type=float, default=-8.0)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--step-cap", type=int, default=20_000)
    p.add_argument("--dynamics-epochs", type=int, default=50)
    p.add_argument("--out")
    return parser


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        overrides = read_config_file(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    sub = next(a for a in parser._subparsers._group_actions).choices[args.command]
    known = {a.dest: a for a in sub._actions}
    typed = {}
    for k, v in overrides.items():
        if k not in known or k == "help":
            raise UsageError(f"unknown config key {k!r} for {args.command}")
        act = known[k]
        if act.const is True and act.nargs == 0:
            typed[k] = v.lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            try:
                typed[k] = act.type(v)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {k}: {exc}") from None
        else:
            typed[k] = v
    sub.set_defaults(**typed)
    return parser.parse_args(argv)


def cmd_train(a) -> int:
    fully = a.variant == "vanilla"
    env_cfg = EnvConfig(variant=Variant.LOCF_NO_COUNTERS if fully else Variant(a.variant),
                        obs_cost=0.0 if fully else a.obs_cost, step_cap=a.step_cap,
                        cost_mode=a.cost_mode, fully_observed=fully)
    if env_cfg.variant is Variant.DYNAMICS_WITH_COUNTERS and not a.dynamics_model:
        raise UsageError("--variant dynamics-counters requires --dynamics-model PATH")
    dqn_cfg = DqnConfig(seed=a.seed, **_dqn_kw(a))
    out = Path(a.out) if a.out else experiment.default_out_root() / experiment.run_name(env_cfg, a.seed)
    experiment.run_training(out, env_cfg, dqn_cfg, a.dynamics_model)
    print(out)
    return 0


def cmd_fit_dynamics(a) -> int:
    if not Path(a.log).is_file():
        raise UsageError(f"log file not found: {a.log}")
    h = experiment.fit_dynamics(a.log, a.out, epochs=a.epochs, lr=a.lr, seed=a.seed,
                                batch_size=a.batch_size, hidden=a.hidden)
    if h.metrics:
        print(format_metrics(h.metrics))
    return 0


def cmd_analyze(a) -> int:
    if not a.run and not a.compare:
        raise UsageError("give --run DIR and/or --compare DIR...")
    for d in ([a.run] if a.run else []) + (a.compare or []):
        if not Path(d).is_dir():
            raise UsageError(f"run directory not found: {d}")
    if a.run:
        for f in experiment.analyze_run(a.run, a.out, a.window, a.data_range):
            print(f)
    if a.compare:
        for f in experiment.compare_runs(a.compare, a.out or a.run or ".", a.window):
            print(f)
    return 0


def cmd_sweep(a) -> int:
    if not a.variants:
        raise UsageError("--variants must name at least one variant")
    if not a.obs_costs or not a.seeds:
        raise UsageError("--obs-costs and --seeds must be non-empty")
    out = Path(a.out) if a.out else experiment.default_out_root() / "sweep"
    path = experiment.run_sweep(out, a.variants, a.obs_costs, a.seeds,
                                env_kw={"step_cap": a.step_cap, "cost_mode": a.cost_mode},
                                dqn_kw=_dqn_kw(a), dynamics_model=a.dynamics_model,
                                dynamics_epochs=a.dynamics_epochs, parallel=a.parallel)
    print(path)
    return 0


def cmd_make_paper(a) -> int:
    out = Path(a.out) if a.out else experiment.default_out_root() / "paper"
    print(experiment.make_paper(out, a.seed, a.obs_cost, a.episodes, a.step_cap, a.dynamics_epochs))
    return 0


COMMANDS = {
    "train": cmd_train,
    "fit-dynamics": cmd_fit_dynamics,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "make-paper": cmd_make_paper,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"costly-obs: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"costly-obs: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"costly-obs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
