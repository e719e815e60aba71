"""Run directories: training, dynamics fitting, analysis, sweeps.

A run directory holds ``manifest.json`` (written before training starts),
``stats.csv``, ``transitions.csv`` and ``qnet.mlp``. Analysis adds
``curve/histogram/ratios/logit.csv`` and three SVG plots.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis, svg
from .agents import DqnConfig, read_stats_csv, train_dqn, write_stats_csv
from .dynamics import build_dataset, load_handle, save_handle, train_dynamics
from .env import EnvConfig, TransitionLogWriter, Variant, read_transition_log
from .errors import ConfigurationError
from .neural_net import serialize

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
STATS = "stats.csv"
TRANSITIONS = "transitions.csv"
QNET = "qnet.mlp"
ANALYSIS_FILES = ("curve.csv", "histogram.csv", "ratios.csv", "logit.csv",
                  "curve.svg", "histogram.svg", "ratios.svg")


def default_out_root() -> Path:
    return Path(os.environ.get("COSTLY_OBS_OUT", "runs"))


def run_name(env_cfg: EnvConfig, seed: int) -> str:
    label = "vanilla" if env_cfg.fully_observed else env_cfg.variant.value
    return f"{label}_cost{env_cfg.obs_cost:g}_seed{seed}"


def _jsonable(cfg) -> dict:
    out = {}
    for k, v in dataclasses.asdict(cfg).items():
        if hasattr(v, "value"):
            v = v.value
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def write_manifest(run_dir: Path, env_cfg: EnvConfig, dqn_cfg: DqnConfig, dynamics_model=None) -> dict:
    manifest = {
        "env": _jsonable(env_cfg),
        "dqn": _jsonable(dqn_cfg),
        "seed": dqn_cfg.seed,
        "variant": "vanilla" if env_cfg.fully_observed else env_cfg.variant.value,
        "dynamics_model": str(dynamics_model) if dynamics_model else None,
        "version": __version__,
        "output_dir": str(run_dir),
        "regression_sample": "pooled across episodes",
    }
    with open(run_dir / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(run_dir) -> dict:
    with open(Path(run_dir) / MANIFEST) as fh:
        return json.load(fh)


def run_training(run_dir, env_cfg: EnvConfig, dqn_cfg: DqnConfig, dynamics_model=None) -> Path:
    """Train one DQN and write all run artifacts into ``run_dir``."""
    run_dir = Path(run_dir)
    imputer = None
    if env_cfg.variant is Variant.DYNAMICS_WITH_COUNTERS and not env_cfg.fully_observed:
        if dynamics_model is None:
            raise ConfigurationError("variant dynamics-counters requires a dynamics model file")
        imputer = load_handle(dynamics_model)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(run_dir, env_cfg, dqn_cfg, dynamics_model)
    with TransitionLogWriter(run_dir / TRANSITIONS) as writer:
        res = train_dqn(env_cfg, dqn_cfg, imputer, record=writer.write)
    write_stats_csv(run_dir / STATS, res.stats)
    (run_dir / QNET).write_text(serialize(res.qnet))
    log.info("run %s: %d episodes, %d transitions", run_dir, len(res.stats), res.n_transitions)
    return run_dir


def fit_dynamics(log_path, out_path, epochs: int = 50, lr: float = 0.001, seed: int = 0,
                 batch_size: int = 64, hidden=(64, 64)):
    """Train the forward model on a transition log and save it; returns the handle."""
    ds = build_dataset(log_path)
    if epochs == 0:
        log.warning("epochs=0: writing an untrained dynamics model")
    h = train_dynamics(ds, epochs=epochs, lr=lr, seed=seed, batch_size=batch_size, hidden=tuple(hidden))
    save_handle(h, out_path)
    return h


def summarize(stats, last: int = 50) -> dict:
    tail = stats[-last:]
    return {
        "mean_steps_last": float(np.mean([s.steps for s in tail])) if tail else float("nan"),
        "goal_rate": float(np.mean([s.reached_goal for s in stats])) if stats else float("nan"),
    }


def _require(run_dir: Path, name: str) -> Path:
    p = run_dir / name
    if not p.is_file():
        raise FileNotFoundError(f"missing input file: {p}")
    return p


def analyze_run(run_dir, out_dir=None, window: int = 25, data_range: bool = False) -> list[Path]:
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir
    out.mkdir(parents=True, exist_ok=True)
    stats = read_stats_csv(_require(run_dir, STATS))
    cols = read_transition_log(_require(run_dir, TRANSITIONS))
    variant = read_manifest(run_dir).get("variant", "") if (run_dir / MANIFEST).is_file() else ""

    analysis.write_curve_csv(out / "curve.csv", stats, window)
    table = analysis.build_histogram(cols, variant, data_range=data_range)
    analysis.write_histogram_csv(out / "histogram.csv", table)
    ratios = analysis.build_ratio_series(cols)
    analysis.write_ratios_csv(out / "ratios.csv", ratios)
    analysis.write_logit_csv(out / "logit.csv", analysis.observation_regressions(cols))

    raw, smooth = analysis.learning_curve(stats, window)
    ep = [s.episode for s in stats]
    (out / "curve.svg").write_text(svg.line_chart(
        {"steps": (ep, raw), f"mean ({window})": (ep, smooth)},
        title=f"Steps per episode: {variant}", xlabel="episode", ylabel="steps"))
    (out / "histogram.svg").write_text(svg.bar_chart(
        table.labels(), {"position obs %": table.pos_pct, "velocity obs %": table.vel_pct},
        title=f"Observation rate by car position: {variant}", xlabel="position bracket", ylabel="percent"))
    (out / "ratios.svg").write_text(svg.line_chart(
        {"position": (ratios.episode, ratios.pos_ratio), "velocity": (ratios.episode, ratios.vel_ratio),
         "none": (ratios.episode, ratios.none_ratio)},
        title=f"Observation ratio per episode: {variant}", xlabel="episode", ylabel="ratio of actions"))
    return [out / f for f in ANALYSIS_FILES]


def compare_runs(run_dirs, out_dir, window: int = 25) -> list[Path]:
    """Overlay learning curves of several runs (one series per run)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = {}
    for d in map(Path, run_dirs):
        stats = read_stats_csv(_require(d, STATS))
        label = read_manifest(d).get("variant", d.name) if (d / MANIFEST).is_file() else d.name
        if label in series:
            label = f"{label} ({d.name})"
        raw, smooth = analysis.learning_curve(stats, window)
        series[label] = (np.array([s.episode for s in stats]), raw, smooth)
    n = max(len(v[0]) for v in series.values())
    with open(out / "compare.csv", "w") as fh:
        fh.write(",".join(["episode"] + [f"{k}:{c}" for k in series for c in ("steps", "rolling_mean")]) + "\n")
        for i in range(n):
            row = [str(i)]
            for _, raw, smooth in series.values():
                row += ["%d" % raw[i], "%.9g" % smooth[i]] if i < raw.size else ["", ""]
            fh.write(",".join(row) + "\n")
    (out / "compare.svg").write_text(svg.line_chart(
        {k: (v[0], v[2]) for k, v in series.items()},
        title="Comparison of belief variants", xlabel="episode", ylabel=f"steps (mean of {window})"))
    return [out / "compare.csv", out / "compare.svg"]


# -- sweeps ---------------------------------------------------------------

_ORDER = [Variant.LOCF_NO_COUNTERS, Variant.LOCF_WITH_COUNTERS, Variant.DYNAMICS_WITH_COUNTERS]


def _run_group(args) -> list[dict]:
    """All requested variants for one (cost, seed); dynamics runs fit their
    model on this group's LOCF-with-counters log unless one is supplied."""
    root, variants, cost, seed, env_kw, dqn_kw, dyn_model, dyn_epochs = args
    rows = []
    made: dict[Variant, Path] = {}
    want = set(variants)
    if Variant.DYNAMICS_WITH_COUNTERS in want and dyn_model is None:
        want.add(Variant.LOCF_WITH_COUNTERS)
    for v in [v for v in _ORDER if v in want]:
        env_cfg = EnvConfig(variant=v, obs_cost=cost, **env_kw)
        dqn_cfg = DqnConfig(seed=seed, **dqn_kw)
        run_dir = Path(root) / run_name(env_cfg, seed)
        row = {"variant": v.value, "cost": cost, "seed": seed, "run_dir": str(run_dir)}
        try:
            model = dyn_model
            if v is Variant.DYNAMICS_WITH_COUNTERS and model is None:
                src = made.get(Variant.LOCF_WITH_COUNTERS)
                if src is None:
                    raise RuntimeError("no LOCF-with-counters log to fit the dynamics model on")
                model = src / "dynamics.mlp"
                fit_dynamics(src / TRANSITIONS, model, epochs=dyn_epochs, seed=seed)
            run_training(run_dir, env_cfg, dqn_cfg, model)
            made[v] = run_dir
            row.update(summarize(read_stats_csv(run_dir / STATS)), status="ok")
        except Exception as exc:  # recorded in the summary, sweep continues
            log.error("run %s failed: %s", run_dir, exc)
            row.update(mean_steps_last=float("nan"), goal_rate=float("nan"), status=f"error: {exc}")
        if v in variants:
            rows.append(row)
    return rows


def run_sweep(out_dir, variants, costs, seeds, env_kw=None, dqn_kw=None, dynamics_model=None,
              dynamics_epochs: int = 50, parallel: int = 1) -> Path:
    """Cross-product of variants x costs x seeds; writes ``sweep.csv``."""
    variants = [Variant(v) for v in variants]
    if not variants or not costs or not seeds:
        raise ConfigurationError("variants, costs and seeds must be non-empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(out), variants, float(c), int(s), dict(env_kw or {}), dict(dqn_kw or {}),
             dynamics_model, dynamics_epochs) for c in costs for s in seeds]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            groups = list(pool.map(_run_group, jobs))
    else:
        groups = [_run_group(j) for j in jobs]
    rows = [r for g in groups for r in g]
    rank = {v.value: i for i, v in enumerate(_ORDER)}
    rows.sort(key=lambda r: (rank[r["variant"]], r["cost"], r["seed"]))
    with open(out / "sweep.csv", "w") as fh:
        fh.write("variant,cost,seed,mean_steps_last50,goal_rate,status,run_dir\n")
        for r in rows:
            fh.write("{},{:g},{},{:.9g},{:.9g},{},{}\n".format(
                r["variant"], r["cost"], r["seed"], r["mean_steps_last"], r["goal_rate"],
                r["status"].replace(",", ";"), r["run_dir"]))
    return out / "sweep.csv"


def make_paper(out_dir, seed: int = 1, obs_cost: float = -8.0, episodes: int = 1000,
               step_cap: int = 20_000, dynamics_epochs: int = 50) -> Path:
    """LOCF, LOCF+counters, fit dynamics on the latter's log, dynamics+counters,
    then per-run analysis and the three-way comparison."""
    out = Path(out_dir)
    run_sweep(out, _ORDER, [obs_cost], [seed], env_kw={"step_cap": step_cap},
              dqn_kw={"episodes": episodes}, dynamics_epochs=dynamics_epochs)
    dirs = [out / run_name(EnvConfig(variant=v, obs_cost=obs_cost), seed) for v in _ORDER]
    for d in dirs:
        analyze_run(d)
    compare_runs(dirs, out)
    return out
