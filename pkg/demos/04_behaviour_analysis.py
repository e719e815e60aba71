#!/usr/bin/env python3
"""Where does a trained agent pay to look?

Trains a short run, then builds the position histogram of observations,
the per-episode observation ratios, and the logistic regressions of
"observed velocity" on position.
"""
# %%
import tempfile
from pathlib import Path

import numpy as np

from costly_obs.agents import DqnConfig
from costly_obs.analysis import build_histogram, build_ratio_series, observation_regressions
from costly_obs.env import EnvConfig, read_transition_log
from costly_obs.experiment import run_training

out = Path(tempfile.mkdtemp()) / "run"
run_training(out, EnvConfig(variant="locf-counters", obs_cost=-8.0, step_cap=3000),
             DqnConfig(episodes=30, seed=2))
log = read_transition_log(out / "transitions.csv")

# %% observation rate per position bracket
table = build_histogram(log)
for label, n, pp, vp in zip(table.labels(), table.actions, table.pos_pct, table.vel_pct):
    print(f"{label:>16}  actions {n:6d}  pos seen {pp:5.1f}%  vel seen {vp:5.1f}%")

# %% the no-look share climbs as exploration decays
ratios = build_ratio_series(log)
print("share of steps with no observation, every 5th episode:", np.round(ratios.none_ratio[::5], 2))

# %%
for name, fit in observation_regressions(log).items():
    if fit is None:
        print(name, ": one outcome class only, no fit")
    else:
        print(name, "slope", round(fit.slope, 3), "p", fit.p_values[1], "separation", fit.separation)
