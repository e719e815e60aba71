#!/usr/bin/env python3
"""Train a small DQN with and without staleness counters and compare.

Short runs (60 episodes, 5,000-step cap) so this finishes in a few minutes.
At this length both agents are still exploring heavily and one seed is noise;
any gap between them needs hundreds of episodes and several seeds to show.
"""
# %%
import numpy as np

from costly_obs.agents import DqnConfig, train_dqn
from costly_obs.analysis import rolling_mean
from costly_obs.env import EnvConfig

cfg = DqnConfig(episodes=60, seed=1)
curves = {}
for variant in ("locf", "locf-counters"):
    env = EnvConfig(variant=variant, obs_cost=-8.0, step_cap=5000)
    stats = train_dqn(env, cfg).stats
    curves[variant] = np.array([s.steps for s in stats])
    print(variant, "mean steps over last 20:", curves[variant][-20:].mean())

# %% smoothed curves, every 10th episode
for variant, steps in curves.items():
    print(variant, np.round(rolling_mean(steps, 9)[::10]).astype(int))
