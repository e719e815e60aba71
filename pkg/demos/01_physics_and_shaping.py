#!/usr/bin/env python3
"""Mountain Car under a random policy, and why the energy reward is harmless.

The shaped reward is a difference of mechanical energies, so over an episode
it sums to 100 * (E_final - E_start) minus whatever observations cost.
"""
# %%
import numpy as np

from costly_obs import mountain_car as mc
from costly_obs.env import CostlyObsEnv, EnvConfig, ObsChoice, decode_action

rng = np.random.default_rng(0)

# %% one step from the bottom of the valley, pushing right
s = mc.TrueState(-0.5, 0.0)
s2, done = mc.step(s, mc.Motion.RIGHT)
print("after one push:", s2, "done:", done)

# %% a random agent in the costly-observation environment
env = CostlyObsEnv(EnvConfig(variant="locf-counters", obs_cost=-8.0, step_cap=2000))
features = env.reset(rng)
start = env.true_state
total, charged = 0.0, 0.0
while True:
    a = int(rng.integers(12))
    features, r, done, rec = env.step(a)
    total += r
    charged += 8.0 * ObsChoice(decode_action(a).obs).n_observed
    if done:
        break

gain = 100 * (mc.mechanical_energy(rec.true_after) - mc.mechanical_energy(start))
print(f"steps {rec.step}, reached goal {not rec.truncated}")
print(f"sum of rewards {total:.6f}")
print(f"energy gain minus charges {gain - charged:.6f}")

# %% staleness counters grow while nothing is observed
print("last belief:", rec.belief_after)
print("features:", np.round(features, 4))
