#!/usr/bin/env python3
"""Learn the one-step dynamics from logged transitions.

The model should beat "nothing changed" (the persistence guess that LOCF
implicitly makes) by a wide margin on held-out rows.
"""
# %%
import numpy as np

from costly_obs import mountain_car as mc
from costly_obs.dynamics import dataset_from_arrays, format_metrics, train_dynamics

rng = np.random.default_rng(3)
rows = []
s = mc.reset(rng)
for _ in range(30_000):
    m = int(rng.integers(3))
    s2, done = mc.step(s, m)
    rows.append((s.position, s.velocity, m, s2.position, s2.velocity))
    s = mc.reset(rng) if done else s2
p, v, m, p2, v2 = np.array(rows).T

# %%
ds = dataset_from_arrays(p, v, m.astype(int), p2, v2)
model = train_dynamics(ds, epochs=10, seed=0)
print(format_metrics(model.metrics))

# %% imputing a belief several steps ahead by chaining predictions
state, truth = (-0.5, 0.0), mc.TrueState(-0.5, 0.0)
for _ in range(10):
    state = model.predict_next(state[0], state[1], mc.Motion.RIGHT)
    truth, _ = mc.step(truth, mc.Motion.RIGHT)
print("model after 10 pushes:", np.round(state, 5))
print("truth after 10 pushes:", np.round(tuple(truth), 5))
