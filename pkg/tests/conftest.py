import numpy as np
import pytest

from costly_obs import mountain_car as mc
from costly_obs.dynamics import dataset_from_arrays, train_dynamics
from costly_obs.mountain_car import TrueState


def physics_rollouts(n, seed=0):
    """(pos, vel, motion, next_pos, next_vel) from random-motion episodes
    started anywhere in the state box, so the data covers the whole range."""
    rng = np.random.default_rng(seed)
    rows = []
    s = TrueState(rng.uniform(-1.2, 0.5), rng.uniform(-0.07, 0.07))
    while len(rows) < n:
        m = int(rng.integers(3))
        s2, done = mc.step(s, m)
        rows.append((s.position, s.velocity, m, s2.position, s2.velocity))
        s = TrueState(rng.uniform(-1.2, 0.5), rng.uniform(-0.07, 0.07)) if done or rng.random() < 0.01 else s2
    return np.array(rows)


@pytest.fixture(scope="session")
def trained_dynamics():
    r = physics_rollouts(20_000)
    ds = dataset_from_arrays(r[:, 0], r[:, 1], r[:, 2].astype(int), r[:, 3], r[:, 4])
    return train_dynamics(ds, epochs=15, seed=0)
