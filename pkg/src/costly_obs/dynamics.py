"""Learned one-step forward model of the car, used to impute unobserved values.

The network maps standardized ``[pos, vel, onehot(motion)]`` to the
standardized change ``(next_pos - pos, next_vel - vel)``; predictions are
added back to the inputs and projected onto reachable states: clamped to
the position/velocity box, with velocity zeroed at the left wall. Training
pairs come from the TRUE-state columns of a transition log.

Transitions whose next state sits on a clamp bound (wall hits, speed limit)
are censored: the network never sees them as targets, since the projection
reproduces them exactly and fitting the discontinuity only blurs the smooth
part of the dynamics. They are still scored in the held-out metrics.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import mountain_car as mc
from .env import read_transition_log
from .errors import DatasetError, ParseError
from .mountain_car import Motion
from .neural_net import MlpModel, OptimizerState, deserialize, optimize_step, serialize

log = logging.getLogger(__name__)

NORM_TAG = "norm-v1"


def motion_features(pos, vel, motion) -> np.ndarray:
    """Raw (unstandardized) input rows: position, velocity, one-hot motion."""
    pos = np.atleast_1d(np.asarray(pos, dtype=np.float64))
    vel = np.atleast_1d(np.asarray(vel, dtype=np.float64))
    motion = np.atleast_1d(np.asarray(motion, dtype=np.int64))
    x = np.zeros((pos.size, 5))
    x[:, 0] = pos
    x[:, 1] = vel
    x[np.arange(pos.size), 2 + motion] = 1.0
    return x


def on_bound(targets: np.ndarray) -> np.ndarray:
    """Rows whose next state was produced by a clamp rather than free motion."""
    return (targets[:, 0] <= mc.MIN_POSITION) | (targets[:, 0] >= mc.MAX_POSITION) | \
        (np.abs(targets[:, 1]) >= mc.MAX_SPEED)


def _scale(cols: np.ndarray) -> np.ndarray:
    s = cols.std(axis=0)
    # degenerate (constant) columns would divide by zero
    return np.where(np.ptp(cols, axis=0) > 0.0, s, 1.0)


@dataclass
class DynamicsDataset:
    inputs: np.ndarray
    targets: np.ndarray
    input_mean: np.ndarray
    input_scale: np.ndarray
    delta_mean: np.ndarray
    delta_scale: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_mean) / self.input_scale

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.input_scale + self.input_mean

    @property
    def deltas(self) -> np.ndarray:
        return self.targets - self.inputs[:, :2]


def dataset_from_arrays(pos, vel, motion, next_pos, next_vel) -> DynamicsDataset:
    x = motion_features(pos, vel, motion)
    if x.shape[0] == 0:
        raise DatasetError("no transitions to build a dataset from")
    y = np.column_stack([np.asarray(next_pos, float), np.asarray(next_vel, float)])
    if y.shape[0] != x.shape[0]:
        raise DatasetError("input and target row counts differ")
    d = y - x[:, :2]
    return DynamicsDataset(x, y, x.mean(axis=0), _scale(x), d.mean(axis=0), _scale(d))


def build_dataset(source) -> DynamicsDataset:
    """Supervised pairs from a transition log (a CSV path or loaded columns).

    Only true-state columns are used; belief columns never enter the data.
    """
    cols = source if isinstance(source, dict) else read_transition_log(source)
    if cols["true_pos"].size == 0:
        raise DatasetError("transition log has no data rows")
    return dataset_from_arrays(cols["true_pos"], cols["true_vel"], cols["motion"],
                               cols["next_true_pos"], cols["next_true_vel"])


@dataclass(frozen=True)
class DynamicsModelHandle:
    model: MlpModel
    input_mean: np.ndarray
    input_scale: np.ndarray
    delta_mean: np.ndarray
    delta_scale: np.ndarray
    metrics: dict = field(default_factory=dict, compare=False)

    def predict_batch(self, x_raw: np.ndarray) -> np.ndarray:
        """Next (pos, vel) for raw input rows, clamped to the valid state box."""
        z = (x_raw - self.input_mean) / self.input_scale
        nxt = x_raw[:, :2] + self.model.forward(z) * self.delta_scale + self.delta_mean
        np.clip(nxt[:, 0], mc.MIN_POSITION, mc.MAX_POSITION, out=nxt[:, 0])
        np.clip(nxt[:, 1], -mc.MAX_SPEED, mc.MAX_SPEED, out=nxt[:, 1])
        nxt[nxt[:, 0] <= mc.MIN_POSITION, 1] = 0.0
        return nxt

    def predict_next(self, pos: float, vel: float, motion: Motion | int) -> tuple[float, float]:
        x = np.zeros(5)
        x[0] = pos
        x[1] = vel
        x[2 + int(motion)] = 1.0
        d = self.model.forward((x - self.input_mean) / self.input_scale) * self.delta_scale + self.delta_mean
        p = min(max(pos + d[0], mc.MIN_POSITION), mc.MAX_POSITION)
        v = min(max(vel + d[1], -mc.MAX_SPEED), mc.MAX_SPEED)
        if p <= mc.MIN_POSITION:
            v = 0.0
        return float(p), float(v)


def predict_next(h: DynamicsModelHandle, pos: float, vel: float, m: Motion | int) -> tuple[float, float]:
    return h.predict_next(pos, vel, m)


def _rmse(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((pred - target) ** 2, axis=0))


def train_dynamics(
    ds: DynamicsDataset,
    epochs: int = 50,
    lr: float = 0.001,
    seed: int = 0,
    batch_size: int = 64,
    hidden: tuple[int, ...] = (64, 64),
    holdout: float = 0.1,
) -> DynamicsModelHandle:
    """Fit the forward model by minibatch Adam on mean squared error.

    A random ``holdout`` fraction is never trained on; the returned handle's
    ``metrics`` hold its RMSE per component next to the persistence
    (next = current) baseline on the same rows. Censored rows (see module
    docstring) are dropped from the training part only.
    """
    rng = np.random.default_rng(seed)
    n = len(ds)
    perm = rng.permutation(n)
    n_test = int(round(holdout * n)) if n > 1 else 0
    test, train = perm[:n_test], perm[n_test:]
    train = train[~on_bound(ds.targets[train])]
    if train.size == 0:
        raise DatasetError("no training rows left after the hold-out split")

    z = ds.normalize(ds.inputs)
    t = (ds.deltas - ds.delta_mean) / ds.delta_scale
    model = MlpModel.initialize((5, *hidden, 2), rng)
    opt = OptimizerState.for_model(model, lr=lr)
    for epoch in range(epochs):
        order = rng.permutation(train)
        for start in range(0, order.size, batch_size):
            idx = order[start:start + batch_size]
            acts = model.forward_trace(z[idx])
            d_out = 2.0 * (acts[-1] - t[idx]) / t[idx].size
            optimize_step(model, opt, model.backward(None, d_out, acts), lr)
        log.debug("dynamics epoch %d done", epoch)

    h = DynamicsModelHandle(model, ds.input_mean, ds.input_scale, ds.delta_mean, ds.delta_scale)
    if n_test:
        pred = h.predict_batch(ds.inputs[test])
        rmse = _rmse(pred, ds.targets[test])
        base = _rmse(ds.inputs[test, :2], ds.targets[test])
        h.metrics.update(rmse_pos=float(rmse[0]), rmse_vel=float(rmse[1]),
                         baseline_pos=float(base[0]), baseline_vel=float(base[1]),
                         n_train=int(train.size), n_test=int(n_test))
    return h


def format_metrics(metrics: dict) -> str:
    return "rmse_pos={:.6g} rmse_vel={:.6g} baseline_pos={:.6g} baseline_vel={:.6g}".format(
        metrics["rmse_pos"], metrics["rmse_vel"], metrics["baseline_pos"], metrics["baseline_vel"])


def save_handle(h: DynamicsModelHandle, path) -> None:
    consts = np.concatenate([h.input_mean, h.input_scale, h.delta_mean, h.delta_scale])
    header = NORM_TAG + " " + " ".join("%.17g" % c for c in consts)
    with open(path, "w") as fh:
        fh.write(header + "\n" + serialize(h.model))


def load_handle(path) -> DynamicsModelHandle:
    with open(path) as fh:
        text = fh.read()
    first, _, rest = text.partition("\n")
    toks = first.split()
    if not toks or toks[0] != NORM_TAG:
        raise ParseError(f"expected {NORM_TAG!r} header", line=1)
    try:
        c = np.array([float(v) for v in toks[1:]])
    except ValueError:
        raise ParseError("non-numeric normalization constant", line=1) from None
    if c.size != 14 or not np.all(np.isfinite(c)) or np.any(c[5:10] <= 0) or np.any(c[12:] <= 0):
        raise ParseError("normalization header needs 14 finite constants with positive scales", line=1)
    try:
        model = deserialize(rest)
    except ParseError as exc:
        line = exc.line + 1 if exc.line is not None else None
        raise ParseError(str(exc).split(": ", 1)[-1], line=line) from None
    if model.layer_sizes[0] != 5 or model.layer_sizes[-1] != 2:
        raise ParseError("dynamics model must map 5 inputs to 2 outputs", line=3)
    return DynamicsModelHandle(model, c[:5], c[5:10], c[10:12], c[12:14])
