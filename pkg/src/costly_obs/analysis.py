"""Behavioral and statistical summaries of training runs.

Everything here is a pure function of a transition log (as loaded by
``env.read_transition_log``) or of per-episode stats.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .agents import EpisodeStats
from .env import ObsChoice
from .errors import DegenerateInputError

BRACKET_LOW = -1.2
BRACKET_HIGH = 0.5
N_BRACKETS = 5


def _observes(obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    obs = np.asarray(obs)
    pos = (obs == ObsChoice.POSITION) | (obs == ObsChoice.BOTH)
    vel = (obs == ObsChoice.VELOCITY) | (obs == ObsChoice.BOTH)
    return pos, vel


@dataclass
class HistogramTable:
    edges: np.ndarray        # N_BRACKETS + 1 bracket boundaries
    actions: np.ndarray      # actions taken per bracket
    pos_obs: np.ndarray
    vel_obs: np.ndarray

    @property
    def total(self) -> int:
        return int(self.actions.sum())

    @property
    def empty(self) -> np.ndarray:
        return self.actions == 0

    def _pct(self, counts: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.empty, 0.0, 100.0 * counts / np.maximum(self.actions, 1))

    @property
    def pos_pct(self) -> np.ndarray:
        """Percent of the bracket's actions that observed position."""
        return self._pct(self.pos_obs)

    @property
    def vel_pct(self) -> np.ndarray:
        return self._pct(self.vel_obs)

    @property
    def action_pct(self) -> np.ndarray:
        """Percent of all logged actions that fell in each bracket."""
        return 100.0 * self.actions / max(self.total, 1)

    def labels(self) -> list[str]:
        return [f"[{a:.2f},{b:.2f}]" for a, b in zip(self.edges[:-1], self.edges[1:])]


def build_histogram(log: dict[str, np.ndarray], variant=None, *, data_range: bool = False,
                    n_brackets: int = N_BRACKETS) -> HistogramTable:
    """Bin every action by the true position at which it was taken.

    Brackets are equal-width over [-1.2, 0.5], or over the positions the car
    actually visited when ``data_range`` is set. ``variant`` is accepted for
    labeling symmetry; binning does not depend on it.
    """
    x = np.asarray(log["true_pos"], dtype=float)
    if x.size == 0:
        raise DegenerateInputError("cannot build a histogram from an empty log")
    lo, hi = (float(x.min()), float(x.max())) if data_range else (BRACKET_LOW, BRACKET_HIGH)
    if hi <= lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, n_brackets + 1)
    b = np.clip(np.floor((x - lo) / (hi - lo) * n_brackets).astype(np.int64), 0, n_brackets - 1)
    pos, vel = _observes(log["obs_choice"])
    return HistogramTable(
        edges,
        np.bincount(b, minlength=n_brackets),
        np.bincount(b, weights=pos, minlength=n_brackets).astype(np.int64),
        np.bincount(b, weights=vel, minlength=n_brackets).astype(np.int64),
    )


@dataclass
class RatioSeries:
    episode: np.ndarray
    actions: np.ndarray
    pos_only: np.ndarray
    vel_only: np.ndarray
    both: np.ndarray
    none: np.ndarray

    def _r(self, c):
        return c / np.maximum(self.actions, 1)

    @property
    def pos_ratio(self) -> np.ndarray:
        """Share of the episode's actions that observed position (incl. Both)."""
        return self._r(self.pos_only + self.both)

    @property
    def vel_ratio(self) -> np.ndarray:
        return self._r(self.vel_only + self.both)

    @property
    def none_ratio(self) -> np.ndarray:
        return self._r(self.none)


def build_ratio_series(source) -> RatioSeries:
    """Per-episode observation ratios from a stats list or a loaded log."""
    if isinstance(source, dict):
        ep = np.asarray(source["episode"])
        if ep.size == 0:
            raise DegenerateInputError("empty log")
        episodes, inv = np.unique(ep, return_inverse=True)
        obs = np.asarray(source["obs_choice"])
        counts = [np.bincount(inv, weights=(obs == o), minlength=episodes.size).astype(np.int64)
                  for o in ObsChoice]
        none, pos, vel, both = counts
    else:
        stats: Sequence[EpisodeStats] = list(source)
        if not stats:
            raise DegenerateInputError("no episodes")
        episodes = np.array([s.episode for s in stats])
        none = np.array([s.obs_none for s in stats])
        pos = np.array([s.obs_pos for s in stats])
        vel = np.array([s.obs_vel for s in stats])
        both = np.array([s.obs_both for s in stats])
    return RatioSeries(episodes, none + pos + vel + both, pos, vel, both, none)


@dataclass
class LogisticFit:
    intercept: float
    slope: float
    se: np.ndarray           # (intercept, slope)
    z: np.ndarray
    p_values: np.ndarray
    converged: bool
    separation: bool
    n_iter: int
    loglik: float
    n: int

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.intercept, self.slope])


def _perfectly_split(x: np.ndarray, y: np.ndarray) -> bool:
    x0, x1 = x[y == 0], x[y == 1]
    return x0.max() <= x1.min() or x1.max() <= x0.min()


def logistic_fit(x, y, *, max_iter: int = 100, tol: float = 1e-10, coef_limit: float = 30.0) -> LogisticFit:
    """Intercept + slope logistic regression by Newton-Raphson with Wald tests.

    Separation (a threshold on ``x`` splitting the classes, or a coefficient
    running past ``coef_limit``) is reported through ``separation`` with NaN
    standard errors and p-values rather than raised.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    if x.size < 2:
        raise DegenerateInputError("need at least two observations")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    if y.min() == y.max():
        raise DegenerateInputError("y contains a single class")

    X = np.column_stack([np.ones_like(x), x])
    nan2 = np.full(2, np.nan)

    def loglik(beta):
        eta = X @ beta
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    beta = np.zeros(2)
    ll = loglik(beta)
    separation = _perfectly_split(x, y)
    converged = False
    it = 0
    if not separation:
        for it in range(1, max_iter + 1):
            p = expit(X @ beta)
            w = p * (1.0 - p)
            info = X.T @ (X * w[:, None])
            try:
                step = np.linalg.solve(info, X.T @ (y - p))
            except np.linalg.LinAlgError:
                separation = True
                break
            beta = beta + step
            if np.any(np.abs(beta) > coef_limit):
                separation = True
                break
            ll_new = loglik(beta)
            if abs(ll_new - ll) < tol:
                ll = ll_new
                converged = True
                break
            ll = ll_new

    if separation:
        return LogisticFit(beta[0], beta[1], nan2, nan2.copy(), nan2.copy(), converged, True, it, ll, x.size)
    p = expit(X @ beta)
    info = X.T @ (X * (p * (1.0 - p))[:, None])
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    z = beta / se
    pv = 2.0 * norm.sf(np.abs(z))
    return LogisticFit(beta[0], beta[1], se, z, pv, converged, False, it, ll, x.size)


def rolling_mean(values: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average; the window shrinks near both ends."""
    v = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    half = window // 2
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(v.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + (window - 1 - half), v.size - 1) + 1
    return (c[hi] - c[lo]) / (hi - lo)


def learning_curve(stats: Sequence[EpisodeStats], window: int = 25) -> tuple[np.ndarray, np.ndarray]:
    if not stats:
        raise DegenerateInputError("no episodes")
    raw = np.array([s.steps for s in stats], dtype=float)
    return raw, rolling_mean(raw, window)


def observation_regressions(log: dict[str, np.ndarray]) -> dict[str, LogisticFit | None]:
    """Position vs. observed-velocity and vs. observed-position, all steps pooled.

    A fit whose outcome has a single class is returned as ``None``.
    """
    x = np.asarray(log["true_pos"], dtype=float)
    pos, vel = _observes(log["obs_choice"])
    out = {}
    for name, yy in (("velocity_observed", vel), ("position_observed", pos)):
        try:
            out[name] = logistic_fit(x, yy.astype(float))
        except DegenerateInputError:
            out[name] = None
    return out


# -- writers --------------------------------------------------------------

def _g(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else "%.9g" % v


def write_curve_csv(path, stats: Sequence[EpisodeStats], window: int = 25) -> None:
    raw, smooth = learning_curve(stats, window)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "steps", "rolling_mean", "reached_goal"])
        for s, r in zip(stats, smooth):
            w.writerow([s.episode, s.steps, _g(r), int(s.reached_goal)])


def write_histogram_csv(path, table: HistogramTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bracket", "low", "high", "actions", "action_pct", "pos_obs", "pos_pct",
                    "vel_obs", "vel_pct", "empty"])
        for i in range(table.actions.size):
            w.writerow([i, _g(table.edges[i]), _g(table.edges[i + 1]), table.actions[i],
                        _g(table.action_pct[i]), table.pos_obs[i], _g(table.pos_pct[i]),
                        table.vel_obs[i], _g(table.vel_pct[i]), int(table.empty[i])])


def write_ratios_csv(path, r: RatioSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "actions", "pos_ratio", "vel_ratio", "none_ratio",
                    "pos_only", "vel_only", "both", "none"])
        for i in range(r.episode.size):
            w.writerow([r.episode[i], r.actions[i], _g(r.pos_ratio[i]), _g(r.vel_ratio[i]),
                        _g(r.none_ratio[i]), r.pos_only[i], r.vel_only[i], r.both[i], r.none[i]])


def write_logit_csv(path, fits: dict[str, LogisticFit | None], sample: str = "pooled") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fit", "term", "coefficient", "se", "z", "p", "converged", "separation",
                    "single_class", "n", "sample"])
        for name, f in fits.items():
            if f is None:
                w.writerow([name, "", "nan", "nan", "nan", "nan", 0, 0, 1, "", sample])
                continue
            for k, term in enumerate(("intercept", "position")):
                w.writerow([name, term, _g(float(f.coef[k])), _g(float(f.se[k])), _g(float(f.z[k])),
                            _g(float(f.p_values[k])), int(f.converged), int(f.separation), 0, f.n, sample])
