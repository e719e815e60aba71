"""DQN with energy-shaped reward, plus tile-coded linear SARSA / Q-learning.

The DQN is the working agent for every belief variant. The linear
baselines exist to show where plain function approximation breaks down once
observations cost something.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .env import (
    N_ACTIONS,
    CostlyObsEnv,
    EnvConfig,
    Imputer,
    ObsChoice,
    RewardMode,
    TransitionRecord,
)
from .errors import ConfigurationError
from .neural_net import MlpModel, OptimizerState, optimize_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DqnConfig:
    episodes: int = 1000
    lr: float = 0.001
    epsilon_init: float = 1.0
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.01
    epsilon_per_step: bool = False
    gamma: float = 0.95
    batch_size: int = 64
    replay_capacity: int = 50_000
    target_sync_interval: int = 1000
    hidden: tuple[int, ...] = (64, 64)
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.epsilon_min <= self.epsilon_init <= 1.0:
            raise ConfigurationError("need 0 <= epsilon_min <= epsilon_init <= 1")
        if not 0 < self.batch_size <= self.replay_capacity:
            raise ConfigurationError("need 0 < batch_size <= replay_capacity")
        if self.episodes < 0 or self.target_sync_interval < 1:
            raise ConfigurationError("episodes must be >= 0 and target_sync_interval >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class EpisodeStats:
    episode: int
    steps: int
    total_reward: float
    reached_goal: bool
    epsilon: float
    obs_none: int = 0
    obs_pos: int = 0
    obs_vel: int = 0
    obs_both: int = 0


STATS_HEADER = ("episode", "steps", "total_reward", "reached_goal", "epsilon",
                "obs_none", "obs_pos", "obs_vel", "obs_both")


def write_stats_csv(path, stats: list[EpisodeStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for s in stats:
            w.writerow([s.episode, s.steps, "%.9g" % s.total_reward, int(s.reached_goal),
                        "%.9g" % s.epsilon, s.obs_none, s.obs_pos, s.obs_vel, s.obs_both])


def read_stats_csv(path) -> list[EpisodeStats]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        EpisodeStats(int(r["episode"]), int(r["steps"]), float(r["total_reward"]),
                     bool(int(r["reached_goal"])), float(r["epsilon"]),
                     int(r["obs_none"]), int(r["obs_pos"]), int(r["obs_vel"]), int(r["obs_both"]))
        for r in rows
    ]


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, n_features: int):
        self.capacity = int(capacity)
        self.features = np.zeros((capacity, n_features))
        self.next_features = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.truncated = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def push(self, feat, action, reward, next_feat, done, truncated=False) -> None:
        i = self._next
        self.features[i] = feat
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_features[i] = next_feat
        self.done[i] = done
        self.truncated[i] = truncated
        self._next = (i + 1) % self.capacity
        if self.size < self.capacity:
            self.size += 1

    def oldest_first(self) -> np.ndarray:
        """Slot indices ordered from oldest to newest entry."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=batch_size)

    def batch(self, idx: np.ndarray) -> dict[str, np.ndarray]:
        return {
            "features": self.features[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_features": self.next_features[idx],
            "done": self.done[idx],
            "truncated": self.truncated[idx],
        }


def select_action(qnet: MlpModel, features: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; ties in Q go to the lowest index."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(qnet.forward(features)))


def td_targets(batch: dict[str, np.ndarray], qnet: MlpModel | None, target_net: MlpModel, gamma: float) -> np.ndarray:
    """One-step targets. Goal transitions do not bootstrap; truncated ones do.

    ``qnet`` is accepted for interface symmetry with double-Q style targets
    and is not used.
    """
    terminal = batch["done"] & ~batch["truncated"]
    q_next = target_net.forward(batch["next_features"]).max(axis=1)
    return batch["rewards"] + gamma * np.where(terminal, 0.0, q_next)


def dqn_update(qnet: MlpModel, target_net: MlpModel, opt: OptimizerState, batch, gamma: float, lr: float) -> float:
    """One gradient step on the mean squared TD error; returns the loss."""
    y = td_targets(batch, qnet, target_net, gamma)
    acts = qnet.forward_trace(batch["features"])
    rows = np.arange(y.size)
    err = acts[-1][rows, batch["actions"]] - y
    d_out = np.zeros_like(acts[-1])
    d_out[rows, batch["actions"]] = 2.0 * err / y.size
    optimize_step(qnet, opt, qnet.backward(None, d_out, acts), lr)
    return float(np.mean(err * err))


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators derived from a single run seed."""
    env_ss, agent_ss, init_ss = np.random.SeedSequence(seed).spawn(3)
    return {
        "env": np.random.default_rng(env_ss),
        "agent": np.random.default_rng(agent_ss),
        "init": np.random.default_rng(init_ss),
    }


@dataclass
class DqnResult:
    qnet: MlpModel
    stats: list[EpisodeStats]
    n_transitions: int = 0


def _count_obs(st: EpisodeStats, obs: ObsChoice) -> None:
    if obs is ObsChoice.NONE:
        st.obs_none += 1
    elif obs is ObsChoice.POSITION:
        st.obs_pos += 1
    elif obs is ObsChoice.VELOCITY:
        st.obs_vel += 1
    else:
        st.obs_both += 1


def train_dqn(
    env_cfg: EnvConfig,
    cfg: DqnConfig,
    imputer: Imputer | None = None,
    record: Callable[[TransitionRecord], None] | None = None,
    on_episode: Callable[[EpisodeStats], None] | None = None,
) -> DqnResult:
    """Train a Q-network on the costly-observation environment.

    ``record`` receives every transition (e.g. ``TransitionLogWriter.write``);
    ``on_episode`` receives each finished episode's stats.
    """
    streams = seed_streams(cfg.seed)
    env_rng, agent_rng = streams["env"], streams["agent"]
    env = CostlyObsEnv(env_cfg, imputer)
    n_feat = env_cfg.n_features
    qnet = MlpModel.initialize((n_feat, *cfg.hidden, N_ACTIONS), streams["init"])
    target = qnet.copy()
    opt = OptimizerState.for_model(qnet, lr=cfg.lr, kind=cfg.optimizer)
    buf = ReplayBuffer(cfg.replay_capacity, n_feat)
    eps = cfg.epsilon_init
    total_steps = 0
    stats: list[EpisodeStats] = []
    from .env import decode_action

    for ep in range(cfg.episodes):
        feat = env.reset(env_rng)
        st = EpisodeStats(ep, 0, 0.0, False, eps)
        done = False
        while not done:
            a = select_action(qnet, feat, eps, agent_rng)
            next_feat, r, done, rec = env.step(a)
            buf.push(feat, a, r, next_feat, done, rec.truncated)
            if record is not None:
                record(rec)
            st.steps += 1
            st.total_reward += r
            _count_obs(st, decode_action(a).obs)
            feat = next_feat
            total_steps += 1
            if len(buf) >= cfg.batch_size:
                dqn_update(qnet, target, opt, buf.batch(buf.sample_indices(cfg.batch_size, agent_rng)),
                           cfg.gamma, cfg.lr)
            if total_steps % cfg.target_sync_interval == 0:
                target.load_from(qnet)
            if cfg.epsilon_per_step:
                eps = max(cfg.epsilon_min, eps * cfg.epsilon_decay)
        st.reached_goal = not rec.truncated
        stats.append(st)
        if on_episode is not None:
            on_episode(st)
        log.debug("episode %d steps %d reward %.3f eps %.3f", ep, st.steps, st.total_reward, eps)
        if not cfg.epsilon_per_step:
            eps = max(cfg.epsilon_min, eps * cfg.epsilon_decay)
    return DqnResult(qnet, stats, total_steps)


# -- linear baselines -----------------------------------------------------

class BaselineAlgo(str, enum.Enum):
    SARSA = "sarsa"
    QLEARNING = "qlearning"


# Feature ranges used to lay out the tile grids.
_POS_VEL_RANGE = ((-1.2, 0.6), (-0.07, 0.07))
_AGE_RANGE = ((0.0, 5.0), (0.0, 5.0))


class TileCoder:
    """Grid tile coding over pairs of input dimensions.

    Each pair gets ``n_tilings`` grids of ``tiles`` x ``tiles`` cells,
    displaced asymmetrically by fractions of a cell width. A 4-wide belief
    (with counters) is coded as the (pos, vel) pair plus the (age, age) pair.
    """

    def __init__(self, n_inputs: int, n_tilings: int = 8, tiles: int = 8):
        if n_inputs not in (2, 4):
            raise ConfigurationError("tile coder expects 2 or 4 inputs")
        ranges = _POS_VEL_RANGE + (_AGE_RANGE if n_inputs == 4 else ())
        self.low = np.array([r[0] for r in ranges])
        self.width = np.array([(r[1] - r[0]) / tiles for r in ranges])
        self.n_tilings = n_tilings
        self.side = tiles + 1
        self.n_pairs = n_inputs // 2
        per_tiling = self.side * self.side
        self.n_features = self.n_pairs * n_tilings * per_tiling
        t = np.arange(n_tilings)
        disp = np.stack([t * 1.0, t * 3.0], axis=1) % n_tilings / n_tilings
        self.offsets = np.tile(disp, (1, self.n_pairs))  # (tilings, n_inputs)
        self.base = (np.arange(self.n_pairs)[None, :] * n_tilings + t[:, None]) * per_tiling

    def active(self, x: np.ndarray) -> np.ndarray:
        """Indices of the ``n_pairs * n_tilings`` active tiles."""
        coords = np.floor((x - self.low) / self.width + self.offsets).astype(np.int64)
        np.clip(coords, 0, self.side - 1, out=coords)
        cells = coords[:, 0::2] * self.side + coords[:, 1::2]
        return (self.base + cells).ravel()


@dataclass(frozen=True)
class BaselineSchedule:
    episodes: int = 500
    alpha: float = 0.5
    epsilon: float = 0.01
    gamma: float = 1.0
    n_tilings: int = 8
    tiles: int = 8
    seed: int = 0


@dataclass
class BaselineResult:
    weights: np.ndarray
    stats: list[EpisodeStats] = field(default_factory=list)


def train_linear_baseline(
    algo: BaselineAlgo | str,
    env_cfg: EnvConfig,
    schedule: BaselineSchedule = BaselineSchedule(),
    weights: np.ndarray | None = None,
) -> BaselineResult:
    """Tile-coded linear SARSA(0) or Q-learning with epsilon-greedy behavior.

    ``alpha`` is the total step size, divided evenly across active tiles.
    Weights start at zero (optimistic under the step-penalty reward).
    """
    algo = BaselineAlgo(algo)
    if env_cfg.reward_mode is not RewardMode.STEP:
        log.info("linear baseline running with %s reward", env_cfg.reward_mode.value)
    streams = seed_streams(schedule.seed)
    env_rng, rng = streams["env"], streams["agent"]
    env = CostlyObsEnv(env_cfg)
    coder = TileCoder(env_cfg.n_features, schedule.n_tilings, schedule.tiles)
    w = np.zeros((N_ACTIONS, coder.n_features)) if weights is None else weights
    step_size = schedule.alpha / (coder.n_pairs * coder.n_tilings)
    gamma, eps = schedule.gamma, schedule.epsilon
    from .env import decode_action

    def policy(q):
        if eps > 0.0 and rng.random() < eps:
            return int(rng.integers(N_ACTIONS))
        return int(np.argmax(q))

    stats = []
    for ep in range(schedule.episodes):
        idx = coder.active(env.reset(env_rng))
        q = w[:, idx].sum(axis=1)
        a = policy(q)
        st = EpisodeStats(ep, 0, 0.0, False, eps)
        while True:
            feat, r, done, rec = env.step(a)
            st.steps += 1
            st.total_reward += r
            _count_obs(st, decode_action(a).obs)
            if done and not rec.truncated:
                target = r
            else:
                idx2 = coder.active(feat)
                q2 = w[:, idx2].sum(axis=1)
                a2 = policy(q2)
                target = r + gamma * (q2[a2] if algo is BaselineAlgo.SARSA else q2.max())
            if step_size != 0.0:
                w[a, idx] += step_size * (target - q[a])
            if done:
                break
            idx, a = idx2, a2
            q = w[:, idx].sum(axis=1)
        st.reached_goal = not rec.truncated
        stats.append(st)
    return BaselineResult(w, stats)


def with_step_cap(env_cfg: EnvConfig, cap: int) -> EnvConfig:
    return replace(env_cfg, step_cap=cap)
