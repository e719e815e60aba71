"""Mountain Car with costly observations.

Each of the 12 actions pairs a motion with a choice of which state
variables to observe. The agent only ever sees a ``BeliefState``: observed
variables are exact, unobserved ones are carried forward (LOCF) or imputed
by a forward-dynamics model, and staleness ages record how long ago each
variable was last seen.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

from . import mountain_car as mc
from .errors import ConfigurationError, InvalidActionError, ProtocolError
from .mountain_car import Motion, TrueState

N_ACTIONS = 12
AGE_CAP = 500
AGE_SCALE = 100.0


class ObsChoice(enum.IntEnum):
    NONE = 0
    POSITION = 1
    VELOCITY = 2
    BOTH = 3

    @property
    def position(self) -> bool:
        return self in (ObsChoice.POSITION, ObsChoice.BOTH)

    @property
    def velocity(self) -> bool:
        return self in (ObsChoice.VELOCITY, ObsChoice.BOTH)

    @property
    def n_observed(self) -> int:
        return int(self.position) + int(self.velocity)


class CompositeAction(NamedTuple):
    motion: Motion
    obs: ObsChoice


class Variant(str, enum.Enum):
    LOCF_NO_COUNTERS = "locf"
    LOCF_WITH_COUNTERS = "locf-counters"
    DYNAMICS_WITH_COUNTERS = "dynamics-counters"

    @property
    def has_counters(self) -> bool:
        return self is not Variant.LOCF_NO_COUNTERS


class CostMode(str, enum.Enum):
    PER_VARIABLE = "per-variable"
    FLAT = "flat"


class RewardMode(str, enum.Enum):
    # energy: 100 * change in mechanical energy (DQN)
    # step: -1 per step (classic Mountain Car; linear baselines)
    ENERGY = "energy"
    STEP = "step"


@dataclass(frozen=True)
class EnvConfig:
    variant: Variant = Variant.LOCF_WITH_COUNTERS
    obs_cost: float = -8.0
    step_cap: int = 20_000
    cost_mode: CostMode = CostMode.PER_VARIABLE
    reward_mode: RewardMode = RewardMode.ENERGY
    # vanilla Mountain Car: belief is the true state every step, no cost
    fully_observed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "cost_mode", CostMode(self.cost_mode))
        object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))
        if self.step_cap <= 0:
            raise ConfigurationError(f"step_cap must be positive, got {self.step_cap}")
        if self.obs_cost > 0:
            raise ConfigurationError(f"obs_cost must be <= 0, got {self.obs_cost}")

    @property
    def n_features(self) -> int:
        return 4 if self.variant.has_counters and not self.fully_observed else 2


class BeliefState(NamedTuple):
    pos: float
    vel: float
    pos_age: int = 0
    vel_age: int = 0


class TransitionRecord(NamedTuple):
    episode: int
    step: int
    belief_before: BeliefState
    action_index: int
    reward: float
    belief_after: BeliefState
    true_before: TrueState
    true_after: TrueState
    done: bool
    truncated: bool


class Imputer(Protocol):
    def predict_next(self, pos: float, vel: float, motion: Motion) -> tuple[float, float]:
        ...


_DECODED = tuple(CompositeAction(Motion(i // 4), ObsChoice(i % 4)) for i in range(N_ACTIONS))


def decode_action(index: int) -> CompositeAction:
    if not 0 <= index < N_ACTIONS:
        raise InvalidActionError(f"action index must be in [0, 11], got {index}")
    return _DECODED[index]


def encode_action(a: CompositeAction) -> int:
    return int(a.motion) * 4 + int(a.obs)


def observation_charge(obs: ObsChoice, cfg: EnvConfig) -> float:
    """Cost (<= 0) charged for this observation choice."""
    if cfg.fully_observed or obs is ObsChoice.NONE:
        return 0.0
    k = obs.n_observed if cfg.cost_mode is CostMode.PER_VARIABLE else 1
    return cfg.obs_cost * k


def shaped_reward(prev: TrueState, next: TrueState, obs: ObsChoice, cfg: EnvConfig) -> float:
    if cfg.reward_mode is RewardMode.ENERGY:
        base = 100.0 * (mc.mechanical_energy(next) - mc.mechanical_energy(prev))
    else:
        base = -1.0
    return base + observation_charge(obs, cfg)


def update_belief(
    b: BeliefState,
    true_next: TrueState,
    a: CompositeAction,
    variant: Variant,
    imputer: Imputer | None = None,
) -> BeliefState:
    variant = Variant(variant)
    obs = a.obs
    if obs is ObsChoice.BOTH:
        return BeliefState(true_next.position, true_next.velocity, 0, 0)
    if variant is Variant.DYNAMICS_WITH_COUNTERS:
        if imputer is None:
            raise ConfigurationError("dynamics-counters variant needs a dynamics imputer")
        guess_pos, guess_vel = imputer.predict_next(b.pos, b.vel, a.motion)
    else:
        guess_pos, guess_vel = b.pos, b.vel
    if obs.position:
        pos, pos_age = true_next.position, 0
    else:
        pos, pos_age = guess_pos, b.pos_age + 1
    if obs.velocity:
        vel, vel_age = true_next.velocity, 0
    else:
        vel, vel_age = guess_vel, b.vel_age + 1
    return BeliefState(pos, vel, pos_age, vel_age)


def env_reset(cfg: EnvConfig, rng: np.random.Generator) -> tuple[BeliefState, TrueState]:
    """Start an episode; the initial state is observed for free."""
    s = mc.reset(rng)
    return BeliefState(s.position, s.velocity, 0, 0), s


def env_step(
    true_s: TrueState,
    b: BeliefState,
    index: int,
    cfg: EnvConfig,
    imputer: Imputer | None = None,
    *,
    step: int = 1,
    episode: int = 0,
) -> tuple[TrueState, BeliefState, float, bool, TransitionRecord]:
    """Advance one step. ``step`` is the 1-based index of this step in the episode.

    Returns the next true state, next belief, reward, done flag and the
    transition record. ``done`` covers both reaching the goal and hitting the
    step cap; the record distinguishes them through ``truncated``.
    """
    a = decode_action(index)
    true_next, at_goal = mc.step(true_s, a.motion)
    reward = shaped_reward(true_s, true_next, a.obs, cfg)
    if cfg.fully_observed:
        belief = BeliefState(true_next.position, true_next.velocity, 0, 0)
    else:
        belief = update_belief(b, true_next, a, cfg.variant, imputer)
    truncated = not at_goal and step >= cfg.step_cap
    done = at_goal or truncated
    rec = TransitionRecord(episode, step, b, index, reward, belief, true_s, true_next, done, truncated)
    return true_next, belief, reward, done, rec


def featurize(b: BeliefState, variant: Variant, fully_observed: bool = False) -> np.ndarray:
    if fully_observed or not Variant(variant).has_counters:
        return np.array([b.pos, b.vel])
    return np.array([
        b.pos,
        b.vel,
        min(b.pos_age, AGE_CAP) / AGE_SCALE,
        min(b.vel_age, AGE_CAP) / AGE_SCALE,
    ])


class CostlyObsEnv:
    """Stateful episode session around ``env_reset`` / ``env_step``.

    Not shareable between threads mid-episode; use one instance per worker.
    """

    def __init__(self, cfg: EnvConfig, imputer: Imputer | None = None):
        if cfg.variant is Variant.DYNAMICS_WITH_COUNTERS and imputer is None and not cfg.fully_observed:
            raise ConfigurationError("dynamics-counters variant needs a dynamics imputer")
        self.cfg = cfg
        self.imputer = imputer
        self.true_state: TrueState | None = None
        self.belief: BeliefState | None = None
        self.steps = 0
        self.episode = -1
        self.done = True

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.belief, self.true_state = env_reset(self.cfg, rng)
        self.steps = 0
        self.episode += 1
        self.done = False
        return self.features()

    def features(self) -> np.ndarray:
        return featurize(self.belief, self.cfg.variant, self.cfg.fully_observed)

    def step(self, index: int) -> tuple[np.ndarray, float, bool, TransitionRecord]:
        if self.done:
            raise ProtocolError("episode is finished; call reset() first")
        self.steps += 1
        self.true_state, self.belief, reward, self.done, rec = env_step(
            self.true_state, self.belief, index, self.cfg, self.imputer,
            step=self.steps, episode=self.episode,
        )
        return self.features(), reward, self.done, rec


# -- transition log -------------------------------------------------------

LOG_HEADER = (
    "episode", "step", "action_index", "motion", "obs_choice", "reward", "done", "truncated",
    "true_pos", "true_vel", "next_true_pos", "next_true_vel",
    "bel_pos", "bel_vel", "pos_age", "vel_age",
    "next_bel_pos", "next_bel_vel", "next_pos_age", "next_vel_age",
)


def _g(x: float) -> str:
    return "%.9g" % x


def format_record(r: TransitionRecord) -> list[str]:
    a = decode_action(r.action_index)
    b0, b1, t0, t1 = r.belief_before, r.belief_after, r.true_before, r.true_after
    return [
        str(r.episode), str(r.step), str(r.action_index), a.motion.name.lower(), a.obs.name.lower(),
        _g(r.reward), str(int(r.done)), str(int(r.truncated)),
        _g(t0.position), _g(t0.velocity), _g(t1.position), _g(t1.velocity),
        _g(b0.pos), _g(b0.vel), str(b0.pos_age), str(b0.vel_age),
        _g(b1.pos), _g(b1.vel), str(b1.pos_age), str(b1.vel_age),
    ]


class TransitionLogWriter:
    """Append-only CSV sink for transition records."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(LOG_HEADER)
        self.rows = 0

    def write(self, rec: TransitionRecord) -> None:
        self._writer.writerow(format_record(rec))
        self.rows += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_INT_COLS = {"episode", "step", "action_index", "done", "truncated",
             "pos_age", "vel_age", "next_pos_age", "next_vel_age"}
_TEXT_COLS = {"motion", "obs_choice"}


def read_transition_log(path) -> dict[str, np.ndarray]:
    """Load a transition log into per-column arrays.

    ``motion`` and ``obs_choice`` are returned as integer codes. Raises
    ``ParseError`` naming the offending line for any malformed row.
    """
    from .errors import ParseError

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty transition log", line=1)
        if tuple(header) != LOG_HEADER:
            raise ParseError("unexpected transition log header", line=1)
        cols: dict[str, list] = {name: [] for name in LOG_HEADER}
        motion_codes = {m.name.lower(): int(m) for m in Motion}
        obs_codes = {o.name.lower(): int(o) for o in ObsChoice}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(LOG_HEADER):
                raise ParseError(f"expected {len(LOG_HEADER)} fields, got {len(row)}", line=lineno)
            try:
                for name, field in zip(LOG_HEADER, row):
                    if name in _INT_COLS:
                        cols[name].append(int(field))
                    elif name == "motion":
                        cols[name].append(motion_codes[field])
                    elif name == "obs_choice":
                        cols[name].append(obs_codes[field])
                    else:
                        cols[name].append(float(field))
            except (ValueError, KeyError) as exc:
                raise ParseError(f"bad field ({exc})", line=lineno) from None
    out = {}
    for name, values in cols.items():
        dtype = np.int64 if name in _INT_COLS or name in _TEXT_COLS else np.float64
        out[name] = np.asarray(values, dtype=dtype)
    return out
