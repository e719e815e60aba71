import numpy as np
import pytest

from costly_obs.agents import (
    BaselineSchedule,
    DqnConfig,
    EpisodeStats,
    ReplayBuffer,
    TileCoder,
    read_stats_csv,
    select_action,
    td_targets,
    train_dqn,
    train_linear_baseline,
    write_stats_csv,
)
from costly_obs.env import EnvConfig, RewardMode, Variant
from costly_obs.errors import ConfigurationError
from costly_obs.neural_net import MlpModel


def fixed_output_net(values):
    """Net whose output ignores its input: zero weights, bias = values."""
    m = MlpModel((2, 12))
    m.biases[0][...] = values
    return m


def test_greedy_picks_max_and_lowest_tie():
    q = np.zeros(12)
    q[5] = 1.0
    assert select_action(fixed_output_net(q), np.zeros(2), 0.0, np.random.default_rng(0)) == 5
    q = np.zeros(12)
    q[2] = q[9] = 3.0
    assert select_action(fixed_output_net(q), np.zeros(2), 0.0, np.random.default_rng(0)) == 2


def test_uniform_exploration_frequencies():
    rng = np.random.default_rng(1)
    net = fixed_output_net(np.arange(12.0))
    counts = np.bincount([select_action(net, np.zeros(2), 1.0, rng) for _ in range(120_000)], minlength=12)
    assert np.all(np.abs(counts / 120_000 - 1 / 12) < 0.01)


def test_greedy_is_deterministic():
    net = MlpModel.initialize((4, 8, 12), np.random.default_rng(0))
    f = np.array([0.1, -0.02, 0.3, 0.0])
    picks = {select_action(net, f, 0.0, np.random.default_rng(s)) for s in range(20)}
    assert len(picks) == 1


def _batch(r, done, trunc, nf=2):
    n = len(r)
    return {"features": np.zeros((n, nf)), "actions": np.zeros(n, int), "rewards": np.array(r, float),
            "next_features": np.zeros((n, nf)), "done": np.array(done), "truncated": np.array(trunc)}


def test_td_targets_terminal_and_truncated():
    q = np.linspace(-1, 2, 12)
    tgt = fixed_output_net(q)
    y = td_targets(_batch([1.0, 1.0, 1.0], [True, True, False], [False, True, False]), None, tgt, 0.9)
    np.testing.assert_allclose(y, [1.0, 1.0 + 0.9 * 2.0, 1.0 + 0.9 * 2.0])
    y0 = td_targets(_batch([0.5, -2.0], [False, False], [False, False]), None, tgt, 0.0)
    np.testing.assert_array_equal(y0, [0.5, -2.0])


def test_td_targets_hand_computed_linear_net():
    tgt = MlpModel((2, 12))
    rng = np.random.default_rng(3)
    tgt.weights[0][...] = rng.normal(size=(12, 2))
    tgt.biases[0][...] = rng.normal(size=12)
    s2 = np.array([0.3, -0.7])
    q = [sum(tgt.weights[0][i, j] * s2[j] for j in range(2)) + tgt.biases[0][i] for i in range(12)]
    b = _batch([0.25], [False], [False])
    b["next_features"][0] = s2
    assert td_targets(b, None, tgt, 0.95)[0] == pytest.approx(0.25 + 0.95 * max(q), abs=1e-12)


def test_replay_buffer_fifo_eviction():
    buf = ReplayBuffer(5, 2)
    for i in range(8):
        buf.push(np.array([i, i]), i % 12, float(i), np.zeros(2), False)
    assert len(buf) == 5
    order = buf.oldest_first()
    assert buf.rewards[order].tolist() == [3.0, 4.0, 5.0, 6.0, 7.0]


def test_replay_buffer_uniform_sampling():
    buf = ReplayBuffer(50, 1)
    for i in range(50):
        buf.push(np.zeros(1), 0, float(i), np.zeros(1), False)
    rng = np.random.default_rng(0)
    idx = np.concatenate([buf.sample_indices(64, rng) for _ in range(3000)])
    freq = np.bincount(idx, minlength=50) / idx.size
    assert np.all(np.abs(freq * 50 - 1) < 0.2)


def test_dqn_config_validation():
    with pytest.raises(ConfigurationError):
        DqnConfig(gamma=0.0)
    with pytest.raises(ConfigurationError):
        DqnConfig(epsilon_min=0.5, epsilon_init=0.2)
    with pytest.raises(ConfigurationError):
        DqnConfig(batch_size=100, replay_capacity=50)


@pytest.mark.parametrize("variant, width", [(Variant.LOCF_NO_COUNTERS, 2), (Variant.LOCF_WITH_COUNTERS, 4)])
def test_short_dqn_run_schedule_and_shapes(variant, width):
    cfg = DqnConfig(episodes=6, batch_size=8, replay_capacity=100, target_sync_interval=10, seed=1)
    res = train_dqn(EnvConfig(variant=variant, step_cap=30), cfg)
    assert len(res.stats) == 6
    assert res.qnet.layer_sizes == (width, 64, 64, 12)
    for n, s in enumerate(res.stats):
        assert s.epsilon == pytest.approx(max(0.01, 0.995 ** n), rel=1e-12)
        assert s.steps <= 30
        assert s.obs_none + s.obs_pos + s.obs_vel + s.obs_both == s.steps


def test_dqn_is_seed_deterministic():
    cfg = DqnConfig(episodes=3, batch_size=8, replay_capacity=100, seed=4)
    env = EnvConfig(step_cap=40)
    a, b = train_dqn(env, cfg), train_dqn(env, cfg)
    np.testing.assert_array_equal(a.qnet.params, b.qnet.params)
    assert a.stats == b.stats


def test_epsilon_per_step_option():
    cfg = DqnConfig(episodes=2, batch_size=8, replay_capacity=100, epsilon_per_step=True)
    res = train_dqn(EnvConfig(step_cap=10), cfg)
    assert res.stats[1].epsilon == pytest.approx(0.995 ** 10)


def test_stats_csv_round_trip(tmp_path):
    stats = [EpisodeStats(0, 10, -3.5, True, 1.0, 1, 2, 3, 4), EpisodeStats(1, 20, 0.125, False, 0.995)]
    write_stats_csv(tmp_path / "s.csv", stats)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == \
        "episode,steps,total_reward,reached_goal,epsilon,obs_none,obs_pos,obs_vel,obs_both"
    assert read_stats_csv(tmp_path / "s.csv") == stats


def test_tile_coder_active_tiles():
    tc = TileCoder(4)
    idx = tc.active(np.array([-0.5, 0.0, 1.0, 2.0]))
    assert idx.size == 16 and len(set(idx)) == 16
    assert idx.min() >= 0 and idx.max() < tc.n_features
    np.testing.assert_array_equal(tc.active(np.array([0.6, 0.07, 5.0, 5.0])) < tc.n_features, True)


def test_zero_step_size_leaves_weights():
    env = EnvConfig(variant=Variant.LOCF_WITH_COUNTERS, reward_mode=RewardMode.STEP, step_cap=200)
    res = train_linear_baseline("sarsa", env, BaselineSchedule(episodes=3, alpha=0.0, epsilon=0.1))
    assert not np.any(res.weights)
    assert len(res.stats) == 3
