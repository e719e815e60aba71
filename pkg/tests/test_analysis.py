import numpy as np
import pytest

from costly_obs.agents import EpisodeStats
from costly_obs.analysis import (
    build_histogram,
    build_ratio_series,
    learning_curve,
    logistic_fit,
    observation_regressions,
    rolling_mean,
)
from costly_obs.errors import DegenerateInputError

import oracles


def log_from(rows):
    """rows: (episode, position, obs_code)."""
    a = np.array(rows, dtype=float).reshape(-1, 3)
    return {"episode": a[:, 0].astype(int), "true_pos": a[:, 1], "obs_choice": a[:, 2].astype(int)}


def test_histogram_single_bracket_full_observation():
    t = build_histogram(log_from([(0, -0.5, 3)] * 10))
    k = int(np.flatnonzero(t.actions)[0])
    assert t.actions.tolist().count(0) == 4 and t.actions[k] == 10
    assert t.pos_pct[k] == 100.0 and t.vel_pct[k] == 100.0
    assert t.empty.sum() == 4 and np.all(t.pos_pct[t.empty] == 0)


def test_histogram_matches_brute_force_count():
    rng = np.random.default_rng(0)
    rows = [(0, float(rng.uniform(-1.2, 0.5)), int(rng.integers(4))) for _ in range(20)]
    t = build_histogram(log_from(rows))
    acts, pos, vel = oracles.count_histogram([(x, o) for _, x, o in rows], list(t.edges))
    assert t.actions.tolist() == acts and t.pos_obs.tolist() == pos and t.vel_obs.tolist() == vel
    assert t.total == 20
    np.testing.assert_allclose(t.edges, [-1.2, -0.86, -0.52, -0.18, 0.16, 0.5], atol=1e-12)


def test_histogram_data_range():
    t = build_histogram(log_from([(0, -0.6, 0), (0, -0.4, 1)]), data_range=True)
    assert t.edges[0] == -0.6 and t.edges[-1] == -0.4
    assert t.actions[0] == 1 and t.actions[-1] == 1


def test_ratio_examples():
    r = build_ratio_series([EpisodeStats(0, 10, 0.0, True, 1.0, 10, 0, 0, 0),
                            EpisodeStats(1, 10, 0.0, True, 1.0, obs_none=4, obs_pos=2, obs_vel=3, obs_both=1)])
    assert r.none_ratio.tolist() == [1.0, 0.4]
    assert r.pos_ratio.tolist() == [0.0, 0.3]
    assert r.vel_ratio.tolist() == [0.0, 0.4]


def test_ratio_from_log_matches_recount():
    rng = np.random.default_rng(1)
    rows = [(int(e), 0.0, int(rng.integers(4))) for e in sorted(rng.integers(0, 5, 200))]
    r = build_ratio_series(log_from(rows))
    for i, ep in enumerate(r.episode):
        obs = [o for e, _, o in rows if e == ep]
        n = len(obs)
        assert r.actions[i] == n
        assert r.pos_ratio[i] == pytest.approx(sum(o in (1, 3) for o in obs) / n)
        assert r.vel_ratio[i] == pytest.approx(sum(o in (2, 3) for o in obs) / n)
        assert r.none_ratio[i] == pytest.approx(obs.count(0) / n)
        parts = r.pos_only[i] + r.vel_only[i] + r.both[i] + r.none[i]
        assert parts == n


def test_logistic_symmetric_data():
    f = logistic_fit([-1, -1, 1, 1], [0, 1, 0, 1])
    assert abs(f.slope) < 1e-9 and abs(f.p_values[1] - 1.0) < 1e-9
    assert f.converged and not f.separation


def test_logistic_separation_flagged():
    x = np.linspace(-1, 1, 20)
    f = logistic_fit(x, (x >= 0).astype(float))
    assert f.separation and np.all(np.isnan(f.p_values))


def test_logistic_single_class_error():
    with pytest.raises(DegenerateInputError):
        logistic_fit([0.0, 1.0, 2.0], [1, 1, 1])
    with pytest.raises(DegenerateInputError):
        logistic_fit([0.0], [1])


def test_logistic_matches_independent_mle():
    rng = np.random.default_rng(7)
    x = rng.normal(size=20)
    y = (rng.random(20) < 1 / (1 + np.exp(-(0.3 + 1.1 * x)))).astype(float)
    f = logistic_fit(x, y)
    np.testing.assert_allclose(f.coef, oracles.logistic_mle(x, y), atol=1e-6)
    assert f.p_values[1] == pytest.approx(oracles.two_sided_normal_p(f.z[1]), abs=1e-12)


def test_logistic_recovers_known_coefficients():
    rng = np.random.default_rng(2024)
    x = rng.uniform(-1.2, 0.5, 10_000)
    true = np.array([-1.0, 2.0])
    y = (rng.random(x.size) < 1 / (1 + np.exp(-(true[0] + true[1] * x)))).astype(float)
    f = logistic_fit(x, y)
    assert np.all(np.abs(f.coef - true) < 3 * f.se)
    assert np.all(f.se > 0)


def test_rolling_mean_examples():
    assert rolling_mean([4, 4, 4, 4], 25).tolist() == [4, 4, 4, 4]
    assert rolling_mean([1, 5, 2], 1).tolist() == [1, 5, 2]
    v = [1.0, 2.0, 6.0, 3.0, 8.0]
    want = [oracles.mean_window(v, i, 1, 1) for i in range(5)]
    np.testing.assert_allclose(rolling_mean(v, 3), want)
    np.testing.assert_allclose(want, [1.5, 3.0, 11 / 3, 17 / 3, 5.5])


def test_learning_curve():
    stats = [EpisodeStats(i, s, 0.0, True, 1.0) for i, s in enumerate([10, 20, 30])]
    raw, smooth = learning_curve(stats, window=3)
    assert raw.tolist() == [10, 20, 30] and smooth.tolist() == [15, 20, 25]


def test_observation_regressions_pooled():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1.2, 0.5, 500)
    obs = np.where(rng.random(500) < 1 / (1 + np.exp(-(2 * x))), 2, 0)
    fits = observation_regressions({"true_pos": x, "obs_choice": obs, "episode": np.zeros(500, int)})
    assert fits["position_observed"] is None  # nobody observed position
    assert np.isfinite(fits["velocity_observed"].p_values[1])
