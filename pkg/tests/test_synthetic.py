"""Synthetic users and the active-vs-random learning benchmark."""

import numpy as np
import pytest

from fareopt.learning import ChainConfig
from fareopt.synthetic import (
    SessionProtocol,
    draw_true_omega,
    holdout_records,
    run_learning_benchmark,
    simulate_active_session,
    simulate_random_session,
)

FAST = SessionProtocol(pool_size=60, chain=ChainConfig(1200, 300, 30, 0.05))


class TestTrueOmega:
    def test_signs_and_support(self):
        rng = np.random.default_rng(0)
        draws = np.stack([draw_true_omega(rng) for _ in range(500)])
        assert (draws[:, :3] <= 0).all()
        assert (np.linalg.norm(draws, axis=1) <= 1 + 1e-12).all()

    def test_style_shaping(self):
        rng = np.random.default_rng(1)
        post = np.stack([draw_true_omega(rng, "post") for _ in range(300)])
        pre = np.stack([draw_true_omega(rng, "pre") for _ in range(300)])
        assert (np.abs(post[:, 2]) >= np.abs(post[:, 0])).all()  # risk dominates
        assert (np.abs(pre[:, 0]) >= np.abs(pre[:, 2])).all()    # latency dominates

    def test_unknown_style(self):
        with pytest.raises(ValueError):
            draw_true_omega(np.random.default_rng(2), "mid")


class TestSessions:
    def test_active_session_reproducible(self):
        omega = draw_true_omega(np.random.default_rng(3))
        records_a, post_a = simulate_active_session(omega, 3, 42, FAST)
        records_b, post_b = simulate_active_session(omega, 3, 42, FAST)
        assert records_a == records_b
        np.testing.assert_array_equal(post_a.samples, post_b.samples)

    def test_arms_share_holdout_but_not_training(self):
        omega = draw_true_omega(np.random.default_rng(4))
        active_records, _ = simulate_active_session(omega, 3, 7, FAST)
        random_records, _ = simulate_random_session(omega, 3, 7, FAST)
        assert active_records != random_records
        held_a = holdout_records(omega, 4, 7, FAST)
        held_b = holdout_records(omega, 4, 7, FAST)
        assert held_a == held_b


class TestBenchmark:
    def test_zero_active_queries_sit_at_chance(self):
        result = run_learning_benchmark(
            n_users=20, n_active=0, n_holdout=6, seed=5, protocol=FAST
        )
        # 120 predictions from an uninformed posterior: binomial 3-sigma
        # band around 1/6 is +-0.102
        assert abs(result.mean_active - 1 / 6) <= 0.11
        assert abs(result.mean_random - 1 / 6) <= 0.11

    def test_benchmark_deterministic(self):
        a = run_learning_benchmark(n_users=2, n_active=2, n_holdout=2, seed=6, protocol=FAST)
        b = run_learning_benchmark(n_users=2, n_active=2, n_holdout=2, seed=6, protocol=FAST)
        assert a.rows == b.rows
        assert a.p_value == b.p_value

    def test_identical_arms_give_p_one(self):
        from fareopt.synthetic import BenchResult, UserBenchRow

        rows = tuple(UserBenchRow(u, 0.5, 0.5) for u in range(5))
        result = BenchResult(rows=rows, n_active=1, n_holdout=2, seed=0)
        assert result.p_value == 1.0  # no difference, no evidence

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            run_learning_benchmark(n_users=0)
        with pytest.raises(ValueError):
            run_learning_benchmark(n_users=1, n_holdout=0)
