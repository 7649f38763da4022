"""Numba and numpy kernel backends must agree to float precision."""

import numpy as np
import pytest

import fareopt.kernels as kernels
import fareopt.kernels._numpy as knumpy

try:
    import fareopt.kernels._numba as knumba
    HAVE_NUMBA = True
except ImportError:
    knumba = None
    HAVE_NUMBA = False

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")


def random_instance(rng, n_opt=6, n_samples=40):
    attrs = rng.uniform(0, 5, (n_opt, 3))
    modes = np.array([0, 0, 1, 1, 2, 3], dtype=np.int64)[:n_opt]
    avail = rng.random(n_opt) < 0.9
    avail[rng.integers(0, n_opt)] = True  # at least one available
    samples = rng.uniform(-0.6, 0.6, (n_samples, 7))
    return attrs, modes, avail, samples


@needs_numba
class TestBackendEquivalence:
    def test_dominated_mask(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            attrs, modes, avail, _ = random_instance(rng)
            a = knumba.dominated_mask(attrs, modes, avail)
            b = knumpy.dominated_mask(attrs, modes, avail)
            np.testing.assert_array_equal(np.asarray(a), b)

    def test_dominated_mask_batched(self):
        rng = np.random.default_rng(1)
        attrs = rng.uniform(0, 5, (30, 6, 3))
        modes = np.tile(np.array([0, 0, 1, 1, 2, 3], dtype=np.int64), (30, 1))
        avail = np.ones((30, 6), dtype=bool)
        np.testing.assert_array_equal(
            np.asarray(knumba.dominated_mask(attrs, modes, avail)),
            knumpy.dominated_mask(attrs, modes, avail),
        )

    def test_choice_prob_matrix(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            attrs, modes, avail, samples = random_instance(rng)
            a = np.asarray(knumba.choice_prob_matrix(attrs, modes, avail, samples))
            b = knumpy.choice_prob_matrix(attrs, modes, avail, samples)
            np.testing.assert_allclose(a, b, atol=1e-14)
            np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)

    def test_shares(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            attrs, modes, avail, samples = random_instance(rng)
            weights = rng.random(samples.shape[0])
            weights /= weights.sum()
            a = np.asarray(knumba.shares_for_group(attrs, modes, avail, samples, weights))
            b = knumpy.shares_for_group(attrs, modes, avail, samples, weights)
            np.testing.assert_allclose(a, b, atol=1e-13)

    def test_shares_frozen(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            attrs, modes, avail, samples = random_instance(rng)
            active = avail & ~np.asarray(knumpy.dominated_mask(attrs, modes, avail))
            weights = np.full(samples.shape[0], 1.0 / samples.shape[0])
            a = np.asarray(knumba.shares_frozen(attrs, modes, active, samples, weights))
            b = knumpy.shares_frozen(attrs, modes, active, samples, weights)
            np.testing.assert_allclose(a, b, atol=1e-13)

    def test_info_gain(self):
        rng = np.random.default_rng(5)
        attrs = rng.uniform(0, 5, (40, 6, 3))
        modes = np.tile(np.array([0, 0, 1, 1, 2, 3], dtype=np.int64), (40, 1))
        avail = np.ones((40, 6), dtype=bool)
        samples = rng.uniform(-0.6, 0.6, (64, 7))
        a = np.asarray(knumba.info_gain_scores(attrs, modes, avail, samples))
        b = knumpy.info_gain_scores(attrs, modes, avail, samples)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_mh_chain_identical(self):
        rng = np.random.default_rng(6)
        rec_attrs = rng.uniform(0, 5, (5, 6, 3))
        rec_modes = np.tile(np.array([0, 0, 1, 1, 2, 3], dtype=np.int64), (5, 1))
        rec_avail = np.ones((5, 6), dtype=bool)
        chosen = np.array([0, 1, 2, 3, 4], dtype=np.int64)
        normals = rng.standard_normal((4000, 7))
        log_unifs = np.log(rng.random(4000))
        start = np.zeros(7)
        a_chain, a_acc = knumba.mh_chain(
            rec_attrs, rec_modes, rec_avail, chosen, False, start, 0.1, normals, log_unifs
        )
        b_chain, b_acc = knumpy.mh_chain(
            rec_attrs, rec_modes, rec_avail, chosen, False, start, 0.1, normals, log_unifs
        )
        assert a_acc == b_acc
        np.testing.assert_array_equal(np.asarray(a_chain), b_chain)

    def test_equilibrium_loop_matches(self, casestudy_path):
        from fareopt.equilibrium import _build_context
        from fareopt.learning import Prior
        from fareopt.network import load_network
        from fareopt.population import Population, UserPreferences

        config = load_network(casestudy_path)
        rng = np.random.default_rng(7)
        users = tuple(
            UserPreferences(Prior(constrain_signs=True).sample(rng, 30), car_owner=u < 2)
            for u in range(4)
        )
        ctx = _build_context(config, Population(users))
        fares = np.array([12.0, 8.0])
        f0 = np.full(6, config.demand / 6)
        args = (*ctx.net_params, fares, config.demand, ctx.scale, ctx.mode_idx,
                ctx.avail, ctx.avail, ctx.avail, 0, 1.0,
                ctx.samples, ctx.weights, ctx.group_offsets,
                f0, 0.5, 1e-6 * config.demand, 500, 25, 1e-12 * config.demand)
        fa, ia, ra, sa = knumba.equilibrium_loop(*args)
        fb, ib, rb, sb = knumpy.equilibrium_loop(*args)
        assert (ia, sa) == (ib, sb)
        np.testing.assert_allclose(np.asarray(fa), fb, atol=1e-9)
        assert abs(ra - rb) <= 1e-9


class TestBackendSelection:
    def test_env_flag_selects_numpy(self):
        import subprocess
        import sys
        out = subprocess.run(
            [sys.executable, "-c", "import fareopt.kernels as k; print(k.BACKEND)"],
            capture_output=True, text=True, env={"FAREOPT_BACKEND": "numpy", "PATH": "/usr/bin"},
            cwd=str(__import__("pathlib").Path(__file__).resolve().parents[1] / "src"),
        )
        assert out.stdout.strip() == "numpy"

    def test_bad_flag_rejected(self):
        import subprocess
        import sys
        out = subprocess.run(
            [sys.executable, "-c", "import fareopt.kernels"],
            capture_output=True, text=True, env={"FAREOPT_BACKEND": "cuda", "PATH": "/usr/bin"},
            cwd=str(__import__("pathlib").Path(__file__).resolve().parents[1] / "src"),
        )
        assert out.returncode != 0
        assert "FAREOPT_BACKEND" in out.stderr

    def test_default_backend_active(self):
        assert kernels.BACKEND in ("numba", "numpy")
