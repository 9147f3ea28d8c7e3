import math

import numpy as np
import pytest

from svjump.benchmarks import bates_test_model
from svjump.lattice import (build_cir_tree, build_ou_tree, forward_expectation,
                            joint_transition, local_moments, sample_factor_paths,
                            sample_joint_path)
from svjump.model import MarketModel
from svjump.reference import riccati_solve


def _bates_trees(n_steps=50, horizon=0.5):
    m = bates_test_model()
    return m, build_cir_tree(m, n_steps, horizon)


class TestCirTree:
    def test_node_values_hand(self):
        m, tree = _bates_trees(n_steps=50, horizon=0.5)  # h = 0.01
        assert tree.values[0][0] == pytest.approx(0.04)
        assert tree.values[1][1] == pytest.approx(0.0484, abs=1e-15)
        assert tree.values[1][0] == pytest.approx(0.0324, abs=1e-15)

    def test_root_jump_probability_hand(self):
        m, tree = _bates_trees(n_steps=50, horizon=0.5)
        # mu_Y(0.04) = 0 at the long-run mean, target bracketed by neighbours
        assert tree.ku[0][0] == 1
        assert tree.kd[0][0] == 0
        assert tree.pu[0][0] == pytest.approx(0.475, abs=1e-12)

    def test_zero_truncation(self):
        m = MarketModel(s0=100, y0=1e-4, sigma_y=0.4).validated()
        tree = build_cir_tree(m, 1, 1.0)  # sqrt(y0)=0.01 < sigma/2*sqrt(h)=0.2
        assert tree.values[1][0] == 0.0

    def test_monotone_slices_and_index_bounds(self):
        m, tree = _bates_trees(n_steps=200, horizon=0.5)
        for n in range(tree.n_steps):
            assert np.all(np.diff(tree.values[n]) >= 0.0)
            k = np.arange(n + 1)
            assert np.all(tree.kd[n] <= k) and np.all(k < tree.ku[n])
            assert np.all((tree.pu[n] >= 0.0) & (tree.pu[n] <= 1.0))

    def test_single_jumps_in_interior_region(self):
        # theta_* = (kappa theta / sigma)^2, theta^* = sigma^2/(4 kappa^2)
        m, tree = _bates_trees(n_steps=200, horizon=0.5)
        lo = (m.kappa_y * m.theta_y / m.sigma_y) ** 2
        hi = m.sigma_y**2 / (4.0 * m.kappa_y**2)
        h = tree.dt
        for n in range(tree.n_steps):
            v = tree.values[n]
            interior = (v > lo * h) & (v < hi / h)
            k = np.arange(n + 1)
            assert np.all(tree.ku[n][interior] == k[interior] + 1)
            assert np.all(tree.kd[n][interior] == k[interior])

    def test_down_stays_at_zero_nodes(self):
        # at (near-)zero nodes the positive drift forces kd = k
        m = MarketModel(s0=100, y0=0.0001, sigma_y=0.4).validated()
        tree = build_cir_tree(m, 100, 0.5)
        for n in range(20, tree.n_steps):
            zero = tree.values[n] == 0.0
            if np.any(zero):
                k = np.arange(n + 1)
                assert np.all(tree.kd[n][zero] == k[zero])

    def test_first_local_moment_identity(self):
        m, tree = _bates_trees(n_steps=100, horizon=0.5)
        for n in (0, 10, 50, 99):
            drift = m.kappa_y * (m.theta_y - tree.values[n]) * tree.dt
            for k in range(n + 1):
                if not tree.clamped[n][k]:
                    assert local_moments(tree, n, k, 1) == pytest.approx(drift[k], abs=1e-14)

    def test_second_local_moment_interior_bound(self):
        m, tree = _bates_trees(n_steps=200, horizon=0.5)
        h = tree.dt
        lo = (m.kappa_y * m.theta_y / m.sigma_y) ** 2
        hi = m.sigma_y**2 / (4.0 * m.kappa_y**2)
        sig2 = m.sigma_y**2
        for n in (10, 100, 199):
            v = tree.values[n]
            for k in range(n + 1):
                if lo * h < v[k] < hi / h:
                    m2 = local_moments(tree, n, k, 2)
                    bound = 0.5 * sig2 * (m.kappa_y * (m.theta_y + v[k]) + sig2 / 8.0) * h**2
                    assert abs(m2 - sig2 * v[k] * h) <= bound + 1e-18

    def test_weak_convergence_first_moment(self):
        # start away from the long-run mean so the reference decays in time
        m = MarketModel(s0=100, y0=0.09, kappa_y=2.0, theta_y=0.04, sigma_y=0.4).validated()
        horizon = 0.5
        ref = m.theta_y + (m.y0 - m.theta_y) * math.exp(-m.kappa_y * horizon)
        errs, hs = [], []
        for n in (50, 100, 200, 400, 800):
            tree = build_cir_tree(m, n, horizon)
            errs.append(abs(forward_expectation(tree, lambda y: y) - ref))
            hs.append(horizon / n)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope >= 0.8

    def test_weak_convergence_exponential_functional(self):
        m = bates_test_model()
        horizon = 0.5
        s = 2.0
        ref = float(riccati_solve(-s, 0.0, m.kappa_y, m.sigma_y, m.theta_y)
                    .transform(horizon, m.y0).real)
        errs, hs = [], []
        for n in (50, 100, 200, 400):
            tree = build_cir_tree(m, n, horizon)
            errs.append(abs(forward_expectation(tree, lambda y: np.exp(-s * y)) - ref))
            hs.append(horizon / n)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope >= 0.8


class TestOuTree:
    def test_root_transition(self, bhw_model):
        tree = build_ou_tree(bhw_model, 50, 0.5)
        assert tree.ku[0][0] == 1 and tree.kd[0][0] == 0
        assert tree.pu[0][0] == pytest.approx(0.5, abs=1e-15)

    def test_slice_values(self, bhw_model):
        tree = build_ou_tree(bhw_model, 50, 0.5)  # h = 0.01
        assert np.allclose(tree.values[1], [-0.1, 0.1])

    def test_zero_mean_reversion_symmetric_walk(self):
        m = MarketModel(s0=100, y0=0.04, sigma_r=0.2, kappa_r=0.0, rho2=0.0)
        tree = build_ou_tree(m, 40, 0.5)
        for n in range(tree.n_steps):
            assert np.allclose(tree.pu[n], 0.5)

    def test_exact_first_moment(self, bhw_model):
        tree = build_ou_tree(bhw_model, 100, 0.5)
        assert abs(forward_expectation(tree, lambda r: r)) <= 1e-12


class TestJointTransition:
    def test_product_probabilities(self, bhw_model):
        cir = build_cir_tree(bhw_model, 50, 0.5)
        ou = build_ou_tree(bhw_model, 50, 0.5)
        jt = joint_transition(cir, ou, 0, 0, 0)
        py, pr = cir.pu[0][0], ou.pu[0][0]
        assert jt.probs == pytest.approx((py * pr, py * (1 - pr), (1 - py) * pr,
                                          (1 - py) * (1 - pr)))
        assert jt.probs[0] == pytest.approx(0.2375, abs=1e-12)
        assert jt.probs[2] == pytest.approx(0.2625, abs=1e-12)
        assert sum(jt.probs) == pytest.approx(1.0, abs=0.0)

    def test_degenerate_marginal(self):
        # huge positive drift clamps the variance up-probability to 1
        m = MarketModel(s0=100, y0=0.04, kappa_y=80.0, theta_y=1.0, sigma_y=0.4,
                        sigma_r=0.2, kappa_r=1.0).validated()
        cir = build_cir_tree(m, 4, 1.0)
        ou = build_ou_tree(m, 4, 1.0)
        assert cir.pu[0][0] == 1.0 and cir.clamped[0][0]
        jt = joint_transition(cir, ou, 0, 0, 0)
        assert jt.probs[2] == 0.0 and jt.probs[3] == 0.0

    def test_invalid_index(self, bhw_model):
        cir = build_cir_tree(bhw_model, 10, 0.5)
        ou = build_ou_tree(bhw_model, 10, 0.5)
        with pytest.raises(IndexError):
            joint_transition(cir, ou, 3, 5, 0)


class TestSampling:
    def test_forced_up_moves(self):
        m = MarketModel(s0=100, y0=0.04, kappa_y=80.0, theta_y=1.0, sigma_y=0.4).validated()
        tree = build_cir_tree(m, 6, 1.0)
        assert all(np.all(p == 1.0) for p in tree.pu)
        path = sample_joint_path(tree, None, np.random.default_rng(0))
        assert np.array_equal(path[:, 0], np.arange(7))
        assert np.all(path[:, 1] == 0)

    def test_seed_determinism(self, bates_model):
        tree = build_cir_tree(bates_model, 30, 0.5)
        p1 = sample_joint_path(tree, None, np.random.default_rng(42))
        p2 = sample_joint_path(tree, None, np.random.default_rng(42))
        assert np.array_equal(p1, p2)

    def test_empirical_up_frequency(self, bates_model):
        tree = build_cir_tree(bates_model, 2, 0.5)
        n = 100_000
        idx = sample_factor_paths(tree, n, np.random.default_rng(123))
        p_hat = np.mean(idx[:, 1] == tree.ku[0][0])
        p = tree.pu[0][0]
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(p_hat - p) <= 3.0 * sigma
