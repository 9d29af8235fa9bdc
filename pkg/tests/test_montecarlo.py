"""Monte Carlo estimators and the finite-population simulator."""

import numpy as np
import pytest

from cilab.errors import InvalidArgumentError
from cilab.model import Attention, RewardSpec, sample_factor_weights
from cilab.montecarlo import (
    FinitePopulationConfig,
    finite_population_run,
    mc_accuracy,
    mc_expected_rewards,
)
from cilab.rewards import expected_rewards, expected_rewards_exact
from cilab.accuracy import collective_accuracy_approx
from cilab.harness import _strict_argmax_instance


class TestMcExpectedRewards:
    def test_fixture_market(self):
        from cilab.model import FactorModel

        m = FactorModel(beta=np.array([0.6, 0.25, 0.15]))
        a = Attention(rho=np.full(3, 1 / 3))
        est = mc_expected_rewards(m, a, RewardSpec("market"), samples=1_000_000,
                                  seed=1)
        for value, want in zip(est, (1.75, 0.625, 0.625)):
            assert abs(value.value - want) <= 3 * value.std_error

    def test_minority_at_ideal_is_zero(self):
        m = sample_factor_weights(100, seed=2)
        a = Attention(rho=m.beta.copy())
        est = mc_expected_rewards(m, a, RewardSpec("minority"), samples=50_000,
                                  seed=3)
        assert all(e.value == 0.0 for e in est)

    def test_binary_bounded(self):
        m = sample_factor_weights(40, seed=5)
        a = Attention(rho=np.full(40, 1 / 40))
        est = mc_expected_rewards(m, a, RewardSpec("binary"), samples=50_000,
                                  seed=4)
        assert all(0.0 <= e.value <= 1.0 for e in est)

    def test_agrees_with_exact_all_schemes(self):
        rng = np.random.default_rng(0)
        failures = 0
        for seed in range(6):
            m = sample_factor_weights(8, seed)
            rho = rng.dirichlet(np.ones(8))
            a = Attention(rho=rho)
            for scheme in ("binary", "market", "minority"):
                exact = expected_rewards_exact(m, a, RewardSpec(scheme)).values
                est = mc_expected_rewards(m, a, RewardSpec(scheme),
                                          samples=200_000, seed=(seed, scheme == "market"))
                for e, x in zip(est, exact):
                    if abs(e.value - x) > 4 * max(e.std_error, 1e-12):
                        failures += 1
        assert failures == 0

    def test_std_error_scaling(self):
        m = sample_factor_weights(20, seed=7)
        a = Attention(rho=np.full(20, 0.05))
        ratios = []
        for rep in range(10):
            small = mc_expected_rewards(m, a, RewardSpec("market"),
                                        samples=20_000, seed=(rep, 0))
            big = mc_expected_rewards(m, a, RewardSpec("market"),
                                      samples=40_000, seed=(rep, 1))
            ratios.append(big[0].std_error / small[0].std_error)
        assert np.mean(ratios) == pytest.approx(0.707, abs=0.05)

    def test_minimum_samples(self):
        m = sample_factor_weights(5, seed=0)
        a = Attention(rho=np.full(5, 0.2))
        with pytest.raises(InvalidArgumentError):
            mc_expected_rewards(m, a, RewardSpec("binary"), samples=10, seed=0)

    def test_deterministic_for_seed(self):
        m = sample_factor_weights(12, seed=9)
        a = Attention(rho=np.full(12, 1 / 12))
        e1 = mc_expected_rewards(m, a, RewardSpec("minority"), samples=30_000, seed=5)
        e2 = mc_expected_rewards(m, a, RewardSpec("minority"), samples=30_000, seed=5)
        assert [e.value for e in e1] == [e.value for e in e2]


class TestMcAccuracy:
    def test_ideal_is_exact_one(self):
        m = sample_factor_weights(500, seed=1)
        a = Attention(rho=m.beta.copy())
        est = mc_accuracy(m, a, samples=50_000, seed=2)
        assert est.value == 1.0
        assert est.std_error == 0.0

    def test_fixture(self):
        from cilab.model import FactorModel

        m = FactorModel(beta=np.array([0.6, 0.25, 0.15]))
        a = Attention(rho=np.full(3, 1 / 3))
        est = mc_accuracy(m, a, samples=300_000, seed=3)
        assert abs(est.value - 0.75) <= 3 * est.std_error

    def test_large_n_uniform_arcsine_value(self):
        m = sample_factor_weights(10000, seed=4)
        a = Attention(rho=np.full(10000, 1e-4))
        est = mc_accuracy(m, a, samples=100_000, seed=5)
        assert est.value == pytest.approx(5 / 6, abs=0.01)

    def test_agrees_with_dense_approximation(self):
        for n in (100, 1000):
            m = sample_factor_weights(n, seed=n)
            a = Attention(rho=np.full(n, 1 / n))
            approx = collective_accuracy_approx(m, a)
            est = mc_accuracy(m, a, samples=120_000, seed=(n, 1))
            assert abs(approx - est.value) <= max(3 * est.std_error, 0.01)


class TestFinitePopulation:
    def test_no_imitation_is_frozen(self):
        m = sample_factor_weights(10, seed=0)
        cfg = FinitePopulationConfig(population=5000, rounds=200,
                                     imitation_rate=0.0, seed=1)
        traj = finite_population_run(m, RewardSpec("binary"), cfg)
        assert np.all(traj[-1] == traj[0])

    def test_share_conservation(self):
        m = sample_factor_weights(8, seed=2)
        cfg = FinitePopulationConfig(population=9999, rounds=100,
                                     imitation_rate=0.3, seed=3)
        traj = finite_population_run(m, RewardSpec("minority"), cfg)
        counts = np.rint(traj * 9999)
        assert np.all(counts.sum(axis=1) == 9999)

    def test_binary_fixates_on_top_factor(self):
        # instance screened for a strict reward argmax: small factor
        # counts often tie several factors at the same accuracy
        m = _strict_argmax_instance(5, seed=0)
        cfg = FinitePopulationConfig(population=100_000, rounds=2500,
                                     imitation_rate=0.5, seed=4)
        traj = finite_population_run(m, RewardSpec("binary"), cfg)
        assert traj[-1, 0] > 0.95

    def test_minority_tracks_weights(self):
        m = sample_factor_weights(50, seed=5)
        cfg = FinitePopulationConfig(population=100_000, rounds=4000,
                                     imitation_rate=0.1, seed=6)
        traj = finite_population_run(m, RewardSpec("minority"), cfg)
        tail = traj[3000:]
        assert np.abs(tail.mean(axis=0) - m.beta).sum() < 0.1

    def test_population_warning(self):
        m = sample_factor_weights(10, seed=7)
        cfg = FinitePopulationConfig(population=5, rounds=10,
                                     imitation_rate=0.1, seed=0)
        with pytest.warns(UserWarning):
            finite_population_run(m, RewardSpec("binary"), cfg)
