"""Replicator field, integrator and equilibrium detection."""

import numpy as np
import pytest

from cilab.dynamics import (
    IntegratorConfig,
    detect_equilibrium,
    initial_allocation,
    integrate,
    replicator_rhs,
)
from cilab.errors import InvalidArgumentError
from cilab.model import Attention, FactorModel, RewardSpec, sample_factor_weights
from cilab.rewards import ExpectedRewards, expected_rewards_exact

FIXTURE = FactorModel(beta=np.array([0.6, 0.25, 0.15]))

FAST = IntegratorConfig(rel_tol=1e-4)


class TestReplicatorRhs:
    def test_equal_rewards_stationary(self):
        a = Attention(rho=np.array([0.5, 0.3, 0.2]))
        rewards = ExpectedRewards(values=np.full(3, 0.7), mode="exact")
        assert replicator_rhs(a, rewards) == pytest.approx(np.zeros(3), abs=1e-15)

    def test_vertex_stationary(self):
        a = Attention(rho=np.array([1.0, 0.0, 0.0]))
        rewards = ExpectedRewards(values=np.array([0.9, 0.4, 0.1]), mode="exact")
        assert replicator_rhs(a, rewards) == pytest.approx(np.zeros(3), abs=1e-15)

    def test_fixture_binary_field(self):
        a = initial_allocation(3, "uniform")
        rewards = expected_rewards_exact(FIXTURE, a, RewardSpec("binary"))
        field = replicator_rhs(a, rewards)
        assert field == pytest.approx([1 / 6, -1 / 12, -1 / 12], abs=1e-12)

    def test_tangent_to_simplex(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            rho = rng.dirichlet(np.ones(6))
            values = rng.uniform(0, 2, size=6)
            field = replicator_rhs(Attention(rho=rho),
                                   ExpectedRewards(values=values, mode="exact"))
            assert abs(field.sum()) < 1e-12

    def test_negative_rewards_rejected(self):
        a = initial_allocation(3, "uniform")
        bad = ExpectedRewards(values=np.array([0.5, -0.1, 0.2]), mode="exact")
        with pytest.raises(InvalidArgumentError):
            replicator_rhs(a, bad)

    def test_underflow_guard_returns_raw_field(self):
        a = initial_allocation(3, "uniform")
        tiny = ExpectedRewards(values=np.array([3e-13, 1e-13, 1e-13]), mode="exact")
        field = replicator_rhs(a, tiny)
        raw = a.rho * (tiny.values - a.rho @ tiny.values)
        assert field == pytest.approx(raw, abs=1e-25)


class TestInitialAllocation:
    def test_uniform(self):
        assert initial_allocation(4, "uniform").rho.tolist() == [0.25] * 4

    def test_concentrated(self):
        a = initial_allocation(5, "concentrated")
        assert a.rho == pytest.approx([0.5, 0.125, 0.125, 0.125, 0.125])

    def test_single_factor(self):
        assert initial_allocation(1, "concentrated").rho.tolist() == [1.0]

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            initial_allocation(3, "pyramid")


class TestDetectEquilibrium:
    def test_constant_trajectory(self):
        times = list(range(12))
        assert detect_equilibrium(times, [0.0] * 12, tol=1e-9) == 9.0

    def test_drifting_trajectory(self):
        times = list(range(20))
        assert detect_equilibrium(times, [1e-3] * 20, tol=1e-9) is None

    def test_too_short(self):
        assert detect_equilibrium([0, 1], [0.0, 0.0], tol=1e-9) is None

    def test_settling(self):
        drifts = [1.0] * 5 + [1e-12] * 10
        times = list(range(15))
        assert detect_equilibrium(times, drifts, tol=1e-9) == 14.0


class TestIntegrate:
    def test_binary_small_n_reaches_vertex(self):
        m = sample_factor_weights(5, seed=123)
        traj = integrate(m, RewardSpec("binary"), initial_allocation(5, "uniform"),
                         FAST)
        assert traj.converged_at is not None
        assert traj.final_state.rho[int(np.argmax(m.beta))] > 0.99

    def test_minority_ideal_is_stationary(self):
        m = sample_factor_weights(200, seed=4)
        init = Attention(rho=m.beta.copy())
        traj = integrate(m, RewardSpec("minority"), init,
                         IntegratorConfig(rel_tol=1e-4, t_max=1e3))
        drift = np.abs(traj.final_state.rho - m.beta).max()
        assert drift < 1e-6

    def test_minority_converges_to_ideal_n100(self):
        m = sample_factor_weights(100, seed=3)
        traj = integrate(m, RewardSpec("minority"),
                         initial_allocation(100, "uniform"), FAST)
        assert traj.converged_at is not None
        assert np.abs(traj.final_state.rho - m.beta).sum() < 0.05
        assert traj.accuracy[-1] > 0.95

    def test_simplex_preserved_at_every_sample(self):
        m = sample_factor_weights(30, seed=6)
        traj = integrate(m, RewardSpec("market"),
                         initial_allocation(30, "uniform"), FAST)
        for state in traj.states:
            assert abs(state.rho.sum() - 1.0) < 1e-12
            assert np.all(state.rho >= 0)

    def test_times_strictly_increasing(self):
        m = sample_factor_weights(20, seed=8)
        traj = integrate(m, RewardSpec("market"),
                         initial_allocation(20, "uniform"), FAST)
        assert np.all(np.diff(traj.times) > 0)

    def test_vertex_absorption_monotone_binary(self):
        for seed in (1, 2):
            m = sample_factor_weights(8, seed)
            traj = integrate(m, RewardSpec("binary"),
                             initial_allocation(8, "uniform"), FAST)
            tops = [s.rho[0] for s in traj.states]
            assert np.all(np.diff(tops) >= -1e-9)

    def test_normalisation_does_not_move_equilibria(self):
        # the rescaled and raw fields share orbits, so the reached fixed
        # points agree
        for seed in (0, 1):
            m = sample_factor_weights(5, seed + 40)
            spec = RewardSpec("binary")
            init = initial_allocation(5, "uniform")
            on = integrate(m, spec, init, IntegratorConfig(normalize_rewards=True))
            off = integrate(m, spec, init,
                            IntegratorConfig(normalize_rewards=False, t_max=1e7))
            gap = np.abs(on.final_state.rho - off.final_state.rho).max()
            assert gap < 1e-6

    def test_tightened_tolerances_consistent(self):
        m = sample_factor_weights(6, seed=12)
        spec = RewardSpec("market")
        init = initial_allocation(6, "uniform")
        base = integrate(m, spec, init,
                         IntegratorConfig(rel_tol=1e-6, abs_tol=1e-9))
        tight = integrate(m, spec, init,
                          IntegratorConfig(rel_tol=1e-7, abs_tol=1e-10))
        gap = np.abs(base.final_state.rho - tight.final_state.rho).max()
        assert gap < 1e-5

    def test_dimension_mismatch(self):
        m = sample_factor_weights(5, seed=0)
        with pytest.raises(InvalidArgumentError):
            integrate(m, RewardSpec("binary"), initial_allocation(4, "uniform"))

    def test_recorded_schedule_is_logarithmic(self):
        m = sample_factor_weights(10, seed=2)
        traj = integrate(m, RewardSpec("market"),
                         initial_allocation(10, "uniform"), FAST)
        mid = np.array(traj.times[1:-1])
        ratios = mid[1:] / mid[:-1]
        # log-spaced samples have a common ratio of 10**(1/50)
        assert np.quantile(ratios, 0.9) < 10 ** (1 / 50) + 1e-6
