"""Problem-instance, sampling and voting behaviour."""

import numpy as np
import pytest

from cilab.errors import InvalidArgumentError, SizeLimitError, UnsupportedCovarianceError
from cilab.model import (
    Attention,
    FactorModel,
    RewardSpec,
    _has_sign_tie,
    collective_vote,
    enumerate_worlds,
    reward_function,
    sample_factor_weights,
    sample_world,
)

FIXTURE_BETA = np.array([0.6, 0.25, 0.15])


class TestFactorModel:
    def test_valid(self):
        m = FactorModel(beta=FIXTURE_BETA)
        assert m.n == 3
        assert not m.beta.flags.writeable

    def test_rejects_unsorted(self):
        with pytest.raises(InvalidArgumentError):
            FactorModel(beta=np.array([0.25, 0.6, 0.15]))

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidArgumentError):
            FactorModel(beta=np.array([1.1, 0.0, -0.1]))

    def test_rejects_unnormalised(self):
        with pytest.raises(InvalidArgumentError):
            FactorModel(beta=np.array([0.6, 0.3, 0.2]))

    def test_covariance_validation(self):
        q = np.eye(3)
        q[0, 1] = 0.5  # asymmetric
        with pytest.raises(InvalidArgumentError):
            FactorModel(beta=FIXTURE_BETA, covariance=q)


class TestAttention:
    def test_simplex_enforced(self):
        with pytest.raises(InvalidArgumentError):
            Attention(rho=np.array([0.5, 0.6]))
        with pytest.raises(InvalidArgumentError):
            Attention(rho=np.array([1.1, -0.1]))

    def test_valid(self):
        a = Attention(rho=np.array([0.5, 0.5]))
        assert a.n == 2


class TestSampleFactorWeights:
    def test_n1_forced_to_one(self):
        m = sample_factor_weights(1, seed=7)
        assert m.beta.tolist() == [1.0]

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_sorted_normalised(self, seed):
        m = sample_factor_weights(3, seed)
        assert np.all(np.diff(m.beta) <= 0)
        assert m.beta.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(m.beta > 0)

    def test_large_n_max_weight_small(self):
        # order statistics of 10000 uniform draws: the largest weight is
        # about 2/n, far below 1e-3
        for seed in range(100):
            m = sample_factor_weights(10000, seed)
            assert m.beta[0] < 1e-3

    def test_rejects_zero_factors(self):
        with pytest.raises(InvalidArgumentError):
            sample_factor_weights(0, seed=0)

    def test_tie_detection_helper(self):
        assert _has_sign_tie(np.array([0.5, 0.5]))
        assert not _has_sign_tie(FIXTURE_BETA)

    def test_sampled_instances_tie_free(self):
        for seed in range(20):
            m = sample_factor_weights(6, seed)
            assert not _has_sign_tie(m.beta)


class TestEnumerateWorlds:
    def test_n1(self):
        worlds = enumerate_worlds(FactorModel(beta=np.array([1.0])))
        assert [(w.x[0], w.psi, w.y) for w in worlds] == [(1, 1.0, 1), (-1, -1.0, -1)]

    def test_fixture_hand_enumeration(self):
        worlds = enumerate_worlds(FactorModel(beta=FIXTURE_BETA))
        assert len(worlds) == 8
        by_x = {tuple(w.x): w for w in worlds}
        w = by_x[(1, -1, -1)]
        assert w.psi == pytest.approx(0.2, abs=1e-15)
        assert w.y == 1

    def test_each_world_once(self):
        worlds = enumerate_worlds(FactorModel(beta=FIXTURE_BETA))
        assert len({tuple(w.x) for w in worlds}) == 8

    def test_psi_consistency(self):
        m = sample_factor_weights(8, seed=5)
        for w in enumerate_worlds(m):
            expected = float(m.beta @ w.x)
            assert w.psi == pytest.approx(expected, rel=1e-15)

    def test_size_limit(self):
        m = sample_factor_weights(21, seed=0)
        with pytest.raises(SizeLimitError):
            enumerate_worlds(m)


class TestSampleWorld:
    def test_forced_small_case(self):
        m = FactorModel(beta=np.array([0.7, 0.3]))
        w = sample_world(m, np.random.default_rng(0))
        assert w.psi == pytest.approx(float(m.beta @ w.x))
        assert w.y == (1 if w.psi >= 0 else -1)

    def test_latent_sum_centred(self):
        # CLT check: the mean of psi over many draws stays within
        # 4 sigma_B / sqrt(draws) of zero
        m = sample_factor_weights(1000, seed=9)
        rng = np.random.default_rng(42)
        draws = 100_000
        b = (rng.integers(0, 2, size=(draws, 1000), dtype=np.int8) * 2 - 1)
        psi = b.astype(np.float32) @ m.beta.astype(np.float32)
        sigma_b = np.sqrt(m.beta @ m.beta)
        assert abs(psi.mean()) < 4 * sigma_b / np.sqrt(draws)
        assert abs((psi >= 0).mean() - 0.5) < 0.01

    def test_correlated_model_refused(self):
        q = np.eye(2)
        m = FactorModel(beta=np.array([0.5001, 0.4999]), covariance=q)
        with pytest.raises(UnsupportedCovarianceError):
            sample_world(m, 0)


class TestCollectiveVote:
    def test_degenerate_attention(self):
        a = Attention(rho=np.array([1.0, 0.0, 0.0]))
        worlds = {tuple(w.x): w for w in enumerate_worlds(FactorModel(beta=FIXTURE_BETA))}
        vs = collective_vote(a, worlds[(1, -1, -1)])
        assert vs.v == 1.0
        assert vs.y_hat == 1
        assert vs.z.tolist() == [1.0, 0.0, 0.0]

    def test_uniform_attention_fixture(self):
        a = Attention(rho=np.full(3, 1 / 3))
        worlds = {tuple(w.x): w for w in enumerate_worlds(FactorModel(beta=FIXTURE_BETA))}
        vs = collective_vote(a, worlds[(1, 1, -1)])
        assert vs.v == pytest.approx(1 / 3, abs=1e-15)
        assert vs.y_hat == 1
        assert vs.z == pytest.approx(np.array([2 / 3, 2 / 3, 1 / 3]), abs=1e-15)

    def test_unanimous_world(self):
        a = Attention(rho=np.array([0.2, 0.3, 0.5]))
        worlds = {tuple(w.x): w for w in enumerate_worlds(FactorModel(beta=FIXTURE_BETA))}
        vs = collective_vote(a, worlds[(1, 1, 1)])
        assert vs.v == pytest.approx(1.0)
        assert np.all(vs.z == 1.0)

    def test_dimension_mismatch(self):
        a = Attention(rho=np.array([0.5, 0.5]))
        worlds = enumerate_worlds(FactorModel(beta=FIXTURE_BETA))
        with pytest.raises(InvalidArgumentError):
            collective_vote(a, worlds[0])

    def test_camp_shares_partition(self):
        # z_i equals one minus the mass of the opposite camp
        rng = np.random.default_rng(3)
        m = sample_factor_weights(7, seed=11)
        a = Attention(rho=rng.dirichlet(np.ones(7)))
        for w in enumerate_worlds(m):
            vs = collective_vote(a, w)
            opposite = np.array([a.rho[w.x == -xi].sum() for xi in w.x])
            assert vs.z == pytest.approx(1.0 - opposite, abs=1e-12)

    def test_antisymmetry(self):
        # negating every factor flips the sums and signs but leaves the
        # agreement shares unchanged (tie-free instances)
        m = sample_factor_weights(6, seed=2)
        rng = np.random.default_rng(1)
        a = Attention(rho=rng.dirichlet(np.ones(6)))
        for w in enumerate_worlds(m):
            if w.psi == 0:
                continue
            vs = collective_vote(a, w)
            neg = [u for u in enumerate_worlds(m) if np.all(u.x == -w.x)][0]
            vs_neg = collective_vote(a, neg)
            assert neg.psi == -w.psi
            if vs.v != 0:
                assert vs_neg.v == -vs.v
                assert vs_neg.y_hat == -vs.y_hat
            assert vs_neg.z == pytest.approx(vs.z, abs=1e-12)

    def test_ideal_attention_always_right(self):
        for seed in range(5):
            m = sample_factor_weights(10, seed)
            a = Attention(rho=m.beta.copy())
            for w in enumerate_worlds(m):
                assert collective_vote(a, w).y_hat == w.y


class TestRewardFunction:
    def test_minority_step(self):
        spec = RewardSpec(scheme="minority")
        assert reward_function(spec, 0.4999) == 1.0
        assert reward_function(spec, 0.5) == 0.0

    def test_market_reciprocal(self):
        assert reward_function(RewardSpec(scheme="market"), 0.25) == 4.0

    def test_binary_constant(self):
        spec = RewardSpec(scheme="binary")
        for z in (0.01, 0.5, 1.0):
            assert reward_function(spec, z) == 1.0

    def test_nonpositive_share_rejected(self):
        with pytest.raises(InvalidArgumentError):
            reward_function(RewardSpec(scheme="market"), 0.0)

    def test_spec_validation(self):
        with pytest.raises(InvalidArgumentError):
            RewardSpec(scheme="lottery")
        with pytest.raises(InvalidArgumentError):
            RewardSpec(scheme="binary", epsilon=0.7)
