"""Expected rewards per factor: exact enumeration and Gaussian approximation.

An agent attending to factor ``i`` is paid ``f(z_i)`` when its vote matches
the ground truth. Exact mode averages the payoff over all 2**n worlds.
Approximate mode conditions on ``x_i = +1`` (the two signs are symmetric)
and models the latent sum and the agreement share as jointly Gaussian;
the payoff expectation then becomes a one-dimensional integral of
``f(z) * N(z; mu_z, k_zz) * Phi(m(z)/s)`` with the conditional mean
``m(z) = mu_psi + (z - mu_z) * k_psi_z / k_zz`` and residual standard
deviation ``s = sqrt(k_psi_psi - k_psi_z**2 / k_zz)``. All Phi arguments
use standard deviations, never variances.

For the binary scheme the share integrates out and the expectation reduces
to ``Phi(beta_i / sqrt(sum_{j != i} beta_j**2))`` in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateAttentionError, InvalidArgumentError, SizeLimitError
from .model import (
    EXACT_LIMIT,
    Attention,
    FactorModel,
    RewardSpec,
    world_matrix,
)
from .quadrature import QuadratureConfig, expected_reward_integrals

#: Factor count at which auto dispatch switches from exact to approximate.
APPROX_THRESHOLD = 10


@dataclass(frozen=True)
class ConditionalMoments:
    """Joint Gaussian moments of (latent sum, agreement share) given
    that factor ``i`` observes +1."""

    mu_psi: float
    mu_z: float
    k_psi_psi: float
    k_zz: float
    k_psi_z: float


@dataclass(frozen=True)
class ExpectedRewards:
    """Per-factor expected payouts with the computation mode that
    produced them ('exact', 'approx' or 'monte-carlo')."""

    values: np.ndarray
    mode: str


def conditional_moments(model: FactorModel, attention: Attention,
                        i: int) -> ConditionalMoments:
    """Moments of (psi, z_i) conditioned on x_i = +1."""
    if model.n < 2:
        raise InvalidArgumentError("conditional moments need at least 2 factors")
    beta, rho = model.beta, attention.rho
    if beta.size != rho.size:
        raise InvalidArgumentError("model and attention dimensions differ")
    b_i, r_i = beta[i], rho[i]
    return ConditionalMoments(
        mu_psi=float(b_i),
        mu_z=float((1 + r_i) / 2),
        k_psi_psi=float(beta @ beta - b_i * b_i),
        k_zz=float((rho @ rho - r_i * r_i) / 4),
        k_psi_z=float((beta @ rho - b_i * r_i) / 2),
    )


def _moment_arrays(beta: np.ndarray, rho: np.ndarray):
    """Vectorised conditional moments for every factor at once."""
    s_b = beta @ beta
    s_r = rho @ rho
    t = beta @ rho
    k_pp = s_b - beta**2
    mu_z = (1 + rho) / 2
    k_zz = (s_r - rho**2) / 4
    k_pz = (t - beta * rho) / 2
    return mu_z, k_zz, k_pz, k_pp


def _payoff_factors(worlds: np.ndarray, beta: np.ndarray, rho: np.ndarray,
                    spec: RewardSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-world payoff weight f(w) and truth signs.

    Every correct voter shares the same agreement share: the attention mass
    ``w`` of the camp that matches the truth. So the payoff of factor ``i``
    in a world is ``[x_i = Y] * f(w)``.
    """
    xf = worlds.astype(float)
    psi = xf @ beta
    y = np.where(psi >= 0, 1.0, -1.0)
    v = xf @ rho
    w = (1.0 + y * v) / 2.0
    if spec.scheme == "binary":
        f = np.ones_like(w)
    elif spec.scheme == "market":
        f = 1.0 / np.maximum(w, spec.epsilon)
    else:
        f = (w < 0.5).astype(float)
    return f, y


def expected_rewards_exact(model: FactorModel, attention: Attention,
                           spec: RewardSpec) -> ExpectedRewards:
    """Average the payoff over all 2**n equally likely worlds.

    The agreement share of a correct voter is bounded below by its own
    camp's mass, so no divergence arises for the market scheme; shares are
    still floored at epsilon so factors carrying no attention stay finite.
    """
    if model.covariance is not None:
        raise InvalidArgumentError("exact rewards require independent factors")
    worlds = world_matrix(model.n)
    f, y = _payoff_factors(worlds, model.beta, attention.rho, spec)
    # E_i = mean of [x_i = Y] f = (mean f + mean x_i f Y) / 2
    c = f * y
    values = (f.mean() + (worlds.astype(float).T @ c) / worlds.shape[0]) / 2.0
    return ExpectedRewards(values=values, mode="exact")


def expected_reward_binary_approx(model: FactorModel, i: int) -> float:
    """Closed-form Gaussian approximation of the binary-scheme reward."""
    beta = model.beta
    rest = beta @ beta - beta[i] ** 2
    return float(ndtr(beta[i] / np.sqrt(rest)))


def _approx_values(model: FactorModel, rho: np.ndarray, spec: RewardSpec,
                   quad: QuadratureConfig) -> np.ndarray:
    beta = model.beta
    if beta.size != rho.size:
        raise InvalidArgumentError("model and attention dimensions differ")
    mu_z, k_zz, k_pz, k_pp = _moment_arrays(beta, rho)
    if spec.scheme == "binary":
        # the share integrates out of a constant payoff; no share variance
        # is needed, so a vertex is fine here
        return ndtr(beta / np.sqrt(k_pp))
    if np.any(k_zz <= 0):
        raise DegenerateAttentionError(
            "attention concentrated on one factor: agreement share has zero "
            "variance; use the exact or Monte Carlo path"
        )
    sig_z = np.sqrt(k_zz)
    slope = k_pz / k_zz
    s_cond = np.sqrt(np.maximum(k_pp - k_pz**2 / k_zz, 0.0))
    upper = 0.5 if spec.scheme == "minority" else 1.0
    cfg = QuadratureConfig(abs_tol=quad.abs_tol, max_panels=quad.max_panels,
                           epsilon=spec.epsilon)
    return expected_reward_integrals(mu_z, sig_z, beta, slope, s_cond,
                                     upper=upper, market=spec.scheme == "market",
                                     cfg=cfg)


def expected_reward_approx(model: FactorModel, attention: Attention,
                           spec: RewardSpec, i: int,
                           quad: QuadratureConfig | None = None) -> float:
    """Gaussian-approximation reward of a single factor via quadrature."""
    quad = quad or QuadratureConfig()
    return float(_approx_values(model, attention.rho, spec, quad)[i])


def expected_rewards_approx(model: FactorModel, attention: Attention,
                            spec: RewardSpec,
                            quad: QuadratureConfig | None = None) -> ExpectedRewards:
    """Gaussian-approximation rewards for all factors."""
    quad = quad or QuadratureConfig()
    return ExpectedRewards(values=_approx_values(model, attention.rho, spec, quad),
                           mode="approx")


def expected_rewards(model: FactorModel, attention: Attention, spec: RewardSpec,
                     mode: str = "auto",
                     quad: QuadratureConfig | None = None) -> ExpectedRewards:
    """Dispatch between exact and approximate reward computation.

    ``auto`` uses exact enumeration below the approximation threshold and
    the Gaussian path otherwise; a degenerate-attention failure of the
    approximation falls back to exact when the factor cap permits.
    """
    quad = quad or QuadratureConfig()
    if mode == "auto":
        mode = "exact" if model.n < APPROX_THRESHOLD else "approx"
    if mode == "exact":
        return expected_rewards_exact(model, attention, spec)
    if mode == "approx":
        try:
            return expected_rewards_approx(model, attention, spec, quad)
        except DegenerateAttentionError:
            if model.n <= EXACT_LIMIT:
                return expected_rewards_exact(model, attention, spec)
            raise
    if mode == "mc":
        from .montecarlo import mc_expected_rewards

        estimates = mc_expected_rewards(model, attention, spec,
                                        samples=100_000, seed=0)
        return ExpectedRewards(values=np.array([e.value for e in estimates]),
                               mode="monte-carlo")
    raise InvalidArgumentError(f"unknown reward mode {mode!r}")


class RewardEvaluator:
    """Reusable reward computer for one (model, spec) pair.

    Precomputes whatever does not depend on the attention state: the world
    table in exact mode, the closed-form vector for the binary scheme in
    approximate mode (binary rewards do not depend on attention at all).
    Used by the replicator integrator, which evaluates rewards thousands
    of times along a trajectory.
    """

    def __init__(self, model: FactorModel, spec: RewardSpec, mode: str = "auto",
                 quad: QuadratureConfig | None = None):
        if mode == "auto":
            mode = "exact" if model.n < APPROX_THRESHOLD else "approx"
        if mode == "exact" and model.n > EXACT_LIMIT:
            raise SizeLimitError(f"n={model.n} exceeds the exact-mode limit")
        self.model = model
        self.spec = spec
        self.mode = mode
        self.quad = quad or QuadratureConfig()
        self._worlds = world_matrix(model.n).astype(float) if mode == "exact" else None
        self._binary_vec = None
        if mode == "approx" and spec.scheme == "binary":
            beta = model.beta
            self._binary_vec = ndtr(beta / np.sqrt(beta @ beta - beta**2))

    def values(self, rho: np.ndarray) -> np.ndarray:
        """Expected rewards at a raw attention vector."""
        if self.mode == "exact":
            beta = self.model.beta
            psi = self._worlds @ beta
            y = np.where(psi >= 0, 1.0, -1.0)
            v = self._worlds @ rho
            w = (1.0 + y * v) / 2.0
            if self.spec.scheme == "binary":
                f = np.ones_like(w)
            elif self.spec.scheme == "market":
                f = 1.0 / np.maximum(w, self.spec.epsilon)
            else:
                f = (w < 0.5).astype(float)
            c = f * y
            return (f.mean() + (self._worlds.T @ c) / len(f)) / 2.0
        if self._binary_vec is not None:
            return self._binary_vec
        return _approx_values(self.model, rho, self.spec, self.quad)
