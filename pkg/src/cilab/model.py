"""Problem instances, world sampling and voting.

A problem instance is a set of ``n`` binary factors with positive weights
``beta`` (sorted descending, normalised to sum 1). A world assigns each
factor a value in {-1, +1}; the ground truth is the sign of the weighted
sum ``psi``. A population distributes its attention over factors according
to a simplex vector ``rho``; agents vote the value of the factor they
attend to, and the collective prediction is the sign of the attention-
weighted vote ``v``.

Sign ties (``psi == 0`` or ``v == 0``) are resolved as +1. Ties can only
arise for hand-picked weights; the weight sampler rejects instances whose
enumerable worlds contain one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SizeLimitError, UnsupportedCovarianceError

#: Largest factor count for which 2**n enumeration is allowed.
EXACT_LIMIT = 20

#: Simplex / consistency tolerance used by the value-object validators.
SIMPLEX_TOL = 1e-12

SCHEMES = ("binary", "market", "minority")


def _sign(x: float) -> int:
    """Sign with the +1 tie convention."""
    return 1 if x >= 0 else -1


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FactorModel:
    """A prediction problem: factor weights and optional factor covariance.

    ``beta`` must be positive, sorted descending and sum to 1. ``covariance``
    is an optional symmetric matrix with unit diagonal giving pairwise
    factor covariances; ``None`` means independent factors.
    """

    beta: np.ndarray
    covariance: np.ndarray | None = None

    def __post_init__(self):
        beta = _readonly(self.beta)
        object.__setattr__(self, "beta", beta)
        if beta.ndim != 1 or beta.size < 1:
            raise InvalidArgumentError("beta must be a non-empty 1-d vector")
        if np.any(beta <= 0):
            raise InvalidArgumentError("all factor weights must be positive")
        if np.any(np.diff(beta) > 0):
            raise InvalidArgumentError("beta must be sorted descending")
        if abs(beta.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("beta must sum to 1")
        if self.covariance is not None:
            q = _readonly(self.covariance)
            object.__setattr__(self, "covariance", q)
            if q.shape != (beta.size, beta.size):
                raise InvalidArgumentError("covariance must be n x n")
            if not np.allclose(q, q.T, atol=SIMPLEX_TOL):
                raise InvalidArgumentError("covariance must be symmetric")
            if not np.allclose(np.diag(q), 1.0, atol=SIMPLEX_TOL):
                raise InvalidArgumentError("covariance must have unit diagonal")
            if np.any(np.abs(q) > 1 + SIMPLEX_TOL):
                raise InvalidArgumentError("covariance entries must lie in [-1, 1]")

    @property
    def n(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class Attention:
    """Simplex vector of population attention shares over factors."""

    rho: np.ndarray

    def __post_init__(self):
        rho = _readonly(self.rho)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 1 or rho.size < 1:
            raise InvalidArgumentError("rho must be a non-empty 1-d vector")
        if np.any(rho < 0):
            raise InvalidArgumentError("attention shares must be nonnegative")
        if abs(rho.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidArgumentError("attention shares must sum to 1")

    @property
    def n(self) -> int:
        return self.rho.size


@dataclass(frozen=True)
class WorldSample:
    """One realisation of factor values with its latent sum and ground truth."""

    x: np.ndarray
    psi: float
    y: int

    def __post_init__(self):
        x = np.asarray(self.x)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class VoteSummary:
    """Collective vote, prediction, and per-factor agreement shares."""

    v: float
    y_hat: int
    z: np.ndarray

    def __post_init__(self):
        z = _readonly(self.z)
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class RewardSpec:
    """Reward scheme identifier plus the integration floor epsilon."""

    scheme: str
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.epsilon < 0.5:
            raise InvalidArgumentError("epsilon must lie in (0, 0.5)")


def reward_function(spec: RewardSpec, z: float) -> float:
    """Payout multiplier for a correct vote given agreement share ``z``.

    binary -> 1; market -> 1/z; minority -> 1 if z < 1/2 else 0 (strict:
    exactly half the population agreeing pays nothing).
    """
    if z <= 0 or z > 1:
        raise InvalidArgumentError("agreement share must lie in (0, 1]")
    if spec.scheme == "binary":
        return 1.0
    if spec.scheme == "market":
        return 1.0 / z
    return 1.0 if z < 0.5 else 0.0


def world_matrix(n: int) -> np.ndarray:
    """All 2**n sign assignments as a (2**n, n) matrix of +-1.

    Row order counts factor 0 as the most significant bit with +1 first,
    so row 0 is all +1 and the last row is all -1.
    """
    if n > EXACT_LIMIT:
        raise SizeLimitError(f"n={n} exceeds the exact-mode limit {EXACT_LIMIT}")
    idx = np.arange(2**n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def _psi_truth(beta: np.ndarray, worlds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    psi = worlds.astype(float) @ beta
    y = np.where(psi >= 0, 1, -1).astype(np.int8)
    return psi, y


def enumerate_worlds(model: FactorModel) -> list[WorldSample]:
    """All 2**n worlds of an independent-factor model, each exactly once."""
    worlds = world_matrix(model.n)
    psi, y = _psi_truth(model.beta, worlds)
    return [
        WorldSample(x=worlds[k], psi=float(psi[k]), y=int(y[k]))
        for k in range(worlds.shape[0])
    ]


def _has_sign_tie(beta: np.ndarray) -> bool:
    """True if some enumerable world has psi exactly 0 (only checked for
    n within the exact-mode cap; ties are measure-zero beyond it)."""
    if beta.size > EXACT_LIMIT:
        return False
    psi, _ = _psi_truth(beta, world_matrix(beta.size))
    return bool(np.any(psi == 0.0))


def sample_factor_weights(n: int, seed) -> FactorModel:
    """Draw factor weights i.i.d. uniform on (0, 1), sort descending and
    normalise to sum 1.

    Instances whose enumerable worlds produce a sign tie are rejected and
    redrawn, keeping downstream formulas free of tie handling.
    """
    if n < 1:
        raise InvalidArgumentError("factor count must be at least 1")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        beta = np.sort(rng.uniform(size=n))[::-1]
        beta = beta / beta.sum()
        if not _has_sign_tie(beta):
            return FactorModel(beta=beta)
    raise RuntimeError("could not draw tie-free factor weights in 100 attempts")


def sample_world(model: FactorModel, rng) -> WorldSample:
    """Draw one independent world: each factor +-1 with probability 1/2.

    Models with a covariance matrix must use the correlated sampler in the
    stability module instead.
    """
    if model.covariance is not None:
        raise UnsupportedCovarianceError(
            "model has correlated factors; use stability.sample_correlated_world"
        )
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    x = (rng.integers(0, 2, size=model.n, dtype=np.int8) * 2 - 1).astype(np.int8)
    psi = float(model.beta @ x)
    return WorldSample(x=x, psi=psi, y=_sign(psi))


def collective_vote(attention: Attention, world: WorldSample) -> VoteSummary:
    """Aggregate a world into the collective vote and agreement shares.

    ``z[i]`` is the attention mass on factors whose value matches factor
    ``i``; every agent in the same camp shares the same value.
    """
    if attention.n != world.x.size:
        raise InvalidArgumentError("attention and world dimensions differ")
    x = world.x.astype(float)
    v = float(attention.rho @ x)
    z = (1.0 + x * v) / 2.0
    return VoteSummary(v=v, y_hat=_sign(v), z=z)
