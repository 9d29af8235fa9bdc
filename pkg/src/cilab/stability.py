"""Numerical checks of the stationarity and stability predictions.

At the ideal attention state (shares proportional to the factor weights)
the collective vote is always right, so minority-scheme rewards vanish
identically and the state is stationary. Perturbation analysis predicts,
with ``sigma_B = sqrt(sum beta**2)``:

* two-factor transfer ``+Delta`` on ``i`` / ``-Delta`` on ``j``: the
  per-capita restoring rate is ``-(1/2) * phi(beta_i - beta_j; 0,
  sigma_B) * Delta`` (``phi`` the normal density with that standard
  deviation);
* a spread perturbation ``Delta = k * delta`` over many factors: the raw
  replicator field is ``beta_i / (2 sqrt(2 pi) sigma_B) * (-Delta_i +
  sum_j beta_j Delta_j)``.

Both are verified against Monte Carlo reward estimates rather than the
quadrature, because near the optimum the rewards are rare-event
probabilities and the Gaussian tails are exactly what is under test.

The predicted two-factor rate is what the raw field yields per unit of
attention: the measured counterpart is the difference of per-capita
growth rates projected on the transfer direction, ``(E_i - E_j) / 2``
(the population-average term cancels).

Correlated worlds come from a block-equicorrelated family: disjoint
blocks share a latent coin, each member copies it with probability
``p = (1 + sqrt(c)) / 2`` so the within-block covariance is exactly
``c``; blocks are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnsupportedCovarianceError
from .model import Attention, FactorModel, RewardSpec, WorldSample, _sign
from .montecarlo import mc_expected_rewards, sample_world_batch
from .rewards import expected_rewards


@dataclass(frozen=True)
class Perturbation:
    """A simplex-tangent displacement ``delta = k * delta_rel`` with the
    scale parameters entering the predictions."""

    delta: np.ndarray
    k: float
    delta_rel: np.ndarray
    sigma_delta: float
    sigma_b: float

    @classmethod
    def from_shape(cls, model: FactorModel, delta_rel: np.ndarray,
                   k: float) -> "Perturbation":
        delta_rel = np.asarray(delta_rel, dtype=float)
        if abs(delta_rel.sum()) > 1e-12:
            raise InvalidArgumentError("perturbation shape must sum to zero")
        delta = k * delta_rel
        if np.any(model.beta + delta < 0):
            raise InvalidArgumentError("perturbed attention would leave the simplex")
        return cls(
            delta=delta,
            k=k,
            delta_rel=delta_rel,
            sigma_delta=float(np.sqrt(delta @ delta)),
            sigma_b=float(np.sqrt(model.beta @ model.beta)),
        )


@dataclass(frozen=True)
class StabilityReport:
    """Predicted vs measured rate for one perturbation experiment."""

    predicted_rate: float
    measured_rate: float
    relative_error: float
    passed: bool


def _report(predicted: float, measured: float, tol: float) -> StabilityReport:
    rel = abs(measured - predicted) / max(abs(predicted), 1e-12)
    return StabilityReport(predicted_rate=predicted, measured_rate=measured,
                           relative_error=rel, passed=bool(rel <= tol))


def _normal_pdf(x: float, sd: float) -> float:
    return math.exp(-0.5 * (x / sd) ** 2) / (sd * math.sqrt(2 * math.pi))


def stationarity_check(model: FactorModel, spec: RewardSpec,
                       candidate: Attention, mode: str = "auto",
                       samples: int = 200_000, seed=0) -> float:
    """Largest raw replicator-field component at a candidate state.

    ``mode='mc'`` estimates rewards by Monte Carlo (mandatory for models
    with correlated factors); other modes dispatch through the reward
    engine.
    """
    rho = candidate.rho
    if mode == "mc" or model.covariance is not None:
        est = mc_expected_rewards(model, candidate, spec, samples, seed)
        values = np.array([e.value for e in est])
    else:
        values = expected_rewards(model, candidate, spec, mode=mode).values
    raw = rho * (values - float(rho @ values))
    return float(np.abs(raw).max())


def _two_factor_values(model: FactorModel, i: int, j: int, delta: float,
                       spec: RewardSpec, samples: int, seed):
    beta = model.beta
    if i == j:
        raise InvalidArgumentError("pick two distinct factors")
    if not 0 <= delta <= min(beta[j], 0.01):
        raise InvalidArgumentError(
            "delta must stay within the donor factor's share and below 0.01")
    rho = beta.copy()
    rho[i] += delta
    rho[j] -= delta
    est = mc_expected_rewards(model, Attention(rho=rho), spec, samples, seed)
    return rho, np.array([e.value for e in est])


def two_factor_perturbation(model: FactorModel, i: int, j: int, delta: float,
                            spec: RewardSpec | None = None,
                            samples: int = 400_000, seed=0,
                            tol: float = 0.25) -> StabilityReport:
    """Measure the restoring rate of a two-factor attention transfer.

    Shifts ``delta`` of attention from factor ``j`` to factor ``i`` around
    the ideal state, estimates rewards by Monte Carlo, and compares the
    per-capita rate projected on the transfer direction against the
    normal-density prediction. ``passed`` additionally requires the raw
    field on the untouched factors to stay an order of magnitude below
    the perturbed one (the transfer must not leak into other factors).
    """
    spec = spec or RewardSpec(scheme="minority")
    beta = model.beta
    rho, values = _two_factor_values(model, i, j, delta, spec, samples, seed)
    measured = (values[i] - values[j]) / 2.0
    predicted = -0.5 * _normal_pdf(beta[i] - beta[j], float(np.sqrt(beta @ beta))) * delta
    rep = _report(predicted, measured, tol)
    if delta == 0:
        return rep
    side, main = two_factor_side_effects(model, i, j, delta, spec,
                                         _field=(rho, values))
    return StabilityReport(predicted_rate=rep.predicted_rate,
                           measured_rate=rep.measured_rate,
                           relative_error=rep.relative_error,
                           passed=bool(rep.passed and side <= 0.1 * main))


def two_factor_side_effects(model: FactorModel, i: int, j: int, delta: float,
                            spec: RewardSpec | None = None,
                            samples: int = 400_000, seed=0,
                            _field=None) -> tuple[float, float]:
    """(max |raw field| on untouched factors, |raw field| on factor i)."""
    spec = spec or RewardSpec(scheme="minority")
    if _field is None:
        rho, values = _two_factor_values(model, i, j, delta, spec, samples, seed)
    else:
        rho, values = _field
    raw = rho * (values - float(rho @ values))
    mask = np.ones(model.n, dtype=bool)
    mask[[i, j]] = False
    return float(np.abs(raw[mask]).max()), float(abs(raw[i]))


def extensive_perturbation(model: FactorModel, delta_rel: np.ndarray,
                           k_values, spec: RewardSpec | None = None,
                           samples_base: int = 800_000, seed=0,
                           tol: float = 0.25,
                           covariance_corrected: bool = False) -> list[StabilityReport]:
    """Measure the full replicator field under a spread perturbation.

    For each scale ``k`` (sample counts grow as ``1/k`` to keep the noise
    share of the error roughly constant), the raw Monte Carlo field is
    compared against the prediction componentwise; the report aggregates
    the mismatch as ``|measured - predicted| / |predicted|`` in the
    Euclidean norm, with the measured rate being the field's component
    along the predicted direction.

    The default second term ``sum_j beta_j Delta_j`` presumes the
    perturbation noise ``sum_j Delta_j x_j`` is uncorrelated with the
    latent sum. When the perturbation shape is itself correlated with the
    weights that covariance feeds back into the conditional tail, and the
    measured field converges to a different second term,
    ``beta_i * (sum_j beta_j Delta_j) / sigma_B**2`` (the regression of
    the share noise on the latent sum); ``covariance_corrected=True``
    selects it. Weight-independent shapes make the two forms agree.
    """
    spec = spec or RewardSpec(scheme="minority")
    beta = model.beta
    delta_rel = np.asarray(delta_rel, dtype=float)
    if abs(float(delta_rel.sum())) > 1e-12:
        raise InvalidArgumentError("perturbation shape must sum to zero")
    share = np.max(delta_rel**2) / float(delta_rel @ delta_rel)
    if share > 0.05:
        raise InvalidArgumentError(
            "perturbation shape concentrated on too few factors for the "
            "spread analysis (an entry carries more than 5% of the energy)"
        )
    k_values = sorted(k_values, reverse=True)
    sigma_b = float(np.sqrt(beta @ beta))
    pref = beta / (2.0 * math.sqrt(2.0 * math.pi) * sigma_b)
    reports = []
    children = np.random.SeedSequence(seed).spawn(len(k_values))
    for idx, k in enumerate(k_values):
        pert = Perturbation.from_shape(model, delta_rel, k)
        rho = beta + pert.delta
        attention = Attention(rho=rho)
        samples = int(samples_base * (k_values[0] / k))
        est = mc_expected_rewards(model, attention, spec, samples, children[idx])
        values = np.array([e.value for e in est])
        field = rho * (values - float(rho @ values))
        t_term = float(beta @ pert.delta)
        if covariance_corrected:
            predicted_vec = pref * (-pert.delta + beta * (t_term / sigma_b**2))
        else:
            predicted_vec = pref * (-pert.delta + t_term)
        norm_p = float(np.linalg.norm(predicted_vec))
        measured = float(field @ predicted_vec) / norm_p
        rel = float(np.linalg.norm(field - predicted_vec)) / norm_p
        reports.append(StabilityReport(
            predicted_rate=norm_p, measured_rate=measured,
            relative_error=rel, passed=bool(rel <= tol),
        ))
    return reports


def block_equicorrelated_covariance(n: int, block_size: int, c: float) -> np.ndarray:
    """Covariance matrix of consecutive equal blocks with within-block
    correlation ``c`` (the last block absorbs any remainder)."""
    if not 0 <= c < 1:
        raise InvalidArgumentError("within-block correlation must lie in [0, 1)")
    q = np.eye(n)
    start = 0
    while start < n:
        stop = min(start + block_size, n)
        if n - stop < block_size:
            stop = n
        q[start:stop, start:stop] = c
        np.fill_diagonal(q[start:stop, start:stop], 1.0)
        start = stop
    return q


def covariance_blocks(q: np.ndarray) -> tuple[list[np.ndarray], float]:
    """Recover (blocks, c) from a block-equicorrelated matrix.

    Raises UnsupportedCovarianceError for anything outside the family:
    non-unit diagonal, unequal within-block entries, nonzero cross-block
    entries, or c outside [0, 1).
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    if not np.allclose(np.diag(q), 1.0, atol=1e-12):
        raise UnsupportedCovarianceError("diagonal must be 1")
    off = q - np.eye(n)
    nz = np.abs(off) > 1e-12
    values = off[nz]
    if values.size == 0:
        return [np.array([i]) for i in range(n)], 0.0
    c = float(values[0])
    if not np.allclose(values, c, atol=1e-12):
        raise UnsupportedCovarianceError("within-block correlations differ")
    if not 0 <= c < 1:
        raise UnsupportedCovarianceError("correlation must lie in [0, 1)")
    visited = np.zeros(n, dtype=bool)
    blocks = []
    for start in range(n):
        if visited[start]:
            continue
        members = np.flatnonzero(nz[start] | (np.arange(n) == start))
        # every pair inside a block must be connected
        sub = nz[np.ix_(members, members)] | np.eye(members.size, dtype=bool)
        if not sub.all():
            raise UnsupportedCovarianceError("blocks are not equicorrelated cliques")
        if visited[members].any():
            raise UnsupportedCovarianceError("blocks overlap")
        visited[members] = True
        blocks.append(members)
    return blocks, c


def sample_correlated_world(model: FactorModel, seed) -> WorldSample:
    """Draw one world from a block-equicorrelated model.

    Per block, a shared coin ``b`` is drawn and each member equals ``b``
    with probability ``(1 + sqrt(c)) / 2``, giving within-block covariance
    exactly ``c`` and zero across blocks.
    """
    if model.covariance is None:
        raise InvalidArgumentError("model has no covariance; use sample_world")
    x = sample_world_batch(model, 1, np.random.default_rng(seed))[0].astype(np.int8)
    psi = float(model.beta @ x)
    return WorldSample(x=x, psi=psi, y=_sign(psi))


def correlated_sigmas(model: FactorModel, perturbation: Perturbation) -> tuple[float, float]:
    """Scale parameters under correlated factors: the quadratic forms of
    the weights and of the perturbation against the covariance."""
    if model.covariance is None:
        raise InvalidArgumentError("model has no covariance")
    q = model.covariance
    sigma_b = math.sqrt(float(model.beta @ q @ model.beta))
    sigma_d = math.sqrt(float(perturbation.delta @ q @ perturbation.delta))
    return sigma_b, sigma_d


def correlated_stationarity_check(model: FactorModel,
                                  spec: RewardSpec | None = None,
                                  samples: int = 200_000, seed=0) -> float:
    """Max raw-field component at the ideal state under correlated worlds,
    estimated by Monte Carlo."""
    spec = spec or RewardSpec(scheme="minority")
    candidate = Attention(rho=model.beta.copy())
    return stationarity_check(model, spec, candidate, mode="mc",
                              samples=samples, seed=seed)
