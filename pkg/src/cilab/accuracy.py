"""Collective accuracy and attention diversity.

Accuracy is the probability that the sign of the attention-weighted vote
matches the sign of the weight-weighted latent sum. Three evaluators:

* exact enumeration over all 2**n worlds (small n),
* a centred bivariate-Gaussian model of (latent sum, vote) whose orthant
  probability has the closed form ``1/2 + arcsin(r)/pi`` in the
  correlation ``r`` (the equivalent double-integral evaluator is kept as a
  cross-check), and
* a sparse hybrid for attention concentrated on fewer than 10 factors:
  enumerate the heavy factors' signs exactly and fold the light factors
  into a bivariate-Gaussian correction of both the vote and the latent
  sum.

The Gram determinant entering ``r`` is evaluated through the Lagrange
identity ``sum_{i<j} (beta_i rho_j - beta_j rho_i)**2``, which is exactly
zero in floating point when the attention is proportional to the weights,
so the optimum scores exactly 1.

Diversity is the Shannon entropy of the attention vector normalised by
``log n`` (1 for uniform attention, 0 for a single factor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .errors import DegenerateAttentionError, InvalidArgumentError, NotSparseError
from .model import Attention, FactorModel, world_matrix

#: Sparse gate: at least this share of attention on fewer than
#: ``SPARSE_MAX_HEAVY`` factors.
SPARSE_MASS = 0.99
SPARSE_MAX_HEAVY = 10

#: Largest factor count for which the Gram determinant uses the exact
#: pairwise Lagrange identity (O(n^2) memory) instead of the clamped
#: moment difference.
_LAGRANGE_LIMIT = 4096


@dataclass(frozen=True)
class AccuracyMoments:
    """Second moments of the joint (latent sum, vote) Gaussian model."""

    s_psi_psi: float
    s_vv: float
    s_psi_v: float


def accuracy_moments(model: FactorModel, attention: Attention) -> AccuracyMoments:
    beta, rho = model.beta, attention.rho
    return AccuracyMoments(
        s_psi_psi=float(beta @ beta),
        s_vv=float(rho @ rho) / 4.0,
        s_psi_v=float(beta @ rho) / 2.0,
    )


def collective_accuracy_exact(model: FactorModel, attention: Attention) -> float:
    """Fraction of the 2**n equally likely worlds predicted correctly."""
    beta, rho = model.beta, attention.rho
    if beta.size != rho.size:
        raise InvalidArgumentError("model and attention dimensions differ")
    return _exact_accuracy(beta, rho)


def _exact_accuracy(beta: np.ndarray, rho: np.ndarray) -> float:
    worlds = world_matrix(beta.size).astype(float)
    psi = worlds @ beta
    v = worlds @ rho
    agree = (psi >= 0) == (v >= 0)
    return float(agree.mean())


def _gram_defect(beta: np.ndarray, rho: np.ndarray) -> float:
    """(sum b^2)(sum r^2)/4 - (sum b r)^2/4... the Gram determinant of the
    moment pair, nonnegative by construction."""
    if beta.size <= _LAGRANGE_LIMIT:
        m = np.outer(beta, rho)
        d = m - m.T
        return 0.125 * float(np.sum(d * d))
    s = float(beta @ beta) * float(rho @ rho) - float(beta @ rho) ** 2
    return max(s, 0.0) / 4.0


def collective_accuracy_approx(model: FactorModel, attention: Attention) -> float:
    """Bivariate-Gaussian accuracy via the arcsine orthant identity."""
    beta, rho = model.beta, attention.rho
    if beta.size != rho.size:
        raise InvalidArgumentError("model and attention dimensions differ")
    s_vv = float(rho @ rho) / 4.0
    if s_vv <= 0:
        raise DegenerateAttentionError("attention vector has no spread")
    s_psi_v = float(beta @ rho) / 2.0
    defect = _gram_defect(beta, rho)
    # r = s_psi_v / sqrt(s_psi_psi * s_vv) with
    # s_psi_psi * s_vv = s_psi_v**2 + defect, so
    # arcsin(r) = atan2(s_psi_v, sqrt(defect)); exact at defect == 0.
    return 0.5 + math.atan2(s_psi_v, math.sqrt(defect)) / math.pi


def collective_accuracy_double_integral(model: FactorModel,
                                        attention: Attention) -> float:
    """Accuracy by direct numerical integration of the conditional-Gaussian
    tail over the positive latent sums; cross-check of the closed form."""
    mom = accuracy_moments(model, attention)
    s_psi = math.sqrt(mom.s_psi_psi)
    resid = mom.s_vv - mom.s_psi_v**2 / mom.s_psi_psi
    if resid <= 0:
        return 1.0
    s_v = math.sqrt(resid)
    a = mom.s_psi_v / mom.s_psi_psi

    def integrand(p):
        dens = math.exp(-0.5 * (p / s_psi) ** 2) / (s_psi * math.sqrt(2 * math.pi))
        return dens * ndtr(p * a / s_v)

    val, _ = quad(integrand, 0.0, 14.0 * s_psi, limit=200, epsabs=1e-13)
    return 2.0 * val


def _bvn_upper(a: float, b: float, var_x: float, var_y: float,
               cov: float) -> float:
    """P(X > a, Y > b) for centred bivariate normal (X, Y).

    Degenerate components reduce to univariate tails or indicators.
    Evaluated as a one-dimensional integral of the conditional tail, which
    is deterministic and accurate to ~1e-12.
    """
    sx = math.sqrt(max(var_x, 0.0))
    sy = math.sqrt(max(var_y, 0.0))
    if sx == 0.0 and sy == 0.0:
        return float(0.0 > a and 0.0 > b)
    if sx == 0.0:
        return ndtr(-b / sy) if a < 0 else 0.0
    if sy == 0.0:
        return ndtr(-a / sx) if b < 0 else 0.0
    slope = cov / var_x
    resid = var_y - cov**2 / var_x
    if resid <= 0:
        # perfectly correlated: Y = slope * X
        if slope > 0:
            lo = max(a, b / slope)
            return ndtr(-lo / sx)
        if slope < 0:
            lo, hi = a, b / slope
            return max(ndtr(hi / sx) - ndtr(lo / sx), 0.0) if hi > lo else 0.0
        return ndtr(-a / sx) if b < 0 else 0.0
    s_res = math.sqrt(resid)

    def integrand(x):
        dens = math.exp(-0.5 * (x / sx) ** 2) / (sx * math.sqrt(2 * math.pi))
        return dens * ndtr((slope * x - b) / s_res)

    hi = 14.0 * sx
    lo = max(a, -hi)
    if lo >= hi:
        return 0.0
    val, _ = quad(integrand, lo, hi, limit=200, epsabs=1e-13)
    return val


def sparse_attention_support(attention: Attention) -> np.ndarray | None:
    """Indices of the heavy factors when the sparse gate passes, else None.

    Heavy factors are the smallest prefix (by attention) carrying at least
    99% of the mass; the gate requires that prefix to be shorter than 10.
    """
    rho = attention.rho
    order = np.argsort(rho)[::-1]
    csum = np.cumsum(rho[order])
    count = int(np.searchsorted(csum, SPARSE_MASS) + 1)
    if count >= SPARSE_MAX_HEAVY:
        return None
    return np.sort(order[:count])


def collective_accuracy_sparse(model: FactorModel, attention: Attention) -> float:
    """Hybrid accuracy for attention concentrated on few factors.

    Enumerates the sign assignments of the heavy factors; conditional on
    each assignment, the light factors contribute a centred bivariate-
    Gaussian correction to both the vote and the latent sum (their shared
    signs correlate the two), and the agreement probability is a shifted
    orthant probability.
    """
    heavy = sparse_attention_support(attention)
    if heavy is None:
        raise NotSparseError("attention is well spread; use the dense path")
    beta, rho = model.beta, attention.rho
    light = np.setdiff1d(np.arange(beta.size), heavy)
    b_h, r_h = beta[heavy], rho[heavy]
    b_l, r_l = beta[light], rho[light]
    var_psi = float(b_l @ b_l)
    var_v = float(r_l @ r_l)
    cov = float(b_l @ r_l)
    worlds = world_matrix(len(heavy)).astype(float)
    psi_h = worlds @ b_h
    v_h = worlds @ r_h
    total = 0.0
    degenerate = var_psi == 0.0 and var_v == 0.0
    for k in range(worlds.shape[0]):
        # P(psi > 0, V > 0) + P(psi < 0, V < 0) with offsets from the
        # heavy assignment; the zero-measure boundary follows the +1 tie
        # convention in the fully degenerate (no light factor) case.
        if degenerate:
            total += float((psi_h[k] >= 0) == (v_h[k] >= 0))
            continue
        total += _bvn_upper(-psi_h[k], -v_h[k], var_psi, var_v, cov)
        total += _bvn_upper(psi_h[k], v_h[k], var_psi, var_v, cov)
    return total / worlds.shape[0]


def diversity(attention: Attention) -> float:
    """Shannon entropy of the attention shares, normalised to [0, 1].

    Returns 1.0 for a single factor by convention (the entropy scale is
    empty there).
    """
    rho = attention.rho
    if rho.size == 1:
        return 1.0
    pos = rho[rho > 0]
    ent = max(-float(pos @ np.log(pos)), 0.0)
    return ent / math.log(rho.size)
