"""Adaptive composite Gauss-Kronrod quadrature for the reward integrals.

The expected-reward integrand is a Gaussian density in the agreement share
``z`` times a conditional normal tail probability, optionally divided by
``z`` (market scheme). Each factor is integrated independently over
``[epsilon, upper]`` with

* a mandatory panel break at ``z = 1/2`` (the minority payoff cuts off
  there),
* decade-spaced panels bridging ``[epsilon, ...)`` so the market
  integrand's ``1/z`` growth is resolved when the Gaussian reaches it,
* seed panels placed at fixed multiples of the Gaussian's own width, and
* per-panel 15-point Kronrod evaluation with the embedded 7-point Gauss
  rule as error estimate; panels are bisected (worklist, deterministic
  order) until the error budget ``abs_tol``, pro-rated by panel width, is
  met or ``max_panels`` is reached.

Everything below runs in a single compiled kernel so the per-factor
integrals stay cheap inside the replicator loop; results are
bit-reproducible for a fixed configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["QuadratureConfig", "expected_reward_integrals"]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances of the reward quadrature."""

    abs_tol: float = 1e-10
    max_panels: int = 4096
    epsilon: float = 1e-6


# 15-point Kronrod extension of 7-point Gauss-Legendre on [-1, 1].
_GK_X = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
_GK_WK = np.array([
    0.022935322010529224, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552592, 0.1690047266392679, 0.19035057806478542,
    0.20443294007529889, 0.20948214108472782, 0.20443294007529889,
    0.19035057806478542, 0.1690047266392679, 0.14065325971552592,
    0.10479001032225018, 0.06309209262997855, 0.022935322010529224,
])
_GK_WG = np.array([
    0.1294849661688697, 0.27970539148927664, 0.3818300505051189,
    0.41795918367346924, 0.3818300505051189, 0.27970539148927664,
    0.1294849661688697,
])

# Seed panel edges in units of the agreement-share standard deviation.
_SIGMA_KNOTS = np.array([-12.0, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0, 12.0])

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

_STACK = 16384


@njit(cache=True, inline="always")
def _panel_gk15(lo, hi, mu_z, sig_z, mu_psi, slope, s_cond, eps, market):
    """Kronrod value and |K15-G7| error estimate on one panel."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    acc_k = 0.0
    acc_g = 0.0
    for q in range(15):
        z = mid + half * _GK_X[q]
        t = (z - mu_z) / sig_z
        dens = math.exp(-0.5 * t * t) * _INV_SQRT2PI / sig_z
        m = mu_psi + (z - mu_z) * slope
        if s_cond > 0.0:
            tail = 0.5 * math.erfc(-(m / s_cond) * _INV_SQRT2)
        else:
            tail = 1.0 if m > 0.0 else (0.5 if m == 0.0 else 0.0)
        w = dens * tail
        if market:
            w /= z if z > eps else eps
        acc_k += _GK_WK[q] * w
        if q % 2 == 1:
            acc_g += _GK_WG[(q - 1) // 2] * w
    return acc_k * half, abs(acc_k - acc_g) * half


@njit(cache=True)
def _reward_quad(mu_z, sig_z, mu_psi, slope, s_cond, eps, upper, market,
                 abs_tol, max_panels, out):
    n = mu_z.shape[0]
    span = upper - eps
    stack_lo = np.empty(_STACK)
    stack_hi = np.empty(_STACK)
    knots = np.empty(48)
    for i in range(n):
        mz = mu_z[i]
        sz = sig_z[i]
        zmin = mz - 14.0 * sz
        zmax = mz + 14.0 * sz

        nk = 0
        knots[nk] = eps
        nk += 1
        if market and zmin > eps:
            lk = eps
            while lk * 100.0 < zmin and lk * 100.0 < upper:
                lk *= 100.0
                knots[nk] = lk
                nk += 1
        for g in range(_SIGMA_KNOTS.shape[0]):
            zk = mz + sz * _SIGMA_KNOTS[g]
            if eps < zk < upper:
                knots[nk] = zk
                nk += 1
        if eps < 0.5 < upper:
            knots[nk] = 0.5
            nk += 1
        knots[nk] = upper
        nk += 1
        kn = knots[:nk]
        kn.sort()

        sp = 0
        for p in range(nk - 1):
            lo = kn[p]
            hi = kn[p + 1]
            if hi <= lo:
                continue
            # Panels far outside the Gaussian support contribute less than
            # exp(-98) even after the 1/epsilon market amplification.
            if hi < zmin or lo > zmax:
                continue
            stack_lo[sp] = lo
            stack_hi[sp] = hi
            sp += 1

        total = 0.0
        npan = sp
        while sp > 0:
            sp -= 1
            lo = stack_lo[sp]
            hi = stack_hi[sp]
            val, err = _panel_gk15(lo, hi, mz, sz, mu_psi[i], slope[i],
                                   s_cond[i], eps, market)
            if err <= abs_tol * (hi - lo) / span or npan >= max_panels or sp > _STACK - 4:
                total += val
            else:
                mid = 0.5 * (lo + hi)
                stack_lo[sp] = lo
                stack_hi[sp] = mid
                sp += 1
                stack_lo[sp] = mid
                stack_hi[sp] = hi
                sp += 1
                npan += 1
        out[i] = total


def expected_reward_integrals(mu_z, sig_z, mu_psi, slope, s_cond, *, upper,
                              market, cfg: QuadratureConfig) -> np.ndarray:
    """Integrate the reward integrand for every factor at once.

    Parameters are the per-factor conditional moments: mean/std of the
    agreement share, mean of the latent sum, regression slope of the
    latent sum on the share, and the conditional (residual) std, which may
    be exactly 0 (the tail probability then degenerates to a step).
    """
    out = np.empty(mu_z.shape[0])
    _reward_quad(
        np.ascontiguousarray(mu_z, dtype=float),
        np.ascontiguousarray(sig_z, dtype=float),
        np.ascontiguousarray(mu_psi, dtype=float),
        np.ascontiguousarray(slope, dtype=float),
        np.ascontiguousarray(s_cond, dtype=float),
        float(cfg.epsilon), float(upper), bool(market),
        float(cfg.abs_tol), int(cfg.max_panels), out,
    )
    return out
