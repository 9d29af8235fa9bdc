"""Replicator dynamics over the attention simplex.

The attention shares evolve by the replicator field: each share grows in
proportion to its factor's expected-reward advantage over the population
average. Rewards are rescaled each evaluation so the population-average
reward is one (pure time reparametrisation: same orbits, same fixed
points, smoother pace); when the total reward underflows, the raw field
is used so the dynamics degrade to zero instead of 0/0.

Integration uses the Bogacki-Shampine embedded 2(3) pair with standard
step control. Stage coefficients (FSAL; the third-order solution is
propagated, the second-order one supplies the error estimate):

    c      = [0, 1/2, 3/4, 1]
    b3     = [2/9, 1/3, 4/9, 0]
    b2     = [7/24, 1/4, 1/3, 1/8]
    error  = h * (-5/72 k1 + 1/12 k2 + 1/9 k3 - 1/8 k4)

After every accepted step the state is clamped at the configured simplex
floor and renormalised; the flow preserves the simplex analytically, so
the repair only removes floating-point drift.

Equilibrium is declared when the *raw* (unnormalised) field stays below
``equilibrium_tol`` for 10 consecutive accepted steps. The rescaled field
cannot be used for this: near the minority-scheme optimum both the reward
advantage and the total reward vanish together, so their ratio stays
finite while the true motion dies. A complementary stall detector stops
runs whose state stops making progress over ``stall_window`` accepted
steps: either the net movement falls below ``stall_tol``, or the motion
is almost purely oscillatory (net movement under ``chatter_ratio`` of the
summed per-step movement inside a ``chatter_band``-sized neighbourhood),
which is how trajectories end at the minority scheme's non-smooth
optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accuracy as acc
from .errors import InvalidArgumentError, StiffnessError
from .model import Attention, FactorModel, RewardSpec
from .quadrature import QuadratureConfig
from .rewards import APPROX_THRESHOLD, ExpectedRewards, RewardEvaluator

#: Total-reward level below which normalisation is skipped.
REWARD_GUARD = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control, stopping and recording parameters."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    t_max: float = 1e6
    equilibrium_tol: float = 1e-9
    equilibrium_window: int = 10
    stall_window: int = 50
    stall_tol: float = 1e-8
    chatter_ratio: float = 0.05
    chatter_band: float = 1e-3
    record_per_decade: int = 50
    record_start: float = 1e-2
    simplex_floor: float = 0.0
    max_steps: int = 500_000
    normalize_rewards: bool = True
    min_step: float = 1e-14
    max_step: float | None = None

    @property
    def step_cap(self) -> float:
        """Largest allowed step: keeps the time axis resolved even when
        the error estimate would permit arbitrary growth (e.g. once
        decaying shares clamp to an exact vertex)."""
        return self.max_step if self.max_step is not None else self.t_max / 50.0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.t_max <= 0:
            raise InvalidArgumentError("tolerances and horizon must be positive")


@dataclass
class Trajectory:
    """Recorded time series of one replicator integration."""

    times: list[float] = field(default_factory=list)
    states: list[Attention] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    diversity: list[float] = field(default_factory=list)
    converged_at: float | None = None

    @property
    def final_state(self) -> Attention:
        return self.states[-1]


def replicator_rhs(attention: Attention, rewards: ExpectedRewards,
                   normalize: bool = True) -> np.ndarray:
    """Replicator field at one attention state.

    With normalisation the rewards are divided by the population average
    so that average equals one; below the underflow guard the raw field
    ``rho * (E - rho.E)`` is returned unchanged.
    """
    values = rewards.values
    if attention.n != values.size:
        raise InvalidArgumentError("attention and reward dimensions differ")
    if np.any(values < 0):
        raise InvalidArgumentError("rewards must be nonnegative")
    return _rhs_raw(attention.rho, values, normalize)[0]


def _rhs_raw(rho: np.ndarray, values: np.ndarray,
             normalize: bool) -> tuple[np.ndarray, np.ndarray]:
    """(integrated field, raw field) at a raw simplex vector."""
    total = float(rho @ values)
    raw = rho * (values - total)
    if not normalize or total < REWARD_GUARD:
        return raw, raw
    return rho * (values / total - 1.0), raw


def initial_allocation(n: int, kind: str = "uniform") -> Attention:
    """uniform: equal shares; concentrated: half on the top factor and the
    rest spread equally."""
    if n < 1:
        raise InvalidArgumentError("need at least one factor")
    if kind == "uniform":
        return Attention(rho=np.full(n, 1.0 / n))
    if kind == "concentrated":
        if n == 1:
            return Attention(rho=np.array([1.0]))
        rho = np.full(n, 0.5 / (n - 1))
        rho[0] = 0.5
        return Attention(rho=rho)
    raise InvalidArgumentError(f"unknown initial allocation {kind!r}")


def detect_equilibrium(times, drifts, tol: float, window: int = 10) -> float | None:
    """First time at which the drift stays below ``tol`` for ``window``
    consecutive evaluations; None if never."""
    times = np.asarray(times, dtype=float)
    drifts = np.asarray(drifts, dtype=float)
    if drifts.size < window:
        return None
    run = 0
    for k in range(drifts.size):
        run = run + 1 if drifts[k] < tol else 0
        if run >= window:
            return float(times[k])
    return None


def _record_times(cfg: IntegratorConfig) -> np.ndarray:
    decades = np.log10(cfg.t_max / cfg.record_start)
    count = int(np.ceil(decades * cfg.record_per_decade)) + 1
    return cfg.record_start * 10 ** (np.arange(count) / cfg.record_per_decade)


def _project(rho: np.ndarray, floor: float) -> np.ndarray:
    rho = np.maximum(rho, floor)
    return rho / rho.sum()


def _accuracy_for(model: FactorModel, attention: Attention) -> float:
    """Accuracy evaluator used along trajectories: exact below the
    approximation threshold, sparse hybrid when the gate passes, dense
    Gaussian otherwise."""
    if model.n < APPROX_THRESHOLD:
        return acc.collective_accuracy_exact(model, attention)
    if acc.sparse_attention_support(attention) is not None:
        return acc.collective_accuracy_sparse(model, attention)
    return acc.collective_accuracy_approx(model, attention)


class _Recorder:
    def __init__(self, model: FactorModel, cfg: IntegratorConfig):
        self.model = model
        self.schedule = _record_times(cfg)
        self.next_idx = 0
        self.traj = Trajectory()

    def record(self, t: float, rho: np.ndarray):
        state = Attention(rho=rho.copy())
        self.traj.times.append(t)
        self.traj.states.append(state)
        self.traj.accuracy.append(_accuracy_for(self.model, state))
        self.traj.diversity.append(acc.diversity(state))

    def record_interpolated(self, t0, t1, y0, y1, f0, f1, floor):
        """Cubic-Hermite samples at every schedule point inside (t0, t1]."""
        h = t1 - t0
        while (self.next_idx < self.schedule.size
               and self.schedule[self.next_idx] <= t1):
            ts = self.schedule[self.next_idx]
            if ts > t0:
                th = (ts - t0) / h
                h00 = (1 + 2 * th) * (1 - th) ** 2
                h10 = th * (1 - th) ** 2
                h01 = th * th * (3 - 2 * th)
                h11 = th * th * (th - 1)
                y = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
                self.record(ts, _project(y, floor))
            self.next_idx += 1


def integrate(model: FactorModel, spec: RewardSpec, init: Attention,
              cfg: IntegratorConfig | None = None,
              reward_mode: str = "auto",
              quad: QuadratureConfig | None = None) -> Trajectory:
    """Advance the replicator flow from ``init`` until equilibrium, stall,
    the horizon ``t_max`` or the step cap; record log-spaced samples.

    Raises StiffnessError (carrying the partial trajectory) if the step
    size underflows.
    """
    cfg = cfg or IntegratorConfig()
    if model.n != init.n:
        raise InvalidArgumentError("model and initial allocation dimensions differ")
    evaluator = RewardEvaluator(model, spec, mode=reward_mode, quad=quad)

    def fields(rho):
        return _rhs_raw(rho, evaluator.values(rho), cfg.normalize_rewards)

    rec = _Recorder(model, cfg)
    rho = init.rho.copy()
    t = 0.0
    rec.record(t, rho)

    f, _ = fields(rho)
    scale0 = max(float(np.abs(f).max()), 1e-12)
    h_prop = min(1e-3 / scale0, cfg.step_cap)
    consec = 0
    hist: list[np.ndarray] = [rho.copy()]
    steps_moved: list[float] = []
    nacc = 0

    while t < cfg.t_max and nacc < cfg.max_steps:
        remaining = cfg.t_max - t
        if remaining < max(cfg.min_step * 10, 1e-12 * cfg.t_max):
            break
        h = min(h_prop, remaining)
        k1 = f
        y2 = _project(rho + (h / 2) * k1, cfg.simplex_floor)
        k2, _ = fields(y2)
        y3 = _project(rho + (3 * h / 4) * k2, cfg.simplex_floor)
        k3, _ = fields(y3)
        y_new = rho + h * ((2 / 9) * k1 + (1 / 3) * k2 + (4 / 9) * k3)
        y_new = _project(y_new, cfg.simplex_floor)
        k4, raw4 = fields(y_new)
        err = h * ((-5 / 72) * k1 + (1 / 12) * k2 + (1 / 9) * k3 + (-1 / 8) * k4)
        sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(rho), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / sc))

        if err_norm <= 1.0:
            t_new = t + h
            rec.record_interpolated(t, t_new, rho, y_new, k1, k4, cfg.simplex_floor)
            moved = float(np.abs(y_new - rho).max())
            rho, t, f = y_new, t_new, k4
            nacc += 1
            hist.append(rho.copy())
            steps_moved.append(moved)
            if len(hist) > cfg.stall_window + 1:
                hist.pop(0)
                steps_moved.pop(0)

            raw_drift = float(np.abs(raw4).max())
            consec = consec + 1 if raw_drift < cfg.equilibrium_tol else 0
            if consec >= cfg.equilibrium_window:
                rec.traj.converged_at = t
                break
            if len(hist) == cfg.stall_window + 1:
                net = float(np.abs(hist[-1] - hist[0]).max())
                path = sum(steps_moved)
                chattering = (path > 0 and net < cfg.chatter_ratio * path
                              and net < cfg.chatter_band)
                if net < cfg.stall_tol or chattering:
                    rec.traj.converged_at = t
                    break

        grow = min(5.0, max(0.2, 0.9 * err_norm ** (-1.0 / 3.0))) if err_norm > 0 else 5.0
        h_prop = min(h * grow, cfg.step_cap)
        if h_prop < cfg.min_step:
            rec.record(t, rho)
            raise StiffnessError(
                f"step size underflow at t={t:.6g}", trajectory=rec.traj
            )

    if rec.traj.times[-1] != t:
        rec.record(t, rho)
    return rec.traj
