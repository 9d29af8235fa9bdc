"""Brute-force Monte Carlo estimators and a finite-population simulator.

These estimators are deliberately independent of the Gaussian machinery:
they sample worlds, score them with the literal payoff rule, and report
means with standard errors. They serve as the ground-truth cross-check
for both the reward quadrature and the accuracy formulas.

Worlds are drawn in batches. Every correct voter in a world shares the
same agreement share (the attention mass of the truth camp ``w``), so a
batch reduces to one matrix-vector product per statistic. Batch streams
are derived from the caller's seed through ``numpy``'s SeedSequence
spawning, one child per batch in order, so a parallel map over batches
would reproduce the sequential result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .model import Attention, FactorModel, RewardSpec

_BATCH = 65536


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error and sample count."""

    value: float
    std_error: float
    samples: int


@dataclass(frozen=True)
class FinitePopulationConfig:
    """Agent-based run parameters: population size, rounds, the per-round
    imitation probability, and the RNG seed."""

    population: int
    rounds: int
    imitation_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.population < 1 or self.rounds < 1:
            raise InvalidArgumentError("population and rounds must be positive")
        if not 0 <= self.imitation_rate <= 1:
            raise InvalidArgumentError("imitation rate must lie in [0, 1]")


def _batch_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return root.spawn(count)


def _block_structure(model: FactorModel):
    """Lazily import the covariance-block inference to avoid a cycle."""
    from .stability import covariance_blocks

    return covariance_blocks(model.covariance)


def sample_world_batch(model: FactorModel, m: int, rng: np.random.Generator) -> np.ndarray:
    """(m, n) matrix of worlds as float32 +-1, independent or
    block-correlated according to the model."""
    n = model.n
    if model.covariance is None:
        b = rng.integers(0, 2, size=(m, n), dtype=np.int8)
        x = b.astype(np.float32)
        x *= 2.0
        x -= 1.0
        return x
    blocks, c = _block_structure(model)
    p_keep = (1.0 + np.sqrt(c)) / 2.0
    x = np.empty((m, n), dtype=np.float32)
    for members in blocks:
        shared = rng.integers(0, 2, size=m, dtype=np.int8) * 2 - 1
        flips = rng.random(size=(m, members.size))
        s = np.where(flips < p_keep, 1.0, -1.0).astype(np.float32)
        x[:, members] = shared[:, None].astype(np.float32) * s
    return x


def _world_stats(x: np.ndarray, beta32: np.ndarray, rho32: np.ndarray):
    """Per-world truth sign, vote and truth-camp mass."""
    psi = x @ beta32
    v = x @ rho32
    y = np.where(psi >= 0, np.float32(1.0), np.float32(-1.0))
    w = (1.0 + y * v) / 2.0
    return y, v, w


def _payoff_weight(w: np.ndarray, spec: RewardSpec, floor: float) -> np.ndarray:
    if spec.scheme == "binary":
        return np.ones_like(w)
    if spec.scheme == "market":
        return 1.0 / np.maximum(w, np.float32(floor))
    return (w < 0.5).astype(np.float32)


def mc_expected_rewards(model: FactorModel, attention: Attention, spec: RewardSpec,
                        samples: int, seed) -> list[McEstimate]:
    """Monte Carlo estimate of every factor's expected reward.

    The market scheme floors the agreement share at epsilon, matching the
    lower limit of the reward integral.
    """
    if samples < 1000:
        raise InvalidArgumentError("use at least 1000 samples")
    n = model.n
    beta32 = model.beta.astype(np.float32)
    rho32 = attention.rho.astype(np.float32)
    n_batches = (samples + _BATCH - 1) // _BATCH
    seeds = _batch_seeds(seed, n_batches)
    sum_g = np.zeros(n)
    sum_g2 = np.zeros(n)
    done = 0
    for k in range(n_batches):
        m = min(_BATCH, samples - done)
        rng = np.random.default_rng(seeds[k])
        x = sample_world_batch(model, m, rng)
        y, _, w = _world_stats(x, beta32, rho32)
        f = _payoff_weight(w, spec, spec.epsilon)
        # payoff of factor i in a world: [x_i = y] * f(w);
        # mean over worlds = (sum f + x^T (f y)) / (2 m)
        c1 = (f * y).astype(np.float32)
        c2 = (f * f * y).astype(np.float32)
        sum_g += 0.5 * (f.sum(dtype=np.float64) + (x.T @ c1).astype(np.float64))
        sum_g2 += 0.5 * ((f * f).sum(dtype=np.float64) + (x.T @ c2).astype(np.float64))
        done += m
    mean = sum_g / samples
    var = np.maximum(sum_g2 / samples - mean**2, 0.0)
    se = np.sqrt(var / samples)
    return [McEstimate(value=float(mean[i]), std_error=float(se[i]), samples=samples)
            for i in range(n)]


def mc_accuracy(model: FactorModel, attention: Attention, samples: int,
                seed) -> McEstimate:
    """Fraction of sampled worlds whose collective vote matches the truth,
    with the binomial standard error."""
    if samples < 1000:
        raise InvalidArgumentError("use at least 1000 samples")
    beta32 = model.beta.astype(np.float32)
    rho32 = attention.rho.astype(np.float32)
    n_batches = (samples + _BATCH - 1) // _BATCH
    seeds = _batch_seeds(seed, n_batches)
    hits = 0
    done = 0
    for k in range(n_batches):
        m = min(_BATCH, samples - done)
        rng = np.random.default_rng(seeds[k])
        x = sample_world_batch(model, m, rng)
        psi = x @ beta32
        v = x @ rho32
        hits += int(np.count_nonzero((psi >= 0) == (v >= 0)))
        done += m
    p = hits / samples
    se = np.sqrt(p * (1 - p) / samples)
    return McEstimate(value=p, std_error=float(se), samples=samples)


def finite_population_run(model: FactorModel, spec: RewardSpec,
                          cfg: FinitePopulationConfig) -> np.ndarray:
    """Simulate N agents under pairwise proportional imitation.

    Each round: draw one world; every agent whose factor matched the truth
    earns ``f(z)`` with its camp's empirical share floored at ``1/N``;
    then each agent, with probability ``imitation_rate``, samples a random
    peer and copies the peer's factor with probability proportional to the
    positive part of the payoff difference (scaled by the round's payoff
    spread). The mean-field limit of this update is the replicator flow.

    Agents are exchangeable, so the population is tracked as per-factor
    counts and the imitation phase is drawn as one multinomial per source
    factor. Returns the (rounds + 1, n) array of empirical shares,
    including the initial state.
    """
    n = model.n
    N = cfg.population
    if N < n:
        import warnings

        warnings.warn("population smaller than the factor count: some factors "
                      "start permanently unoccupied", stacklevel=2)
    rng = np.random.default_rng(cfg.seed)
    counts = np.full(n, N // n, dtype=np.int64)
    counts[: N - int(counts.sum())] += 1
    traj = np.empty((cfg.rounds + 1, n))
    traj[0] = counts / N
    floor = 1.0 / N
    for rd in range(cfg.rounds):
        if model.covariance is None:
            x = rng.integers(0, 2, size=n, dtype=np.int8) * 2 - 1
        else:
            x = sample_world_batch(model, 1, rng)[0].astype(np.int8)
        psi = float(model.beta @ x)
        y = 1 if psi >= 0 else -1
        rho_hat = counts / N
        v = float(rho_hat @ x)
        z = np.maximum((1.0 + x * v) / 2.0, floor)
        correct = x == y
        if spec.scheme == "binary":
            pay = correct.astype(float)
        elif spec.scheme == "market":
            pay = correct / np.maximum(z, floor)
        else:
            pay = (correct & (z < 0.5)).astype(float)
        spread = float(pay.max() - pay.min())
        if spread > 0 and cfg.imitation_rate > 0:
            gain = np.maximum(pay[None, :] - pay[:, None], 0.0) / spread
            move = cfg.imitation_rate * rho_hat[None, :] * gain
            new_counts = np.zeros(n, dtype=np.int64)
            probs = np.empty(n + 1)
            for a in range(n):
                if counts[a] == 0:
                    continue
                probs[:n] = move[a]
                probs[n] = 1.0 - move[a].sum()
                draws = rng.multinomial(counts[a], probs)
                new_counts += draws[:n]
                new_counts[a] += draws[n]
            counts = new_counts
        traj[rd + 1] = counts / N
    return traj
