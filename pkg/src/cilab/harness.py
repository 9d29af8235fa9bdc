"""Experiment drivers and deterministic CSV/manifest output.

Every command resolves a RunConfig, executes a fixed-order grid of
independent runs, and writes CSV files plus a ``manifest.json`` holding
the resolved configuration, the seed list and the artifact version.
Floats are formatted with 12 significant digits and rows are emitted in
a fixed order, so identical configurations produce byte-identical files.

Per-run models are drawn from the run's own seed, so any (scheme, n,
seed, init) cell can be reproduced in isolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .accuracy import (
    collective_accuracy_approx,
    collective_accuracy_exact,
    collective_accuracy_sparse,
    sparse_attention_support,
)
from .dynamics import IntegratorConfig, Trajectory, initial_allocation, integrate
from .errors import CilabError, InvalidArgumentError, StiffnessError
from .model import Attention, FactorModel, RewardSpec, sample_factor_weights
from .montecarlo import (
    FinitePopulationConfig,
    finite_population_run,
    mc_accuracy,
    mc_expected_rewards,
)
from .quadrature import QuadratureConfig
from .rewards import APPROX_THRESHOLD, expected_rewards
from .stability import (
    block_equicorrelated_covariance,
    correlated_stationarity_check,
    extensive_perturbation,
    stationarity_check,
    two_factor_perturbation,
)

SCHEMES = ("binary", "market", "minority")


@dataclass
class RunConfig:
    """Resolved configuration of one harness invocation."""

    command: str
    schemes: list[str] = field(default_factory=lambda: list(SCHEMES))
    n_values: list[int] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    inits: list[str] = field(default_factory=lambda: ["uniform", "concentrated"])
    full: bool = False
    out_dir: str = "runs"
    threads: int = 1
    # integrator overrides
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    t_max: float = 1e6
    equilibrium_tol: float = 1e-9
    # quadrature overrides
    quad_abs_tol: float = 1e-10
    quad_max_panels: int = 4096
    epsilon: float = 1e-6
    # sweep grid
    grid_max: int = 0
    grid_per_decade: int = 0
    # monte carlo / finite population
    mc_samples: int = 200_000
    population: int = 100_000
    rounds: int = 3000
    imitation_rate: float = 0.1

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                t_max=self.t_max,
                                equilibrium_tol=self.equilibrium_tol)

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(abs_tol=self.quad_abs_tol,
                                max_panels=self.quad_max_panels,
                                epsilon=self.epsilon)


def default_n_values(command: str, full: bool) -> list[int]:
    if command == "simulate":
        return [100, 1000, 10000]
    if command == "scatter":
        return [10000 if full else 1000]
    return []


def n_grid(max_n: int, per_decade: int) -> list[int]:
    """Integers equally spaced within each decade, from 3 up to max_n."""
    if max_n < 3 or per_decade < 1:
        raise InvalidArgumentError("grid needs max_n >= 3 and per_decade >= 1")
    values = {3, max_n}
    lo = 1
    while lo <= max_n:
        step = 9 * lo / per_decade
        for k in range(per_decade):
            v = int(round(lo + k * step))
            if 3 <= v <= max_n:
                values.add(v)
        lo *= 10
    return sorted(values)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_manifest(out: Path, config: RunConfig) -> None:
    payload = {
        "version": f"cilab-{__version__}",
        "command": config.command,
        "config": asdict(config),
        "seeds": list(config.seeds),
    }
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _accuracy_auto(model: FactorModel, attention: Attention) -> float:
    if model.n < APPROX_THRESHOLD:
        return collective_accuracy_exact(model, attention)
    if sparse_attention_support(attention) is not None:
        return collective_accuracy_sparse(model, attention)
    return collective_accuracy_approx(model, attention)


def _integrate_cell(model: FactorModel, scheme: str, init_kind: str,
                    config: RunConfig) -> Trajectory:
    spec = RewardSpec(scheme=scheme, epsilon=config.epsilon)
    init = initial_allocation(model.n, init_kind)
    try:
        return integrate(model, spec, init, config.integrator(),
                         quad=config.quadrature())
    except StiffnessError as err:
        # Keep the partial trajectory: the state at the stall is still the
        # best available equilibrium estimate, flagged unconverged.
        if err.trajectory is None or not err.trajectory.states:
            raise
        return err.trajectory


def _run_map(tasks, worker, threads: int):
    """Evaluate ``worker`` over ``tasks`` preserving order."""
    if threads <= 1:
        return [worker(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def _simulate_cell(args):
    scheme, n, init_kind, seed, config = args
    model = sample_factor_weights(n, seed)
    traj = _integrate_cell(model, scheme, init_kind, config)
    return model, traj


def run_trajectory(config: RunConfig) -> Path:
    """Time-resolved accuracy/diversity trajectories, one row per recorded
    sample, plus final attention states."""
    out = _prepare_out(config)
    cells = [(scheme, n, init, seed, config)
             for scheme in config.schemes
             for n in config.n_values
             for init in config.inits
             for seed in config.seeds]
    results = _run_map(cells, _simulate_cell, config.threads)
    rows = []
    eq_rows = []
    for (scheme, n, init_kind, seed, _), (model, traj) in zip(cells, results):
        run_id = f"{scheme}-n{n}-{init_kind}-s{seed}"
        converged = traj.converged_at is not None
        for t, a, d in zip(traj.times, traj.accuracy, traj.diversity):
            rows.append((run_id, scheme, n, init_kind, seed, t, a, d, converged))
        rho_eq = traj.final_state.rho
        for idx in range(n):
            eq_rows.append((run_id, scheme, n, init_kind, seed, idx,
                            model.beta[idx], rho_eq[idx]))
    write_csv(out / "trajectory.csv",
              ["run_id", "scheme", "n", "init", "seed", "t", "accuracy",
               "diversity", "converged"], rows)
    write_csv(out / "equilibrium_rho.csv",
              ["run_id", "scheme", "n", "init", "seed", "factor_index",
               "beta", "rho_eq"], eq_rows)
    write_manifest(out, config)
    return out


def _sweep_cell(args):
    scheme, n, seed, config = args
    model = sample_factor_weights(n, seed)
    if scheme == "uniform":
        attention = initial_allocation(n, "uniform")
        return _accuracy_auto(model, attention)
    traj = _integrate_cell(model, scheme, "uniform", config)
    return traj.accuracy[-1]


def run_sweep(config: RunConfig) -> Path:
    """Equilibrium accuracy versus the number of factors.

    The ``uniform`` pseudo-scheme scores the uniform allocation without
    integrating. Emits raw per-seed rows plus per-(scheme, n) mean and
    standard deviation summaries.
    """
    out = _prepare_out(config)
    if not config.n_values:
        max_n = config.grid_max or (10000 if config.full else 1000)
        per_decade = config.grid_per_decade or (9 if config.full else 3)
        config.n_values = n_grid(max_n, per_decade)
    schemes = list(config.schemes) + ["uniform"]
    cells = [(scheme, n, seed, config)
             for scheme in schemes
             for n in config.n_values
             for seed in config.seeds]
    accs = _run_map(cells, _sweep_cell, config.threads)
    rows = [(scheme, n, seed, a)
            for (scheme, n, seed, _), a in zip(cells, accs)]
    write_csv(out / "sweep.csv", ["scheme", "n", "seed", "accuracy"], rows)
    summary = []
    for scheme in schemes:
        for n in config.n_values:
            vals = np.array([a for (s, nn, _, _), a in zip(cells, accs)
                             if s == scheme and nn == n])
            summary.append((scheme, n, float(vals.mean()),
                            float(vals.std(ddof=0))))
    write_csv(out / "sweep_summary.csv",
              ["scheme", "n", "mean_accuracy", "std_accuracy"], summary)
    write_manifest(out, config)
    return out


def _scatter_cell(args):
    scheme, n, seed, config = args
    model = sample_factor_weights(n, seed)
    if scheme == "uniform":
        return model, initial_allocation(n, "uniform").rho
    traj = _integrate_cell(model, scheme, "uniform", config)
    return model, traj.final_state.rho


def run_scatter(config: RunConfig) -> Path:
    """Equilibrium attention share of every factor against its weight."""
    out = _prepare_out(config)
    schemes = list(config.schemes) + ["uniform"]
    cells = [(scheme, n, seed, config)
             for scheme in schemes
             for n in config.n_values
             for seed in config.seeds]
    results = _run_map(cells, _scatter_cell, config.threads)
    rows = []
    for (scheme, n, seed, _), (model, rho_eq) in zip(cells, results):
        for idx in range(n):
            rows.append((scheme, n, seed, idx, model.beta[idx], rho_eq[idx]))
    write_csv(out / "equilibrium.csv",
              ["scheme", "n", "seed", "factor_index", "beta", "rho_eq"], rows)
    write_manifest(out, config)
    return out


def _stability_rows(config: RunConfig) -> list[tuple]:
    rows = []
    seed0 = config.seeds[0]
    samples = config.mc_samples

    # two-factor transfers around the ideal state
    n2 = 1000
    model = sample_factor_weights(n2, seed0)
    rng = np.random.default_rng(seed0 + 1)
    delta = 1e-3
    # donors need at least 1.5 * delta of attention to give away
    pair_pool = np.flatnonzero(model.beta >= 1.5 * delta)
    for pidx in range(10):
        i, j = rng.choice(pair_pool, size=2, replace=False)
        i, j = int(i), int(j)
        rep = two_factor_perturbation(model, i, j, delta,
                                      samples=samples, seed=(seed0, 10 + pidx))
        rows.append(("two-factor", "minority", n2, seed0,
                     f"i={i};j={j};delta={delta:g}", rep.predicted_rate,
                     rep.measured_rate, rep.relative_error, rep.passed))

    # extensive perturbations, weight-independent and weight-correlated
    n3 = 2000
    model3 = sample_factor_weights(n3, seed0)
    signs = np.where(np.random.default_rng(seed0 + 2).random(n3) < 0.5, -1.0, 1.0)
    shape_a = signs * model3.beta
    shape_a = shape_a - model3.beta * shape_a.sum()
    half = np.ones(n3)
    half[n3 // 2:] = -1.0
    shape_b = model3.beta * (half - float(model3.beta @ half))
    grids = (("extensive-independent", shape_a, [0.3, 0.15, 0.075],
              4 * samples, False),
             ("extensive-correlated", shape_b, [0.1, 0.05],
              16 * samples, True))
    for name, shape, k_values, base, corrected in grids:
        reports = extensive_perturbation(model3, shape, k_values,
                                         samples_base=base, seed=seed0 + 3,
                                         covariance_corrected=corrected)
        for k, rep in zip(sorted(k_values, reverse=True), reports):
            rows.append((name, "minority", n3, seed0, f"k={k:g}",
                         rep.predicted_rate, rep.measured_rate,
                         rep.relative_error, rep.passed))

    # correlated stationarity plus its negative control
    n4 = 500
    base = sample_factor_weights(n4, seed0)
    q = block_equicorrelated_covariance(n4, 10, 0.3)
    corr_model = FactorModel(beta=base.beta.copy(), covariance=q)
    drift = correlated_stationarity_check(corr_model, samples=samples,
                                          seed=seed0 + 4)
    rows.append(("correlated-stationarity", "minority", n4, seed0,
                 "blocks=10;c=0.3", 0.0, drift, abs(drift),
                 drift < 1e-6))
    neg = stationarity_check(corr_model, RewardSpec("binary"),
                             Attention(rho=corr_model.beta.copy()),
                             mode="mc", samples=samples, seed=seed0 + 5)
    rows.append(("stationarity-negative-control", "binary", n4, seed0,
                 "blocks=10;c=0.3", 0.0, neg, abs(neg), neg < 1e-6))
    return rows


def run_stability(config: RunConfig) -> Path:
    """Perturbation-decay and stationarity experiments."""
    out = _prepare_out(config)
    rows = _stability_rows(config)
    write_csv(out / "stability.csv",
              ["experiment", "scheme", "n", "seed", "params",
               "predicted_rate", "measured_rate", "relative_error", "passed"],
              rows)
    write_manifest(out, config)
    return out


def _oracle_rows(config: RunConfig) -> list[tuple]:
    rows = []
    seed0 = config.seeds[0]
    quad = config.quadrature()

    # exact vs Monte Carlo rewards on an enumerable instance
    n = 8
    model = sample_factor_weights(n, seed0)
    rng = np.random.default_rng(seed0)
    rho = rng.dirichlet(np.ones(n))
    attention = Attention(rho=rho)
    for scheme in SCHEMES:
        spec = RewardSpec(scheme=scheme, epsilon=config.epsilon)
        exact = expected_rewards(model, attention, spec, mode="exact").values
        est = mc_expected_rewards(model, attention, spec,
                                  samples=max(config.mc_samples, 100_000),
                                  seed=(seed0, 1))
        worst = max(abs(e.value - x) / max(e.std_error, 1e-12)
                    for e, x in zip(est, exact))
        rows.append((f"reward-exact-vs-mc-{scheme}", scheme, n, seed0,
                     float(np.max(exact)), float(max(e.value for e in est)),
                     float(worst), worst <= 4.0))

    # dense-approximation vs Monte Carlo accuracy
    for n_acc in (100, 1000):
        model = sample_factor_weights(n_acc, seed0)
        attention = initial_allocation(n_acc, "uniform")
        approx = collective_accuracy_approx(model, attention)
        est = mc_accuracy(model, attention, samples=max(config.mc_samples, 100_000),
                          seed=(seed0, 2))
        gap = abs(approx - est.value)
        tol = max(3 * est.std_error, 0.01)
        rows.append((f"accuracy-approx-vs-mc-n{n_acc}", "uniform", n_acc, seed0,
                     approx, est.value, gap, gap <= tol))

    # finite population against the mean-field equilibrium
    model5 = _strict_argmax_instance(5, seed0)
    pop_cfg = FinitePopulationConfig(population=config.population,
                                     rounds=config.rounds,
                                     imitation_rate=0.5, seed=seed0)
    traj = finite_population_run(model5, RewardSpec("binary"), pop_cfg)
    top = float(traj[-1, 0])
    rows.append(("finite-pop-binary-vertex", "binary", 5, seed0,
                 1.0, top, abs(1.0 - top), top > 0.95))

    model50 = sample_factor_weights(50, seed0)
    pop_cfg = FinitePopulationConfig(population=config.population,
                                     rounds=max(config.rounds, 3000),
                                     imitation_rate=config.imitation_rate,
                                     seed=seed0)
    traj = finite_population_run(model50, RewardSpec("minority"), pop_cfg)
    tail = traj[3 * traj.shape[0] // 4:]
    l1 = float(np.abs(tail.mean(axis=0) - model50.beta).sum())
    rows.append(("finite-pop-minority-shape", "minority", 50, seed0,
                 0.0, l1, l1, l1 < 0.1))
    return rows


def _strict_argmax_instance(n: int, seed: int) -> FactorModel:
    """First weight draw whose exact binary rewards have a strict argmax
    on the top factor (small factor counts often tie)."""
    for k in range(50):
        model = sample_factor_weights(n, (seed, k))
        attention = initial_allocation(n, "uniform")
        values = expected_rewards(model, attention, RewardSpec("binary"),
                                  mode="exact").values
        order = np.sort(values)[::-1]
        if int(np.argmax(values)) == 0 and order[0] - order[1] >= 0.05:
            return model
    raise CilabError("no strict-argmax instance found")


def run_oracle(config: RunConfig) -> tuple[Path, bool]:
    """Cross-validation battery; returns the output dir and overall pass."""
    out = _prepare_out(config)
    rows = _oracle_rows(config)
    write_csv(out / "oracle.csv",
              ["check", "scheme", "n", "seed", "value_a", "value_b",
               "discrepancy", "passed"], rows)
    write_manifest(out, config)
    return out, all(bool(r[-1]) for r in rows)


def _prepare_out(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise CilabError(f"output directory not writable: {out}: {err}") from err
    return out
