"""Collective-prediction incentive lab.

Simulates a population of agents who each attend to one of ``n`` weighted
binary factors, vote what they observe, and are paid for correct votes
under one of three schemes: a flat payout, a market-style payout shared
by the correct camp, or a payout reserved for correct minorities. The
attention distribution evolves by replicator dynamics; the package
computes expected rewards (exact enumeration or Gaussian quadrature),
collective accuracy (exact, arcsine closed form, or sparse hybrid),
perturbation-stability diagnostics, Monte Carlo cross-checks and a
finite-population imitation simulator, all driven by the ``cilab`` CLI.
"""

__version__ = "0.1.0"

from .model import (
    Attention,
    FactorModel,
    RewardSpec,
    VoteSummary,
    WorldSample,
    collective_vote,
    enumerate_worlds,
    reward_function,
    sample_factor_weights,
    sample_world,
)
from .rewards import (
    ConditionalMoments,
    ExpectedRewards,
    conditional_moments,
    expected_reward_approx,
    expected_reward_binary_approx,
    expected_rewards,
    expected_rewards_exact,
)
from .accuracy import (
    AccuracyMoments,
    collective_accuracy_approx,
    collective_accuracy_exact,
    collective_accuracy_sparse,
    diversity,
)
from .dynamics import (
    IntegratorConfig,
    Trajectory,
    detect_equilibrium,
    initial_allocation,
    integrate,
    replicator_rhs,
)
from .montecarlo import (
    FinitePopulationConfig,
    McEstimate,
    finite_population_run,
    mc_accuracy,
    mc_expected_rewards,
)
from .quadrature import QuadratureConfig

__all__ = [
    "Attention", "FactorModel", "RewardSpec", "VoteSummary", "WorldSample",
    "collective_vote", "enumerate_worlds", "reward_function",
    "sample_factor_weights", "sample_world",
    "ConditionalMoments", "ExpectedRewards", "conditional_moments",
    "expected_reward_approx", "expected_reward_binary_approx",
    "expected_rewards", "expected_rewards_exact",
    "AccuracyMoments", "collective_accuracy_approx",
    "collective_accuracy_exact", "collective_accuracy_sparse", "diversity",
    "IntegratorConfig", "Trajectory", "detect_equilibrium",
    "initial_allocation", "integrate", "replicator_rhs",
    "FinitePopulationConfig", "McEstimate", "finite_population_run",
    "mc_accuracy", "mc_expected_rewards",
    "QuadratureConfig",
    "__version__",
]
