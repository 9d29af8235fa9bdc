"""Exception types shared across the package."""


class CilabError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(CilabError, ValueError):
    """An argument violates a documented precondition."""


class SizeLimitError(CilabError):
    """A request would exceed the exact-enumeration factor cap."""


class DegenerateAttentionError(CilabError):
    """Attention is concentrated on a single factor, so the Gaussian
    agreement-share model has zero variance; use the exact or Monte Carlo
    path instead."""


class NotSparseError(CilabError):
    """The sparse-evaluation gate is not satisfied; use the dense
    Gaussian approximation instead."""


class UnsupportedCovarianceError(CilabError):
    """The factor covariance matrix is not block-equicorrelated, the only
    family the correlated world sampler supports."""


class StiffnessError(CilabError):
    """The adaptive integrator's step size underflowed.

    Carries the partial trajectory accumulated so far in ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
