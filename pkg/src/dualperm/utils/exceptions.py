"""
Custom exceptions for the dualperm toolkit.

All errors raised on purpose derive from DualPermError so that callers
(the CLI, the run service, pipeline steps) can tell domain failures apart
from programming errors.
"""

from typing import Any, List, Optional, Sequence


class DualPermError(Exception):
    """Base class for all toolkit errors."""

    pass


class CancellationError(DualPermError):
    """Raised when a run is cancelled by the user."""

    pass


class RunConfigError(DualPermError):
    """Raised when a run configuration is missing a required section or value."""

    pass


# ----- geometry -----


class GeometryInfeasibleError(DualPermError):
    """Raised when fibers overlap, protrude from the tow box, or the box leaves the domain."""

    pass


class SamplingError(DualPermError):
    """Raised when rejection sampling cannot fill a region within the attempt budget."""

    pass


class SegmentCapError(DualPermError):
    """Raised when a segmentation would need more than 255 distinct tensors."""

    pass


class CouplingSetError(DualPermError):
    """Raised when no mesh point survives the coupling-set filter."""

    pass


# ----- solvers and upscaling -----


class SolverDivergedError(DualPermError):
    """Raised when a flow solve misses its tolerances within max_cycles.

    Attributes:
        residual_history: One (momentum_max, divergence_max, k_estimate) tuple
            per outer cycle.
    """

    def __init__(self, message: str, residual_history: Sequence[tuple]) -> None:
        super().__init__(message)
        self.residual_history: List[tuple] = list(residual_history)


class InvalidPermeabilityError(DualPermError):
    """Raised when a permeability tensor is not symmetric positive definite."""

    pass


class AveragingError(DualPermError):
    """Raised when an averaging window selects no cells."""

    pass


class SingularPressureDropError(DualPermError):
    """Raised when the pressure drop is zero or too ill-conditioned to invert."""

    pass


# ----- surrogate -----


class FeatureDomainError(DualPermError):
    """Raised when a feature lies outside the closed-form correlation's domain."""

    pass


class EmulatorFitError(DualPermError):
    """Raised when the emulator fit is under-determined."""

    pass


class ExtrapolationWarning(UserWarning):
    """Emitted when a surrogate input is clamped to the training hull."""

    pass


# ----- training -----


class NonFiniteGradientError(DualPermError):
    """Raised when a loss term produces a NaN or infinite parameter gradient."""

    def __init__(self, message: str, term: str) -> None:
        super().__init__(message)
        self.term = term


class TrainingDivergedError(DualPermError):
    """Raised when training hits a non-finite loss or a failed coarse solve.

    Attributes:
        trace: The TrainingTrace recorded up to the failure.
    """

    def __init__(self, message: str, trace: Optional[Any] = None) -> None:
        super().__init__(message)
        self.trace = trace
