"""Exception types shared across the package."""


class GKError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveMetric(GKError):
    """A per-point factorization of the metric failed (metric not positive)."""


class SingularForm(GKError):
    """A 2-form that must be inverted is numerically degenerate."""


class BrokenStructure(GKError):
    """A reconstructed endomorphism fails the complex-structure equation."""


class DegeneratePair(GKError):
    """det(I +/- J) fell below the degeneracy threshold."""


class PositivityLoss(GKError):
    """An isotopy or flow reached the positivity boundary before its end time."""

    def __init__(self, reached_time: float, margin: float):
        self.reached_time = float(reached_time)
        self.margin = float(margin)
        super().__init__(
            f"metric positivity lost at t={reached_time:.6g} (margin {margin:.3e})"
        )


class IoFailure(GKError):
    """A file could not be read or written."""


class FormatMismatch(GKError):
    """Snapshot bytes do not parse as the expected format/version."""


class DimsMismatch(GKError):
    """Grid dimensions in a file disagree with the data blocks."""


class ConfigError(GKError):
    """A run configuration file is malformed or contains unknown keys."""
