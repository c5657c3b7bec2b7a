"""Exception hierarchy. Everything raised on bad input or a failed
computation derives from MapbenchError so the CLI can map it to exit code 1.
"""


class MapbenchError(Exception):
    """Base class for all domain errors."""


class MapLoadError(MapbenchError):
    """Raster or metadata could not be read."""


class NoBoundaryError(MapbenchError):
    """No closed occupied contour found in the map."""


class EmptyFreeSpaceError(MapbenchError):
    """Operation needs free interior cells and found none."""


class EmptySampleError(MapbenchError):
    """A relation sample or run batch was empty."""


class SingularDesignError(MapbenchError):
    """Regression design matrix is rank deficient."""


class ConvergenceError(MapbenchError):
    """Iterative solver did not converge."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class CholeskyError(MapbenchError):
    """Kernel matrix not positive definite; try a larger noise term."""


class MissingFeatureError(MapbenchError):
    """A model was asked to predict from a feature vector lacking one
    of its input features."""


class ValidationError(MapbenchError):
    """Manifest or dataset failed schema/invariant validation."""
