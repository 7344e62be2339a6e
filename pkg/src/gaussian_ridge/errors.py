"""Exception types raised across the package."""


class GaussianRidgeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(GaussianRidgeError, ValueError):
    """Array shapes or requested dimensions are inconsistent."""


class FactorizationError(GaussianRidgeError, ArithmeticError):
    """A QR factorization produced a rank-deficient factor."""


class IllConditionedKernelError(GaussianRidgeError, ArithmeticError):
    """Cholesky factorization of a kernel matrix failed at every jitter level."""

    def __init__(self, message, jitter):
        super().__init__(message)
        self.jitter = jitter


class NumericalError(GaussianRidgeError, ArithmeticError):
    """A non-finite or otherwise impossible value appeared during a computation."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class SizeError(GaussianRidgeError, ValueError):
    """Not enough samples for the requested operation."""


class SlicingError(GaussianRidgeError, ValueError):
    """Response slicing produced an unusable partition."""


class ThresholdError(GaussianRidgeError, ValueError):
    """Too few response pairs fall under the contour threshold."""

    def __init__(self, message, count):
        super().__init__(message)
        self.count = count


class RankError(GaussianRidgeError, ValueError):
    """The sample covariance of the inputs is singular."""


class DataParseError(GaussianRidgeError, ValueError):
    """A data file is malformed."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class AllTrialsFailedError(GaussianRidgeError, RuntimeError):
    """Every trial of a multi-trial fit raised an error."""

    def __init__(self, errors):
        lines = "; ".join(f"seed {seed}: {exc}" for seed, exc in errors)
        super().__init__(f"all {len(errors)} trials failed ({lines})")
        self.errors = errors
