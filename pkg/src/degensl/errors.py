"""Exception hierarchy shared by all numerical modules."""


class DegenslError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DegenslError, ValueError):
    """Malformed input (potential samples, config, target file)."""


class NumericalError(DegenslError):
    """A computation could not produce a trustworthy number."""


class IntegrationOverflowError(NumericalError):
    def __init__(self, index, mu):
        self.index = int(index)
        self.mu = complex(mu)
        super().__init__(
            f"fundamental system overflowed at grid index {self.index} for mu={self.mu}"
        )


class DegenerateDeterminantError(NumericalError):
    """The determinant vanishes (to working precision) on the whole search boundary."""


class BoundaryTooCloseError(NumericalError):
    """A zero sits on or too near the contour used for winding numbers."""


class NoConvergenceError(NumericalError):
    def __init__(self, message, last_iterate):
        self.last_iterate = complex(last_iterate)
        super().__init__(f"{message} (last iterate {self.last_iterate})")


class NearEigenvalueError(NumericalError):
    """Green function requested at (or next to) a zero of the determinant."""


class EnclosureError(NumericalError):
    """Projection contour does not enclose exactly one eigenvalue."""


class TargetTooLargeError(NumericalError):
    """No admissible N makes the target small enough on the strip."""


class ConstructionError(NumericalError):
    """Root selection or norming weights violate the positivity requirements."""


class IllConditionedError(NumericalError):
    """The discretized Gelfand-Levitan system is too badly conditioned."""


class TailTooLargeError(NumericalError):
    """Truncated kernel series leaves a tail above tolerance."""
