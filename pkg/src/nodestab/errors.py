"""Exception types shared across the toolkit."""


class DimensionError(ValueError):
    """Shapes or sizes are inconsistent with an operation's contract."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its budget before converging.

    ``partial`` holds whatever results were available at abort time.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DivergenceError(RuntimeError):
    """A state or stage value left the representable range.

    ``step`` is the integration step at which divergence was detected,
    ``stage`` the Runge-Kutta stage (both optional).
    """

    def __init__(self, message, step=None, stage=None):
        super().__init__(message)
        self.step = step
        self.stage = stage


class StiffnessError(RuntimeError):
    """Adaptive step-size control underflowed the minimum step size."""


class EmptySignalError(ValueError):
    """An input signal without samples was constructed or queried."""


class InfeasibleRegionError(RuntimeError):
    """Rejection sampling found no admissible point within its draw budget."""


class ModelFormatError(ValueError):
    """A model file failed to parse or validate."""
