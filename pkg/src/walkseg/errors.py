"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An operation received malformed or inconsistent inputs."""


class DataFormatError(ValueError):
    """A file (image, manifest, config, checkpoint) could not be parsed."""


class UnsupportedVersionError(DataFormatError):
    """A checkpoint declares a version this code cannot read."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget.

    Carries the residual reached so callers can judge the partial answer.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration
