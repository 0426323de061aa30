"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Bad shape, range or value in a user-supplied argument."""


class NotPositiveDefiniteError(InvalidArgumentError):
    """A matrix expected to be positive definite is not."""


class DivergenceError(ArithmeticError):
    """The ADMM iterates became non-finite.

    Attributes
    ----------
    iteration : int
        Index of the first iteration that produced a non-finite iterate.
    """

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


class DegeneratePortfolioError(ArithmeticError):
    """The unnormalised portfolio sums to zero and cannot be normalised."""


class UndefinedRateError(ArithmeticError):
    """A TPR/TNR denominator is empty."""
