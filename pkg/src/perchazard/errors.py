"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the operation is defined."""


class CapacityError(RuntimeError):
    """No unoccupied site is left on the lattice."""


class NormalizationError(ValueError):
    """Cluster numbers cannot be normalized on an empty lattice."""


class SingularityError(ArithmeticError):
    """Evaluation exactly at the percolation threshold, where s* diverges."""


class PositivityError(ArithmeticError):
    """A price update multiplier was not strictly positive."""

    def __init__(self, message, state=None, multiplier=None):
        super().__init__(message)
        self.state = state
        self.multiplier = multiplier


class InsufficientDataError(ValueError):
    """Too few points to perform a fit."""


class ConfigError(ValueError):
    """Invalid run configuration; ``problems`` lists one line per issue."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
