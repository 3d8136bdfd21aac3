"""Exception types shared across the package."""

from __future__ import annotations


class GeometryError(ValueError):
    """A geometric precondition is violated (e.g. inner set not inside outer)."""


class ResolutionError(ValueError):
    """The mesh is too coarse to resolve a constraint set."""


class ConvergenceFailure(RuntimeError):
    """The iterative solver did not reach its residual target."""


class ConfigError(ValueError):
    """Scenario config rejected; carries the full list of problems found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
