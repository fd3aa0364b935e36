"""Exception hierarchy shared by every module."""

from __future__ import annotations


class IGFlowError(Exception):
    """Base class for all errors raised by igflow."""


class DomainError(IGFlowError, ValueError):
    """A coordinate lies outside the domain of a potential or metric.

    ``index`` is the offending coordinate index, or ``None`` when the
    violated condition couples several coordinates.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ChartError(IGFlowError, ValueError):
    """A point is labelled with a chart other than the one an operation expects."""


class SingularMetricError(IGFlowError, ArithmeticError):
    """The metric cannot be inverted at the requested point."""


class ConvergenceError(IGFlowError, RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message: str, best_residual: float, best_x=None):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual
        self.best_x = best_x


class ConstraintError(IGFlowError, ValueError):
    """A phase-space point is off the constraint surface, or its norm is not real."""


class FlowError(IGFlowError, RuntimeError):
    """A flow integration or flow diagnostic cannot proceed."""


class ConfigError(IGFlowError, ValueError):
    """An experiment configuration is malformed."""
