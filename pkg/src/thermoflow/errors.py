"""Exception hierarchy shared by all thermoflow modules."""


class ThermoflowError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ThermoflowError, ValueError):
    """An argument lies outside the region where a formula is valid."""


class ConvergenceError(ThermoflowError, ArithmeticError):
    """An iterative evaluation exhausted its budget before meeting tolerance."""


class SingularMetric(ThermoflowError, ArithmeticError):
    """The metric is too ill-conditioned to invert reliably."""


class ResolutionError(ThermoflowError):
    """A sampled curve or time grid is too coarse for the requested quantity."""


class StepError(ThermoflowError):
    """An integration step left the valid coordinate chart."""


class BracketError(ThermoflowError):
    """A root bracket does not enclose a sign change."""


class GridError(ThermoflowError):
    """A feature expected on a time grid (crossing, extremum) was not found."""
