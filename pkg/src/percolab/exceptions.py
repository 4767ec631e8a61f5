"""Exception hierarchy shared by the simulation, estimation and CLI layers."""


class PercolabError(Exception):
    """Base class for all errors raised by percolab."""


class WindowViolationError(PercolabError, ValueError):
    """A row or level falls outside the bond window it is evolved against."""


class InfeasibleEnumerationError(PercolabError):
    """Exhaustive enumeration would exceed the bond cap."""


class RegimeError(PercolabError):
    """The run has no surviving trials, so supercritical quantities are undefined."""


class InsufficientDataError(PercolabError, ValueError):
    """Too few usable points for a fit or statistic."""
