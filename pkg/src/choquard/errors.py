"""Exception types raised by the solvers and operators."""


class ChoquardError(Exception):
    """Base class for all package errors."""


class DiagonalSingularityError(ChoquardError, ValueError):
    """Pointwise log kernel requested on the diagonal r == s at gamma == 2."""


class DegenerateDirectionError(ChoquardError, ValueError):
    """Nehari projection of a direction with vanishing Hartree energy."""


class CriticalExponentError(ChoquardError, ValueError):
    """A closed-form scaling quantity was requested at gamma == 2."""


class FlatnessUnavailableError(ChoquardError, ValueError):
    """Flatness data cannot be derived for a tabulated potential."""


class ResolutionError(ChoquardError, ValueError):
    """The grid cannot resolve the concentration scale or the requested cutoff."""


class DomainError(ChoquardError, ValueError):
    """A resampled lattice leaves the domain of the source field."""


class ConvergenceError(ChoquardError, RuntimeError):
    """An iterative solver stopped without meeting its tolerances.

    ``diagnostics`` carries the iteration history needed to debug the run.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PositivityError(ConvergenceError):
    """The iterate repeatedly lost positivity."""


class ConfigError(ChoquardError, ValueError):
    """Malformed run configuration (carries the offending section/key)."""
