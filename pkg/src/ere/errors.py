"""Exception hierarchy shared by the library and the command-line front end.

Each exception carries the process exit code the CLI should use when it
escapes a command.
"""


class EREError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(EREError, ValueError):
    """A parameter lies outside the domain of a family or operation."""

    exit_code = 2


class MalformedInputError(DomainError):
    """Array arguments have the wrong shape or structure."""


class InvalidFrameError(DomainError):
    """A frame is rank deficient or not isotropic."""


class SymmetryError(DomainError):
    """A brake-symmetry matrix violates N^2 = I, N JJ = -JJ N or RN = NR."""


class NonHyperbolicError(DomainError):
    """The equilibria P+/P- are not hyperbolic (lambda_1(R) <= -1/8)."""


class UnsupportedDimensionError(DomainError):
    """The requested method only exists for a particular dimension."""


class ConfigurationError(EREError, ValueError):
    """An operation was asked for something its inputs cannot supply."""

    exit_code = 2


class ConvergenceError(EREError, RuntimeError):
    """An integration or truncation did not reach its convergence target."""

    exit_code = 3


class NoCrossingError(EREError, ValueError):
    """A crossing form was requested where the two subspaces are transversal."""

    exit_code = 2


class ProbeFailure(EREError):
    """The nondegeneracy probe detected an index jump in strict mode."""

    exit_code = 4


class ConsistencyError(EREError, AssertionError):
    """Two computations that must agree produced different answers."""

    exit_code = 5
