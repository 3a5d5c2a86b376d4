"""Exception hierarchy shared across the package.

Two families matter to callers: configuration/validation problems
(rejected before any computation starts) and numerical failures
(bracketing, non-convergence, parameter ranges).  The CLI maps them to
distinct exit codes.
"""


class CoagsimError(Exception):
    pass


class ValidationError(CoagsimError, ValueError):
    """Bad input or configuration, detected before computing anything."""


class NumericsError(CoagsimError, RuntimeError):
    """A numerical procedure failed to produce a usable answer."""


class BracketError(NumericsError):
    """A root bracket with a sign change could not be located."""


class NonConvergenceError(NumericsError):
    """An iteration hit its limit without meeting its tolerance."""


class ParameterRangeError(NumericsError):
    """Intermediate quantities left the representable floating range."""
