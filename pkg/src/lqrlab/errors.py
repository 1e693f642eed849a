"""Exception taxonomy shared across the laboratory.

Every failure mode that callers are expected to branch on gets its own
class; everything derives from LqrLabError so a runner can catch the
whole family and record a failed seed instead of aborting.
"""


class LqrLabError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolationError(LqrLabError):
    """An argument breaks a documented precondition (shapes, symmetry, signs)."""


class IllPosedCostError(ContractViolationError):
    """Cost matrices fail their definiteness requirements."""


class BudgetExhaustedError(LqrLabError):
    """An oracle query would exceed the hard sample cap."""


class NoStabilizingSolutionError(LqrLabError):
    """Riccati iteration failed to converge to a stabilizing solution."""


class InstabilityError(LqrLabError):
    """A closed loop with spectral radius >= 1 where stability is required."""


class InsufficientExcitationError(LqrLabError):
    """Regression data does not span the parameter space (rank deficient)."""


class InsufficientDataError(LqrLabError):
    """A fitted linear system is singular with no regularization requested."""


class NonExtractablePolicyError(LqrLabError):
    """Greedy policy undefined because the action block is not positive definite."""


class ConfigurationError(LqrLabError):
    """Malformed experiment configuration (unknown method, bad schedule)."""
