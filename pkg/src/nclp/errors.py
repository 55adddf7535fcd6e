"""Error taxonomy shared by all modules.

ContractViolation maps to CLI exit code 2 (bad input / precondition),
NumericError to exit code 3 (non-finite values, failed convergence).
"""


class ContractViolation(ValueError):
    """A documented precondition was violated by the caller."""


class NumericError(RuntimeError):
    """A numerical routine failed (non-finite data, no convergence)."""
