"""Error classes shared across the package.

Usage errors map to CLI exit code 2, numeric-domain errors to exit
code 3, failed study/audit verdicts to exit code 1.
"""


class UsageError(ValueError):
    """Bad arguments: wrong dimension, unknown catalog name, invalid config."""


class NumericDomainError(ArithmeticError):
    """Non-finite or non-integrable value met during quadrature.

    Carries the offending node (index and coordinates) when known.
    """

    def __init__(self, message, node_index=None, node=None):
        super().__init__(message)
        self.node_index = node_index
        self.node = node
