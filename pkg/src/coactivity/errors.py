"""Exception taxonomy shared across the package.

The CLI maps these onto exit statuses: data problems exit 2, numerical
failures exit 3. Plain ``ValueError`` is used for contract violations
(caller passed arguments that break a documented precondition).
"""


class ConfigurationError(ValueError):
    """Invalid configuration value (non-positive scale, bad enum, ...)."""


class DataError(ValueError):
    """A data file failed to parse or violates the stream schema."""


class NumericalError(RuntimeError):
    """A numerical routine failed beyond recovery (e.g. Cholesky after
    exhausting jitter escalation)."""
