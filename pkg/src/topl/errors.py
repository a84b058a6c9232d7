"""Exception taxonomy: validation failures vs. solver non-convergence.

The CLI maps ValidationError to exit code 2 and ConvergenceError to 3.
"""


class ValidationError(ValueError):
    """Inputs outside a documented domain or malformed configuration."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget or lost its bracket."""
