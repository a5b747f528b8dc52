"""Exception types shared across the package.

The CLI maps each class to a process exit code.
"""


class ConfigError(ValueError):
    """Invalid user input: domain description, parameters, or solver settings."""


class ConvergenceError(RuntimeError):
    """A numerical iteration failed to reach its tolerance."""


class InvariantViolation(RuntimeError):
    """A mathematical invariant that must hold was observed to fail.

    Raised for situations that indicate a defect rather than bad input, e.g. a
    sign-changing principal eigenfunction iterate.
    """
