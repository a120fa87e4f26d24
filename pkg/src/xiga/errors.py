"""Exception types raised by the solver pipeline."""


class ConfigurationError(ValueError):
    """Invalid problem set-up: unknown phase, missing material, bad option."""


class SolverError(RuntimeError):
    """The linear system could not be factorised or solved."""
