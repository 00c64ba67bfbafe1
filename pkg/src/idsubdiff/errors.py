"""Exception hierarchy shared by all modules."""


class SubdiffError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(SubdiffError, ValueError):
    """A parameter lies outside the domain of the requested law or operation."""


class NumericFailure(SubdiffError, ArithmeticError):
    """A quadrature or transform inversion did not produce a usable value."""

    def __init__(self, message, at=None):
        super().__init__(message if at is None else f"{message} (at {at!r})")
        self.at = at


class GridTooShortError(SubdiffError, ValueError):
    """The sampled grid has too few points for the requested stencil."""


class ParseError(SubdiffError, ValueError):
    """Syntax or arity error in a coefficient expression."""

    def __init__(self, message, offset, expected=()):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected one of: {', '.join(sorted(expected))})"
        super().__init__(detail)
        self.offset = offset
        self.expected = frozenset(expected)


class EvaluationError(SubdiffError, ArithmeticError):
    """A coefficient expression hit a domain violation during evaluation."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} in {node}")
        self.node = node


class SamplerError(SubdiffError, RuntimeError):
    """A random variate generator gave up (e.g. rejection cap exceeded)."""


class PathDivergedError(SubdiffError, ArithmeticError):
    """A simulated trajectory produced non-finite values."""

    def __init__(self, message, step=None, path_index=None):
        super().__init__(message)
        self.step = step
        self.path_index = path_index


class StepLimitError(SubdiffError, MemoryError):
    """A path needed more operational-time steps than the configured cap."""


class ConfigError(SubdiffError, ValueError):
    """Invalid scenario configuration or incompatible command/config pairing."""


class RunFailure(SubdiffError, RuntimeError):
    """An ensemble run failed as a whole (e.g. too many diverged paths)."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = tuple(offending)
