"""Exception hierarchy shared across the package."""


class FlexclfError(Exception):
    """Base class for all errors raised by flexclf."""


class DimensionMismatch(FlexclfError):
    """A vector or matrix argument has the wrong shape."""


class InputOutOfBounds(FlexclfError):
    """A control input violates the plant's input box."""


class InvalidParameter(FlexclfError):
    """A constructor argument violates its documented range."""


class NoConvergence(FlexclfError):
    """An iterative matrix-equation solve failed to converge."""


class NumericalBreakdown(FlexclfError):
    """Problem data is not positive (semi)definite where required."""


class ProblemTooLarge(FlexclfError):
    """The brute-force oracle refuses inputs above its dimension guard."""


class GridTooLarge(FlexclfError):
    """A feasibility grid exceeds the configured cell cap."""


class EmptyLog(FlexclfError):
    """A latency summary was requested for an empty trajectory log."""


class ConfigError(FlexclfError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """The config file is not syntactically valid (includes duplicate keys)."""


class ValidationError(ConfigError):
    """The config file parsed but a field violates the schema."""
