"""Exception types shared across the package."""


class HashMarketError(Exception):
    """Base class for all package errors."""


class DegenerateDemandError(HashMarketError, ValueError):
    """Total opponent demand is zero, so shares and best responses are undefined."""


class InfeasiblePricingError(HashMarketError, ValueError):
    """No price above marginal cost fits under the price cap."""


class NumericsError(HashMarketError, ArithmeticError):
    """A solver produced NaN/inf and aborted."""


class ConfigError(HashMarketError, ValueError):
    """A scenario config file is missing, unreadable, or malformed."""
