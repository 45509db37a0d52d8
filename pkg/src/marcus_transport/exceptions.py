"""Exception types shared across the package."""


class MarcusTransportError(Exception):
    """Base class for all package errors."""


class DivergenceError(MarcusTransportError):
    """A trajectory produced a non-finite value during integration."""


class ExtrapolationError(MarcusTransportError):
    """An inverse-flow query fell outside the forward endpoint range."""


class DiffeomorphismError(MarcusTransportError):
    """Forward endpoints are not monotone in the initial point (d=1)."""


class InversionError(MarcusTransportError):
    """Newton iteration for the inverse flow failed to converge."""


class ConditioningError(MarcusTransportError):
    """The finite-difference Jacobian of the forward map is singular."""


class QuadratureError(MarcusTransportError):
    """A numerical quadrature did not reach the requested tolerance."""


class ConfigError(MarcusTransportError):
    """A run configuration file failed validation."""
