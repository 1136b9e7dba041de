"""Exception hierarchy shared across the package."""


class ShieldError(Exception):
    """Base class for all package errors."""


class DomainError(ShieldError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class SingularityError(ShieldError, ArithmeticError):
    """The relative dynamics hit r <= 0."""


class ConfigurationError(ShieldError, ValueError):
    """Malformed configuration, target or tuning parameter."""


class BracketError(ShieldError, ValueError):
    """Bisection was asked to search an interval without a sign change."""


class DegenerateSlopeError(ShieldError, ArithmeticError):
    """The implicit-function slope is undefined because dL/dbeta vanishes."""


class TraceError(ShieldError, RuntimeError):
    """Boundary tracing contradicted the verification certificate."""


class SynthesisError(ShieldError, RuntimeError):
    """The tangent construction could not produce a positive-margin filter."""


class IntegrityError(ShieldError, ValueError):
    """A stored artifact failed its content or provenance hash check."""
