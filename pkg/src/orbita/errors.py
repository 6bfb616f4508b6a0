"""Exception hierarchy shared by all orbita modules."""


class OrbitaError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(OrbitaError, ValueError):
    """A model parameter lies outside its admissible range."""


class DomainError(OrbitaError, ValueError):
    """Evaluation point outside the domain of a function."""


class NoMinimumError(OrbitaError):
    """The effective potential has no strict local minimum."""


class DegenerateCenterError(OrbitaError):
    """The minimum of the effective potential is not strict (W'' <= 0)."""


class InadmissibleError(OrbitaError, ValueError):
    """An energy/momentum pair or a rotation ratio is not admissible."""


class ConvergenceError(OrbitaError):
    """An iterative solver or an adaptive quadrature failed to converge."""


class QuadratureError(ConvergenceError):
    """Successive quadrature refinements disagree beyond tolerance."""


class CollisionError(OrbitaError):
    """A trajectory crossed a collision guard."""


class IntegrationError(OrbitaError):
    """The ODE integrator failed (step-size underflow or similar)."""


class InsufficientEventsError(OrbitaError):
    """Too few pericenter passages to measure an orbit."""


class VerificationError(OrbitaError):
    """An ODE verification of a torus failed; the message names the check."""
