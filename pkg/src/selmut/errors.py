"""Exception types shared across the package."""


class SelmutError(Exception):
    """Base class for all package-specific errors."""


class InputError(SelmutError, ValueError):
    """Caller passed arguments violating a documented precondition."""


class InvalidModelError(SelmutError):
    """A rate model violates one of its structural assumptions
    (positivity of death rates, monotonicity in total population, ...)."""


class NoFiniteRootError(InvalidModelError):
    """Bracket expansion for the carrying-capacity root exceeded the
    population cap without a sign change."""


class CertificateUnavailableError(SelmutError):
    """The static irreducibility certificate does not apply (the graph
    criterion needs strictly positive birth rates)."""


class PreconditionError(SelmutError):
    """An operation was invoked on data that does not satisfy its
    structural precondition (e.g. a pure-selection-only check on a
    trajectory produced with a mutating kernel)."""


class StiffnessError(SelmutError):
    """The adaptive integrator drove the step size below dt_min.

    Carries the partial trajectory computed so far in ``trajectory``.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SearchFailureError(SelmutError):
    """A bounded parameter search exhausted its range without success."""


class DomainError(SelmutError):
    """A diagnostic was evaluated outside its mathematical domain
    (e.g. a logarithm of a vanished weight)."""


class EigenConvergenceError(SelmutError):
    """The QR eigenvalue iteration failed to deflate within its
    iteration budget."""
