"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined."""


class PreconditionError(ValueError):
    """A lemma check was asked about a trajectory outside its scope."""


class MissingEvent(LookupError):
    """The trajectory lacks the event a check depends on."""


class NoConvergence(RuntimeError):
    """A fixed-point iteration did not settle within its sweep budget."""


class BracketError(ValueError):
    """No usable sign change or zero was found on the requested bracket."""


class NotSupported(ValueError):
    """Requested case lies outside the implemented scope."""
