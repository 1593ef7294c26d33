"""Exception hierarchy shared by all modules."""


class InfPotError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(InfPotError, ValueError):
    """A geometric object violates its invariants."""


class ZeroSeparation(ValidationError):
    pass


class NotAPoint(InfPotError):
    pass


class TooCoarse(InfPotError):
    pass


class OutOfDomain(InfPotError):
    pass


class EmptyLevel(InfPotError):
    pass


class NoConvergence(InfPotError):
    def __init__(self, message, residual=float("nan"), sweeps=0):
        super().__init__(message)
        self.residual = residual
        self.sweeps = sweeps


class SeedOutOfDomain(InfPotError):
    pass


class ContourTouchesBoundary(InfPotError):
    pass


class StreamlinesMergedInBand(InfPotError):
    pass


class IsAStadium(InfPotError):
    pass


class GammaNotOnRidge(InfPotError):
    pass


class WrongFixture(InfPotError):
    pass


class ParseError(InfPotError, ValueError):
    pass


class VersionMismatch(ParseError):
    pass


class IoError(InfPotError, OSError):
    pass
