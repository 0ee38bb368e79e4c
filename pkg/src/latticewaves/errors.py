"""Exception types raised across the package."""


class LatticeWavesError(Exception):
    """Base class for all package errors."""


# potentials
class UnsupportedSide(LatticeWavesError):
    pass


class QuadratureFailure(LatticeWavesError):
    pass


class RootBracketFailure(LatticeWavesError):
    pass


class UnknownModel(LatticeWavesError):
    pass


class DomainError(LatticeWavesError):
    """Argument outside the supported evaluation window of a potential."""


class ExpressionError(LatticeWavesError):
    pass


# grid
class GridMismatch(LatticeWavesError):
    pass


class OddGrid(LatticeWavesError):
    pass


class KOutOfRange(LatticeWavesError):
    pass


class MeanNotZero(LatticeWavesError):
    pass


# flow
class ZeroProfile(LatticeWavesError):
    pass


class DegenerateNewton(LatticeWavesError):
    pass


class StalledFlow(LatticeWavesError):
    pass


class NotConverged(LatticeWavesError):
    """Iteration budget exhausted; ``state`` holds the last iterate."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


# wavetrain
class DegenerateWaveNumber(LatticeWavesError):
    pass


class NoClosedOrbit(LatticeWavesError):
    pass


# lattice
class BlowUp(LatticeWavesError):
    """Lattice values left the finite range; ``record`` holds the data so far."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class IncommensurateK(LatticeWavesError):
    pass
