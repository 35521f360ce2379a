"""Exception types raised by the simulator."""


class BandTouchError(Exception):
    """Base class for numerical failures (CLI exit status 3)."""


class DegeneratePointError(BandTouchError, ValueError):
    """An eigenbasis projection was requested where the two levels coincide."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class GapCollapseError(BandTouchError):
    """The driving path crosses a point where the gap closes."""


class VanishingAmplitudeError(BandTouchError):
    """An interference amplitude is too small for its phase to be defined."""


class UnsupportedModelError(BandTouchError, TypeError):
    """The requested operation has no implementation for this model family."""
