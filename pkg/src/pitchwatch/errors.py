"""Exception types shared across the pipeline."""


class PitchwatchError(Exception):
    """Base class for all pipeline errors."""


class InvalidInputError(PitchwatchError, ValueError):
    """An argument violates an operation's preconditions."""


class BoundsError(PitchwatchError, ValueError):
    """A spatial region falls outside the frame it is applied to."""


class ShapeError(PitchwatchError, ValueError):
    """An array does not have the shape an operation requires."""


class InvalidLabelError(PitchwatchError, ValueError):
    """A classification label is outside the allowed set."""


class InsufficientDataError(PitchwatchError, ValueError):
    """Not enough samples (or classes) to carry out the operation."""


class AlignmentError(PitchwatchError, ValueError):
    """Two sequences that must be keyed identically are not."""


class InvalidProtocolError(PitchwatchError, ValueError):
    """An experiment protocol is malformed (e.g. transfer from a pitcher to itself)."""


class UnknownPitcherError(PitchwatchError, KeyError):
    """A referenced pitcher does not exist in the manifest."""


class InvalidStateError(PitchwatchError, RuntimeError):
    """An operation was called with stale or mismatched cached state."""
