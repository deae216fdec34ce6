"""Exception types shared across the toolkit.

Most of these are thin ValueError subclasses so callers can catch either the
specific condition or the generic one.  ``AllOccluded`` is a control-flow
signal rather than a failure: it tells the caller that no camera contributed
evidence this frame and the query's memory embedding should be used instead.
"""


class BehindCamera(ValueError):
    """A point projects to non-positive depth in the camera frame."""


class FullyBehindCamera(ValueError):
    """Every corner of a box is behind the camera; no image-plane rect exists."""


class OffsetOutOfRange(ValueError):
    """A learned keypoint offset component left the unit cube [-1, 1]."""


class NonFiniteWeight(ValueError):
    """A sampling plan contains a NaN or infinite weight or coordinate."""


class OddChannelCount(ValueError):
    """Feature channel count is odd; the packed-pair path needs pairs."""


class ChannelMismatch(ValueError):
    """Pyramid channel count does not match the query descriptor length."""


class AllOccluded(Exception):
    """No view contributed visibility above the floor; use the memory embedding.

    This is a signal, not an error: it carries the visibility sum that failed
    the floor test.
    """

    def __init__(self, visibility_sum: float):
        self.visibility_sum = float(visibility_sum)
        super().__init__(
            f"total visibility {visibility_sum:.3g} at or below floor; "
            "caller should fall back to the query's memory embedding"
        )


class MissingIdentity(ValueError):
    """A probe identity has no counterpart in the gallery."""


class DegenerateGallery(ValueError):
    """The gallery does not contain at least two distinct identities."""


class LengthMismatch(ValueError):
    """Paired prediction/ground-truth arrays differ in length."""


class NonPositiveDepth(ValueError):
    """Ground-truth depth values must be strictly positive."""


class NonMonotonicTimestamps(ValueError):
    """Frame timestamps must be strictly increasing."""


class InvalidWaypoints(ValueError):
    """Waypoint times must be strictly increasing and at least one is required."""


class FrameCountMismatch(ValueError):
    """Ground-truth and prediction trajectory sets cover different frame counts."""


class ConfigError(ValueError):
    """A configuration document failed validation (unknown field, bad value, ...)."""


class ConfigParseError(ConfigError):
    """A configuration document is not syntactically valid JSON."""
