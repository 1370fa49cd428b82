"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates an operation's preconditions."""


class CoverageGapError(ValueError):
    """Bands passed for stitching leave part of the detector axis uncovered.

    ``gaps`` holds the uncovered half-open column intervals.
    """

    def __init__(self, gaps):
        self.gaps = list(gaps)
        intervals = ", ".join(f"[{a}, {b})" for a, b in self.gaps)
        super().__init__(f"bands leave uncovered detector intervals: {intervals}")


class DegenerateInputError(ValueError):
    """Input carries no usable signal (e.g. an all-constant image)."""


class FormatError(ValueError):
    """A raster file is malformed. ``offset`` is the failing byte position."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")
