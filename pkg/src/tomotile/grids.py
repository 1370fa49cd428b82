"""Shared raster containers: attenuation images and sinograms.

Geometry conventions used throughout the package:

* An image array is indexed ``values[row, col]`` with ``x = col`` and
  ``y = row``.  The default rotation center of a ``W x H`` image is the
  geometric pixel-center midpoint ``((W-1)/2, (H-1)/2)``.
* A sinogram row holds one projection; detector bins sit at integer
  coordinates ``0 .. detector_width-1``.  A point at image coordinates
  ``(x, y)`` relative to the rotation center projects, at angle
  ``theta``, to detector coordinate

      s(theta) = x*sin(theta) + y*cos(theta) + c0

  so the azimuth entering the projection track is ``atan2(x, y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

ANGLE_SPACING_TOL = 1e-12


@dataclass
class ImageGrid:
    """2-D raster of per-pixel linear attenuation (units 1/pixel)."""

    values: np.ndarray
    pixel_size: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParameterError("image values must be 2-D")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def center(self):
        """Default rotation center (x, y) in pixel coordinates."""
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("image must be at least 1x1")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("image values must be finite")
        if np.any(self.values < 0):
            raise ParameterError("attenuation values must be >= 0")
        return self


@dataclass
class Sinogram:
    """(angle x detector) raster of line integrals.

    ``angles`` are uniformly spaced ascending radians; ``c0`` is the
    detector coordinate of the rotation axis.  For band extracts ``c0``
    keeps the parent frame's axis coordinate, so it may fall outside the
    band's own column range.
    """

    values: np.ndarray
    angles: np.ndarray
    c0: float
    n_ph: float | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParameterError("sinogram values must be 2-D")
        if self.angles.shape != (self.values.shape[0],):
            raise ParameterError("one angle per sinogram row required")

    @property
    def n_angles(self):
        return self.values.shape[0]

    @property
    def detector_width(self):
        return self.values.shape[1]

    @property
    def angle_span(self):
        """Total angular extent (first angle to one step past the last)."""
        if self.n_angles < 2:
            return 0.0
        step = self.angles[1] - self.angles[0]
        return self.angles[-1] - self.angles[0] + step

    def validate(self):
        if self.n_angles < 1:
            raise ParameterError("sinogram needs at least one angle")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("sinogram values must be finite")
        if self.n_angles >= 2:
            steps = np.diff(self.angles)
            if np.any(steps <= 0):
                raise ParameterError("angles must be ascending")
            if np.max(steps) - np.min(steps) > ANGLE_SPACING_TOL:
                raise ParameterError("angle spacing must be uniform")
        # c0 is deliberately not range checked: band extracts keep the
        # parent frame's axis coordinate, which can sit outside the band.
        return self


def uniform_angles(n, span):
    """``n`` uniformly spaced angles covering ``[0, span)``."""
    if n < 1:
        raise ParameterError("need at least one angle")
    return np.arange(n, dtype=np.float64) * (span / n)
