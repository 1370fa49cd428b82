"""Parallel-beam forward model.

Angle convention (used everywhere in the package): at angle theta the
beam axis at theta=0 runs along +y, and a point at (x, y) relative to
the rotation center projects to detector coordinate

    s(theta) = x*sin(theta) + y*cos(theta) + c0
             = sqrt(x^2 + y^2) * cos(atan2(x, y) - theta) + c0

so an off-center point traces a sinusoid of amplitude sqrt(x^2+y^2) and
phase atan2(x, y).  Rays are integrated with unit step and bilinear
sampling (see _kernels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import forward_project
from .errors import ParameterError
from .grids import ImageGrid, Sinogram
from .rng import COUNTS_STREAM, stream

# Counts below this are clamped before the negative log.
K_FLOOR = 0.5


@dataclass(frozen=True)
class NoiseModel:
    """Poisson counting noise: mean incident photons per detector bin."""

    n_ph: float
    seed: int = 0

    def __post_init__(self):
        if not self.n_ph > 0:
            raise ParameterError("n_ph must be > 0")


def detector_width_for(shape):
    """Smallest odd integer not below the image diagonal.

    Odd width puts the rotation axis on an integer bin (c0 = width//2),
    which makes the 180-degree mirror of a centered sinogram an exact
    column flip.
    """
    h, w = shape
    width = int(math.ceil(math.hypot(w, h)))
    if width % 2 == 0:
        width += 1
    return width


def radon(image, angles, center=None):
    """Line-integral sinogram of ``image`` over the given angles."""
    if isinstance(image, ImageGrid):
        image = image.values
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ParameterError("image must be 2-D")
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if angles.size == 0:
        raise ParameterError("need at least one angle")
    h, w = image.shape
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    cx, cy = float(center[0]), float(center[1])
    if not (0 <= cx <= w - 1 and 0 <= cy <= h - 1):
        raise ParameterError("center must lie inside the image bounds")
    det = detector_width_for(image.shape)
    c0 = det // 2
    values = forward_project(image, angles, det, c0, cx, cy)
    return Sinogram(values=values, angles=angles, c0=float(c0)).validate()


def simulate_counts(sino, noise):
    """Poisson photon counts through the object: k ~ P(n_ph * e^-I)."""
    if not isinstance(noise, NoiseModel):
        noise = NoiseModel(*noise)
    mean = noise.n_ph * np.exp(-sino.values)
    rng = stream(noise.seed, COUNTS_STREAM)
    return rng.poisson(mean)


def normalize_log(counts, n_ph, like=None):
    """Negative-log normalization of counts back to line integrals.

    Zero counts are clamped to K_FLOOR so the log stays finite.  With
    ``like`` (a Sinogram supplying angles and c0) the result is a
    Sinogram; otherwise the raw value array is returned.
    """
    if not n_ph > 0:
        raise ParameterError("n_ph must be > 0")
    counts = np.asarray(counts, dtype=np.float64)
    values = -np.log(np.maximum(counts, K_FLOOR) / n_ph)
    if like is None:
        return values
    if values.shape != like.values.shape:
        raise ParameterError("counts shape must match the reference sinogram")
    return Sinogram(values=values, angles=like.angles.copy(), c0=like.c0,
                    n_ph=float(n_ph))


def extract_soa_band(full, p, f):
    """Copy the detector band s in [p - f/2, p + f/2) for all angles.

    The band keeps the rotation-axis coordinate in its own frame
    (c0_band = c0_full - first_column), so the parent start column is
    recoverable as ``full.c0 - band.c0``.
    """
    f = int(f)
    if f < 1:
        raise ParameterError("band width must be >= 1")
    lo = float(p) - f / 2.0
    j0 = int(math.ceil(lo))
    j1 = j0 + f
    j0c = max(j0, 0)
    j1c = min(j1, full.detector_width)
    if j0c >= j1c:
        raise ParameterError("band does not intersect the detector range")
    return Sinogram(
        values=full.values[:, j0c:j1c].copy(),
        angles=full.angles.copy(),
        c0=full.c0 - j0c,
        n_ph=full.n_ph,
    )


def local_center_track(roi_center, image_center, c0, angles):
    """Detector coordinate of the ROI center at each angle (the s0 track)."""
    x_rel = roi_center[0] - image_center[0]
    y_rel = roi_center[1] - image_center[1]
    angles = np.asarray(angles, dtype=np.float64)
    return x_rel * np.sin(angles) + y_rel * np.cos(angles) + c0


def project_local(image, roi_center, f, angles):
    """Truncated projections on a width-f detector about roi_center.

    Models one local scan: the object rotates about roi_center and the
    detector sees only f bins centered on the axis (c0 = (f-1)/2).
    ``angles`` must span a full turn.
    """
    if isinstance(image, ImageGrid):
        image = image.values
    image = np.asarray(image, dtype=np.float64)
    f = int(f)
    if f < 2:
        raise ParameterError("local detector width must be >= 2")
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    _require_full_turn(angles)
    cx, cy = float(roi_center[0]), float(roi_center[1])
    c0 = (f - 1) / 2.0
    values = forward_project(image, angles, f, c0, cx, cy)
    return Sinogram(values=values, angles=angles, c0=c0)


def resample_local_from_full(full, roi_center, image_center, f):
    """Cross-validation twin of project_local: sample the full sinogram.

    Linearly interpolates each full-sinogram row along the ROI center's
    s0 track; agrees with direct truncated projection to interpolation
    tolerance.  ``full`` must span a full turn.
    """
    _require_full_turn(full.angles)
    f = int(f)
    c0 = (f - 1) / 2.0
    track = local_center_track(roi_center, image_center, full.c0, full.angles)
    cols = np.arange(f, dtype=np.float64) - c0
    out = np.empty((full.n_angles, f))
    parent = np.arange(full.detector_width, dtype=np.float64)
    for i in range(full.n_angles):
        out[i] = np.interp(track[i] + cols, parent, full.values[i],
                           left=0.0, right=0.0)
    return Sinogram(values=out, angles=full.angles.copy(), c0=c0)


def _require_full_turn(angles):
    if angles.size < 2:
        raise ParameterError("full-turn scan needs at least 2 angles")
    step = angles[1] - angles[0]
    span = angles[-1] - angles[0] + step
    if abs(span - 2.0 * math.pi) > 1e-9:
        raise ParameterError("angles must span a full turn")
