"""Simulator comparing two beyond-FOV tomography strategies.

SOA offsets the sample from the rotation axis and stitches detector
bands in sinogram space; LTA tiles the sample with local tomography
scans and stitches the reconstructed tiles.  The package generates
seeded porous-disk phantoms, simulates both acquisitions with Poisson
noise, and quantifies dose, data size, reconstruction quality, and
registration robustness.
"""

__version__ = "0.1.0"

from ._kernels import active_backend
from .errors import (
    CoverageGapError,
    DegenerateInputError,
    FormatError,
    ParameterError,
)
from .grids import ImageGrid, Sinogram, uniform_angles
from .phantom import Phantom, disk_mask, generate_phantom

__all__ = [
    "CoverageGapError",
    "DegenerateInputError",
    "FormatError",
    "ImageGrid",
    "ParameterError",
    "Phantom",
    "Sinogram",
    "active_backend",
    "disk_mask",
    "generate_phantom",
    "uniform_angles",
    "__version__",
]
