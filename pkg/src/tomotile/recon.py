"""Filtered backprojection and the two stitching paths.

SOA: detector bands are blended back into one wide sinogram which is
reconstructed in a single FBP pass.  LTA: each truncated local sinogram
is edge-padded, reconstructed on its own small grid, cropped to the
usable disk, and the resulting tiles are feathered into a mosaic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import back_project
from .errors import CoverageGapError, ParameterError
from .grids import ImageGrid, Sinogram

FILTERS = ("ramlak", "shepp")


def _spatial_filter_kernel(det, kind):
    """Spatial-domain ramp filter taps for offsets -(det-1)..(det-1)."""
    n = np.arange(-(det - 1), det, dtype=np.float64)
    if kind == "ramlak":
        h = np.zeros(n.size)
        h[n == 0] = 0.25
        odd = (n.astype(np.int64) % 2) != 0
        h[odd] = -1.0 / (np.pi * n[odd]) ** 2
    elif kind == "shepp":
        h = -2.0 / (np.pi**2 * (4.0 * n**2 - 1.0))
    else:
        raise ParameterError("filter must be one of %s" % (FILTERS,))
    return h


def _filter_rows(values, kind):
    """Ramp-filter each sinogram row by FFT convolution (>=2x padding)."""
    n_angles, det = values.shape
    size = 1 << max(6, int(math.ceil(math.log2(2 * det))))
    taps = _spatial_filter_kernel(det, kind)
    kernel = np.zeros(size)
    kernel[: det] = taps[det - 1 :]          # offsets 0..det-1
    kernel[size - det + 1 :] = taps[: det - 1]  # offsets -(det-1)..-1
    padded = np.zeros((n_angles, size))
    padded[:, :det] = values
    spectrum = np.fft.rfft(padded, axis=1) * np.fft.rfft(kernel)[None, :]
    return np.fft.irfft(spectrum, n=size, axis=1)[:, :det]


def fbp(sino, output_size, filter="ramlak"):
    """Filtered backprojection onto a square grid centered on the axis."""
    if sino.n_angles < 2:
        raise ParameterError("fbp needs at least 2 angles")
    if filter not in FILTERS:
        raise ParameterError("filter must be one of %s" % (FILTERS,))
    out = int(output_size)
    if out < 1:
        raise ParameterError("output_size must be >= 1")
    filtered = _filter_rows(sino.values, filter)
    c = (out - 1) / 2.0
    image = back_project(filtered, sino.angles, out, out, sino.c0, c, c)
    image *= math.pi / sino.n_angles
    return ImageGrid(image)


def pad_edges(sino, pad_factor):
    """Extend each row on both sides with copies of its edge value."""
    if pad_factor < 0:
        raise ParameterError("pad_factor must be >= 0")
    pad = int(round(pad_factor * sino.detector_width))
    if pad == 0:
        return Sinogram(values=sino.values.copy(), angles=sino.angles.copy(),
                        c0=sino.c0, n_ph=sino.n_ph)
    values = np.pad(sino.values, ((0, 0), (pad, pad)), mode="edge")
    return Sinogram(values=values, angles=sino.angles.copy(),
                    c0=sino.c0 + pad, n_ph=sino.n_ph)


def synthesize_360(sino180):
    """Mirror a half-turn sinogram into a full-turn one.

    Row theta+180deg is the mirror of row theta about c0.  When the
    axis sits on an integer bin with symmetric margins (odd detector,
    c0 = (width-1)/2) the mirror is an exact column flip.
    """
    angles = sino180.angles
    if angles.size < 1:
        raise ParameterError("empty sinogram")
    step = angles[1] - angles[0] if angles.size > 1 else math.pi
    span = angles[-1] - angles[0] + step
    if abs(span - math.pi) > 1e-9 or abs(angles[0]) > 1e-12:
        raise ParameterError("input must span [0, 180 degrees)")
    det = sino180.detector_width
    if abs(2.0 * sino180.c0 - (det - 1)) < 1e-9:
        mirrored = sino180.values[:, ::-1]
    else:
        pos = np.arange(det, dtype=np.float64)
        sample_at = 2.0 * sino180.c0 - pos
        mirrored = np.empty_like(sino180.values)
        for i in range(sino180.n_angles):
            mirrored[i] = np.interp(sample_at, pos, sino180.values[i],
                                    left=0.0, right=0.0)
    values = np.vstack([sino180.values, mirrored])
    angles360 = np.concatenate([angles, angles + math.pi])
    return Sinogram(values=values, angles=angles360, c0=sino180.c0,
                    n_ph=sino180.n_ph)


def stitch_sinograms(bands, offsets, blend="feather"):
    """Assemble detector bands into one full-width sinogram.

    ``offsets`` are the bands' first-column positions in the output
    frame, sorted ascending.  Overlaps are linearly cross-faded in
    feather mode (complementary ramps; overlapping identical data is
    reproduced exactly); none mode lets the later band win.  A gap
    between consecutive bands raises CoverageGapError listing the
    uncovered intervals.  The output frame's c0 is anchored on the
    first band.
    """
    if blend not in ("feather", "none"):
        raise ParameterError("blend must be feather or none")
    if len(bands) == 0:
        raise ParameterError("no bands to stitch")
    offs = [int(round(float(o))) for o in offsets]
    if len(offs) != len(bands):
        raise ParameterError("one offset per band required")
    if any(b < a for a, b in zip(offs, offs[1:])):
        raise ParameterError("offsets must be sorted ascending")
    n_angles = bands[0].n_angles
    for b in bands:
        if b.n_angles != n_angles:
            raise ParameterError("bands must share the angle set")

    widths = [b.detector_width for b in bands]
    gaps = []
    reach = offs[0] + widths[0]
    for a, w in zip(offs[1:], widths[1:]):
        if a > reach:
            gaps.append((reach, a))
        reach = max(reach, a + w)
    if gaps:
        raise CoverageGapError(gaps)

    origin = min(offs)
    out_w = max(a + w for a, w in zip(offs, widths)) - origin
    if blend == "none":
        out = np.zeros((n_angles, out_w))
        for band, a in zip(bands, offs):
            out[:, a - origin: a - origin + band.detector_width] = band.values
    else:
        num = np.zeros((n_angles, out_w))
        den = np.zeros(out_w)
        for i, (band, a) in enumerate(zip(bands, offs)):
            w = band.detector_width
            weight = np.ones(w)
            if i > 0:
                o_l = max(0, offs[i - 1] + widths[i - 1] - a)
                if o_l > 0:
                    ramp_up = np.arange(1, min(o_l, w) + 1) / (o_l + 1.0)
                    weight[: min(o_l, w)] = ramp_up
            if i < len(bands) - 1:
                o_r = max(0, a + w - offs[i + 1])
                if o_r > 0:
                    ramp_dn = np.arange(min(o_r, w), 0, -1) / (o_r + 1.0)
                    weight[w - min(o_r, w):] = np.minimum(
                        weight[w - min(o_r, w):], ramp_dn)
            sl = slice(a - origin, a - origin + w)
            num[:, sl] += weight[None, :] * band.values
            den[sl] += weight
        out = num / den[None, :]

    c0 = bands[0].c0 + offs[0] - origin
    return Sinogram(values=out, angles=bands[0].angles.copy(), c0=c0,
                    n_ph=bands[0].n_ph)


@dataclass
class ReconTile:
    """One reconstructed local tomogram with its usable interior disk."""

    image: ImageGrid
    roi_center: tuple
    usable_diameter: float

    def usable_mask(self):
        f = self.image.width
        c = (f - 1) / 2.0
        d = np.arange(f, dtype=np.float64) - c
        rr2 = d[:, None] ** 2 + d[None, :] ** 2
        return rr2 <= (self.usable_diameter / 2.0) ** 2


def reconstruct_tile(local, gamma_os, roi_center=(0.0, 0.0), filter="ramlak",
                     pad_factor=2.0):
    """Edge-pad, reconstruct, and disk-crop one local scan."""
    if not 0 < gamma_os <= 1:
        raise ParameterError("gamma_os must be in (0, 1]")
    f = local.detector_width
    padded = pad_edges(local, pad_factor)
    image = fbp(padded, f, filter=filter)
    tile = ReconTile(image=image, roi_center=(float(roi_center[0]),
                                              float(roi_center[1])),
                     usable_diameter=gamma_os * f)
    image.values[~tile.usable_mask()] = 0.0
    return tile


@dataclass
class StitchLayout:
    """Placement of tiles in the mosaic frame.

    ``positions`` give each tile's ROI-center coordinates (x, y) in the
    output frame; fractional positions are placed by bilinear splat.
    """

    positions: list
    out_shape: tuple
    blend: str = "feather"
    object_mask: np.ndarray | None = field(default=None)


def stitch_tiles(tiles, layout):
    """Feathered mosaic of tile interiors; uncovered pixels become 0.

    Feather weight is the distance from the pixel to the edge of the
    tile's usable disk, so seams cross-fade and tile centers dominate.
    """
    if len(tiles) == 0:
        raise ParameterError("no tiles to stitch")
    if len(layout.positions) != len(tiles):
        raise ParameterError("one position per tile required")
    if layout.blend not in ("feather", "none"):
        raise ParameterError("blend must be feather or none")
    out_h, out_w = (int(layout.out_shape[0]), int(layout.out_shape[1]))
    num = np.zeros((out_h, out_w))
    den = np.zeros((out_h, out_w))
    for tile, (px, py) in zip(tiles, layout.positions):
        f = tile.image.width
        c = (f - 1) / 2.0
        d = np.arange(f, dtype=np.float64) - c
        rr = np.sqrt(d[:, None] ** 2 + d[None, :] ** 2)
        radius = tile.usable_diameter / 2.0
        weight = np.maximum(0.0, radius - rr)
        if layout.blend == "none":
            weight = (weight > 0).astype(np.float64)
        wv = weight * tile.image.values
        # Global coordinates of tile pixel (0, 0).
        gx0 = float(px) - c
        gy0 = float(py) - c
        ix0 = math.floor(gx0)
        iy0 = math.floor(gy0)
        fx = gx0 - ix0
        fy = gy0 - iy0
        if fx < 1e-12 and fy < 1e-12:
            taps = [(0, 0, 1.0)]
        else:
            taps = [
                (0, 0, (1 - fy) * (1 - fx)),
                (0, 1, (1 - fy) * fx),
                (1, 0, fy * (1 - fx)),
                (1, 1, fy * fx),
            ]
        for dy, dx, tw in taps:
            if tw == 0.0:
                continue
            y0 = iy0 + dy
            x0 = ix0 + dx
            ty0 = max(0, -y0)
            tx0 = max(0, -x0)
            ty1 = min(f, out_h - y0)
            tx1 = min(f, out_w - x0)
            if ty0 >= ty1 or tx0 >= tx1:
                continue
            oy = slice(y0 + ty0, y0 + ty1)
            ox = slice(x0 + tx0, x0 + tx1)
            num[oy, ox] += tw * wv[ty0:ty1, tx0:tx1]
            den[oy, ox] += tw * weight[ty0:ty1, tx0:tx1]
    covered = den > 0
    out = np.zeros((out_h, out_w))
    out[covered] = num[covered] / den[covered]
    check = layout.object_mask if layout.object_mask is not None else None
    if check is not None:
        missing = int(np.count_nonzero(check & ~covered))
        if missing:
            warnings.warn("%d object pixels not covered by any tile" % missing,
                          stacklevel=2)
    return ImageGrid(out)


def refine_rotation_center(sino, output_size, search_radius=5.0, step=0.5,
                           filter="ramlak", crop=256):
    """Pick the axis column giving the sharpest central crop.

    Scans candidate c0 values around the sinogram's own c0 and scores a
    central crop of each candidate reconstruction by gray-level
    histogram entropy.  A wrong axis smears edges tangentially, which
    spreads pixel values into intermediate gray levels and broadens the
    histogram; the aligned reconstruction concentrates values at the
    material levels and so has the lowest entropy.  Ties keep the
    candidate closest to the nominal c0.
    """
    if sino.n_angles < 2:
        raise ParameterError("need at least 2 angles")
    if search_radius < 0:
        raise ParameterError("search_radius must be >= 0")
    filtered = _filter_rows(sino.values, filter)
    size = min(int(crop), int(output_size))
    c = (size - 1) / 2.0
    offsets = np.arange(-search_radius, search_radius + step / 2, step)
    offsets = offsets[np.argsort(np.abs(offsets), kind="stable")]
    scale = math.pi / sino.n_angles

    def recon(cand):
        img = back_project(filtered, sino.angles, size, size, cand, c, c)
        return img * scale

    # histogram window fixed from the nominal reconstruction so every
    # candidate is scored on the same gray-level axis
    nominal = recon(sino.c0)
    lo = float(nominal.min())
    hi = float(nominal.max())
    if hi <= lo:
        return sino.c0
    pad = 0.25 * (hi - lo)
    lo -= pad
    hi += pad

    best = (-math.inf, sino.c0)
    for off in offsets:
        cand = sino.c0 + off
        img = nominal if off == 0.0 else recon(cand)
        counts, _ = np.histogram(np.clip(img, lo, hi), bins=128,
                                 range=(lo, hi))
        p = counts[counts > 0] / img.size
        score = float(np.sum(p * np.log(p)))
        if score > best[0]:
            best = (score, cand)
    return best[1]
