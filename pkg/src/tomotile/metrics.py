"""Quality metrics: luminance-suppressed SSIM and registration error.

The SSIM used here multiplies only the contrast and structure terms
(luminance fixed at 1), so reconstructions that differ by a constant
intensity shift score 1.0.  Interior tomography produces exactly such
shifts, which carry no structural information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grids import ImageGrid


@dataclass
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float | None = None
    window: int | None = None
    luminance_enabled: bool = False

    def validate(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ParameterError("k1 and k2 must be > 0")
        if self.dynamic_range is not None and not self.dynamic_range > 0:
            raise ParameterError("dynamic_range must be > 0")
        if self.window is not None:
            if self.window < 3 or self.window % 2 == 0:
                raise ParameterError("window must be odd and >= 3")
        return self


def _as_values(img):
    return img.values if isinstance(img, ImageGrid) else np.asarray(img,
                                                                    dtype=float)


def _ssim_terms(va, vb, cov, mu_a, mu_b, c1, c2, c3, luminance):
    t = math.sqrt(va * vb)
    contrast = (2.0 * t + c2) / (va + vb + c2)
    structure = (cov + c3) / (t + c3)
    value = contrast * structure
    if luminance:
        value *= (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return value


def ssim(A, B, mask=None, params=None):
    """Structural similarity with the luminance term suppressed.

    Statistics are taken globally over the masked pixels by default;
    with ``params.window`` set, per-window scores are averaged over
    masked window centers instead.  The dynamic range defaults to the
    masked peak-to-peak of B (the reference image).
    """
    params = (params or SsimParams()).validate()
    a = _as_values(A)
    b = _as_values(B)
    if a.shape != b.shape:
        raise ParameterError("images must have the same shape")
    if mask is None:
        m = np.ones(a.shape, dtype=bool)
    else:
        m = _as_values(mask) > 0.5
        if m.shape != a.shape:
            raise ParameterError("mask must have the same shape as the images")
    if np.count_nonzero(m) < 2:
        raise ParameterError("mask must select at least 2 pixels")

    l_dyn = params.dynamic_range
    if l_dyn is None:
        bm = b[m]
        l_dyn = float(bm.max() - bm.min())
        if l_dyn <= 0:
            l_dyn = 1.0
    c1 = (params.k1 * l_dyn) ** 2
    c2 = (params.k2 * l_dyn) ** 2
    c3 = c2 / 2.0

    if params.window is None:
        av = a[m]
        bv = b[m]
        mu_a = av.mean()
        mu_b = bv.mean()
        ac = av - mu_a
        bc = bv - mu_b
        va = float((ac * ac).mean())
        vb = float((bc * bc).mean())
        cov = float((ac * bc).mean())
        return float(_ssim_terms(va, vb, cov, float(mu_a), float(mu_b),
                                 c1, c2, c3, params.luminance_enabled))

    w = params.window
    half = w // 2
    mu_a = _box_mean(a, w)
    mu_b = _box_mean(b, w)
    va = _box_mean(a * a, w) - mu_a * mu_a
    vb = _box_mean(b * b, w) - mu_b * mu_b
    cov = _box_mean(a * b, w) - mu_a * mu_b
    va = np.maximum(va, 0.0)
    vb = np.maximum(vb, 0.0)
    t = np.sqrt(va * vb)
    value = ((2.0 * t + c2) / (va + vb + c2)) * ((cov + c3) / (t + c3))
    if params.luminance_enabled:
        value *= (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    centers = m[half: a.shape[0] - half, half: a.shape[1] - half]
    if not centers.any():
        raise ParameterError("no masked window centers fit inside the image")
    return float(value[centers].mean())


def _box_mean(x, w):
    """Mean over all w*w windows fully inside x (valid mode)."""
    c = np.cumsum(np.cumsum(x, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    s = (c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w])
    return s / (w * w)


def bilinear_crop(image, center, size):
    """size x size patch of ``image`` centered at fractional (x, y)."""
    img = _as_values(image)
    size = int(size)
    c = (size - 1) / 2.0
    ys = center[1] - c + np.arange(size)
    xs = center[0] - c + np.arange(size)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    h, wd = img.shape
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, wd - 1)
    x1c = np.clip(x0 + 1, 0, wd - 1)
    v00 = img[np.ix_(y0c, x0c)]
    v01 = img[np.ix_(y0c, x1c)]
    v10 = img[np.ix_(y1c, x0c)]
    v11 = img[np.ix_(y1c, x1c)]
    return ((1 - fy) * ((1 - fx) * v00 + fx * v01)
            + fy * ((1 - fx) * v10 + fx * v11))


def lta_interior_ssim(tiles, ground_truth, interior_fraction,
                      object_diameter=None, params=None):
    """Mean per-tile SSIM over interior disks, boundary tiles excluded.

    A tile qualifies when its whole usable disk lies inside the object
    disk; each qualifying tile is compared against the matching patch
    of ``ground_truth`` on the centered disk of diameter
    interior_fraction * usable_diameter.
    """
    if not 0 < interior_fraction < 1:
        raise ParameterError("interior_fraction must be in (0, 1)")
    gt = _as_values(ground_truth)
    if object_diameter is None:
        object_diameter = min(gt.shape)
    ocx = (gt.shape[1] - 1) / 2.0
    ocy = (gt.shape[0] - 1) / 2.0
    scores = []
    for tile in tiles:
        x, y = tile.roi_center
        if math.hypot(x - ocx, y - ocy) + tile.usable_diameter / 2.0 \
                > object_diameter / 2.0:
            continue
        f = tile.image.width
        d = np.arange(f, dtype=np.float64) - (f - 1) / 2.0
        rr2 = d[:, None] ** 2 + d[None, :] ** 2
        radius = interior_fraction * tile.usable_diameter / 2.0
        mask = rr2 <= radius * radius
        if np.count_nonzero(mask) < 2:
            raise ParameterError("interior_fraction leaves too small a mask")
        ref = bilinear_crop(gt, (x, y), f)
        scores.append(ssim(tile.image.values, ref, mask, params))
    if not scores:
        raise ParameterError("no tiles lie fully inside the object")
    return float(np.mean(scores))


def mean_registration_error(estimated, truth):
    """Mean Euclidean distance between offset pairs."""
    est = np.asarray(estimated, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 2 or est.shape[1] != 2:
        raise ParameterError("need equal-length lists of (dx, dy) pairs")
    return float(np.hypot(*(est - tru).T).mean())
