"""Projection kernels with a numba fast path and a numpy fallback.

Both backends implement the same sampling scheme so results agree to
floating-point roundoff: rays are marched in unit steps along their
direction, sampling the image by bilinear interpolation (zero outside),
and back-projection gathers each filtered row by linear interpolation
at the pixel's detector coordinate.

Backend selection is controlled by the ``TOMOTILE_BACKEND`` environment
variable: ``auto`` (default, numba when importable), ``numba``, or
``numpy``.  Output is independent of thread count in either backend.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import ParameterError

BACKEND_ENV = "TOMOTILE_BACKEND"

try:
    import numba
    from numba import njit, prange

    # workqueue is always built and is enough for the serial/low-core
    # case; the default TBB probe warns on older TBB builds.
    numba.config.THREADING_LAYER = os.environ.get(
        "NUMBA_THREADING_LAYER", "workqueue"
    )

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        raise AssertionError("njit called without numba")

    prange = range


def set_threads(n):
    """Cap kernel worker threads; a no-op on the numpy backend."""
    if n < 1:
        raise ParameterError("thread count must be >= 1")
    if NUMBA_AVAILABLE:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def requested_backend():
    """Backend named by the environment, before availability checks."""
    value = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if value not in ("auto", "numba", "numpy"):
        raise ParameterError(
            "%s must be one of auto, numba, numpy (got %r)" % (BACKEND_ENV, value)
        )
    return value


def active_backend():
    """Backend actually used for kernel dispatch."""
    req = requested_backend()
    if req == "numpy":
        return "numpy"
    if req == "numba":
        if not NUMBA_AVAILABLE:
            raise ParameterError("numba backend requested but numba is not importable")
        return "numba"
    return "numba" if NUMBA_AVAILABLE else "numpy"


def _forward_numpy(image, sin_t, cos_t, det_width, c0, cx, cy, t_start, n_steps):
    h, w = image.shape
    n_angles = sin_t.shape[0]
    out = np.zeros((n_angles, det_width))
    u = np.arange(det_width, dtype=np.float64) - c0
    t = t_start + np.arange(n_steps, dtype=np.float64)
    # Pad by one zero ring so clipped gathers land on zeros.
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = image
    for a in range(n_angles):
        sa = sin_t[a]
        ca = cos_t[a]
        x = (cx + u[:, None] * sa) + t[None, :] * ca
        y = (cy + u[:, None] * ca) - t[None, :] * sa
        x0 = np.floor(x)
        y0 = np.floor(y)
        fx = x - x0
        fy = y - y0
        xi = x0.astype(np.int64)
        yi = y0.astype(np.int64)
        inside = (xi >= -1) & (xi <= w - 1) & (yi >= -1) & (yi <= h - 1)
        xi = np.clip(xi, -1, w - 1)
        yi = np.clip(yi, -1, h - 1)
        v00 = padded[yi + 1, xi + 1]
        v01 = padded[yi + 1, xi + 2]
        v10 = padded[yi + 2, xi + 1]
        v11 = padded[yi + 2, xi + 2]
        val = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * (
            (1.0 - fx) * v10 + fx * v11
        )
        val[~inside] = 0.0
        out[a] = val.sum(axis=1)
    return out


def _back_numpy(filtered, sin_t, cos_t, out_h, out_w, c0, cx, cy):
    n_angles, det = filtered.shape
    xs = np.arange(out_w, dtype=np.float64) - cx
    ys = np.arange(out_h, dtype=np.float64) - cy
    out = np.zeros((out_h, out_w))
    padrow = np.zeros(det + 2)
    for a in range(n_angles):
        s = (ys[:, None] * cos_t[a] + xs[None, :] * sin_t[a]) + c0
        s0 = np.floor(s)
        si = s0.astype(np.int64)
        fs = s - s0
        padrow[1:-1] = filtered[a]
        inside = (si >= -1) & (si <= det - 1)
        sc = np.clip(si, -1, det - 1)
        v = (1.0 - fs) * padrow[sc + 1] + fs * padrow[sc + 2]
        v[~inside] = 0.0
        out += v
    return out


if NUMBA_AVAILABLE:

    @njit(cache=True, parallel=True)
    def _forward_numba(image, sin_t, cos_t, det_width, c0, cx, cy, t_start, n_steps):
        h, w = image.shape
        n_angles = sin_t.shape[0]
        out = np.zeros((n_angles, det_width))
        eps = 1e-12
        for a in prange(n_angles):
            sa = sin_t[a]
            ca = cos_t[a]
            for d in range(det_width):
                u = d - c0
                bx = cx + u * sa
                by = cy + u * ca
                # Clip the march to the bilinear support slab.
                tlo = t_start
                thi = t_start + (n_steps - 1)
                ok = True
                if abs(ca) > eps:
                    ta = (-1.0 - bx) / ca
                    tb = (w - bx) / ca
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > tlo:
                        tlo = ta
                    if tb < thi:
                        thi = tb
                elif bx < -1.0 or bx > w:
                    ok = False
                if abs(sa) > eps:
                    ta = (by - h) / sa
                    tb = (by + 1.0) / sa
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > tlo:
                        tlo = ta
                    if tb < thi:
                        thi = tb
                elif by < -1.0 or by > h:
                    ok = False
                acc = 0.0
                if ok and tlo <= thi:
                    k0 = int(math.ceil(tlo - t_start))
                    k1 = int(math.floor(thi - t_start))
                    if k0 < 0:
                        k0 = 0
                    if k1 > n_steps - 1:
                        k1 = n_steps - 1
                    for k in range(k0, k1 + 1):
                        t = t_start + k
                        x = bx + t * ca
                        y = by - t * sa
                        x0 = math.floor(x)
                        y0 = math.floor(y)
                        fx = x - x0
                        fy = y - y0
                        xi = int(x0)
                        yi = int(y0)
                        v00 = 0.0
                        v01 = 0.0
                        v10 = 0.0
                        v11 = 0.0
                        if 0 <= yi < h:
                            if 0 <= xi < w:
                                v00 = image[yi, xi]
                            if 0 <= xi + 1 < w:
                                v01 = image[yi, xi + 1]
                        if 0 <= yi + 1 < h:
                            if 0 <= xi < w:
                                v10 = image[yi + 1, xi]
                            if 0 <= xi + 1 < w:
                                v11 = image[yi + 1, xi + 1]
                        acc += (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * (
                            (1.0 - fx) * v10 + fx * v11
                        )
                out[a, d] = acc
        return out

    @njit(cache=True, parallel=True)
    def _back_numba(filtered, sin_t, cos_t, out_h, out_w, c0, cx, cy):
        n_angles, det = filtered.shape
        out = np.zeros((out_h, out_w))
        for yy in prange(out_h):
            yrel = yy - cy
            for a in range(n_angles):
                sa = sin_t[a]
                ca = cos_t[a]
                base = yrel * ca + c0
                for xx in range(out_w):
                    s = (xx - cx) * sa + base
                    s0 = math.floor(s)
                    si = int(s0)
                    fs = s - s0
                    v0 = 0.0
                    v1 = 0.0
                    if 0 <= si < det:
                        v0 = filtered[a, si]
                    if 0 <= si + 1 < det:
                        v1 = filtered[a, si + 1]
                    out[yy, xx] += (1.0 - fs) * v0 + fs * v1
        return out


def _march_extent(h, w):
    half = int(math.ceil(math.hypot(w, h) / 2.0)) + 1
    return -float(half), 2 * half + 1


def forward_project(image, angles, det_width, c0, cx, cy):
    """Line integrals of ``image`` along rays on a uniform angle set.

    Returns an (n_angles, det_width) array.  ``c0`` is the detector
    coordinate of the axis through ``(cx, cy)``.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ParameterError("image must be 2-D")
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    det_width = int(det_width)
    if det_width < 1:
        raise ParameterError("detector width must be positive")
    sin_t = np.sin(angles)
    cos_t = np.cos(angles)
    t_start, n_steps = _march_extent(*image.shape)
    args = (image, sin_t, cos_t, det_width, float(c0), float(cx), float(cy),
            t_start, n_steps)
    if active_backend() == "numba":
        return _forward_numba(*args)
    return _forward_numpy(*args)


def back_project(filtered, angles, out_h, out_w, c0, cx, cy):
    """Unscaled backprojection sum of filtered rows over all angles."""
    filtered = np.ascontiguousarray(filtered, dtype=np.float64)
    if filtered.ndim != 2:
        raise ParameterError("filtered sinogram must be 2-D")
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    if filtered.shape[0] != angles.shape[0]:
        raise ParameterError("one angle per filtered row required")
    sin_t = np.sin(angles)
    cos_t = np.cos(angles)
    args = (filtered, sin_t, cos_t, int(out_h), int(out_w), float(c0),
            float(cx), float(cy))
    if active_backend() == "numba":
        return _back_numba(*args)
    return _back_numpy(*args)
