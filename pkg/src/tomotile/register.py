"""Phase-correlation registration and the robustness studies.

Registration estimates integer shifts as the argmax of the inverse
transform of the normalized cross-power spectrum.  SOA chains register
adjacent detector bands on their overlap strips; LTA registers
reconstructed tiles on the lens where usable disks intersect.  The
studies quantify how photon budget and angular sampling degrade those
estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .grids import ImageGrid, Sinogram, uniform_angles
from .phantom import generate_phantom
from .projector import NoiseModel, extract_soa_band, normalize_log, \
    project_local, radon, simulate_counts
from .plan import lta_scan_count
from .recon import fbp, pad_edges, synthesize_360
from .rng import ANGLE_STREAM, BUDGET_STREAM, PERTURB_STREAM, stream

_TINY = 1e-15


@dataclass(frozen=True)
class OffsetVector:
    dx: int
    dy: int

    def __iter__(self):
        yield self.dx
        yield self.dy


def _as_array(img):
    a = img.values if isinstance(img, ImageGrid) else np.asarray(img)
    return np.asarray(a, dtype=np.float64)


def _pc_surface(Ia, Ib):
    """Validated inverse transform of the normalized cross-power spectrum."""
    a = _as_array(Ia)
    b = _as_array(Ib)
    if a.shape != b.shape:
        raise ParameterError("images must have the same shape")
    if a.ndim != 2 or min(a.shape) < 8:
        raise ParameterError("images must be 2-D and at least 8x8")
    fa = np.fft.fft2(a)
    fb = np.fft.fft2(b)
    for spec in (fa, fb):
        off_dc = spec.copy()
        off_dc[0, 0] = 0.0
        if np.abs(off_dc).max() <= _TINY * (1.0 + np.abs(spec[0, 0])):
            raise DegenerateInputError("constant image has no structure to register")
    cross = fb * np.conj(fa)
    mag = np.abs(cross)
    cross /= np.maximum(mag, _TINY * max(mag.max(), _TINY))
    return np.real(np.fft.ifft2(cross))


def phase_correlate(Ia, Ib):
    """Integer shift (dx, dy) such that Ib matches Ia rolled by it.

    Exact for circular shifts: phase_correlate(A, roll(A, (dy, dx)))
    returns (dx, dy) with wraparound resolved to the signed range.
    Ties are broken by smallest |dx|+|dy|, then row-major order.
    All-constant input has no phase to correlate and raises
    DegenerateInputError.
    """
    surface = _pc_surface(Ia, Ib)
    peak = surface.max()
    tol = 1e-9 * max(1.0, abs(peak))
    rows, cols = np.nonzero(surface >= peak - tol)
    h, w = surface.shape
    dy = np.where(rows > h // 2, rows - h, rows)
    dx = np.where(cols > w // 2, cols - w, cols)
    order = np.lexsort((cols, rows, np.abs(dx) + np.abs(dy)))
    best = order[0]
    return OffsetVector(int(dx[best]), int(dy[best]))


def _detector_shift(Ia, Ib):
    """Detector-axis shift between bands sharing a rotation sequence.

    Adjacent offset scans are acquired on the same rotation axis with
    the same angle list, so the angular axis of their sinogram bands
    cannot shift; only the detector offset is uncertain.  The argmax is
    therefore restricted to the zero-angular-shift row of the
    correlation surface.  Ties break toward smaller |dx|.
    """
    row = _pc_surface(Ia, Ib)[0]
    w = row.size
    peak = row.max()
    cols = np.nonzero(row >= peak - 1e-9 * max(1.0, abs(peak)))[0]
    dx = np.where(cols > w // 2, cols - w, cols)
    return int(dx[np.lexsort((cols, np.abs(dx)))[0]])


def _raised_cosine_taper(n, fraction=0.25):
    ramp = max(1, int(round(fraction * n)))
    w = np.ones(n)
    t = 0.5 * (1.0 - np.cos(np.pi * (np.arange(ramp) + 0.5) / ramp))
    w[:ramp] = t
    w[n - ramp:] = t[::-1]
    return w


def _windowed(strip):
    s = strip - strip.mean()
    return s * np.outer(_raised_cosine_taper(s.shape[0]),
                        _raised_cosine_taper(s.shape[1]))


@dataclass
class ChainResult:
    """Chained pairwise registration along a tile sequence."""

    cumulative: list
    pairwise: list
    drift: list
    fallbacks: list = field(default_factory=list)


def chain_register(tiles, nominal_stride, taper=True):
    """Register consecutive tiles and accumulate their positions.

    ``nominal_stride`` is the expected (dx, dy) between consecutive
    tiles; overlap strips implied by it are phase-correlated and the
    estimated pairwise offsets are summed, so any single pairwise error
    displaces every downstream tile (cumulative error).  A degenerate
    pair falls back to the nominal stride and is flagged.
    """
    arrays = [_as_array(t) for t in tiles]
    if len(arrays) < 2:
        raise ParameterError("need at least 2 tiles")
    if np.isscalar(nominal_stride):
        nominal = (int(nominal_stride), 0)
    else:
        nominal = (int(nominal_stride[0]), int(nominal_stride[1]))
    sdx, sdy = nominal
    pairwise = []
    fallbacks = []
    for i in range(len(arrays) - 1):
        left = arrays[i]
        right = arrays[i + 1]
        if left.shape != right.shape:
            raise ParameterError("tiles must share a common shape")
        h, w = left.shape
        ox = w - abs(sdx)
        oy = h - abs(sdy)
        if ox < 8 or oy < 8:
            raise ParameterError("nominal stride leaves no usable overlap")
        a = left[max(0, sdy): h + min(0, sdy), max(0, sdx): w + min(0, sdx)]
        b = right[max(0, -sdy): h + min(0, -sdy), max(0, -sdx): w + min(0, -sdx)]
        if taper:
            a = _windowed(a)
            b = _windowed(b)
        try:
            res = phase_correlate(a, b)
            est = (sdx + res.dx, sdy + res.dy)
        except DegenerateInputError:
            est = nominal
            fallbacks.append(i)
        pairwise.append(est)
    cumulative = [(0, 0)]
    for dx, dy in pairwise:
        cumulative.append((cumulative[-1][0] + dx, cumulative[-1][1] + dy))
    drift = [(c[0] - i * sdx, c[1] - i * sdy) for i, c in enumerate(cumulative)]
    return ChainResult(cumulative=cumulative, pairwise=pairwise, drift=drift,
                       fallbacks=fallbacks)


def perturb_offsets(offsets, sigma, seed):
    """Add seeded integer-rounded Gaussian noise to offset vectors.

    The noise is rounded before adding, so sigma=0 is the identity for
    fractional offsets too.  Integer input comes back as int64.
    """
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    arr = np.asarray(offsets)
    rng = stream(seed, PERTURB_STREAM)
    noise = np.rint(rng.normal(0.0, sigma, arr.shape))
    out = arr.astype(np.float64) + noise
    if np.issubdtype(arr.dtype, np.integer):
        return out.astype(np.int64)
    return out


@dataclass
class StudyConfig:
    """Shared knobs of the registration studies.

    Scan geometry is a quarter-scale version of the experimental setup:
    SOA bands of width ``f`` spaced at 850/1024 of the band width, and
    two LTA scans at ``lta_center_offset`` whose reconstructions share
    an overlap strip.  The photon budget is quoted per detector pixel
    per angle, summed over the strategy's scans, and split evenly
    across them.
    """

    L: int = 512
    phantom_seed: int = 0
    seed: int = 0
    trials: int = 20
    f: int = 256
    gamma: float = 0.85
    lta_center_offset: int = 175
    n_rows: int = 1600
    budgets: tuple = (250.0, 1000.0, 4000.0, 16000.0)
    factors: tuple = (1, 2, 4, 8, 16)
    angle_study_n_ph: float = 1000.0

    @property
    def soa_interval(self):
        # 1024-px tiles at 850-px interval, at this band width
        return int(round(self.f * 850.0 / 1024.0))


def _study_phantom(cfg):
    scale = cfg.L / 512.0
    return generate_phantom(
        L=cfg.L,
        pore_radius_range=(max(0.5, scale), 25.5 * scale),
        seed=cfg.phantom_seed,
    )


def _soa_bands_geometry(cfg, full360):
    """Noiseless study bands plus their integer start columns."""
    if cfg.f >= cfg.L:
        n = 1
    else:
        n = int(math.ceil((cfg.L - cfg.f) / cfg.soa_interval)) + 1
    first = full360.c0 - cfg.L / 2.0 + cfg.f / 2.0
    bands = []
    starts = []
    for i in range(n):
        p = first + i * cfg.soa_interval
        band = extract_soa_band(full360, p, cfg.f)
        bands.append(band)
        starts.append(int(round(full360.c0 - band.c0)))
    return bands, starts


def _lta_tile_centers(cfg):
    c = (cfg.L - 1) / 2.0
    half = cfg.lta_center_offset / 2.0
    return [(c - half, c), (c + half, c)]


def _lta_strips(cfg, tiles):
    """Overlap strips of two tile reconstructions offset along x."""
    ov = cfg.f - cfg.lta_center_offset
    if ov < 8:
        raise ParameterError("LTA tiles barely overlap; reduce the center offset")
    return tiles[0][:, cfg.lta_center_offset:], tiles[1][:, :ov]


def _noisy_lta_tiles(cfg, locals_clean, n_ph, seeds, factor=1):
    """FBP reconstructions of independently noised local sinograms."""
    tiles = []
    for clean, seed in zip(locals_clean, seeds):
        sub = clean
        if factor > 1:
            sub = Sinogram(values=clean.values[::factor],
                           angles=clean.angles[::factor], c0=clean.c0)
        noise = NoiseModel(n_ph, seed)
        counts = simulate_counts(sub, noise)
        sino = normalize_log(counts, noise.n_ph, like=sub)
        tiles.append(fbp(pad_edges(sino, 2.0), cfg.f).values)
    return tiles


def budget_study(cfg=None):
    """Registration error vs photon budget for both strategies.

    Per budget and trial, every scan receives budget/n_scans incident
    photons per detector pixel per angle.  Adjacent SOA bands register
    on their sinogram overlap strips along the detector axis (the
    rotation sequence is shared, so the angular axis is fixed); the two
    LTA reconstructions register on their overlap strip with both axes
    free, as the scan positions carry uncertainty in both.  Rows report
    the median over trials of the per-trial mean error.
    """
    cfg = cfg or StudyConfig()
    if any(b <= 0 for b in cfg.budgets):
        raise ParameterError("budgets must be > 0")
    ph = _study_phantom(cfg)
    half = radon(ph.grid, uniform_angles(cfg.n_rows // 2, math.pi))
    full360 = synthesize_360(half)
    bands, starts = _soa_bands_geometry(cfg, full360)
    n_soa = len(bands)
    n_lta = lta_scan_count(cfg.L, cfg.f, cfg.gamma) ** 2
    centers = _lta_tile_centers(cfg)
    angles360 = uniform_angles(cfg.n_rows, 2.0 * math.pi)
    locals_clean = [project_local(ph.grid, c, cfg.f, angles360) for c in centers]

    rows = []
    for bi, budget in enumerate(cfg.budgets):
        soa_errors = []
        lta_errors = []
        for trial in range(cfg.trials):
            # SOA: independent noise per band, register adjacent strips.
            noisy = []
            for si, band in enumerate(bands):
                noise = NoiseModel(budget / n_soa,
                                   _study_seed(cfg.seed, 0, bi, trial, si))
                counts = simulate_counts(band, noise)
                noisy.append(normalize_log(counts, noise.n_ph))
            errs = []
            for i in range(len(noisy) - 1):
                w_i = noisy[i].shape[1]
                w_j = noisy[i + 1].shape[1]
                ov_end = min(starts[i] + w_i, starts[i + 1] + w_j)
                a = noisy[i][:, starts[i + 1] - starts[i]: ov_end - starts[i]]
                b = noisy[i + 1][:, : ov_end - starts[i + 1]]
                errs.append(abs(_detector_shift(_windowed(a), _windowed(b))))
            soa_errors.append(float(np.mean(errs)))

            # LTA: independent noise per scan, FBP, register overlap strips.
            seeds = [_study_seed(cfg.seed, 1, bi, trial, si)
                     for si in range(len(centers))]
            tiles = _noisy_lta_tiles(cfg, locals_clean, budget / n_lta, seeds)
            a, b = _lta_strips(cfg, tiles)
            est = phase_correlate(_windowed(a), _windowed(b))
            lta_errors.append(float(math.hypot(est.dx, est.dy)))

        for strategy, errors in (("soa", soa_errors), ("lta", lta_errors)):
            rows.append({
                "strategy": strategy,
                "axis": float(budget),
                "mean_error_px": float(np.median(errors)),
                "std_error_px": float(np.std(errors)),
                "trials": cfg.trials,
            })
    return rows


def angle_downsampling_study(cfg=None):
    """LTA registration error vs angular downsampling factor."""
    cfg = cfg or StudyConfig()
    for factor in cfg.factors:
        if factor < 1 or cfg.n_rows % factor != 0:
            raise ParameterError("factors must divide the row count")
    ph = _study_phantom(cfg)
    centers = _lta_tile_centers(cfg)
    angles360 = uniform_angles(cfg.n_rows, 2.0 * math.pi)
    locals_clean = [project_local(ph.grid, c, cfg.f, angles360) for c in centers]

    rows = []
    for fi, factor in enumerate(cfg.factors):
        errors = []
        for trial in range(cfg.trials):
            seeds = [_study_seed(cfg.seed, 2, fi, trial, si)
                     for si in range(len(centers))]
            tiles = _noisy_lta_tiles(cfg, locals_clean, cfg.angle_study_n_ph,
                                     seeds, factor=factor)
            a, b = _lta_strips(cfg, tiles)
            est = phase_correlate(_windowed(a), _windowed(b))
            errors.append(float(math.hypot(est.dx, est.dy)))
        rows.append({
            "strategy": "lta",
            "axis": float(factor),
            "mean_error_px": float(np.median(errors)),
            "std_error_px": float(np.std(errors)),
            "trials": cfg.trials,
        })
    return rows


def _study_seed(seed, study, level, trial, scan):
    # Distinct Philox stream per (study, axis level, trial, scan).
    base = stream(seed, BUDGET_STREAM if study < 2 else ANGLE_STREAM,
                  study, level, trial, scan)
    return int(base.integers(0, 2**62))
