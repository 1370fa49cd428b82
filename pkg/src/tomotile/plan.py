"""Scan planning, coverage accounting, data size A, and dose D.

Both strategies sample the full-turn sinogram (rows = 2 x the
half-turn angle count N_theta).  A scan contributes Omega_s = f * rows
sampled sinogram pixels; A sums Omega_s over scans and D weights each
scan by the fraction of its pixels whose ray actually crosses the
sample, so air exposure costs data but no dose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grids import Sinogram, uniform_angles
from .projector import detector_width_for, local_center_track, radon
from .recon import synthesize_360

STRATEGIES = ("soa", "lta")

# A ray counts as hitting the object when its interpolated path through
# the support mask exceeds half a pixel.  The bilinear forward model
# smears the object edge by up to one pixel, so rays just outside the
# geometric silhouette pick up sub-half-pixel path lengths; real edge
# chords are an order of magnitude longer.
HIT_TOL = 0.5


def _check_counts_args(L, f, gamma):
    if not (L > 0 and f > 0):
        raise ParameterError("L and f must be > 0")
    if not 0 < gamma <= 1:
        raise ParameterError("gamma must be in (0, 1]")


def soa_scan_count(L, f, gamma_ps):
    """Number of detector bands needed to span the object."""
    _check_counts_args(L, f, gamma_ps)
    if f >= L:
        return 1
    return int(math.ceil((L - f) / (gamma_ps * f) + 1.0))


def lta_scan_count(L, f, gamma_os):
    """Local-scan grid size per side; total scans = count squared."""
    _check_counts_args(L, f, gamma_os)
    if f >= L:
        return 1
    return int(math.ceil(math.sqrt(2.0) * L / (gamma_os * f)))


def truncation_ratio(f_prime, L):
    """T = useful field of view over object diameter."""
    if not (f_prime > 0 and L > 0):
        raise ParameterError("f_prime and L must be > 0")
    return f_prime / L


def fov_for_truncation(T, L, gamma):
    """Instrument FOV f (pixels, >= 2) whose useful FOV gives ratio T."""
    if not 0 < T <= 1:
        raise ParameterError("T must be in (0, 1]")
    _check_counts_args(L, 2, gamma)
    return max(2, int(round(T * L / gamma)))


@dataclass
class ScanPlan:
    """Scan layout for one strategy on an L-pixel object.

    ``n_theta`` is the half-turn angle count; every scan acquires the
    full turn (2 * n_theta projections).  SOA lists band centers in
    full-frame detector coordinates; LTA lists ROI centers in image
    coordinates (fractional, kept exact).
    """

    strategy: str
    L: int
    f: int
    gamma: float
    n_theta: int
    detector_width: int
    c0: int
    offsets: list = field(default_factory=list)
    centers: list = field(default_factory=list)

    @property
    def f_prime(self):
        return self.gamma * self.f

    @property
    def T(self):
        return self.f_prime / self.L

    @property
    def n_f(self):
        if self.strategy == "soa":
            return soa_scan_count(self.L, self.f, self.gamma)
        return lta_scan_count(self.L, self.f, self.gamma)

    @property
    def n_scans(self):
        return len(self.offsets) if self.strategy == "soa" else len(self.centers)

    @property
    def rows(self):
        return 2 * self.n_theta

    def band_starts(self):
        """First integer detector column of each SOA band."""
        if self.strategy != "soa":
            raise ParameterError("band_starts applies to SOA plans")
        return [int(math.ceil(p - self.f / 2.0)) for p in self.offsets]


def build_plan(strategy, L, f, gamma, n_theta):
    """Lay out scans: SOA bands at stride gamma*f from the left object
    edge; LTA centers on a square grid with diagonal pitch gamma*f,
    anchored so the first ROI border touches the bounding-square
    corner, overflowing right/bottom."""
    if strategy not in STRATEGIES:
        raise ParameterError("strategy must be one of %s" % (STRATEGIES,))
    L = int(L)
    f = int(f)
    _check_counts_args(L, f, gamma)
    if n_theta < 1:
        raise ParameterError("n_theta must be >= 1")
    det = detector_width_for((L, L))
    c0 = det // 2
    plan = ScanPlan(strategy=strategy, L=L, f=f, gamma=float(gamma),
                    n_theta=int(n_theta), detector_width=det, c0=c0)
    if strategy == "soa":
        n = soa_scan_count(L, f, gamma)
        first = c0 - L / 2.0 + f / 2.0
        plan.offsets = [first + i * gamma * f for i in range(n)]
    else:
        n = lta_scan_count(L, f, gamma)
        if n == 1:
            # f >= L: one conventional scan about the object center.
            plan.centers = [((L - 1) / 2.0, (L - 1) / 2.0)]
        else:
            pitch = gamma * f / math.sqrt(2.0)
            first = -0.5 + pitch / 2.0
            plan.centers = [
                (first + i * pitch, first + j * pitch)
                for j in range(n)
                for i in range(n)
            ]
    return plan


@dataclass
class CoverageMap:
    """Exposure count per full-turn sinogram pixel.

    The map frame extends past the physical detector where scans
    overflow: map column j corresponds to detector coordinate
    j + col_offset, and the rotation axis sits at map column c0.
    """

    counts: np.ndarray
    col_offset: int
    c0: float
    angles: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())


def coverage_map(plan):
    """Per-pixel exposure multiplicity over the full-turn sinogram."""
    rows = plan.rows
    angles = uniform_angles(rows, 2.0 * math.pi)
    f = plan.f
    if plan.strategy == "soa":
        starts = np.asarray(plan.band_starts(), dtype=np.int64)
        lo = int(min(starts.min(), 0))
        hi = int(max(starts.max() + f, plan.detector_width))
        counts = np.zeros((rows, hi - lo), dtype=np.int64)
        for a in starts:
            counts[:, a - lo: a - lo + f] += 1
        return CoverageMap(counts=counts, col_offset=lo,
                           c0=plan.c0 - lo, angles=angles)

    center = ((plan.L - 1) / 2.0, (plan.L - 1) / 2.0)
    tracks = [
        local_center_track(rc, center, plan.c0, angles) for rc in plan.centers
    ]
    all_starts = [np.ceil(t - f / 2.0).astype(np.int64) for t in tracks]
    lo = int(min(min(s.min() for s in all_starts), 0))
    hi = int(max(max(s.max() for s in all_starts) + f, plan.detector_width))
    width = hi - lo
    # Interval increments per row, integrated by cumulative sum.
    inc = np.zeros((rows, width + 1), dtype=np.int64)
    rows_idx = np.arange(rows)
    for starts in all_starts:
        np.add.at(inc, (rows_idx, starts - lo), 1)
        np.add.at(inc, (rows_idx, starts - lo + f), -1)
    counts = np.cumsum(inc, axis=1)[:, :width]
    return CoverageMap(counts=counts, col_offset=lo,
                       c0=plan.c0 - lo, angles=angles)


@dataclass
class DoseReport:
    A: int
    D: int
    epsilons: list
    n_scans: int
    rows: int
    omega_per_scan: int
    physical: float | None = None


def support_hits(mask, plan):
    """Boolean (rows, detector_width) raster: ray crosses the object."""
    mask = np.asarray(mask)
    if mask.shape != (plan.L, plan.L):
        raise ParameterError("mask shape must match the plan's object size")
    half = radon(mask.astype(np.float64), uniform_angles(plan.n_theta, math.pi))
    full = synthesize_360(half)
    return full.values > HIT_TOL


@dataclass
class PhysicalDoseParams:
    """Constants of the per-voxel dose formula."""

    E0: float
    rho: float
    delta: float
    n_ph: float
    mu_bar: float


def dose_and_size(plan, mask, physical=None):
    """Data size A and relative dose D for a plan on a given object.

    D counts sampled sinogram pixels whose ray intersects the support
    mask; with ``physical`` the per-pixel dose constant
    n_ph*E0*exp(-mu_bar*L/2)*mu_bar/(rho*delta^2) scales D.
    """
    return _dose_with_hits(plan, support_hits(mask, plan), physical)


def sweep_truncation(strategies, T_grid, L, gamma, n_theta, mask,
                     physical=None):
    """Rows of (strategy, T, f, n_f_total, A, D) over a truncation grid.

    The support raster is computed once per object and shared by every
    grid point.
    """
    for s in strategies:
        if s not in STRATEGIES:
            raise ParameterError("strategy must be one of %s" % (STRATEGIES,))
    base = build_plan("soa", L, max(2, int(L // 2)), gamma, n_theta)
    hit = support_hits(mask, base)
    out = []
    for T in T_grid:
        f = fov_for_truncation(T, L, gamma)
        for s in strategies:
            p = build_plan(s, L, f, gamma, n_theta)
            report = _dose_with_hits(p, hit, physical)
            n_total = p.n_f if s == "soa" else p.n_f**2
            out.append({
                "strategy": s,
                "T": float(T),
                "f": f,
                "n_f_total": n_total,
                "A": report.A,
                "D_relative": report.D,
                "D_physical": report.physical,
            })
    return out


def _dose_with_hits(plan, hit, physical=None):
    rows, det = hit.shape
    if rows != plan.rows:
        raise ParameterError("support raster row count mismatch")
    cum = np.zeros((rows, det + 1), dtype=np.int64)
    np.cumsum(hit, axis=1, out=cum[:, 1:])
    ridx = np.arange(rows)

    def interval_hits(starts):
        a = np.clip(starts, 0, det)
        b = np.clip(starts + plan.f, 0, det)
        return int((cum[ridx, b] - cum[ridx, a]).sum())

    omega = plan.f * rows
    hits = []
    if plan.strategy == "soa":
        for start in plan.band_starts():
            hits.append(interval_hits(np.full(rows, start, dtype=np.int64)))
    else:
        center = ((plan.L - 1) / 2.0, (plan.L - 1) / 2.0)
        angles = uniform_angles(rows, 2.0 * math.pi)
        for rc in plan.centers:
            track = local_center_track(rc, center, plan.c0, angles)
            starts = np.ceil(track - plan.f / 2.0).astype(np.int64)
            hits.append(interval_hits(starts))
    phys = None
    if physical is not None:
        scale = (physical.n_ph * physical.E0
                 * math.exp(-physical.mu_bar * plan.L / 2.0)
                 * physical.mu_bar / (physical.rho * physical.delta**2))
        phys = sum(hits) * scale
    return DoseReport(A=omega * plan.n_scans, D=int(sum(hits)),
                      epsilons=[h / omega for h in hits],
                      n_scans=plan.n_scans, rows=rows, omega_per_scan=omega,
                      physical=phys)
