"""Porous-disk phantom generation.

The test object is a solid disk of uniform linear attenuation with
randomly placed, non-overlapping circular pores.  With the default
background LAC of 1/L the central ray is attenuated by exp(-1)
regardless of scale, so noise behavior is comparable across sizes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grids import ImageGrid
from .rng import PHANTOM_STREAM, stream

# Rejection-sampling attempt budget per estimated pore.
ATTEMPT_BUDGET_FACTOR = 50

# Desk-scale defaults: diameter 512 with pore diameters 2..51.
DESK_L = 512
DESK_RADIUS_RANGE = (1.0, 25.5)
DESK_PORE_FRACTION = 0.3


@dataclass(frozen=True)
class Pore:
    """One circular pore: absolute pixel-coordinate center, radius, LAC."""

    x: float
    y: float
    radius: float
    lac: float


@dataclass
class Phantom:
    grid: ImageGrid
    diameter: int
    background_lac: float
    pores: list
    seed: int
    target_pore_fraction: float
    achieved_pore_fraction: float
    budget_exhausted: bool

    def support_mask(self):
        """Boolean raster of the outer disk (pores count as sample)."""
        return disk_mask(self.diameter, 1.0).values > 0.5

    def metadata(self):
        """JSON-ready description for sidecar manifests."""
        return {
            "diameter": self.diameter,
            "background_lac": self.background_lac,
            "seed": self.seed,
            "target_pore_fraction": self.target_pore_fraction,
            "achieved_pore_fraction": self.achieved_pore_fraction,
            "budget_exhausted": self.budget_exhausted,
            "pores": [
                {"x": p.x, "y": p.y, "radius": p.radius, "lac": p.lac}
                for p in self.pores
            ],
        }


def disk_mask(L, fraction=1.0):
    """Binary image: 1.0 inside the centered disk of diameter fraction*L."""
    L = int(L)
    if L < 1:
        raise ParameterError("L must be >= 1")
    if not 0 < fraction <= 1:
        raise ParameterError("fraction must be in (0, 1]")
    c = (L - 1) / 2.0
    d = np.arange(L, dtype=np.float64) - c
    rr2 = d[:, None] ** 2 + d[None, :] ** 2
    radius = fraction * L / 2.0
    return ImageGrid((rr2 <= radius * radius).astype(np.float64))


def generate_phantom(
    L=DESK_L,
    background_lac=None,
    pore_radius_range=DESK_RADIUS_RANGE,
    pore_lac_range=None,
    target_pore_fraction=DESK_PORE_FRACTION,
    seed=0,
):
    """Seeded phantom: uniform disk of diameter L with circular pores.

    Pores are placed by rejection sampling (centers uniform over the
    disk, radii and LACs uniform over their ranges) until the pore area
    fraction reaches ``target_pore_fraction`` or the attempt budget runs
    out; the returned object's ``budget_exhausted`` flag records the
    short fall.  Same seed and parameters give a bit-identical grid.
    """
    L = int(L)
    if L < 16:
        raise ParameterError("L must be >= 16")
    if background_lac is None:
        background_lac = 1.0 / L
    if not background_lac > 0:
        raise ParameterError("background_lac must be > 0")
    r_lo, r_hi = (float(pore_radius_range[0]), float(pore_radius_range[1]))
    if not (0 < r_lo <= r_hi < L / 2):
        raise ParameterError("pore radius range must satisfy 0 < lo <= hi < L/2")
    if pore_lac_range is None:
        pore_lac_range = (0.0, background_lac)
    l_lo, l_hi = (float(pore_lac_range[0]), float(pore_lac_range[1]))
    if not (0 <= l_lo <= l_hi <= background_lac):
        raise ParameterError("pore lac range must lie within [0, background_lac]")
    target_pore_fraction = float(target_pore_fraction)
    if not 0 <= target_pore_fraction <= 0.6:
        raise ParameterError("target_pore_fraction must be in [0, 0.6]")

    rng = stream(seed, PHANTOM_STREAM)
    R = L / 2.0
    # Area bookkeeping in units of r^2 (the pi cancels).
    target_area = target_pore_fraction * R * R
    mean_r2 = (r_lo * r_lo + r_lo * r_hi + r_hi * r_hi) / 3.0
    n_est = int(math.ceil(target_area / mean_r2)) if target_area > 0 else 0
    budget = ATTEMPT_BUDGET_FACTOR * n_est

    pores = []
    xs = np.empty(0)
    ys = np.empty(0)
    rs = np.empty(0)
    area_sum = 0.0
    attempts = 0
    while area_sum < target_area and attempts < budget:
        attempts += 1
        radius = rng.uniform(r_lo, r_hi)
        lac = rng.uniform(l_lo, l_hi)
        rad = R * math.sqrt(rng.uniform(0.0, 1.0))
        ang = rng.uniform(0.0, 2.0 * math.pi)
        if rad + radius > R:
            continue
        px = rad * math.cos(ang)
        py = rad * math.sin(ang)
        if pores:
            d2 = (xs - px) ** 2 + (ys - py) ** 2
            lim = (rs + radius) ** 2
            if np.any(d2 <= lim):
                continue
        pores.append(Pore(px, py, radius, lac))
        xs = np.append(xs, px)
        ys = np.append(ys, py)
        rs = np.append(rs, radius)
        area_sum += radius * radius

    exhausted = area_sum < target_area
    if exhausted and target_area > 0:
        warnings.warn(
            "pore placement budget exhausted at fraction %.4f of target %.4f"
            % (area_sum / (R * R), target_pore_fraction),
            stacklevel=2,
        )

    c = (L - 1) / 2.0
    d = np.arange(L, dtype=np.float64) - c
    rr2 = d[:, None] ** 2 + d[None, :] ** 2
    values = np.zeros((L, L))
    values[rr2 <= R * R] = background_lac
    yy = np.arange(L, dtype=np.float64)
    xx = np.arange(L, dtype=np.float64)
    abs_pores = []
    for p in pores:
        acx = c + p.x
        acy = c + p.y
        pm = (yy[:, None] - acy) ** 2 + (xx[None, :] - acx) ** 2 <= p.radius**2
        values[pm] = p.lac
        abs_pores.append(Pore(acx, acy, p.radius, p.lac))

    return Phantom(
        grid=ImageGrid(values),
        diameter=L,
        background_lac=background_lac,
        pores=abs_pores,
        seed=int(seed),
        target_pore_fraction=target_pore_fraction,
        achieved_pore_fraction=area_sum / (R * R),
        budget_exhausted=bool(exhausted and target_area > 0),
    )
