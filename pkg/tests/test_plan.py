import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tomotile.errors import ParameterError
from tomotile.phantom import disk_mask
from tomotile.plan import (
    PhysicalDoseParams,
    build_plan,
    coverage_map,
    dose_and_size,
    fov_for_truncation,
    lta_scan_count,
    soa_scan_count,
    support_hits,
    sweep_truncation,
    truncation_ratio,
)


def test_scan_count_desk_values():
    assert soa_scan_count(512, 128, 0.85) == 5
    assert lta_scan_count(512, 128, 0.85) == 7
    assert soa_scan_count(512, 512, 0.85) == 1
    assert lta_scan_count(512, 600, 0.85) == 1


def test_scan_count_validation():
    with pytest.raises(ParameterError):
        soa_scan_count(0, 10, 0.9)
    with pytest.raises(ParameterError):
        lta_scan_count(100, 10, 1.5)


def test_fov_for_truncation_roundtrip():
    f = fov_for_truncation(0.2, 512, 0.85)
    assert f == 120
    # achieved ratio lands within half a pixel's worth of the request
    for T in (0.1, 0.25, 0.5, 0.9):
        f = fov_for_truncation(T, 512, 0.85)
        assert abs(truncation_ratio(0.85 * f, 512) - T) <= 0.85 / (2 * 512) + 1e-12


def test_build_plan_soa_layout():
    plan = build_plan("soa", 512, 128, 0.85, 805)
    assert plan.detector_width == 725
    assert plan.c0 == 362
    assert plan.n_scans == plan.n_f == 5
    assert plan.rows == 1610
    starts = plan.band_starts()
    # first band starts at the object's left edge in detector coordinates
    assert starts[0] == int(math.ceil(plan.c0 - 256))
    # bands march at the usable-width stride and cover the object
    steps = np.diff(plan.offsets)
    assert np.allclose(steps, 0.85 * 128)
    assert starts[-1] + 128 >= plan.c0 + 256


def test_build_plan_lta_layout():
    plan = build_plan("lta", 512, 128, 0.85, 805)
    assert plan.n_scans == 49
    xs = sorted({c[0] for c in plan.centers})
    ys = sorted({c[1] for c in plan.centers})
    assert len(xs) == len(ys) == 7
    pitch = 0.85 * 128 / math.sqrt(2.0)
    assert np.allclose(np.diff(xs), pitch)
    # grid reaches both bounding-square corners (overflow allowed)
    assert xs[0] - pitch / 2 <= -0.5 + 1e-9
    assert xs[-1] + pitch / 2 >= 511.5 - 1e-9


def test_build_plan_single_scan_cases():
    soa = build_plan("soa", 64, 64, 0.9, 45)
    assert soa.n_scans == 1
    lta = build_plan("lta", 64, 80, 0.9, 45)
    assert lta.centers == [(31.5, 31.5)]
    with pytest.raises(ParameterError):
        build_plan("fan", 64, 16, 0.9, 45)


def test_coverage_total_is_data_size():
    for strategy in ("soa", "lta"):
        plan = build_plan(strategy, 64, 24, 0.85, 51)
        cov = coverage_map(plan)
        assert cov.total == plan.n_scans * plan.f * plan.rows
        assert cov.counts.min() >= 0


def test_soa_coverage_spans_object():
    plan = build_plan("soa", 64, 24, 0.85, 51)
    cov = coverage_map(plan)
    lo = int(math.floor(plan.c0 - 32)) - cov.col_offset
    hi = int(math.ceil(plan.c0 + 32)) - cov.col_offset
    assert np.all(cov.counts[:, lo:hi] >= 1)


def test_dose_counts_only_object_hits():
    L = 64
    plan = build_plan("soa", L, 24, 0.85, 51)
    mask = disk_mask(L).values > 0.5
    report = dose_and_size(plan, mask)
    assert 0 < report.D <= report.A
    assert report.A == plan.n_scans * plan.f * plan.rows
    assert len(report.epsilons) == plan.n_scans
    assert all(0 < e <= 1 for e in report.epsilons)
    assert report.physical is None


def test_physical_dose_scales_with_photons():
    L = 64
    plan = build_plan("soa", L, 24, 0.85, 51)
    mask = disk_mask(L).values > 0.5
    p1 = PhysicalDoseParams(E0=20.0, rho=1.0, delta=1.0, n_ph=1000.0,
                            mu_bar=0.01)
    p2 = PhysicalDoseParams(E0=20.0, rho=1.0, delta=1.0, n_ph=2000.0,
                            mu_bar=0.01)
    d1 = dose_and_size(plan, mask, p1).physical
    d2 = dose_and_size(plan, mask, p2).physical
    assert d2 == pytest.approx(2.0 * d1)


def test_support_hits_shape_and_content():
    L = 64
    plan = build_plan("soa", L, 24, 0.85, 51)
    hit = support_hits(disk_mask(L).values > 0.5, plan)
    assert hit.shape == (plan.rows, plan.detector_width)
    # rays through the axis always cross the centered disk
    assert np.all(hit[:, plan.c0])
    assert not hit[0, 0]


def test_sweep_row_structure():
    rows = sweep_truncation(("soa", "lta"), (0.2, 0.6), 64, 0.85, 51,
                            disk_mask(64).values > 0.5)
    assert len(rows) == 4
    assert {r["strategy"] for r in rows} == {"soa", "lta"}
    for r in rows:
        assert r["A"] > 0 and r["D_relative"] > 0
        assert r["D_physical"] is None
    with pytest.raises(ParameterError):
        sweep_truncation(("fan",), (0.2,), 64, 0.85, 51,
                         disk_mask(64).values > 0.5)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(32, 600), f=st.integers(8, 256),
       gamma=st.floats(0.5, 1.0))
def test_soa_bands_always_cover_the_object(L, f, gamma):
    plan = build_plan("soa", L, f, gamma, 4)
    starts = plan.band_starts()
    reach = starts[0] + f
    for s in starts[1:]:
        assert s <= reach  # no gap between consecutive bands
        reach = max(reach, s + f)
    # every integer detector column strictly inside the object is sampled
    assert starts[0] <= math.floor(plan.c0 - L / 2.0) + 1
    assert reach >= math.ceil(plan.c0 + L / 2.0)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(32, 600), f=st.integers(8, 256),
       gamma=st.floats(0.5, 1.0))
def test_lta_grid_covers_bounding_square(L, f, gamma):
    plan = build_plan("lta", L, f, gamma, 4)
    n = plan.n_f
    if n == 1:
        return
    pitch = gamma * f / math.sqrt(2.0)
    xs = sorted({c[0] for c in plan.centers})
    assert len(plan.centers) == n * n
    # ROI squares of side pitch tile the object's bounding square
    assert xs[0] - pitch / 2 <= -0.5 + 1e-9
    assert xs[-1] + pitch / 2 >= L - 0.5 - 1e-9
