import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perclab.confradius import (
    CAL_RADII,
    MIN_WALK_BUDGET,
    GreenCalibration,
    RadiusEstimate,
    calibrate_green,
    cluster_radius_fn,
    disk_setup,
    doubling_increments,
    green_radius,
    koebe_bracket,
    mean_returns,
    measure_disks,
)
from perclab.events import EventSpec, MarkedPoints, evaluate
from perclab.lattice import build_region, site_of_point
from perclab.percolation import BitConfig, label_clusters, sample_config


@pytest.fixture(scope="module")
def cal():
    return calibrate_green(100_000, seed=1)


def test_koebe_examples():
    b = koebe_bracket(0.0)
    assert (b.lower, b.upper) == (0.0, 0.0)
    b = koebe_bracket(1.0)
    assert (b.lower, b.upper) == (1.0, 4.0)
    with pytest.raises(ValueError):
        koebe_bracket(-1.0)


@given(st.floats(0, 100), st.floats(0, 100))
def test_koebe_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    a, b = koebe_bracket(lo), koebe_bracket(hi)
    assert a.lower <= b.lower and a.upper <= b.upper


def test_estimate_validation():
    with pytest.raises(ValueError):
        RadiusEstimate(2.0, 1.0)
    with pytest.raises(ValueError):
        RadiusEstimate(1.0, 2.0, 3.0)


def _exact_green(region, start, kill):
    """Expected visits to ``start`` from ``start`` by a linear solve (killed walk)."""
    alive = np.flatnonzero(~kill)
    pos = {int(v): k for k, v in enumerate(alive)}
    n = len(alive)
    M = np.eye(n)
    for k, v in enumerate(alive):
        for u in region.neighbors[v]:
            if u >= 0 and not kill[u]:
                M[k, pos[int(u)]] -= 1 / 6
    e = np.zeros(n)
    e[pos[start]] = 1.0
    return np.linalg.solve(M, e)[pos[start]]


def test_mean_returns_matches_linear_solve():
    r = build_region(1.0, 4.0, 2.6j)
    start = site_of_point(r, complex(0.0, 2 * math.sqrt(3)))
    kill = np.abs(r.positions - r.positions[start]) > 2.5
    exact = _exact_green(r, start, kill)
    m, se, killed = mean_returns(r, start, kill, 200_000, seed=3)
    assert killed == 200_000
    assert abs(m - exact) < 5 * se


def test_mean_returns_dies_on_window_and_axis():
    r = build_region(1.0, 4.0, 0.0)
    start = site_of_point(r, 0j)
    kill = np.zeros(r.n_sites, dtype=bool)
    exact = _exact_green(r, start, kill)
    m, se, _ = mean_returns(r, start, kill, 100_000, seed=4)
    assert abs(m - exact) < 5 * se


def test_calibration_table_shape(cal):
    assert np.all(np.diff(cal.g) > 0) and np.all(np.diff(cal.r_over_mesh) > 0)
    inc = doubling_increments(cal)
    # the log-law plateau: increments at the measured large radii agree within 20%
    k = len(CAL_RADII) - 1
    assert abs(inc[k - 1] / inc[k - 2] - 1) < 0.2
    assert abs(inc[-1] / inc[k - 1] - 1) < 0.2


def test_calibration_roundtrip(cal, tmp_path):
    p = tmp_path / "cal.json"
    cal.save(p)
    back = GreenCalibration.load(p)
    np.testing.assert_array_equal(back.g, cal.g)
    assert back.checksum() == cal.checksum()
    d = json.loads(p.read_text())
    d["g"][0] += 1e-3
    p.write_text(json.dumps(d))
    with pytest.raises(ValueError):
        GreenCalibration.load(p)
    with pytest.raises(ValueError):
        GreenCalibration.from_json({"g": [1, 2], "r_over_mesh": [1, 2], "bogus": 0})
    with pytest.raises(ValueError):
        GreenCalibration(np.array([1.0, 1.0]), np.array([1.0, 2.0]))


def test_inverse_is_consistent(cal):
    for r in (3.0, 10.0, 100.0, 1000.0):
        assert abs(cal.radius_over_mesh(cal.g_at(r)) / r - 1) < 1e-9


@pytest.mark.parametrize("radius", [16, 32, 64])
def test_held_out_disks_within_five_percent(cal, radius):
    region, start, kill = disk_setup(radius)
    g, _, _ = mean_returns(region, start, kill, 100_000, seed=2)
    assert abs(cal.radius_over_mesh(g) / radius - 1) < 0.05


def test_repeatability_across_seeds():
    g1, _ = measure_disks(CAL_RADII, 10**6, seed=11)
    g2, _ = measure_disks(CAL_RADII, 10**6, seed=12)
    assert np.all(np.abs(g1 / g2 - 1) < 0.02)


def test_green_radius_contracts(cal):
    r = build_region(1 / 16, 1.5, 0.5j)
    w = complex(0.0, 0.6)
    for k in range(5):
        cfg = sample_config(r, 5, k)
        lab = label_clusters(cfg)
        A = [site_of_point(r, 0j)]
        blocking = lab.cluster_of(A)
        est = green_radius(cfg, lab, w, blocking, MIN_WALK_BUDGET, cal, seed=k)
        assert est.lower <= (est.point if est.point is not None else est.lower) <= est.upper
    with pytest.raises(ValueError):
        green_radius(cfg, lab, w, blocking, MIN_WALK_BUDGET - 1, cal)


def test_green_radius_zero_when_w_site_blocked(cal):
    r = build_region(1 / 16, 1.5, 0.5j)
    w = complex(0.0, 0.6)
    est = green_radius(None, None, w, [site_of_point(r, w)], MIN_WALK_BUDGET, cal, region=r)
    assert (est.lower, est.upper, est.point) == (0.0, 0.0, 0.0)


def test_green_method_between_brackets(cal):
    r = build_region(1 / 8, 2.0, 0.5j)
    m = MarkedPoints(u1=0.0, s1=0.25, w=complex(0.25, 0.6), s3=0.3)
    fn = cluster_radius_fn(cal, MIN_WALK_BUDGET, seed=0)
    for k in range(8):
        lab = label_clusters(sample_config(r, 6, k))
        lo = evaluate(lab, EventSpec("E_IR", m, "bracket-lower"))
        gr = evaluate(lab, EventSpec("E_IR", m, "green"), fn)
        up = evaluate(lab, EventSpec("E_IR", m, "bracket-upper"))
        assert lo <= gr <= up


def test_disk_radius_recovered_from_blocking(cal):
    """Blocking the complement of a lattice disk around w gives back the disk radius."""
    radius = 16
    region, start, kill = disk_setup(radius)
    w = region.positions[start]
    blocking = np.flatnonzero(kill)
    lab = label_clusters(BitConfig(region, np.zeros(region.n_sites, dtype=bool)))
    est = green_radius(None, lab, w, blocking, 100_000, cal, seed=9, region=region)
    assert abs(est.point / radius - 1) < 0.05
    assert est.lower <= radius <= est.upper
