import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perclab.lattice import (
    BELOW,
    DIRECTIONS,
    OUTSIDE,
    SQRT3_2,
    BoxSpec,
    annulus_sites,
    boundary_interval_sites,
    box_sites,
    build_region,
    lattice_position,
    site_of_point,
)


@pytest.fixture(scope="module")
def region():
    return build_region(0.25, 2.0, 0.3 + 1.0j)


def test_origin_region_has_boundary_site_at_zero():
    r = build_region(1.0, 4.0, 0j)
    s = site_of_point(r, 0j)
    assert r.positions[s] == 0j
    assert r.boundary[s]


def test_positions_follow_embedding(region):
    expected = region.mesh * (region.i + region.j / 2) + 1j * region.mesh * SQRT3_2 * region.j
    np.testing.assert_allclose(region.positions, expected)
    np.testing.assert_allclose(lattice_position(region.i, region.j, region.mesh), expected)


def test_site_ids_row_major(region):
    order = np.lexsort((region.i, region.j))
    np.testing.assert_array_equal(order, np.arange(region.n_sites))
    np.testing.assert_array_equal(region.site_id(region.i, region.j), np.arange(region.n_sites))


def test_neighbours_symmetric_and_unit_distance(region):
    nb = region.neighbors
    for v in range(region.n_sites):
        for d, u in enumerate(nb[v]):
            if u >= 0:
                assert nb[u, (d + 3) % 6] == v
                assert abs(abs(region.positions[u] - region.positions[v]) - region.mesh) < 1e-12


def test_sentinels(region):
    nb = region.neighbors
    row0 = region.j == 0
    assert np.all(nb[row0][:, 4] == BELOW) and np.all(nb[row0][:, 5] == BELOW)
    assert not np.any(nb[~row0] == BELOW)
    assert np.all(region.boundary == row0)
    # OUTSIDE only on the window rim
    rim = (nb == OUTSIDE).any(axis=1)
    d = region.positions - region.anchor
    far = np.maximum(np.abs(d.real), np.abs(d.imag))
    assert far[rim].min() > region.halfwidth - 2 * region.mesh


def test_interior_degree_six(region):
    deg = region.degree()
    interior = ~((region.neighbors < 0).any(axis=1))
    assert np.all(deg[interior] == 6)
    assert set(np.unique(deg)) <= {2, 3, 4, 5, 6}


def test_direction_table_is_ccw():
    angles = [math.atan2(SQRT3_2 * dj, di + dj / 2) for di, dj in DIRECTIONS]
    steps = np.diff(np.unwrap(angles))
    np.testing.assert_allclose(steps, math.pi / 3)


def test_exact_site_and_tie_break():
    r = build_region(1.0, 4.0, 0j)
    a, b = site_of_point(r, 0j), site_of_point(r, 1 + 0j)
    assert site_of_point(r, r.positions[b]) == b
    assert site_of_point(r, 0.5 + 0j) == min(a, b)


@given(st.floats(-1.6, 2.2), st.floats(0.0, 2.9))
def test_site_of_point_is_nearest(x, y):
    r = build_region(0.25, 2.0, 0.3 + 1.0j)
    p = complex(x, y)
    s = site_of_point(r, p)
    d = np.abs(r.positions - p)
    assert d[s] <= d.min() + 1e-12


def test_site_of_point_many_random(region):
    rng = np.random.default_rng(5)
    lo = region.anchor - region.halfwidth * (1 + 1j) * 0.95
    pts = lo.real + rng.random(1000) * 1.9 * region.halfwidth + 1j * (rng.random(1000) * (lo.imag + 1.9 * region.halfwidth))
    pts = pts.real + 1j * np.maximum(pts.imag, 0.0)
    for p in pts:
        s = site_of_point(region, p)
        assert np.abs(region.positions[s] - p) <= np.abs(region.positions - p).min() + 1e-12


def test_site_of_point_outside_window(region):
    with pytest.raises(ValueError):
        site_of_point(region, 10 + 1j)


def test_boundary_interval_examples():
    r = build_region(0.25, 2.0, 0.5 + 0j)
    s = boundary_interval_sites(r, 0.0, 1.0)
    np.testing.assert_allclose(r.positions[s], [0, 0.25, 0.5, 0.75, 1.0])
    single = boundary_interval_sites(r, 0.5, 0.5)
    assert len(single) == 1 and r.positions[single[0]] == 0.5


@given(st.floats(-1.4, 2.4), st.floats(0.0, 1.5))
def test_boundary_interval_matches_scan(a, width):
    r = build_region(0.25, 2.0, 0.5 + 0j)
    b = a + width
    got = boundary_interval_sites(r, a, b)
    x = r.positions.real
    scan = np.flatnonzero(r.boundary & (x >= a - 1e-9) & (x <= b + 1e-9))
    np.testing.assert_array_equal(got, scan)


def test_small_annulus_empty():
    r = build_region(1.0, 4.0, 2j)
    z = r.positions[site_of_point(r, 2 * SQRT3_2 * 1j)] + 0.1
    assert len(annulus_sites(r, z, 0.2, 0.4)) == 0


def test_ring_annulus_matches_scan():
    r = build_region(0.25, 2.0, 0.3 + 1.0j)
    z = r.positions[site_of_point(r, 0.3 + 1.2j)]
    a, b = r.mesh, 2 * r.mesh
    ring = annulus_sites(r, z, a, b)
    inner = box_sites(r, BoxSpec(z, a))
    d = r.positions - z
    m = np.maximum(np.abs(d.real), np.abs(d.imag))
    np.testing.assert_array_equal(ring, np.flatnonzero((m >= a) & (m < b)))
    assert len(ring) > 0 and not np.intersect1d(ring, inner).size


def test_annuli_partition_boxes(region):
    z = region.anchor
    outer = box_sites(region, BoxSpec(z, 1.0))
    inner = box_sites(region, BoxSpec(z, 0.5))
    ring = annulus_sites(region, z, 0.5, 1.0)
    assert sorted(np.concatenate([inner, ring]).tolist()) == sorted(outer.tolist())


def test_box_on_boundary_stays_in_half_plane():
    r = build_region(0.25, 2.0, 0.5 + 0j)
    s = box_sites(r, BoxSpec(0.5 + 0j, 0.6))
    assert len(s) > 0 and np.all(r.positions[s].imag >= 0)


def test_bad_regions():
    with pytest.raises(ValueError):
        build_region(1.0, 2.0)
    with pytest.raises(ValueError):
        build_region(0.0, 2.0)
    with pytest.raises(ValueError):
        build_region(1.0, 4.0, -10j)
