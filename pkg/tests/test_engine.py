import math

import numpy as np
import pytest

from perclab.engine import CompiledPlan, near_sites
from perclab.events import KINDS, REQUIRED_MARKS, EventSpec, MarkedPoints, evaluate
from perclab.lattice import build_region
from perclab.percolation import label_clusters, sample_config

MARKS = MarkedPoints(u1=0.0, u2=1.0, w=complex(0.5, math.sqrt(3) / 2), s=0.5, s1=0.25, s2=0.25, s3=0.2)


def _specs():
    out = []
    for k in KINDS:
        s = EventSpec(k, MARKS)
        out.append(s)
        if s.uses_radius:
            out.append(s.with_method("bracket-lower"))
    return out


@pytest.mark.parametrize("mesh,hw", [(1 / 8, 3.0), (1 / 4, 1.5)])
def test_kernel_matches_labels_samplewise(mesh, hw):
    r = build_region(mesh, hw, 0.5)
    specs = _specs()
    plan = CompiledPlan(r, specs, seed=7)
    counts, co, rec = plan.run(0, 300, record=True)
    for n in range(300):
        lab = label_clusters(sample_config(r, 7, n))
        want = [evaluate(lab, s) for s in specs]
        assert rec[n].tolist() == want, n
    np.testing.assert_array_equal(counts, rec.sum(axis=0))
    np.testing.assert_array_equal(co, rec.T.astype(np.int64) @ rec.astype(np.int64))


def test_chunks_add_up():
    r = build_region(1 / 8, 3.0, 0.5)
    plan = CompiledPlan(r, _specs(), seed=3)
    c_all, co_all = plan.run(0, 200)
    c1, co1 = plan.run(0, 77)
    c2, co2 = plan.run(77, 200)
    np.testing.assert_array_equal(c_all, c1 + c2)
    np.testing.assert_array_equal(co_all, co1 + co2)


def test_force_open_everything_true():
    r = build_region(1 / 8, 3.0, 0.5)
    plan = CompiledPlan(r, _specs(), seed=3, force_open=True)
    c, _ = plan.run(0, 10)
    assert np.all(c == 10)


def test_rejects_green_and_bad_ranges():
    r = build_region(1 / 8, 3.0, 0.5)
    with pytest.raises(ValueError):
        CompiledPlan(r, [EventSpec("E_IR", MARKS, "green")], seed=1)
    plan = CompiledPlan(r, [EventSpec("TwoPointBB", MARKS)], seed=1)
    with pytest.raises(ValueError):
        plan.run(5, 2)


def test_near_sites_is_disk_plus_host():
    r = build_region(1 / 8, 3.0, 0.5)
    w = complex(0.51, 0.3)
    s = near_sites(r, w, 0.2)
    d = np.abs(r.positions - w)
    assert set(s.tolist()) >= set(np.flatnonzero(d < 0.2).tolist())
    assert len(set(s.tolist()) - set(np.flatnonzero(d < 0.2).tolist())) <= 1
