"""Monte Carlo harness: shared-stream estimates, delta-method ratios and the headline checks.

Every event of a plan is evaluated on every sample, and integer event
counts plus pairwise co-occurrence counts are kept; ratios of products of
probabilities get their intervals from the full covariance. Work is split
across processes by sample index and merged by integer addition, so the
output does not depend on the worker count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import theory
from .engine import CompiledPlan
from .events import (
    REQUIRED_MARKS,
    EventSpec,
    MarkedPoints,
    batch_evaluate,
    check_margin,
    evaluate,
)
from .lattice import Region, build_region, default_anchor, default_halfwidth
from .percolation import (
    EventPredicate,
    enumerate_bit_matrices,
    label_clusters,
    sample_config,
    _check_support,
)

Z95 = 1.959963984540054
WILSON_BELOW = 30
ENGINE_VERSION = "1"
SQRT3 = math.sqrt(3.0)

# headline geometries; w sits on a lattice site at every dyadic mesh
THM1_MARKS = MarkedPoints(u1=0.0, u2=1.0, w=complex(0.5, SQRT3 / 2))
THM2_MARKS = MarkedPoints(u1=0.0, s=1.0, s1=1.0, u2=3.0, w=complex(3.0, SQRT3 / 2))
DEFAULT_MESHES = (1 / 8, 1 / 16, 1 / 32)
# [1/64, 1 + 1/64] against [2 + 1/64, 3 + 1/64]: endpoints halfway between sites at mesh 1/32
CARDY_MARKS = MarkedPoints(u1=1 / 64, s1=1.0, u2=2.5 + 1 / 64, s2=0.5)


# --- plans and records ---------------------------------------------------------------


@dataclass(frozen=True)
class EstimatePlan:
    """Events sharing one sample stream on one region.

    ``halfwidth`` and ``anchor`` default to four times the largest distance
    between marked points and to the mean real part of the marks.
    """

    events: tuple
    n: int
    seed: int
    mesh: float
    halfwidth: Optional[float] = None
    anchor: Optional[complex] = None
    force_open: bool = False
    check_margin: bool = True

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.n < 1:
            raise ValueError("plan needs n >= 1")
        if not self.events:
            raise ValueError("plan needs at least one event")
        names = [e.name for e in self.events]
        if len(set(names)) != len(names):
            raise ValueError("event names in a plan must be unique")
        pts = [p for e in self.events for p in e.marks.points()]
        if self.halfwidth is None:
            # a single marked point has no spread; keep a few lattice spacings around it
            object.__setattr__(self, "halfwidth", max(default_halfwidth(pts), 8 * self.mesh))
        if self.anchor is None:
            object.__setattr__(self, "anchor", default_anchor(pts))
        object.__setattr__(self, "anchor", complex(self.anchor))

    def region(self) -> Region:
        return build_region(self.mesh, self.halfwidth, self.anchor)

    def with_halfwidth(self, halfwidth: float) -> "EstimatePlan":
        return replace(self, halfwidth=halfwidth)

    def with_n(self, n: int) -> "EstimatePlan":
        return replace(self, n=n)

    def index(self, name: str) -> int:
        for k, e in enumerate(self.events):
            if e.name == name:
                return k
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "events": [e.to_json() for e in self.events],
            "n": self.n,
            "seed": self.seed,
            "mesh": self.mesh,
            "halfwidth": self.halfwidth,
            "anchor": [self.anchor.real, self.anchor.imag],
            "force_open": self.force_open,
            "check_margin": self.check_margin,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EstimatePlan":
        allowed = {"events", "n", "seed", "mesh", "halfwidth", "anchor", "force_open", "check_margin"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown plan fields: {sorted(unknown)}")
        anchor = d.get("anchor")
        return cls(
            events=tuple(EventSpec.from_json(e) for e in d["events"]),
            n=int(d["n"]),
            seed=int(d["seed"]),
            mesh=float(d["mesh"]),
            halfwidth=d.get("halfwidth"),
            anchor=complex(anchor[0], anchor[1]) if anchor is not None else None,
            force_open=bool(d.get("force_open", False)),
            check_margin=bool(d.get("check_margin", True)),
        )

    def content_hash(self) -> str:
        payload = json.dumps({"plan": self.to_json(), "engine": ENGINE_VERSION}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EstimateRecord:
    event: str
    mean: float
    n: int
    count: int
    ci95: float
    lo: float
    hi: float
    ci_method: str
    mesh: float
    seed: int
    halfwidth: float

    def row(self) -> dict:
        return {
            "event": self.event,
            "mean": self.mean,
            "n": self.n,
            "count": self.count,
            "ci95": self.ci95,
            "lo": self.lo,
            "hi": self.hi,
            "ci_method": self.ci_method,
            "mesh": self.mesh,
            "seed": self.seed,
            "halfwidth": self.halfwidth,
        }


def binomial_ci(count: int, n: int) -> tuple[float, float, float, str]:
    """``(half-width, lo, hi, method)``: normal interval, Wilson when either tail count is below 30."""
    p = count / n
    if min(count, n - count) >= WILSON_BELOW:
        h = Z95 * math.sqrt(p * (1 - p) / n)
        return h, p - h, p + h, "normal"
    z2 = Z95 * Z95
    center = (p + z2 / (2 * n)) / (1 + z2 / n)
    h = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    return h, max(0.0, center - h), min(1.0, center + h), "wilson"


@dataclass
class EstimateResult:
    """Counts from one pass over a plan's samples."""

    plan: EstimatePlan
    counts: np.ndarray
    co: np.ndarray  # co[k, l] = samples where events k and l both occur

    @property
    def n(self) -> int:
        return self.plan.n

    @property
    def names(self) -> list:
        return [e.name for e in self.plan.events]

    @property
    def records(self) -> list:
        out = []
        for e, c in zip(self.plan.events, self.counts):
            if self.plan.force_open:
                # no randomness left: every sample gives the same outcome
                h, lo, hi, m = 0.0, c / self.n, c / self.n, "deterministic"
            else:
                h, lo, hi, m = binomial_ci(int(c), self.n)
            out.append(EstimateRecord(e.name, c / self.n, self.n, int(c), h, lo, hi, m,
                                      self.plan.mesh, self.plan.seed, self.plan.halfwidth))
        return out

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.plan.events)

    def __getitem__(self, name: str) -> EstimateRecord:
        return self.records[self.plan.index(name)]

    def mean(self, name: str) -> float:
        return self.counts[self.plan.index(name)] / self.n

    def joint(self, a: str, b: str) -> int:
        return int(self.co[self.plan.index(a), self.plan.index(b)])

    def covariance(self) -> np.ndarray:
        """Covariance matrix of the estimated means."""
        p = self.counts / self.n
        return (self.co / self.n - np.outer(p, p)) / self.n

    def to_json(self) -> dict:
        return {"plan": self.plan.to_json(), "counts": self.counts.tolist(), "co": self.co.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "EstimateResult":
        return cls(EstimatePlan.from_json(d["plan"]), np.array(d["counts"], dtype=np.int64),
                   np.array(d["co"], dtype=np.int64))


# --- running ---------------------------------------------------------------------------

_WORKER_CACHE: dict = {}


def _compiled(plan: EstimatePlan) -> CompiledPlan:
    key = plan.content_hash()
    if key not in _WORKER_CACHE:
        _WORKER_CACHE.clear()
        _WORKER_CACHE[key] = CompiledPlan(plan.region(), list(plan.events), plan.seed, plan.force_open)
    return _WORKER_CACHE[key]


def _run_chunk(plan_json: dict, start: int, stop: int):
    plan = EstimatePlan.from_json(plan_json)
    return _compiled(plan).run(start, stop)


def _run_slow(plan: EstimatePlan, start: int, stop: int, radius_fn):
    region = plan.region()
    k = len(plan.events)
    counts = np.zeros(k, dtype=np.int64)
    co = np.zeros((k, k), dtype=np.int64)
    for idx in range(start, stop):
        cfg = sample_config(region, plan.seed, idx)
        if plan.force_open:
            cfg = replace(cfg, bits=np.ones(region.n_sites, dtype=bool))
        labels = label_clusters(cfg)
        hit = np.array([evaluate(labels, e, radius_fn) for e in plan.events], dtype=np.int64)
        counts += hit
        co += np.outer(hit, hit)
    return counts, co


def _chunks(n: int, parts: int) -> list:
    size = max(1, math.ceil(n / parts))
    return [(a, min(n, a + size)) for a in range(0, n, size)]


def validate_plan(plan: EstimatePlan, region: Optional[Region] = None) -> None:
    region = region or plan.region()
    if plan.check_margin:
        for e in plan.events:
            check_margin(region, e)


def run_estimates(plan: EstimatePlan, workers: int = 1, cache_dir=None, radius_fn=None) -> EstimateResult:
    """One pass over samples ``0 .. n-1``; results are cached on disk by plan hash when
    ``cache_dir`` is given. ``radius_fn`` is required for green-method events."""
    validate_plan(plan)
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"est-{plan.content_hash()}.json"
        if cache_file.exists():
            return EstimateResult.from_json(json.loads(cache_file.read_text()))

    slow = any(e.radius_method == "green" and e.uses_radius for e in plan.events)
    if slow:
        if radius_fn is None:
            raise ValueError("green-method events need a radius_fn")
        counts, co = _run_slow(plan, 0, plan.n, radius_fn)
    elif workers <= 1:
        counts, co = _compiled(plan).run(0, plan.n)
    else:
        pj = plan.to_json()
        parts = _chunks(plan.n, 4 * workers)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(_run_chunk, [pj] * len(parts), [a for a, _ in parts], [b for _, b in parts]))
        counts = sum(o[0] for o in outs)
        co = sum(o[1] for o in outs)
    result = EstimateResult(plan, np.asarray(counts, dtype=np.int64), np.asarray(co, dtype=np.int64))
    if cache_file is not None:
        atomic_write_text(cache_file, json.dumps(result.to_json()))
    return result


# --- ratios ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioRecord:
    composition: dict  # event name -> exponent
    value: float
    ci95: float
    estimable: bool = True
    note: str = ""

    @property
    def lo(self) -> float:
        return self.value - self.ci95

    @property
    def hi(self) -> float:
        return self.value + self.ci95


def ratio_with_ci(result: EstimateResult, composition: dict) -> RatioRecord:
    """``prod p_k^{e_k}`` with a first-order delta-method interval from the shared-stream covariance.

    ``Var(log R) = sum_kl e_k e_l Cov(p_k, p_l) / (p_k p_l)``.
    """
    names = list(composition)
    idx = [result.plan.index(nm) for nm in names]
    e = np.array([composition[nm] for nm in names], dtype=float)
    counts = result.counts[idx]
    if np.any(counts == 0):
        zero = [nm for nm, c in zip(names, counts) if c == 0]
        return RatioRecord(dict(composition), math.nan, math.nan, False, f"zero count: {zero}")
    p = counts / result.n
    cov = result.covariance()[np.ix_(idx, idx)]
    value = float(np.exp(np.sum(e * np.log(p))))
    g = e / p
    var_log = float(g @ cov @ g)
    return RatioRecord(dict(composition), value, Z95 * value * math.sqrt(max(var_log, 0.0)))


def conditional_ratio(result: EstimateResult, v_dot: str, v: str, w_dot: str, w: str) -> RatioRecord:
    """``P(V.|V) / P(W.|W)`` for point versions ``V. <= V`` and ``W. <= W`` (checked samplewise)."""
    notes = []
    for a, b in ((v_dot, v), (w_dot, w)):
        if result.joint(a, b) != result.counts[result.plan.index(a)]:
            notes.append(f"{a} not contained in {b}")
    if v_dot == w_dot and v == w:
        r = ratio_with_ci(result, {v_dot: 1, v: -1})
        return RatioRecord({v_dot: 1, v: -1}, 1.0 if r.estimable else math.nan, 0.0 if r.estimable else math.nan,
                           r.estimable, r.note)
    comp: dict = {}
    for nm, ex in ((v_dot, 1), (v, -1), (w_dot, -1), (w, 1)):
        comp[nm] = comp.get(nm, 0) + ex
    comp = {k: x for k, x in comp.items() if x != 0}
    if not comp:
        return RatioRecord({}, 1.0, 0.0)
    r = ratio_with_ci(result, comp)
    return replace(r, note="; ".join(notes + ([r.note] if r.note else [])))


# --- doubling test ------------------------------------------------------------------------


@dataclass(frozen=True)
class DoublingRow:
    event: str
    mean_l: float
    mean_2l: float
    shift: float
    tolerance: float
    flagged: bool


def doubling_flag(shift: float, ci1: float, ci2: float) -> bool:
    return abs(shift) > 2.0 * math.sqrt(ci1 * ci1 + ci2 * ci2)


def doubling_test(plan: EstimatePlan, workers: int = 1, cache_dir=None, base: Optional[EstimateResult] = None) -> list:
    """Rerun at twice the window with the same seed (same bits where the windows overlap)."""
    r1 = base if base is not None else run_estimates(plan, workers, cache_dir)
    r2 = run_estimates(plan.with_halfwidth(2 * plan.halfwidth), workers, cache_dir)
    out = []
    for a, b in zip(r1.records, r2.records):
        shift = b.mean - a.mean
        tol = 2.0 * math.sqrt(a.ci95**2 + b.ci95**2)
        out.append(DoublingRow(a.event, a.mean, b.mean, shift, tol, doubling_flag(shift, a.ci95, b.ci95)))
    return out


# --- headline experiments -------------------------------------------------------------------


def thm1_events(marks: MarkedPoints) -> tuple:
    return tuple(EventSpec(k, marks) for k in ("TwoPointBB", "TwoPointBI", "TwoPointBI2", "ThreePoint"))


THM1_COMPOSITION = {"ThreePoint": 2, "TwoPointBB": -1, "TwoPointBI": -1, "TwoPointBI2": -1}


def thm1_ratio(marks: MarkedPoints = THM1_MARKS, meshes: Sequence[float] = DEFAULT_MESHES, n: int = 10**6,
               seed: int = 2024, workers: int = 1, cache_dir=None, doubling: bool = True,
               force_open: bool = False, halfwidth: Optional[float] = None) -> list:
    """Three-point ratio per mesh next to ``K_F``; optional ratio at twice the window."""
    rows = []
    for mesh in meshes:
        plan = EstimatePlan(thm1_events(marks), n, seed, mesh, halfwidth=halfwidth, force_open=force_open)
        res = run_estimates(plan, workers, cache_dir)
        r = ratio_with_ci(res, THM1_COMPOSITION)
        row = {"mesh": mesh, "n": n, "halfwidth": plan.halfwidth, "ratio": r.value, "ci95": r.ci95,
               "K_F": theory.k_f(), "estimable": r.estimable}
        for rec in res.records:
            row[f"p_{rec.event}"] = rec.mean
        if doubling:
            dt = doubling_test(plan, workers, cache_dir, base=res)
            r2 = ratio_with_ci(run_estimates(plan.with_halfwidth(2 * plan.halfwidth), workers, cache_dir),
                               THM1_COMPOSITION)
            row.update({"ratio_2L": r2.value, "ci95_2L": r2.ci95,
                        "doubling_flagged": [d.event for d in dt if d.flagged]})
        rows.append(row)
    return rows


def thm2_events(marks: MarkedPoints) -> tuple:
    if marks.s1 != marks.s:
        marks = replace(marks, s1=marks.s)
    return (
        EventSpec("E_interval_two_targets", marks),
        EventSpec("E_interval_target", marks),
        EventSpec("E_pt_II", marks),
    )


THM2_COMPOSITION = {"E_interval_two_targets": 1, "E_interval_target": -1, "E_pt_II": -1}


def thm2_ratio(marks: MarkedPoints = THM2_MARKS, meshes: Sequence[float] = DEFAULT_MESHES, n: int = 10**6,
               seed: int = 2025, workers: int = 1, cache_dir=None, doubling: bool = True,
               force_open: bool = False, halfwidth: Optional[float] = None) -> list:
    """Interval ratio per mesh next to ``psi``.

    ``P(u2 in C(I))`` is the point-to-interval event with ``s1 = s``.
    """
    psi = theory.psi_factor(marks.u1, marks.s, marks.u2, marks.w)
    rows = []
    for mesh in meshes:
        plan = EstimatePlan(thm2_events(marks), n, seed, mesh, halfwidth=halfwidth, force_open=force_open)
        res = run_estimates(plan, workers, cache_dir)
        r = ratio_with_ci(res, THM2_COMPOSITION)
        row = {"mesh": mesh, "n": n, "halfwidth": plan.halfwidth, "ratio": r.value, "ci95": r.ci95,
               "psi": psi, "x": theory.strip_map(marks.u1, marks.s, marks.u2, marks.w).x,
               "estimable": r.estimable}
        for rec in res.records:
            row[f"p_{rec.event}"] = rec.mean
        if doubling:
            dt = doubling_test(plan, workers, cache_dir, base=res)
            r2 = ratio_with_ci(run_estimates(plan.with_halfwidth(2 * plan.halfwidth), workers, cache_dir),
                               THM2_COMPOSITION)
            row.update({"ratio_2L": r2.value, "ci95_2L": r2.ci95,
                        "doubling_flagged": [d.event for d in dt if d.flagged]})
        rows.append(row)
    return rows


def cardy_check(u1: float = CARDY_MARKS.u1, s1: float = CARDY_MARKS.s1, u2: float = CARDY_MARKS.u2,
                s2: float = CARDY_MARKS.s2, mesh: float = 1 / 32, n: int = 10**6, seed: int = 7,
                workers: int = 1, cache_dir=None, halfwidth: Optional[float] = None,
                doubling: bool = False) -> dict:
    """Interval-to-interval crossing frequency against Cardy's formula."""
    marks = MarkedPoints(u1=u1, s1=s1, u2=u2, s2=s2)
    plan = EstimatePlan((EventSpec("E_II", marks),), n, seed, mesh, halfwidth=halfwidth)
    res = run_estimates(plan, workers, cache_dir)
    rec = res.records[0]
    pred = theory.cardy_crossing(u1, u1 + s1, u2 - s2, u2 + s2)
    row = {"mesh": mesh, "n": n, "halfwidth": plan.halfwidth, "empirical": rec.mean, "ci95": rec.ci95,
           "cardy": pred, "delta": rec.mean - pred, "within_ci": abs(rec.mean - pred) <= rec.ci95,
           "plan": plan}
    if doubling:
        d = doubling_test(plan, workers, cache_dir, base=res)[0]
        row.update({"empirical_2L": d.mean_2l, "shift_2L": d.shift, "doubling_flagged": [d.event] if d.flagged else []})
    return row


def lemma22_check(u1: float, s: float, w: complex, s3_list: Sequence[float], mesh: float, n: int,
                  seed: int = 11, workers: int = 1, cache_dir=None) -> list:
    """``s3^{-5/48} P(rho(w, C([u1, u1+s])) < s3)`` bracket pair against the prediction."""
    events = []
    for s3 in s3_list:
        m = MarkedPoints(u1=u1, s1=s, w=w, s3=s3)
        for method in ("bracket-lower", "bracket-upper"):
            events.append(EventSpec("E_IR", m, method, name=f"E_IR[{method}]@{s3}"))
    res = run_estimates(EstimatePlan(tuple(events), n, seed, mesh), workers, cache_dir)
    rows = []
    for s3 in s3_list:
        lo = res[f"E_IR[bracket-lower]@{s3}"]
        up = res[f"E_IR[bracket-upper]@{s3}"]
        scale = s3 ** (-5.0 / 48.0)
        rows.append({"s3": s3, "mesh": mesh, "n": n,
                     "lower": lo.mean * scale, "lower_ci95": lo.ci95 * scale,
                     "upper": up.mean * scale, "upper_ci95": up.ci95 * scale,
                     "prediction": theory.lemma22_prediction(u1, s, w, s3) * scale})
    return rows


def bi_check(u1: float, s: float, u2: float, s2: float, s3: float, mesh: float, n: int, w: complex,
             seed: int = 13, workers: int = 1, cache_dir=None) -> dict:
    """Conditional probability of the combined event given the interval crossing, against its
    prediction, with the crossing frequency against Cardy's formula on the same stream."""
    m = MarkedPoints(u1=u1, s1=s, u2=u2, s2=s2, w=w, s3=s3)
    events = (
        EventSpec("E_II", m),
        EventSpec("E_combined", m, "bracket-lower"),
        EventSpec("E_combined", m, "bracket-upper"),
    )
    res = run_estimates(EstimatePlan(events, n, seed, mesh), workers, cache_dir)
    lo = ratio_with_ci(res, {"E_combined[bracket-lower]": 1, "E_II": -1})
    up = ratio_with_ci(res, {"E_combined[bracket-upper]": 1, "E_II": -1})
    scale = s3 ** (-5.0 / 48.0)
    return {
        "mesh": mesh, "n": n, "s2": s2, "s3": s3,
        "lower": lo.value * scale, "lower_ci95": lo.ci95 * scale,
        "upper": up.value * scale, "upper_ci95": up.ci95 * scale,
        "prediction": theory.bi_prediction(u1, s, u2, w, s3) * scale,
        "cardy": theory.cardy_crossing(u1, u1 + s, u2 - s2, u2 + s2),
        "p_E_II": res["E_II"].mean, "p_E_II_ci95": res["E_II"].ci95,
    }


# comparable pairs around u1 (scale s1), written as (V, V., W, W.)
COUPLING_PAIRS = {
    "A": ("E_pt_II", "TwoPointBB", "E_pt_combined_partial", "E_pt_combined_full"),
    "B": ("E_pt_II", "TwoPointBB", "E_IR", "E_pt_R1"),
    "C": ("E_IR", "E_pt_R1", "E_pt_combined_partial", "E_pt_combined_full"),
}
COUPLING_MARKS = MarkedPoints(u1=0.0, u2=2.0, w=complex(1.0, SQRT3), s3=0.4)


def coupling_ratio(pair: tuple, s_list: Sequence[float] = (0.4, 0.2, 0.1), mesh: float = 1 / 32,
                   n: int = 10**6, marks: MarkedPoints = COUPLING_MARKS, seed: int = 31, workers: int = 1,
                   cache_dir=None, method: str = "bracket-upper") -> list:
    """``P(V.|V) / P(W.|W)`` for each ``s1`` in ``s_list``, all on one sample stream."""
    v, v_dot, w, w_dot = pair
    events, names = [], {}
    for s in s_list:
        m = replace(marks, s1=s)
        for kind in (v, v_dot, w, w_dot):
            spec = EventSpec(kind, m, method)
            name = f"{spec.name}@s1={s}" if "s1" in REQUIRED_MARKS[kind] else spec.name
            spec = replace(spec, name=name)
            names[(kind, s)] = name
            if name not in [e.name for e in events]:
                events.append(spec)
    res = run_estimates(EstimatePlan(tuple(events), n, seed, mesh), workers, cache_dir)
    rows = []
    for s in s_list:
        r = conditional_ratio(res, names[(v_dot, s)], names[(v, s)], names[(w_dot, s)], names[(w, s)])
        rows.append({"s": s, "mesh": mesh, "n": n, "ratio": r.value, "ci95": r.ci95,
                     "distance": abs(r.value - 1.0), "estimable": r.estimable, "note": r.note})
    return rows


def coupling_trend_ok(rows: list) -> bool:
    """``|ratio - 1|`` smaller at the last ``s`` than the first, and no step up beyond the step's
    combined interval."""
    d = [r["distance"] for r in rows]
    c = [r["ci95"] for r in rows]
    if not d[-1] < d[0]:
        return False
    return all(d[k + 1] <= d[k] + math.hypot(c[k], c[k + 1]) for k in range(len(d) - 1))


# --- exact checks --------------------------------------------------------------------------------


def exact_event_probabilities(region: Region, specs: Sequence[EventSpec], support) -> np.ndarray:
    support = _check_support(support)
    total = np.zeros(len(specs))
    for m in enumerate_bit_matrices(region, support):
        for k, s in enumerate(specs):
            total[k] += batch_evaluate(region, s, m).sum()
    return total / 2.0 ** len(support)


@dataclass(frozen=True)
class FKGReport:
    holds: bool
    p_b_e_nu: float
    p_b: float
    p_e_nu: float


def fkg_check(region: Region, B: EventPredicate, E: EventPredicate, A, nu_A) -> FKGReport:
    """Exact check of ``P(B and E and nu_A) >= P(B) P(E and nu_A)``.

    ``B`` must be supported off ``A``; ``nu_A`` assigns a bit to each site of ``A``.
    """
    A = np.asarray(A, dtype=np.int64)
    nu_A = np.asarray(nu_A, dtype=bool)
    if len(A) != len(nu_A):
        raise ValueError("nu_A must give one bit per site of A")
    if np.isin(B.support, A).any():
        raise ValueError("B must be supported off A")
    support = np.union1d(np.union1d(B.support, E.support), A).astype(np.int64)
    if len(support) > 20:
        raise ValueError("combined support above 2^20 configurations")
    nb = ne = nbe = 0
    for m in enumerate_bit_matrices(region, support):
        b = B.evaluate_many(region, m)
        e = E.evaluate_many(region, m) & (m[:, A] == nu_A[None, :]).all(axis=1)
        nb += int(b.sum())
        ne += int(e.sum())
        nbe += int((b & e).sum())
    total = 2.0 ** len(support)
    pb, pe, pbe = nb / total, ne / total, nbe / total
    # integer form of the inequality avoids rounding
    return FKGReport(nbe * (1 << len(support)) >= nb * ne, pbe, pb, pe)


# --- output -----------------------------------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows: list, columns: Optional[list] = None) -> str:
    if not rows:
        return ""
    columns = columns or list(rows[0])
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: _fmt(r.get(k)) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return v


def manifest(plan: EstimatePlan, extra: Optional[dict] = None) -> dict:
    region = plan.region()
    out = {
        "schema": 1,
        "content_hash": plan.content_hash(),
        "plan": plan.to_json(),
        "embedding": "eta*(i + j/2) + i*eta*j*sqrt(3)/2, j >= 0",
        "region": region.describe(),
        "n_sites": region.n_sites,
    }
    if extra:
        out.update(extra)
    return out


def write_run(out_dir, result: EstimateResult, extra: Optional[dict] = None) -> tuple:
    """``estimates.csv`` and ``manifest.json`` for one run; every CSV row carries the manifest hash."""
    out_dir = Path(out_dir)
    man = manifest(result.plan, extra)
    rows = [dict(r.row(), manifest=man["content_hash"]) for r in result.records]
    csv_path = out_dir / "estimates.csv"
    man_path = out_dir / "manifest.json"
    atomic_write_text(csv_path, rows_to_csv(rows))
    atomic_write_text(man_path, json.dumps(man, indent=2, sort_keys=True) + "\n")
    return csv_path, man_path
