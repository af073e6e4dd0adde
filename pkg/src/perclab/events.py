"""Connection and "comes close" events evaluated on labelled configurations.

Every event kind is a conjunction of two primitive atoms over a Region:

* ``connect(A, B)``: the open cluster ``C(A)`` contains a site of ``B``;
* ``near(A, w, r)``: the distance from ``w`` to ``C(A)`` is below ``r``.

Continuum points are wired in through the site whose hexagon contains them,
intervals on the real axis through the boundary sites they contain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .lattice import Region, boundary_interval_sites, site_of_point
from .percolation import BitConfig, ClusterLabels, EventPredicate, reach_matrix
from .circuits import Circuit, innermost_open_circuit, outermost_open_circuit  # noqa: F401

KINDS = (
    "TwoPointBB",
    "TwoPointBI",
    "TwoPointBI2",
    "ThreePoint",
    "E_II",
    "E_IR",
    "E_IR2",
    "E_combined",
    "E_pt_II",
    "E_pt_R1",
    "E_pt_R2",
    "E_pt_combined_partial",
    "E_pt_combined_full",
    "E_interval_two_targets",
    "E_interval_target",
    "SiteOpen",
)
RADIUS_METHODS = ("bracket-lower", "bracket-upper", "green")

# fields each kind reads
REQUIRED_MARKS = {
    "TwoPointBB": ("u1", "u2"),
    "TwoPointBI": ("u1", "w"),
    "TwoPointBI2": ("u2", "w"),
    "ThreePoint": ("u1", "u2", "w"),
    "E_II": ("u1", "u2", "s1", "s2"),
    "E_IR": ("u1", "w", "s1", "s3"),
    "E_IR2": ("u2", "w", "s2", "s3"),
    "E_combined": ("u1", "u2", "w", "s1", "s2", "s3"),
    "E_pt_II": ("u1", "u2", "s1"),
    "E_pt_R1": ("u1", "w", "s3"),
    "E_pt_R2": ("u2", "w", "s3"),
    "E_pt_combined_partial": ("u1", "u2", "w", "s1", "s3"),
    "E_pt_combined_full": ("u1", "u2", "w", "s3"),
    "E_interval_two_targets": ("u1", "u2", "w", "s"),
    "E_interval_target": ("u1", "w", "s"),
    "SiteOpen": ("u1",),
}


@dataclass(frozen=True)
class MarkedPoints:
    u1: Optional[float] = None
    u2: Optional[float] = None
    w: Optional[complex] = None
    s: Optional[float] = None
    s1: Optional[float] = None
    s2: Optional[float] = None
    s3: Optional[float] = None

    def __post_init__(self):
        if self.w is not None:
            object.__setattr__(self, "w", complex(self.w))
            if not self.w.imag > 0:
                raise ValueError("w must lie in the open upper half-plane")
        if self.u1 is not None and self.u2 is not None and self.u1 == self.u2:
            raise ValueError("u1 and u2 must differ")
        for name in ("s", "s1", "s2", "s3"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"scale {name} must be positive")

    def points(self) -> list:
        """Every continuum point the marks refer to (interval endpoints included)."""
        pts = []
        if self.u1 is not None:
            pts.append(complex(self.u1))
            for sc in (self.s, self.s1):
                if sc is not None:
                    pts.append(complex(self.u1 + sc))
        if self.u2 is not None:
            pts.append(complex(self.u2))
            if self.s2 is not None:
                pts += [complex(self.u2 - self.s2), complex(self.u2 + self.s2)]
        if self.w is not None:
            pts.append(self.w)
        return pts

    def max_scale(self) -> float:
        return max((v for v in (self.s1, self.s2, self.s3) if v is not None), default=0.0)

    def to_json(self) -> dict:
        out = {}
        for k in ("u1", "u2", "s", "s1", "s2", "s3"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        if self.w is not None:
            out["w"] = [self.w.real, self.w.imag]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "MarkedPoints":
        allowed = {"u1", "u2", "w", "s", "s1", "s2", "s3"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown mark fields: {sorted(unknown)}")
        kw = dict(d)
        if "w" in kw:
            w = kw["w"]
            kw["w"] = complex(w[0], w[1]) if isinstance(w, (list, tuple)) else complex(w)
        return cls(**kw)


@dataclass(frozen=True)
class EventSpec:
    kind: str
    marks: MarkedPoints
    radius_method: str = "bracket-upper"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.radius_method not in RADIUS_METHODS:
            raise ValueError(f"unknown radius method {self.radius_method!r}")
        missing = [f for f in REQUIRED_MARKS[self.kind] if getattr(self.marks, f) is None]
        if missing:
            raise ValueError(f"{self.kind} needs marks {missing}")
        if not self.name:
            object.__setattr__(self, "name", self.default_name())

    @property
    def uses_radius(self) -> bool:
        return any(a[0] == "near" for a in atoms_of(self))

    def default_name(self) -> str:
        if self.uses_radius:
            return f"{self.kind}[{self.radius_method}]"
        return self.kind

    def with_method(self, method: str) -> "EventSpec":
        return replace(self, radius_method=method, name="")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "marks": self.marks.to_json(),
            "radius_method": self.radius_method,
            "name": self.name,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EventSpec":
        unknown = set(d) - {"kind", "marks", "radius_method", "name"}
        if unknown:
            raise ValueError(f"unknown event fields: {sorted(unknown)}")
        return cls(
            kind=d["kind"],
            marks=MarkedPoints.from_json(d["marks"]),
            radius_method=d.get("radius_method", "bracket-upper"),
            name=d.get("name", ""),
        )


# anchors are ("pt", z) or ("iv", a, b) -- resolved against a Region later
def _pt(z):
    return ("pt", complex(z))


def _iv(a, b):
    return ("iv", float(a), float(b))


def atoms_of(spec: EventSpec) -> list:
    """The conjunction of atoms making up ``spec``.

    ``("connect", A, B)`` or ``("near", A, w, s3)``; ``near`` atoms carry the
    nominal radius, the method-dependent threshold is applied on evaluation.
    """
    m = spec.marks
    k = spec.kind
    I1 = _iv(m.u1, m.u1 + m.s1) if m.s1 is not None and m.u1 is not None else None
    J2 = _iv(m.u2 - m.s2, m.u2 + m.s2) if m.s2 is not None and m.u2 is not None else None
    Is = _iv(m.u1, m.u1 + m.s) if m.s is not None and m.u1 is not None else None
    P1 = _pt(m.u1) if m.u1 is not None else None
    P2 = _pt(m.u2) if m.u2 is not None else None
    Pw = _pt(m.w) if m.w is not None else None
    if k == "TwoPointBB":
        return [("connect", P1, P2)]
    if k == "TwoPointBI":
        return [("connect", P1, Pw)]
    if k == "TwoPointBI2":
        return [("connect", P2, Pw)]
    if k == "ThreePoint":
        return [("connect", P1, P2), ("connect", P1, Pw)]
    if k == "E_II":
        return [("connect", I1, J2)]
    if k == "E_IR":
        return [("near", I1, m.w, m.s3)]
    if k == "E_IR2":
        return [("near", J2, m.w, m.s3)]
    if k == "E_combined":
        return [("connect", I1, J2), ("near", I1, m.w, m.s3)]
    if k == "E_pt_II":
        return [("connect", P2, I1)]
    if k == "E_pt_R1":
        return [("near", P1, m.w, m.s3)]
    if k == "E_pt_R2":
        return [("near", P2, m.w, m.s3)]
    if k == "E_pt_combined_partial":
        return [("connect", P2, I1), ("near", I1, m.w, m.s3)]
    if k == "E_pt_combined_full":
        return [("connect", P1, P2), ("near", P1, m.w, m.s3)]
    if k == "E_interval_two_targets":
        return [("connect", Is, P2), ("connect", Is, Pw)]
    if k == "E_interval_target":
        return [("connect", Is, Pw)]
    if k == "SiteOpen":
        return [("connect", P1, P1)]
    raise AssertionError(k)


def anchor_sites(region: Region, anchor) -> np.ndarray:
    if anchor[0] == "pt":
        return np.array([site_of_point(region, anchor[1])], dtype=np.int64)
    a, b = anchor[1], anchor[2]
    for x in (a, b):
        if not region.in_window(complex(x)):
            raise ValueError(f"interval endpoint {x} outside the region window")
    return boundary_interval_sites(region, a, b)


def near_threshold(method: str, s3: float) -> float:
    """Distance threshold used by the bracket events for ``rho < s3``."""
    if method == "bracket-lower":
        return s3 / 4.0
    if method == "bracket-upper":
        return s3
    raise ValueError(f"{method} is not a bracket method")


def check_margin(region: Region, spec: EventSpec) -> None:
    """Marked points must sit inside the window with margin ``max(s1, s2, s3)``."""
    margin = spec.marks.max_scale()
    for p in spec.marks.points():
        d = p - region.anchor
        room = region.halfwidth - max(abs(d.real), abs(d.imag))
        if p.imag < 0 or room < margin:
            raise ValueError(f"{spec.name}: point {p} lacks margin {margin} inside the window")


# --- evaluation on labels ---------------------------------------------------------


def distance_to_cluster(labels: ClusterLabels, w: complex, anchor) -> float:
    """Distance from ``w`` to the nearest site of ``C(anchor)``; ``inf`` if that cluster is empty.

    Zero when the site whose hexagon holds ``w`` belongs to the cluster.
    """
    anchor = np.asarray(anchor, dtype=np.int64)
    if len(anchor) == 0:
        raise ValueError("anchor set must be nonempty")
    members = labels.cluster_of(anchor)
    if len(members) == 0:
        return math.inf
    region = labels.region
    ws = site_of_point(region, w)
    k = np.searchsorted(members, ws)
    if k < len(members) and members[k] == ws:
        return 0.0
    return float(np.abs(region.positions[members] - complex(w)).min())


def _eval_atom(labels: ClusterLabels, atom, method: str, radius_fn) -> bool:
    region = labels.region
    A = anchor_sites(region, atom[1])
    if atom[0] == "connect":
        B = anchor_sites(region, atom[2])
        la = labels.label[A]
        la = la[la >= 0]
        if len(la) == 0 or len(B) == 0:
            return False
        return bool(np.isin(labels.label[B], la).any())
    w, s3 = atom[2], atom[3]
    if len(A) == 0:
        return False
    if method == "green":
        if radius_fn is None:
            raise ValueError("green radius method needs a radius estimator")
        return radius_fn(labels, w, A) < s3
    return distance_to_cluster(labels, w, A) < near_threshold(method, s3)


def evaluate(labels: ClusterLabels, spec: EventSpec, radius_fn=None) -> bool:
    """Whether the event ``spec`` occurs in the labelled configuration.

    ``radius_fn(labels, w, anchor_sites) -> float`` supplies the conformal
    radius point estimate for ``radius_method="green"``.
    """
    return all(_eval_atom(labels, a, spec.radius_method, radius_fn) for a in atoms_of(spec))


# --- batch evaluation for the enumeration oracle ------------------------------------


def batch_evaluate(region: Region, spec: EventSpec, matrix: np.ndarray) -> np.ndarray:
    """Evaluate ``spec`` on every row of a configuration matrix (bracket methods only)."""
    out = np.ones(len(matrix), dtype=bool)
    cache = {}

    def reach(anchor):
        if anchor not in cache:
            cache[anchor] = reach_matrix(region, matrix, anchor_sites(region, anchor))
        return cache[anchor]

    for atom in atoms_of(spec):
        R = reach(atom[1])
        if atom[0] == "connect":
            B = anchor_sites(region, atom[2])
            out &= R[:, B].any(axis=1) if len(B) else False
        else:
            w, s3 = atom[2], atom[3]
            thr = near_threshold(spec.radius_method, s3)
            d = np.abs(region.positions - complex(w))
            dist = np.where(R, d[None, :], np.inf).min(axis=1)
            ws = site_of_point(region, w)
            dist = np.where(R[:, ws], 0.0, dist)
            out &= dist < thr
    return out


def event_predicate(region: Region, spec: EventSpec) -> EventPredicate:
    """The event as an :class:`EventPredicate` over the whole region (for enumeration)."""
    support = np.arange(region.n_sites, dtype=np.int64)

    def batch(m):
        return batch_evaluate(region, spec, m)

    def fn(cfg: BitConfig):
        return bool(batch(cfg.bits[None, :])[0])

    return EventPredicate(fn, support, batch, increasing=True, name=spec.name)
