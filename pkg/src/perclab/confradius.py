"""Conformal radius of ``w`` in the complement of a cluster.

Two estimators:

* :func:`koebe_bracket` turns the distance ``d`` from ``w`` to the set into
  the rigorous interval ``[d, 4d]``;
* :func:`green_radius` counts returns of simple random walks killed on the
  set, and converts the mean count into a radius through a table measured
  on lattice disks (:func:`calibrate_green`), where the radius is known.

The second works because the expected number of visits to the start site
behaves like ``alpha * log(rho / eta) + beta`` in any simply connected
domain, with lattice constants that the disk calibration absorbs.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit
from scipy.optimize import isotonic_regression

from .lattice import SQRT3_2, Region, build_region, site_of_point
from .percolation import BitConfig, ClusterLabels
from .rng import STREAM_WALKS, philox4x64, split_seed

MIN_WALK_BUDGET = 10_000
CAL_RADII = (2, 4, 8, 16, 32, 64)
CAL_TOP = 2**12


@dataclass(frozen=True)
class RadiusEstimate:
    lower: float
    upper: float
    point: Optional[float] = None
    method: str = "koebe"

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper:
            raise ValueError("need 0 <= lower <= upper")
        if self.point is not None and not self.lower <= self.point <= self.upper:
            raise ValueError("point estimate outside its bracket")


def koebe_bracket(dist: float) -> RadiusEstimate:
    """``[d, 4d]``; ``d = 0`` (``w`` inside the set) gives ``[0, 0]``."""
    if not dist >= 0:
        raise ValueError("distance must be non-negative")
    return RadiusEstimate(float(dist), 4.0 * float(dist))


# --- random walks ------------------------------------------------------------------


@njit(cache=True)
def _walks(nb, start, kill, n_walks, walk_offset, k0, k1, max_steps):
    """Total visits to ``start`` (time 0 included) and the number of killed walks."""
    words = np.empty(4, dtype=np.uint64)
    visits = 0
    killed = 0
    for w in range(n_walks):
        v = start
        visits += 1
        blk = 0
        wi = 4
        bits = np.uint64(0)
        left = 0
        steps = 0
        alive = True
        while steps < max_steps:
            # draw a direction in 0..5 by rejection on 3-bit chunks
            while True:
                if left == 0:
                    if wi == 4:
                        philox4x64(np.uint64(walk_offset + w), np.uint64(blk), np.uint64(STREAM_WALKS), np.uint64(0), k0, k1, words)
                        blk += 1
                        wi = 0
                    bits = words[wi]
                    wi += 1
                    left = 21
                d = np.int64(bits & np.uint64(7))
                bits >>= np.uint64(3)
                left -= 1
                if d < 6:
                    break
            steps += 1
            u = nb[v, d]
            if u < 0 or kill[u]:
                alive = False
                break
            v = u
            if v == start:
                visits += 1
        if not alive:
            killed += 1
    return visits, killed


def mean_returns(region: Region, start: int, kill: np.ndarray, n_walks: int, seed: int = 0,
                 max_steps: int = 1 << 26) -> tuple[float, float, int]:
    """Mean visit count at ``start`` and its standard error, plus the killed-walk count.

    Walks also die on leaving the window or the half-plane.
    """
    k0, k1 = split_seed(seed)
    kill = np.ascontiguousarray(kill, dtype=np.bool_)
    # two halves give a cheap variance estimate without storing per-walk counts
    h = n_walks // 2
    v1, e1 = _walks(region.neighbors, start, kill, h, 0, k0, k1, max_steps)
    v2, e2 = _walks(region.neighbors, start, kill, n_walks - h, h, k0, k1, max_steps)
    mean = (v1 + v2) / n_walks
    # returns are geometric: var = g (g - 1)
    se = math.sqrt(max(mean * (mean - 1.0), 0.0) / n_walks)
    return mean, se, e1 + e2


# --- calibration -------------------------------------------------------------------


def disk_setup(radius: float) -> tuple[Region, int, np.ndarray]:
    """Mesh-1 region around a lattice site far from the axis, with the disk exterior as kill set."""
    j = 2 * math.ceil((radius + 4) / (2 * SQRT3_2))
    center = complex(0.0, j * SQRT3_2)
    region = build_region(1.0, radius + 3.0, center)
    start = site_of_point(region, center)
    kill = np.abs(region.positions - center) >= radius
    return region, start, kill


@dataclass(frozen=True)
class GreenCalibration:
    """Strictly increasing table ``g -> r / eta``; interpolation is linear in ``log r``."""

    g: np.ndarray
    r_over_mesh: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        r = np.asarray(self.r_over_mesh, dtype=float)
        if g.shape != r.shape or len(g) < 2:
            raise ValueError("calibration needs matching arrays of length >= 2")
        if np.any(np.diff(g) <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("calibration table must be strictly increasing")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "r_over_mesh", r)

    def radius_over_mesh(self, g: float) -> float:
        """Invert; outside the table the end segments are extended linearly in ``log r``."""
        lr = np.log(self.r_over_mesh)
        if g <= self.g[0]:
            i = 0
        elif g >= self.g[-1]:
            i = len(self.g) - 2
        else:
            return float(np.exp(np.interp(g, self.g, lr)))
        slope = (lr[i + 1] - lr[i]) / (self.g[i + 1] - self.g[i])
        return float(np.exp(lr[i] + slope * (g - self.g[i])))

    def g_at(self, r_over_mesh: float) -> float:
        return float(np.interp(np.log(r_over_mesh), np.log(self.r_over_mesh), self.g))

    def checksum(self) -> str:
        payload = json.dumps({"g": self.g.tolist(), "r_over_mesh": self.r_over_mesh.tolist()}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_json(self) -> dict:
        return {"g": self.g.tolist(), "r_over_mesh": self.r_over_mesh.tolist(), "checksum": self.checksum()}

    @classmethod
    def from_json(cls, d: dict) -> "GreenCalibration":
        unknown = set(d) - {"g", "r_over_mesh", "checksum"}
        if unknown:
            raise ValueError(f"unknown calibration fields: {sorted(unknown)}")
        cal = cls(np.array(d["g"]), np.array(d["r_over_mesh"]))
        if "checksum" in d and d["checksum"] != cal.checksum():
            raise ValueError("calibration checksum mismatch")
        return cal

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "GreenCalibration":
        return cls.from_json(json.loads(Path(path).read_text()))


def measure_disks(radii, walk_budget: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean return counts (and standard errors) in lattice disks of the given radii."""
    g, se = [], []
    for r in radii:
        region, start, kill = disk_setup(r)
        m, e, _ = mean_returns(region, start, kill, walk_budget, seed=seed)
        g.append(m)
        se.append(e)
    return np.array(g), np.array(se)


def calibrate_green(walk_budget: int = 200_000, seed: int = 1, radii=CAL_RADII, top: int = CAL_TOP) -> GreenCalibration:
    """Measure ``g`` on lattice disks of dyadic radii and extend to ``r / eta = top``.

    Beyond the largest measured radius the table follows the log law fitted
    to the three largest radii. Isotonic regression then makes ``g`` monotone.
    """
    radii = np.array(sorted(radii), dtype=float)
    g, se = measure_disks(radii, walk_budget, seed)
    k = min(3, len(radii))
    A = np.vstack([np.log(radii[-k:]), np.ones(k)]).T
    alpha, beta = np.linalg.lstsq(A, g[-k:], rcond=None)[0]
    ext = []
    r = radii[-1] * 2
    while r <= top:
        ext.append(r)
        r *= 2
    ext = np.array(ext)
    all_r = np.concatenate([radii, ext])
    all_g = np.concatenate([g, alpha * np.log(ext) + beta])
    weights = np.concatenate([1.0 / np.maximum(se, 1e-12) ** 2, np.full(len(ext), 1.0 / max(se[-1], 1e-12) ** 2)])
    smooth = isotonic_regression(all_g, weights=weights, increasing=True).x
    # ties from pooling are split by a negligible ramp to keep the table invertible
    smooth = smooth + 1e-9 * np.arange(len(smooth))
    return GreenCalibration(smooth, all_r)


def doubling_increments(cal: GreenCalibration) -> np.ndarray:
    """``g(2r) - g(r)`` along the table's dyadic radii; flattens out for a log law."""
    return np.diff(cal.g)


# --- estimator on configurations -------------------------------------------------------


def green_radius(config: Optional[BitConfig], labels: Optional[ClusterLabels], w: complex, blocking,
                 walk_budget: int, cal: GreenCalibration, seed: int = 0,
                 region: Optional[Region] = None, max_steps: int = 1 << 24) -> RadiusEstimate:
    """Point estimate of the conformal radius of ``w`` in ``H`` minus ``blocking``.

    The walk starts from the site whose hexagon holds ``w`` and dies on a
    blocking site, below the axis or outside the window. The point estimate
    is clipped into the Koebe bracket of the distance to that kill set.
    """
    if walk_budget < MIN_WALK_BUDGET:
        raise ValueError(f"walk_budget must be at least {MIN_WALK_BUDGET}")
    if region is None:
        region = config.region if config is not None else labels.region
    w = complex(w)
    blocking = np.asarray(blocking, dtype=np.int64)
    start = site_of_point(region, w)
    if np.isin(start, blocking):
        return RadiusEstimate(0.0, 0.0, 0.0, "green")
    d_block = float(np.abs(region.positions[blocking] - w).min()) if len(blocking) else math.inf
    d_axis = w.imag + region.mesh * SQRT3_2
    bracket = koebe_bracket(min(d_block, d_axis))
    kill = np.zeros(region.n_sites, dtype=np.bool_)
    kill[blocking] = True
    g, _, killed = mean_returns(region, start, kill, walk_budget, seed=seed, max_steps=max_steps)
    if killed == 0:
        return RadiusEstimate(bracket.lower, bracket.upper, None, "koebe")
    point = cal.radius_over_mesh(g) * region.mesh
    point = min(max(point, bracket.lower), bracket.upper)
    return RadiusEstimate(bracket.lower, bracket.upper, point, "green")


def cluster_radius_fn(cal: GreenCalibration, walk_budget: int = MIN_WALK_BUDGET, seed: int = 0):
    """``radius_fn`` for :func:`events.evaluate` with ``radius_method="green"``."""

    def fn(labels: ClusterLabels, w: complex, anchor) -> float:
        blocking = labels.cluster_of(anchor)
        est = green_radius(labels.config, labels, w, blocking, walk_budget, cal, seed=seed, region=labels.region)
        return est.point if est.point is not None else est.upper

    return fn
