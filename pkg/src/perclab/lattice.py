"""Triangular lattice of mesh ``eta`` in the closed upper half-plane.

Sites are indexed by integer pairs ``(i, j)`` with ``j >= 0`` and sit at

    eta * (i + j/2) + 1j * eta * j * sqrt(3)/2,

so row ``j = 0`` lies on the real axis. A :class:`Region` is the finite set
of sites inside a square window, numbered row by row (bottom row first,
increasing ``i`` inside a row); that numbering is the ``SiteId``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT3_2 = math.sqrt(3.0) / 2.0

# neighbour directions in counter-clockwise order starting east
DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
OUTSIDE = -1  # neighbour exists in the infinite lattice but not in the window
BELOW = -2  # neighbour would be below the real axis

_TOL = 1e-9


@dataclass(frozen=True)
class BoxSpec:
    """The box ``B_a(z)``: half-plane part of the open square of halfwidth ``a`` at ``z``."""

    center: complex
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("box halfwidth must be positive")


@dataclass(frozen=True, eq=False)
class Region:
    mesh: float
    halfwidth: float
    anchor: complex
    i: np.ndarray
    j: np.ndarray
    positions: np.ndarray
    neighbors: np.ndarray  # (n, 6) SiteIds, or OUTSIDE / BELOW
    boundary: np.ndarray
    row_start: np.ndarray  # first i of each row
    row_len: np.ndarray
    row_offset: np.ndarray
    j_min: int
    _adjacency: list = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.i)

    def __len__(self):
        return self.n_sites

    def site_id(self, i, j):
        """SiteId of lattice coordinate (i, j), or -1 where the site is not in the window.

        Accepts scalars or arrays.
        """
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        r = j - self.j_min
        ok = (r >= 0) & (r < len(self.row_len))
        rr = np.where(ok, r, 0)
        off = i - self.row_start[rr]
        ok &= (off >= 0) & (off < self.row_len[rr])
        out = np.where(ok, self.row_offset[rr] + off, -1)
        return int(out) if out.ndim == 0 else out

    def adjacency(self, site: int) -> list:
        row = self.neighbors[site]
        return [int(v) for v in row if v >= 0]

    def degree(self) -> np.ndarray:
        return (self.neighbors >= 0).sum(axis=1)

    def in_window(self, p: complex) -> bool:
        d = p - self.anchor
        lim = self.halfwidth * (1 + _TOL)
        return abs(d.real) <= lim and abs(d.imag) <= lim and p.imag >= -_TOL * self.mesh

    def describe(self) -> dict:
        return {
            "mesh": self.mesh,
            "halfwidth": self.halfwidth,
            "anchor": [self.anchor.real, self.anchor.imag],
        }


def lattice_position(i, j, mesh):
    i = np.asarray(i, dtype=float)
    j = np.asarray(j, dtype=float)
    return mesh * (i + 0.5 * j) + 1j * mesh * SQRT3_2 * j


def build_region(mesh: float, halfwidth: float, anchor: complex = 0j) -> Region:
    """All lattice sites in the square window of halfwidth ``halfwidth`` around ``anchor``."""
    mesh = float(mesh)
    halfwidth = float(halfwidth)
    anchor = complex(anchor)
    if not mesh > 0:
        raise ValueError("mesh must be positive")
    if not halfwidth >= 4 * mesh:
        raise ValueError("window halfwidth must be at least 4 mesh units")
    if anchor.imag + halfwidth < 0:
        raise ValueError("window does not meet the half-plane")

    h = mesh * SQRT3_2
    j_lo = max(0, math.ceil((anchor.imag - halfwidth) / h - _TOL))
    j_hi = math.floor((anchor.imag + halfwidth) / h + _TOL)
    x_lo = (anchor.real - halfwidth) / mesh
    x_hi = (anchor.real + halfwidth) / mesh
    starts, lens = [], []
    for j in range(j_lo, j_hi + 1):
        a = math.ceil(x_lo - 0.5 * j - _TOL)
        b = math.floor(x_hi - 0.5 * j + _TOL)
        starts.append(a)
        lens.append(max(0, b - a + 1))
    row_start = np.array(starts, dtype=np.int64)
    row_len = np.array(lens, dtype=np.int64)
    if row_len.sum() == 0:
        raise ValueError("window contains no lattice site")
    row_offset = np.concatenate([[0], np.cumsum(row_len)[:-1]]).astype(np.int64)

    jj = np.repeat(np.arange(j_lo, j_hi + 1, dtype=np.int64), row_len)
    ii = np.concatenate([np.arange(s, s + n, dtype=np.int64) for s, n in zip(starts, lens)])
    pos = lattice_position(ii, jj, mesh)

    region = Region(
        mesh=mesh,
        halfwidth=halfwidth,
        anchor=anchor,
        i=ii,
        j=jj,
        positions=pos,
        neighbors=np.empty((0, 6), dtype=np.int64),
        boundary=(jj == 0),
        row_start=row_start,
        row_len=row_len,
        row_offset=row_offset,
        j_min=j_lo,
    )
    nb = np.empty((len(ii), 6), dtype=np.int64)
    for d, (di, dj) in enumerate(DIRECTIONS):
        ids = region.site_id(ii + di, jj + dj)
        nb[:, d] = np.where(jj + dj < 0, BELOW, np.where(ids < 0, OUTSIDE, ids))
    object.__setattr__(region, "neighbors", nb)
    return region


def site_of_point(region: Region, p: complex) -> int:
    """Site whose hexagon contains ``p``; ties go to the smallest SiteId."""
    p = complex(p)
    if not region.in_window(p):
        raise ValueError(f"point {p} lies outside the region window")
    h = region.mesh * SQRT3_2
    jf = p.imag / h
    if_ = p.real / region.mesh - 0.5 * jf
    j0, i0 = math.floor(jf), math.floor(if_)
    ci, cj = np.meshgrid(np.arange(i0 - 2, i0 + 3), np.arange(max(j0 - 2, 0), j0 + 3))
    ids = region.site_id(ci.ravel(), cj.ravel())
    ids = ids[ids >= 0]
    if len(ids) == 0:
        raise ValueError(f"no site near {p}")
    d = np.abs(region.positions[ids] - p)
    best = d.min()
    return int(ids[d <= best + 1e-12 * region.mesh].min())


def boundary_interval_sites(region: Region, a: float, b: float) -> np.ndarray:
    """Boundary sites with real part in the closed interval ``[a, b]``."""
    if a > b:
        raise ValueError("interval endpoints out of order")
    if region.j_min > 0:
        return np.empty(0, dtype=np.int64)
    lo = math.ceil(a / region.mesh - _TOL)
    hi = math.floor(b / region.mesh + _TOL)
    ids = region.site_id(np.arange(lo, hi + 1), np.zeros(max(0, hi - lo + 1), dtype=np.int64))
    return np.sort(ids[ids >= 0])


def box_sites(region: Region, box: BoxSpec) -> np.ndarray:
    """Sites strictly inside the square (open box, so annuli partition boxes exactly)."""
    d = region.positions - box.center
    inside = np.maximum(np.abs(d.real), np.abs(d.imag)) < box.halfwidth
    return np.flatnonzero(inside).astype(np.int64)


def annulus_sites(region: Region, z: complex, a: float, b: float) -> np.ndarray:
    """Sites of ``A(z; a, b) = B_b(z) minus B_a(z)``: closed inner edge, open outer edge."""
    if not 0 < a < b:
        raise ValueError("annulus needs 0 < a < b")
    d = region.positions - complex(z)
    m = np.maximum(np.abs(d.real), np.abs(d.imag))
    return np.flatnonzero((m >= a) & (m < b)).astype(np.int64)


def default_halfwidth(points, factor: float = 4.0) -> float:
    pts = [complex(p) for p in points]
    span = max((abs(p - q) for p in pts for q in pts), default=0.0)
    return factor * span


def default_anchor(points) -> complex:
    pts = [complex(p) for p in points]
    return complex(sum(p.real for p in pts) / len(pts), 0.0)
