"""Outermost and innermost open (semi-)circuits in square annuli.

Both searches flood-fill closed sites: from the outer rim inwards for the
outermost circuit, from the inner box outwards for the innermost one. A
closed crossing of the annulus means no circuit; otherwise the open
interface of the flooded set is traced with a Moore-neighbour walk. On the
triangular lattice consecutive neighbours of a site are adjacent to each
other, so the walk is a lattice path. The real axis acts as a wall; a walk
that hits it yields a semi-circuit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import BELOW, OUTSIDE, BoxSpec, Region, annulus_sites, box_sites
from .percolation import BitConfig


@dataclass(frozen=True)
class Circuit:
    sites: tuple
    is_semi: bool
    annulus: tuple  # (z, a, b)

    def __len__(self):
        return len(self.sites)


@dataclass(frozen=True)
class _Annulus:
    region: Region
    inner: np.ndarray  # bool mask of B_a
    ring: np.ndarray  # bool mask of A(z; a, b)
    outer: np.ndarray  # bool mask of sites outside B_b
    probe: int  # a site of B_a


def _setup(region: Region, z: complex, a: float, b: float) -> _Annulus:
    if not 0 < a < b:
        raise ValueError("annulus needs 0 < a < b")
    z = complex(z)
    n = region.n_sites
    inner = np.zeros(n, dtype=bool)
    inner[box_sites(region, BoxSpec(z, a))] = True
    ring = np.zeros(n, dtype=bool)
    ring[annulus_sites(region, z, a, b)] = True
    if not ring.any():
        raise ValueError("annulus contains no site")
    if not inner.any():
        raise ValueError("inner box contains no site")
    outer = ~(inner | ring)
    probe = int(np.flatnonzero(inner)[np.argmin(np.abs(region.positions[inner] - z))])
    return _Annulus(region, inner, ring, outer, probe)


def _flood(nb: np.ndarray, seeds: np.ndarray, passable: np.ndarray) -> np.ndarray:
    """Sites reachable from ``seeds`` moving only through ``passable`` sites (seeds included)."""
    mark = np.zeros(len(nb), dtype=bool)
    stack = [int(s) for s in np.flatnonzero(seeds)]
    mark[seeds] = True
    while stack:
        v = stack.pop()
        for u in nb[v]:
            if u >= 0 and not mark[u] and passable[u]:
                mark[u] = True
                stack.append(int(u))
    return mark


def _trace(nb: np.ndarray, inside: np.ndarray, c0: int, back: int, sense: int, limit: int):
    """Moore walk along the boundary of ``inside`` starting at ``c0`` whose neighbour
    in direction ``back`` is outside. ``sense=+1`` rotates counter-clockwise.

    Returns ``(walk, hit_axis)``; the walk is closed (first site repeated at
    the end) unless the axis was hit.
    """
    walk = [c0]
    v, d = c0, back
    first = None
    for _ in range(limit):
        nxt = -1
        for k in range(1, 6):
            e = (d + sense * k) % 6
            u = nb[v, e]
            if u == BELOW:
                return walk, True
            if u >= 0 and inside[u]:
                nxt, d_new = u, (e + 4) % 6 if sense > 0 else (e + 2) % 6
                break
        if nxt < 0:  # isolated site
            return walk + [c0], False
        if first is None:
            first = (v, nxt)
        elif (v, nxt) == first:
            return walk, False
        walk.append(int(nxt))
        v, d = nxt, d_new
    raise RuntimeError("boundary walk did not close")


def _winding(pos: np.ndarray, loop: list, p: complex) -> int:
    z = pos[np.asarray(loop)] - p
    turn = np.angle(np.roll(z, -1) / z).sum()
    return int(round(turn / (2 * math.pi)))


def _reduce(pos: np.ndarray, walk: list, p: complex, closed: bool):
    """Erase loops in chronological order; a loop winding around ``p`` is the answer.

    Returns ``(sites, is_loop)``.
    """
    stack, where = [], {}
    for v in walk:
        if v in where:
            k = where[v]
            loop = stack[k:]
            if len(loop) >= 3 and _winding(pos, loop, p) != 0:
                return loop, True
            for x in stack[k + 1:]:
                del where[x]
            del stack[k + 1:]
            continue
        where[v] = len(stack)
        stack.append(v)
    if closed:
        raise RuntimeError("closed boundary walk without a loop around the inner box")
    return stack, False


def _ray_start(region: Region, from_site: int, member: np.ndarray, last: bool) -> Optional[int]:
    """Walk east along the row of ``from_site``; the last site in ``member`` before the first
    non-member (``last=False``) or before the window edge (``last=True``)."""
    nb = region.neighbors
    v = from_site
    best = v if member[v] else None
    while True:
        u = nb[v, 0]
        if u < 0:
            return best
        if member[u]:
            best = u
        elif not last:
            return best
        v = u


def _make(an: _Annulus, walk: list, hit_axis_a: bool, z, a, b) -> Circuit:
    pos = an.region.positions
    p = pos[an.probe]
    sites, is_loop = _reduce(pos, walk, p, closed=not hit_axis_a)
    return Circuit(tuple(int(s) for s in sites), is_semi=not is_loop, annulus=(complex(z), float(a), float(b)))


def _semi_or_full(an: _Annulus, inside: np.ndarray, c0: int, back: int, z, a, b) -> Circuit:
    nb = an.region.neighbors
    limit = 12 * an.region.n_sites + 12
    fwd, hit = _trace(nb, inside, c0, back, +1, limit)
    if not hit:
        return _make(an, fwd, False, z, a, b)
    bwd, hit2 = _trace(nb, inside, c0, back, -1, limit)
    if not hit2:
        raise RuntimeError("boundary walk met the axis in one direction only")
    return _make(an, bwd[::-1] + fwd[1:], True, z, a, b)


def outermost_open_circuit(config: BitConfig, z: complex, a: float, b: float) -> Optional[Circuit]:
    """Outermost open (semi-)circuit of ``A(z; a, b)`` around ``B_a(z)``, or ``None``."""
    region = config.region
    an = _setup(region, z, a, b)
    nb = region.neighbors
    closed_ring = an.ring & ~config.bits
    seeds = an.outer | (an.ring & (nb == OUTSIDE).any(axis=1) & closed_ring)
    ext = _flood(nb, seeds, closed_ring)
    # a flooded site touching the inner box is a closed crossing
    touch = np.isin(nb[an.inner], np.flatnonzero(ext)).any() or (nb[an.inner] == OUTSIDE).any()
    if touch:
        return None
    K = _flood(nb, an.inner, ~ext)
    c0 = _ray_start(region, an.probe, K, last=False)
    return _semi_or_full(an, K, c0, 0, z, a, b)


def innermost_open_circuit(config: BitConfig, z: complex, a: float, b: float) -> Optional[Circuit]:
    """Innermost open (semi-)circuit of ``A(z; a, b)`` around ``B_a(z)``, or ``None``."""
    region = config.region
    an = _setup(region, z, a, b)
    nb = region.neighbors
    closed_ring = an.ring & ~config.bits
    inn = _flood(nb, an.inner, closed_ring)
    inn_ids = np.flatnonzero(inn)
    if np.isin(nb[an.outer], inn_ids).any() or (nb[inn] == OUTSIDE).any():
        return None
    # the eastward ray from the probe leaves the flooded set for good after its last member
    c_last = _ray_start(region, an.probe, inn, last=True)
    c0 = int(nb[c_last, 0])
    if c0 < 0:
        return None
    seeds = np.zeros(region.n_sites, dtype=bool)
    seeds[c0] = True
    K = _flood(nb, seeds, ~inn)
    return _semi_or_full(an, K, c0, 3, z, a, b)


# --- checks used by tests and the exhaustive oracle ----------------------------------------


def separates(region: Region, z: complex, a: float, b: float, cut) -> bool:
    """Whether removing ``cut`` disconnects ``B_a(z)`` from the outside of ``B_b(z)``.

    Leaving the window counts as reaching the outside; the real axis does not.
    """
    an = _setup(region, z, a, b)
    nb = region.neighbors
    blocked = np.zeros(region.n_sites, dtype=bool)
    blocked[np.asarray(list(cut), dtype=np.int64)] = True
    seeds = an.inner & ~blocked
    reach = _flood(nb, seeds, ~blocked)
    if (reach & an.outer).any():
        return False
    return not (nb[reach] == OUTSIDE).any()


def is_valid_circuit(config: BitConfig, c: Circuit) -> bool:
    region = config.region
    z, a, b = c.annulus
    an = _setup(region, z, a, b)
    s = np.asarray(c.sites, dtype=np.int64)
    if len(s) == 0 or len(set(c.sites)) != len(s):
        return False
    if not (config.bits[s].all() and an.ring[s].all()):
        return False
    nb = region.neighbors
    steps = list(zip(s[:-1], s[1:]))
    if not c.is_semi:
        steps.append((s[-1], s[0]))
    if any(v not in nb[u] for u, v in steps):
        return False
    if c.is_semi and not (region.boundary[s[0]] and region.boundary[s[-1]]):
        return False
    return separates(region, z, a, b, s)


def exhaustive_circuit_exists(config: BitConfig, z: complex, a: float, b: float, max_sites: int = 20) -> bool:
    """Search every simple cycle and every axis-to-axis simple path of open annulus sites."""
    region = config.region
    an = _setup(region, z, a, b)
    ring_ids = np.flatnonzero(an.ring)
    if len(ring_ids) > max_sites:
        raise ValueError(f"annulus has {len(ring_ids)} sites, above the exhaustive cap {max_sites}")
    open_ring = set(int(v) for v in ring_ids if config.bits[v])
    nb = region.neighbors
    adj = {v: [int(u) for u in nb[v] if u in open_ring] for v in open_ring}
    boundary = {v for v in open_ring if region.boundary[v]}

    found = False

    def dfs(path, on_path):
        nonlocal found
        if found:
            return
        v = path[-1]
        start = path[0]
        if len(path) >= 3 and start in adj[v] and separates(region, z, a, b, path):
            found = True
            return
        if start in boundary and v in boundary and len(path) >= 1 and separates(region, z, a, b, path):
            found = True
            return
        for u in adj[v]:
            # cycles are rooted at their smallest site to avoid rework
            if u in on_path or (start not in boundary and u < start):
                continue
            on_path.add(u)
            path.append(u)
            dfs(path, on_path)
            path.pop()
            on_path.discard(u)
            if found:
                return

    for v in sorted(open_ring):
        dfs([v], {v})
        if found:
            break
    return found
