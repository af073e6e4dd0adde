"""Compiled Monte Carlo kernel: lazy cluster exploration over counter-based bits.

Only the sites the queries actually touch are generated, on first touch
(256 sites per Philox block, cached per sample).
Because the bit of a site depends only on ``(seed, sample, mesh, i, j)``
the result equals evaluating the events on :func:`sample_config` output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .events import EventSpec, anchor_sites, atoms_of, near_threshold, site_of_point
from .lattice import Region
from .rng import mesh_tag, philox4x64, split_seed


# per-site state row: [A-side mark, B-side mark, sample*2 + bit (or -1), block*256 + offset]
_VA, _VB, _ST, _BLK = 0, 1, 2, 3


@njit(cache=True, inline="always")
def _open(u, sample, force_open, state, tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words):
    code = state[u, _ST]
    if code >> 1 == sample:
        return (code & 1) == 1
    if force_open:
        bit = 1
    else:
        packed = state[u, _BLK]
        b = packed >> 8
        if blk_stamp[b] != sample:
            philox4x64(np.uint64(blk_c0[b]), np.uint64(blk_j[b]), np.uint64(sample), tag, k0, k1, words)
            for q in range(4):
                blk_words[b, q] = words[q]
            blk_stamp[b] = sample
        off = packed & 255
        bit = np.int64((blk_words[b, off >> 6] >> np.uint64(off & 63)) & np.uint64(1))
    state[u, _ST] = sample * 2 + bit
    return bit == 1


@njit(cache=True)
def _connected(mark, sample, force_open, nb, state, qa, qb, a_sites, b_sites,
               tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words):
    """Whether ``C(a_sites)`` meets ``b_sites``: both clusters grow one site at a time in turn,
    so the work is about twice the smaller cluster when they do not meet."""
    ta = 0
    for s in a_sites:
        if state[s, _VA] == mark:
            continue
        state[s, _VA] = mark
        if _open(s, sample, force_open, state, tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words):
            qa[ta] = s
            ta += 1
    tb = 0
    for s in b_sites:
        if state[s, _VB] == mark:
            continue
        state[s, _VB] = mark
        if _open(s, sample, force_open, state, tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words):
            if state[s, _VA] == mark:
                return True
            qb[tb] = s
            tb += 1
    ha = 0
    hb = 0
    while ha < ta and hb < tb:
        v = qa[ha]
        ha += 1
        for d in range(6):
            u = nb[v, d]
            if u < 0 or state[u, _VA] == mark:
                continue
            state[u, _VA] = mark
            if _open(u, sample, force_open, state, tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words):
                if state[u, _VB] == mark:
                    return True
                qa[ta] = u
                ta += 1
        v = qb[hb]
        hb += 1
        for d in range(6):
            u = nb[v, d]
            if u < 0 or state[u, _VB] == mark:
                continue
            state[u, _VB] = mark
            if _open(u, sample, force_open, state, tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words):
                if state[u, _VA] == mark:
                    return True
                qb[tb] = u
                tb += 1
    return False


@njit(cache=True)
def _run(
    start, stop, k0, k1, tag, force_open,
    nb, blk_packed, blk_c0, blk_j,
    set_ptr, set_sites, atom_a, atom_b,
    ev_ptr, ev_atoms, record,
):
    n = nb.shape[0]
    nblk = len(blk_c0)
    n_atoms = len(atom_a)
    n_ev = len(ev_ptr) - 1
    blk_stamp = np.full(nblk, -1, dtype=np.int64)
    blk_words = np.zeros((nblk, 4), dtype=np.uint64)
    words = np.empty(4, dtype=np.uint64)
    state = np.empty((n, 4), dtype=np.int64)
    for v in range(n):
        state[v, _VA] = -1
        state[v, _VB] = -1
        state[v, _ST] = -2
        state[v, _BLK] = blk_packed[v]
    qa = np.empty(n, dtype=np.int32)
    qb = np.empty(n, dtype=np.int32)
    counts = np.zeros(n_ev, dtype=np.int64)
    co = np.zeros((n_ev, n_ev), dtype=np.int64)
    atom_done = np.full(n_atoms, -1, dtype=np.int64)
    atom_res = np.zeros(n_atoms, dtype=np.bool_)
    ev_res = np.zeros(n_ev, dtype=np.bool_)
    mark = 0

    for sample in range(start, stop):
        for e in range(n_ev):
            ok = True
            for p in range(ev_ptr[e], ev_ptr[e + 1]):
                a = ev_atoms[p]
                if atom_done[a] != sample:
                    atom_done[a] = sample
                    mark += 1
                    sa = atom_a[a]
                    sb = atom_b[a]
                    atom_res[a] = _connected(
                        mark, sample, force_open, nb, state, qa, qb,
                        set_sites[set_ptr[sa]:set_ptr[sa + 1]], set_sites[set_ptr[sb]:set_ptr[sb + 1]],
                        tag, k0, k1, blk_c0, blk_j, blk_stamp, blk_words, words,
                    )
                if not atom_res[a]:
                    ok = False
                    break
            ev_res[e] = ok
        for e in range(n_ev):
            if ev_res[e]:
                counts[e] += 1
                for f in range(e, n_ev):
                    if ev_res[f]:
                        co[e, f] += 1
        if record.shape[0] > 0:
            for e in range(n_ev):
                record[sample - start, e] = ev_res[e]
    for e in range(n_ev):
        for f in range(e):
            co[e, f] = co[f, e]
    return counts, co


def near_sites(region: Region, w: complex, threshold: float) -> np.ndarray:
    """Sites closer than ``threshold`` to ``w``, plus the site whose hexagon holds ``w``.

    ``near(A, w, r)`` holds exactly when ``C(A)`` meets this set.
    """
    d = np.abs(region.positions - complex(w))
    inside = np.flatnonzero(d < threshold)
    return np.union1d(inside, [site_of_point(region, w)]).astype(np.int64)


@dataclass
class CompiledPlan:
    """A list of bracket-method events on one region, ready for the kernel.

    Every atom becomes a set-to-set connection query; the kernel grows the
    clusters of both sets alternately and stops at first contact or when
    either side runs out, so the cost tracks the smaller cluster.
    """

    region: Region
    events: list
    seed: int
    force_open: bool = False

    def __post_init__(self):
        for ev in self.events:
            if ev.radius_method == "green" and ev.uses_radius:
                raise ValueError("the compiled kernel handles bracket radius methods only")
        region = self.region
        self._k0, self._k1 = split_seed(self.seed)
        self._tag = mesh_tag(region.mesh)

        blk_key = region.j * (1 << 40) + (region.i >> 8)
        _, blk_of = np.unique(blk_key, return_inverse=True)
        first = np.unique(blk_of, return_index=True)[1]
        self._blk_packed = blk_of.astype(np.int64) * 256 + (region.i & 255).astype(np.int64)
        self._nb = region.neighbors.astype(np.int32)
        self._blk_c0 = (region.i[first] >> 8).astype(np.int64)
        self._blk_j = region.j[first].astype(np.int64)

        sets, set_index = [], {}
        atom_rows, atom_index = [], {}
        ev_ptr, ev_atoms = [0], []

        def set_id(key, make):
            if key not in set_index:
                set_index[key] = len(sets)
                sets.append(make())
            return set_index[key]

        for ev in self.events:
            for atom in atoms_of(ev):
                a = set_id(atom[1], lambda: anchor_sites(region, atom[1]))
                if atom[0] == "connect":
                    b = set_id(atom[2], lambda: anchor_sites(region, atom[2]))
                else:
                    thr = near_threshold(ev.radius_method, atom[3])
                    key = ("disk", complex(atom[2]), thr)
                    b = set_id(key, lambda: near_sites(region, atom[2], thr))
                row = (a, b)
                if row not in atom_index:
                    atom_index[row] = len(atom_rows)
                    atom_rows.append(row)
                ev_atoms.append(atom_index[row])
            ev_ptr.append(len(ev_atoms))

        self._set_ptr = np.concatenate([[0], np.cumsum([len(s) for s in sets])]).astype(np.int64)
        self._set_sites = (np.concatenate(sets) if sets else np.empty(0)).astype(np.int64)
        self._atom_a = np.array([r[0] for r in atom_rows], dtype=np.int64)
        self._atom_b = np.array([r[1] for r in atom_rows], dtype=np.int64)
        self._ev_ptr = np.array(ev_ptr, dtype=np.int64)
        self._ev_atoms = np.array(ev_atoms, dtype=np.int64)

    def run(self, start: int, stop: int, record: bool = False):
        """Event counts and pairwise co-occurrence counts over samples ``[start, stop)``.

        With ``record=True`` also returns the per-sample event matrix.
        """
        if not 0 <= start <= stop:
            raise ValueError("need 0 <= start <= stop")
        rec = np.zeros((stop - start if record else 0, len(self.events)), dtype=np.bool_)
        counts, co = _run(
            start, stop, self._k0, self._k1, self._tag, self.force_open,
            self._nb, self._blk_packed, self._blk_c0, self._blk_j,
            self._set_ptr, self._set_sites, self._atom_a, self._atom_b,
            self._ev_ptr, self._ev_atoms, rec,
        )
        if record:
            return counts, co, rec
        return counts, co
