"""Critical site configurations, cluster labels and the exact enumeration oracle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from numba import njit

from .lattice import Region
from .rng import mesh_tag, philox4x64, split_seed

MAX_ENUM_SITES = 25
NULL_LABEL = -1


@dataclass(frozen=True, eq=False)
class BitConfig:
    region: Region
    bits: np.ndarray  # bool, one entry per SiteId

    def __post_init__(self):
        if self.bits.shape != (self.region.n_sites,):
            raise ValueError("bit vector length must equal the site count")

    def __eq__(self, other):
        return (
            isinstance(other, BitConfig)
            and other.region is self.region
            and np.array_equal(other.bits, self.bits)
        )

    def __hash__(self):
        return hash(self.bits.tobytes())


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    """Component label per site; closed sites carry ``NULL_LABEL``.

    A component's label is its smallest SiteId, so labels do not depend on
    the order in which sites were processed.
    """

    region: Region
    label: np.ndarray
    config: Optional[BitConfig] = None

    def cluster_of(self, sites) -> np.ndarray:
        """Sites of ``C(A)`` for the anchor set ``A = sites``."""
        labs = np.unique(self.label[np.asarray(sites, dtype=np.int64)])
        labs = labs[labs >= 0]
        if len(labs) == 0:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(np.isin(self.label, labs))


# --- bit generation -------------------------------------------------------------


@njit(cache=True)
def _fill_bits(ii, jj, sample_index, k0, k1, tag, out):
    words = np.empty(4, dtype=np.uint64)
    last_block = np.int64(-(1 << 62))
    last_j = np.int64(-1)
    for k in range(len(ii)):
        i = ii[k]
        blk = i >> 8
        if blk != last_block or jj[k] != last_j:
            philox4x64(np.uint64(blk), np.uint64(jj[k]), np.uint64(sample_index), tag, k0, k1, words)
            last_block = blk
            last_j = jj[k]
            b = i & 255
        else:
            b = i & 255
        out[k] = (words[b >> 6] >> np.uint64(b & 63)) & np.uint64(1)


def sample_config(region: Region, seed: int, sample_index: int) -> BitConfig:
    """Critical configuration, fully determined by ``(seed, sample_index)``.

    The bit of the site at lattice coordinate ``(i, j)`` depends only on the
    seed, the sample index, the mesh and ``(i, j)``, so two regions at the
    same mesh see identical configurations where they overlap.
    """
    if sample_index < 0 or sample_index >= 1 << 64:
        raise ValueError("sample_index must fit in 64 bits")
    k0, k1 = split_seed(seed)
    out = np.empty(region.n_sites, dtype=np.uint64)
    _fill_bits(region.i, region.j, np.uint64(sample_index), k0, k1, mesh_tag(region.mesh), out)
    return BitConfig(region, out.astype(bool))


# --- cluster labelling ----------------------------------------------------------


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union_find_labels(bits, neighbors):
    n = len(bits)
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for v in range(n):
        if not bits[v]:
            continue
        for d in range(3):  # E, NE, NW suffice: every edge is seen once from one end
            u = neighbors[v, d]
            if u < 0 or not bits[u]:
                continue
            a = _find(parent, v)
            b = _find(parent, u)
            if a == b:
                continue
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
    # canonical label: smallest SiteId of the component
    smallest = np.full(n, n, dtype=np.int64)
    for v in range(n):
        if bits[v]:
            r = _find(parent, v)
            if v < smallest[r]:
                smallest[r] = v
    label = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        if bits[v]:
            label[v] = smallest[_find(parent, v)]
    return label


def label_clusters(config: BitConfig) -> ClusterLabels:
    """Connected components of the open-site subgraph."""
    lab = _union_find_labels(config.bits, config.region.neighbors)
    return ClusterLabels(config.region, lab, config)


# --- exact enumeration ----------------------------------------------------------


def _check_support(support) -> np.ndarray:
    support = np.asarray(support, dtype=np.int64)
    if len(np.unique(support)) != len(support):
        raise ValueError("support has duplicate sites")
    if len(support) > MAX_ENUM_SITES:
        raise ValueError(f"support of {len(support)} sites exceeds the enumeration cap of {MAX_ENUM_SITES}")
    return support


def enumerate_bit_matrices(region: Region, support, chunk: int = 1 << 16) -> Iterator[np.ndarray]:
    """All ``2**len(support)`` configurations as bool matrices, in chunks.

    Row ``c`` of the concatenated stream has site ``support[t]`` open iff bit
    ``t`` of ``c`` is set. Sites outside the support are closed.
    """
    support = _check_support(support)
    k = len(support)
    total = 1 << k
    shifts = np.arange(k, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        m = np.zeros((len(codes), region.n_sites), dtype=bool)
        m[:, support] = ((codes[:, None] >> shifts[None, :]) & 1).astype(bool)
        yield m


def enumerate_configs(region: Region, support) -> Iterator[BitConfig]:
    """Stream every configuration on ``support`` exactly once (others closed)."""
    for m in enumerate_bit_matrices(region, support):
        for row in m:
            yield BitConfig(region, row.copy())


@dataclass(frozen=True, eq=False)
class EventPredicate:
    """A total function of configurations that reads only the sites in ``support``.

    ``batch`` (optional) evaluates many configurations at once from a bool
    matrix with one row per configuration over all region sites.
    """

    fn: Callable[[BitConfig], bool]
    support: np.ndarray
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    increasing: bool = False
    name: str = ""

    def __call__(self, config: BitConfig) -> bool:
        return bool(self.fn(config))

    def evaluate_many(self, region: Region, matrix: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return np.asarray(self.batch(matrix), dtype=bool)
        return np.array([self.fn(BitConfig(region, row)) for row in matrix], dtype=bool)


def truth_table(pred: EventPredicate, region: Region, support=None) -> np.ndarray:
    """Values of ``pred`` over all configurations of ``support`` (default: its own)."""
    support = pred.support if support is None else support
    return np.concatenate([pred.evaluate_many(region, m) for m in enumerate_bit_matrices(region, support)])


def exact_probability(pred: EventPredicate, region: Region, support=None) -> float:
    support = pred.support if support is None else np.asarray(support)
    return float(truth_table(pred, region, support).mean())


@njit(cache=True)
def _reach_rows(matrix, neighbors, sources, allowed):
    n_cfg, n = matrix.shape
    out = np.zeros((n_cfg, n), dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    for c in range(n_cfg):
        top = 0
        for s in sources:
            if matrix[c, s] and allowed[s] and not out[c, s]:
                out[c, s] = True
                stack[top] = s
                top += 1
        while top > 0:
            top -= 1
            v = stack[top]
            for d in range(6):
                u = neighbors[v, d]
                if u >= 0 and allowed[u] and matrix[c, u] and not out[c, u]:
                    out[c, u] = True
                    stack[top] = u
                    top += 1
    return out


def reach_matrix(region: Region, matrix: np.ndarray, sources, allowed=None) -> np.ndarray:
    """Row-wise membership of ``C(sources)``, optionally inside the sub-lattice ``allowed``."""
    if allowed is None:
        allowed_mask = np.ones(region.n_sites, dtype=np.bool_)
    else:
        allowed_mask = np.zeros(region.n_sites, dtype=np.bool_)
        allowed_mask[np.asarray(allowed, dtype=np.int64)] = True
    return _reach_rows(
        np.ascontiguousarray(matrix, dtype=np.bool_),
        region.neighbors,
        np.asarray(sources, dtype=np.int64),
        allowed_mask,
    )


def connection_predicate(region: Region, sources, targets, allowed=None, name="") -> EventPredicate:
    """Increasing event ``C(sources)`` meets ``targets``, using only sites in ``allowed``."""
    sources = np.asarray(sources, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if allowed is None:
        support = np.arange(region.n_sites, dtype=np.int64)
    else:
        support = np.sort(np.asarray(allowed, dtype=np.int64))

    def batch(m):
        r = reach_matrix(region, m, sources, allowed)
        return r[:, targets].any(axis=1)

    def fn(cfg):
        return bool(batch(cfg.bits[None, :])[0])

    return EventPredicate(fn, support, batch, increasing=True, name=name)


def cylinder_event(V: EventPredicate, A, region: Region) -> EventPredicate:
    """``V_A``: configurations whose restriction to ``A`` extends to a configuration in ``V``.

    Computed from the truth table of ``V`` by existential quantification over
    the support bits of ``V`` outside ``A``.
    """
    A = np.unique(np.asarray(A, dtype=np.int64))
    supp = _check_support(V.support)
    k = len(supp)
    table = truth_table(V, region, supp)
    kept = np.flatnonzero(np.isin(supp, A))
    dropped = np.setdiff1d(np.arange(k), kept)
    # C-order reshape puts bit t on axis k-1-t
    cube = table.reshape((2,) * k) if k else table.reshape(())
    reduced = cube.any(axis=tuple(k - 1 - t for t in dropped)) if len(dropped) else cube
    # remaining axes are the kept bits in decreasing t; flatten back to codes over `kept`
    reduced = np.asarray(reduced).reshape(-1)
    kept_sites = supp[kept]
    weights = (1 << np.arange(len(kept), dtype=np.int64))

    def batch(m):
        if len(kept_sites) == 0:
            return np.full(len(m), bool(reduced[0]))
        codes = (m[:, kept_sites].astype(np.int64) * weights).sum(axis=1)
        return reduced[codes]

    def fn(cfg):
        return bool(batch(cfg.bits[None, :])[0])

    return EventPredicate(fn, A, batch, increasing=V.increasing, name=f"{V.name}|A")
