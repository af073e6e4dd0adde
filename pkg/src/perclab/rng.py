"""Counter-based random bits (Philox4x64-10).

Every random bit used by the sampler is a pure function of
``(seed, sample_index, lattice coordinate)``, so any subset of sites can be
generated in any order, by any worker, with identical results.

The block function is bit-compatible with :class:`numpy.random.Philox`
(checked in the test-suite), which serves as its independent oracle.
"""
import numpy as np
from numba import njit, uint64

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

# stream tags kept in the last counter word
STREAM_SITES = 0
STREAM_WALKS = 1


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    t = a_lo * b_lo
    mid1 = a_hi * b_lo + (t >> _S32)
    mid2 = a_lo * b_hi + (mid1 & _MASK32)
    hi = a_hi * b_hi + (mid1 >> _S32) + (mid2 >> _S32)
    return hi, lo


@njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1, out):
    """Write the 4 output words for counter (c0..c3) and key (k0, k1) into ``out``."""
    x0 = uint64(c0)
    x1 = uint64(c1)
    x2 = uint64(c2)
    x3 = uint64(c3)
    key0 = uint64(k0)
    key1 = uint64(k1)
    for r in range(10):
        if r > 0:
            key0 = key0 + _W0
            key1 = key1 + _W1
        hi0, lo0 = _mulhilo(_M0, x0)
        hi1, lo1 = _mulhilo(_M1, x2)
        x0 = hi1 ^ x1 ^ key0
        x1 = lo1
        x2 = hi0 ^ x3 ^ key1
        x3 = lo0
    out[0] = x0
    out[1] = x1
    out[2] = x2
    out[3] = x3


def split_seed(seed):
    """Split a non-negative integer seed (< 2**128) into two uint64 key words."""
    seed = int(seed)
    if seed < 0 or seed >= 1 << 128:
        raise ValueError("seed must be a non-negative integer below 2**128")
    return np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(seed >> 64)


def mesh_tag(mesh):
    """Counter word derived from the mesh, so different meshes never share bits."""
    return np.frombuffer(np.float64(mesh).tobytes(), dtype=np.uint64)[0]


def random_words(seed, counter):
    """Convenience wrapper returning the 4 words of one block as a numpy array."""
    k0, k1 = split_seed(seed)
    out = np.empty(4, dtype=np.uint64)
    c = [np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF) for x in counter]
    philox4x64(c[0], c[1], c[2], c[3], k0, k1, out)
    return out
