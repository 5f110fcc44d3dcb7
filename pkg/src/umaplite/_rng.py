"""Counter-based random draws keyed by (seed, stream, epoch, i, j, slot).

Every draw is a pure function of its key, so skipping pairs that can never
fire does not shift the random sequence seen by the remaining pairs.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def pair_key(seed, stream, epoch, i, j):
    h = mix64(np.uint64(seed) + _GOLDEN)
    h = mix64(h ^ np.uint64(stream))
    h = mix64(h ^ np.uint64(epoch))
    h = mix64(h ^ np.uint64(i))
    return mix64(h ^ np.uint64(j))


@njit(cache=True)
def draw(key, slot):
    return mix64(key + np.uint64(slot + 1) * _GOLDEN)


@njit(cache=True)
def unit(h):
    """Uniform on (0, 1]; a zero weight therefore never fires."""
    return (np.float64(h >> _S11) + 1.0) * _INV53


@njit(cache=True)
def index(h, n):
    """Uniform on {0, ..., n-1}."""
    k = np.int64(np.float64(h >> _S11) * _INV53 * n)
    return k if k < n else n - 1


def normalize_seed(seed):
    return int(seed) & MASK64
