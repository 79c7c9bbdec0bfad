"""Counter-based keyed random numbers.

Every random bit in the package is a pure function of an integer key and a
counter (the tile index), so samples do not depend on iteration order or on
how replicates are split across threads.  The mixing function is the
SplitMix64 finalizer; keys are derived by chaining it over the lineage
integers (master seed, replicate, generation, stream).
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


@njit(cache=True, nogil=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def derive_key(master, replicate, generation, stream):
    """Key for one random stream of the lineage (master, replicate, generation, stream)."""
    k = mix64(np.uint64(master) + _GOLDEN)
    k = mix64(k ^ (np.uint64(replicate) * _GOLDEN + np.uint64(1)))
    k = mix64(k ^ (np.uint64(generation) * _M1 + np.uint64(2)))
    k = mix64(k ^ (np.uint64(stream) * _M2 + np.uint64(3)))
    return k


@njit(cache=True, nogil=True)
def uniform(key, counter):
    """Uniform double in [0, 1) at position `counter` of stream `key`."""
    z = mix64(np.uint64(key) ^ mix64(np.uint64(counter) * _GOLDEN + _GOLDEN))
    return float(z >> _S11) * _INV53


@njit(cache=True, nogil=True)
def bernoulli(key, counter, p):
    return uniform(key, counter) < p


@njit(cache=True, nogil=True)
def uniform_array(key, counters):
    out = np.empty(counters.shape[0], dtype=np.float64)
    for i in range(counters.shape[0]):
        out[i] = uniform(key, counters[i])
    return out


def stream_key(master, replicate, generation=0, stream=0):
    """derive_key for Python callers (keeps the uint64 type numba expects)."""
    return np.uint64(derive_key(master, replicate, generation, stream))


def check_seed(value, name="seed"):
    value = int(value)
    if value < 0 or value >= 2**63:
        raise ValueError(f"{name} must be in [0, 2**63), got {value}")
    return value
