"""Counter-based random streams.

Every replicate owns a stream keyed by ``(seed, replicate, purpose)``; draw
number ``k`` of a stream is ``splitmix64(key + (k + 1) * golden)``.  Draws are
therefore addressable, so a replicate produces the same numbers whether it is
simulated alone, inside a batch, on the numba path or on the numpy path.
"""

from enum import IntEnum

import numpy as np
from scipy import special

from ._backend import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_MUL = np.uint64(0xD1B54A32D192ED03)
_SEED_ADD = np.uint64(0x8CB92BA72F3D8DD7)
_PURPOSE_MUL = np.uint64(0xA0761D6478BD642F)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


class Purpose(IntEnum):
    """Sub-stream tags; one per independent ingredient of a replicate."""

    SMALL_COUNT = 1
    SMALL_COMPONENT = 2
    SMALL_R = 3
    SMALL_ELL = 4
    BIG_COUNT = 5
    BIG_COMPONENT = 6
    BIG_R = 7
    BIG_ELL = 8
    RESIDUAL = 9
    ARRIVALS = 10
    PAST = 11
    REWARD = 12
    NU = 13
    SESSIONS = 14
    PAST_SESSIONS = 15
    TERM = 64  # conditional-estimator terms use TERM + n


def mix64(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_keys(seed, replicates, purpose):
    """Keys for ``(seed, replicate, purpose)``; ``replicates`` may be an array."""
    if int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    reps = np.atleast_1d(np.asarray(replicates, dtype=np.uint64))
    with np.errstate(over="ignore"):
        k0 = mix64(np.array([np.uint64(int(seed) % 2**64)]) * _SEED_MUL + _SEED_ADD)
        k1 = mix64(k0 ^ (reps * _GOLDEN))
        return mix64(k1 + np.uint64(int(purpose)) * _PURPOSE_MUL)


def uniforms_at(keys, counters):
    """Uniforms on the open interval (0, 1) for elementwise (key, counter)."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = mix64(keys + (counters + np.uint64(1)) * _GOLDEN)
    return ((x >> _S11).astype(np.float64) + 0.5) * _TO_UNIT


@njit(inline="always")
def mix64_scalar(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def uniform_scalar(key, counter):
    x = mix64_scalar(key + (counter + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15))
    return (float(x >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


class Stream:
    """Random stream of one replicate.

    Parameters
    ----------
    seed : int
        Global seed of the run.
    replicate : int
        Replicate index; distinct indices give independent streams.
    """

    __slots__ = ("seed", "replicate")

    def __init__(self, seed, replicate=0):
        self.seed = int(seed)
        self.replicate = int(replicate)

    def __repr__(self):
        return f"Stream(seed={self.seed}, replicate={self.replicate})"

    def key(self, purpose):
        return stream_keys(self.seed, self.replicate, purpose)[0]

    def uniforms(self, purpose, n, start=0):
        counters = np.arange(start, start + n, dtype=np.uint64)
        return uniforms_at(np.full(n, self.key(purpose), dtype=np.uint64), counters)

    def normals(self, purpose, n, start=0):
        return special.ndtri(self.uniforms(purpose, n, start))


def segment_counters(counts):
    """Owner index and within-owner position for concatenated segments."""
    counts = np.asarray(counts, dtype=np.int64)
    owner = np.repeat(np.arange(counts.size), counts)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    pos = np.arange(owner.size, dtype=np.int64) - offsets[owner]
    return owner, pos.astype(np.uint64)
