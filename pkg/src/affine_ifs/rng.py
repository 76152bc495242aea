"""Counter-based SplitMix64 streams shared by Python code and numba kernels.

The generator is SplitMix64 (Steele, Lea & Flood, 2014): draw ``i`` of the
stream with key ``k`` is ``mix64(k + (i + 1) * GAMMA)``.  Because the stream
is counter based, any prefix can be materialized from Python and reproduced
bit for bit inside a compiled kernel.  Per-trial keys hash the campaign seed
together with the trial index, so trials are independent of execution order.
"""

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_GAMMA_U = np.uint64(GAMMA)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_ONE_U = np.uint64(1)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *path: int) -> int:
    """Key of the stream addressed by ``seed`` and an index path.

    ``derive_key(seed, trial)`` is the per-trial stream of a campaign; longer
    paths address nested campaigns (e.g. campaign, cap, trial).
    """
    if seed < 0 or any(p < 0 for p in path):
        raise ValueError("seed and stream indices must be non-negative")
    key = mix64(seed)
    for p in path or (0,):
        key = mix64(key ^ mix64((p * GAMMA + 1) & MASK64))
    return key


@njit(cache=True)
def _mix64_nb(z):
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    return z ^ (z >> _S31)


@njit(cache=True)
def child_key(key, index):
    """Compiled twin of one step of :func:`derive_key`."""
    return _mix64_nb(key ^ _mix64_nb(np.uint64(index) * _GAMMA_U + _ONE_U))


@njit(cache=True, inline="always")
def next_u64(state):
    """Advance ``state`` (a uint64) and return ``(new_state, output)``."""
    state = state + _GAMMA_U
    z = state
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    return state, z ^ (z >> _S31)


@njit(cache=True, inline="always")
def next_uniform(state):
    state, z = next_u64(state)
    return state, np.float64(z >> _S11) * _INV53


@njit(cache=True)
def _fill_uniforms(key, start, out):
    state = key + start * _GAMMA_U
    for i in range(out.shape[0]):
        state, out[i] = next_uniform(state)


def uniforms(key: int, n: int, start: int = 0) -> np.ndarray:
    """Draws ``start .. start+n-1`` of stream ``key`` as doubles in [0, 1)."""
    out = np.empty(n, dtype=np.float64)
    _fill_uniforms(np.uint64(key), np.uint64(start), out)
    return out


@njit(cache=True)
def _child_keys(prefix, n):
    out = np.empty(n, dtype=np.uint64)
    for t in range(n):
        out[t] = child_key(prefix, np.uint64(t))
    return out


def trial_keys(seed: int, trials: int, *prefix: int) -> np.ndarray:
    """uint64 array of ``derive_key(seed, *prefix, t)`` for ``t < trials``."""
    if seed < 0 or trials < 0 or any(p < 0 for p in prefix):
        raise ValueError("seed, trials and stream indices must be non-negative")
    key = mix64(seed)
    for p in prefix:
        key = mix64(key ^ mix64((p * GAMMA + 1) & MASK64))
    return _child_keys(np.uint64(key), int(trials))
