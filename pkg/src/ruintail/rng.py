"""Counter-based random streams for reproducible parallel simulation.

Every draw is a pure function of ``(seed, stream_id, counter)``. The block
function is Philox4x64-10 with the same key/counter conventions as
:class:`numpy.random.Philox`, so ``RngStream(seed, sid)`` produces exactly the
raw 64-bit words of ``numpy.random.Philox(key=[seed, sid])``. The generator is
re-implemented here only because the simulation kernels run under numba and
need one independent stream per path without any shared global state.

State is held in two small arrays so that jitted kernels can advance it in
place:

``state`` (uint64[11])
    key (2 words), counter (4 words), output buffer (4 words), buffer position.
``gauss`` (float64[2])
    Cache flag and cached value for the second normal of each polar pair.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_TWO_M53 = 1.0 / 9007199254740992.0

STATE_SIZE = 11


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _SHIFT32
    b_lo = b & _MASK32
    b_hi = b >> _SHIFT32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _SHIFT32) + (p1 & _MASK32) + (p2 & _MASK32)
    hi = p3 + (p1 >> _SHIFT32) + (p2 >> _SHIFT32) + (mid >> _SHIFT32)
    return hi, a * b


@nb.njit(cache=True, inline="always")
def _refill(state):
    # 256-bit counter increment, then one Philox4x64-10 block into the buffer.
    state[2] += _ONE
    if state[2] == _ZERO:
        state[3] += _ONE
        if state[3] == _ZERO:
            state[4] += _ONE
            if state[4] == _ZERO:
                state[5] += _ONE
    k0 = state[0]
    k1 = state[1]
    c0 = state[2]
    c1 = state[3]
    c2 = state[4]
    c3 = state[5]
    for r in range(10):
        if r > 0:
            k0 += _W0
            k1 += _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    state[6] = c0
    state[7] = c1
    state[8] = c2
    state[9] = c3
    state[10] = _ZERO


@nb.njit(cache=True, inline="always")
def next_u64(state):
    pos = np.int64(state[10])
    if pos >= 4:
        _refill(state)
        pos = 0
    state[10] = np.uint64(pos + 1)
    return state[6 + pos]


@nb.njit(cache=True, inline="always")
def next_uniform(state):
    """Uniform on [0, 1) with 53 random bits."""
    return np.float64(next_u64(state) >> _SHIFT11) * _TWO_M53


@nb.njit(cache=True, inline="always")
def next_exponential(state, rate):
    return -math.log(1.0 - next_uniform(state)) / rate


@nb.njit(cache=True, inline="always")
def next_normal(state, gauss):
    if gauss[0] != 0.0:
        gauss[0] = 0.0
        return gauss[1]
    # Marsaglia polar method
    while True:
        x = 2.0 * next_uniform(state) - 1.0
        y = 2.0 * next_uniform(state) - 1.0
        r2 = x * x + y * y
        if 0.0 < r2 < 1.0:
            break
    f = math.sqrt(-2.0 * math.log(r2) / r2)
    gauss[0] = 1.0
    gauss[1] = f * y
    return f * x


@nb.njit(cache=True)
def init_state(state, gauss, seed, stream_id):
    state[0] = seed
    state[1] = stream_id
    for i in range(2, 10):
        state[i] = _ZERO
    state[10] = np.uint64(4)
    gauss[0] = 0.0
    gauss[1] = 0.0


def _as_u64(value: int) -> np.uint64:
    if not 0 <= int(value) < 2**64:
        raise ValueError(f"seed and stream_id must fit in 64 bits, got {value}")
    return np.uint64(int(value))


class RngStream:
    """One independent random stream keyed by ``(seed, stream_id)``.

    Two streams with the same key produce bit-identical sequences no matter
    which process or in which order they are consumed.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.state = np.empty(STATE_SIZE, dtype=np.uint64)
        self.gauss = np.zeros(2, dtype=np.float64)
        init_state(self.state, self.gauss, _as_u64(seed), _as_u64(stream_id))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def raw(self, n: int) -> np.ndarray:
        return _raw_batch(self.state, n)

    def uniform(self, n: int) -> np.ndarray:
        return _uniform_batch(self.state, n)

    def normal(self, n: int) -> np.ndarray:
        return _normal_batch(self.state, self.gauss, n)

    def exponential(self, rate: float, n: int) -> np.ndarray:
        return _exponential_batch(self.state, float(rate), n)


@nb.njit(cache=True)
def _raw_batch(state, n):
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = next_u64(state)
    return out


@nb.njit(cache=True)
def _uniform_batch(state, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = next_uniform(state)
    return out


@nb.njit(cache=True)
def _normal_batch(state, gauss, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = next_normal(state, gauss)
    return out


@nb.njit(cache=True)
def _exponential_batch(state, rate, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = next_exponential(state, rate)
    return out
