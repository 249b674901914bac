"""Seeded random number generation.

All randomness in the package flows through :class:`Xoshiro256`, an
implementation of xoshiro256** (Blackman & Vigna) whose 256-bit state is
filled from the seed by four SplitMix64 outputs.  Derived quantities use
fixed recipes so that another implementation following the same recipes
reproduces every draw:

* ``random``   -- ``(next >> 11) * 2**-53``, a float in [0, 1)
* ``integers`` -- unbiased ``next % bound`` with rejection of the low
  ``2**64 mod bound`` values
* ``permutation`` -- Fisher-Yates, ``i`` from ``n-1`` down to ``1``,
  swap with ``integers(i + 1)``
* ``normal``   -- Box-Muller on pairs ``(u1, u2)`` of ``random`` draws,
  radius from ``1 - u1``; both the cosine and sine outputs are used

Per-task seeds come from :func:`derive_seed`, which hashes the root seed
together with task labels, so concurrent and serial runs draw identical
streams.
"""
from __future__ import annotations

import hashlib

import numba
import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> tuple[int, int]:
    """One SplitMix64 step. Returns ``(new_state, output)``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def derive_seed(root: int, *labels) -> int:
    """Deterministic 64-bit child seed for ``(root, *labels)``."""
    key = "|".join([str(int(root))] + [str(lab) for lab in labels])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


@numba.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@numba.njit(cache=True)
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(cache=True)
def _fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = _next(s)


@numba.njit(cache=True)
def _fill_uniform(s, out):
    scale = 1.0 / 9007199254740992.0
    for i in range(out.shape[0]):
        out[i] = np.float64(_next(s) >> np.uint64(11)) * scale


@numba.njit(cache=True)
def _bounded(s, bound):
    b = np.uint64(bound)
    threshold = (np.uint64(0) - b) % b
    while True:
        r = _next(s)
        if r >= threshold:
            return np.int64(r % b)


@numba.njit(cache=True)
def _fill_integers(s, bound, out):
    for i in range(out.shape[0]):
        out[i] = _bounded(s, bound)


@numba.njit(cache=True)
def _shuffle(s, arr):
    for i in range(arr.shape[0] - 1, 0, -1):
        j = _bounded(s, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


@numba.njit(cache=True)
def _fill_normal(s, out):
    scale = 1.0 / 9007199254740992.0
    n = out.shape[0]
    i = 0
    while i < n:
        u1 = np.float64(_next(s) >> np.uint64(11)) * scale
        u2 = np.float64(_next(s) >> np.uint64(11)) * scale
        r = np.sqrt(-2.0 * np.log(1.0 - u1))
        out[i] = r * np.cos(2.0 * np.pi * u2)
        if i + 1 < n:
            out[i + 1] = r * np.sin(2.0 * np.pi * u2)
        i += 2


class Xoshiro256:
    """xoshiro256** generator with a numpy-friendly surface."""

    def __init__(self, seed: int):
        x = int(seed) & _MASK64
        words = []
        for _ in range(4):
            x, out = splitmix64(x)
            words.append(out)
        self._s = np.array(words, dtype=np.uint64)

    @property
    def state(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self._s)

    def next_u64(self, size: int) -> np.ndarray:
        out = np.empty(int(size), dtype=np.uint64)
        _fill_u64(self._s, out)
        return out

    def random(self, size=None):
        if size is None:
            out = np.empty(1)
            _fill_uniform(self._s, out)
            return float(out[0])
        shape = (size,) if np.isscalar(size) else tuple(size)
        out = np.empty(int(np.prod(shape)))
        _fill_uniform(self._s, out)
        return out.reshape(shape)

    def uniform(self, low: float, high: float, size=None):
        return low + (high - low) * self.random(size)

    def integers(self, bound: int, size: int) -> np.ndarray:
        if bound < 1:
            raise ValueError("bound must be >= 1")
        out = np.empty(int(size), dtype=np.int64)
        _fill_integers(self._s, int(bound), out)
        return out

    def permutation(self, n: int) -> np.ndarray:
        arr = np.arange(int(n), dtype=np.int64)
        _shuffle(self._s, arr)
        return arr

    def shuffle(self, arr: np.ndarray) -> None:
        """In-place Fisher-Yates on a 1-D int64 array."""
        if arr.dtype != np.int64 or arr.ndim != 1:
            raise TypeError("shuffle expects a 1-D int64 array")
        _shuffle(self._s, arr)

    def normal(self, size: int) -> np.ndarray:
        out = np.empty(int(size))
        _fill_normal(self._s, out)
        return out
