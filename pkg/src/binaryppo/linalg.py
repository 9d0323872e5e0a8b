"""Dense float64 matrix helpers and the project PRNG.

Matrices are plain 2-D ``float64`` numpy arrays. ``Rng`` implements Vigna's
xorshift64* generator::

    x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
    output = x * 0x2545F4914F6CDD1D  (mod 2**64)

seeded through one round of splitmix64 so that small or zero seeds still give
a well-mixed, non-zero state. Every draw advances the state exactly once:

* ``uniform``: top 53 output bits scaled to [0, 1).
* ``normal``: Box-Muller on the two 32-bit halves of one output word.

Streams are bit-identical between the compiled and fallback backends.
"""
from __future__ import annotations

import numpy as np

from . import _fallback
from .backend import kernels
from .errors import ShapeError

MASK64 = _fallback.MASK64


def as_matrix(a) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit conformability check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys) -> int:
    """Deterministically mix ``seed`` with integer/string keys into a new 64-bit seed."""
    h = splitmix64(seed & MASK64)
    for key in keys:
        if isinstance(key, str):
            for byte in key.encode("utf-8"):
                h = splitmix64(h ^ byte)
        else:
            h = splitmix64(h ^ (int(key) & MASK64))
    return h


class Rng:
    """Seedable xorshift64* stream. Single owner; split with :meth:`spawn`."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        state = splitmix64(self.seed & MASK64)
        self.state = state if state else 0x9E3779B97F4A7C15

    def __repr__(self):
        return f"Rng(seed={self.seed}, state=0x{self.state:016x})"

    def next_u64(self) -> int:
        self.state, z = _fallback.xorshift_next(self.state)
        return z

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _fallback.INV_2_53

    def normal(self) -> float:
        out = np.empty(1)
        self.state = _fallback.fill_normal(self.state, out)
        return float(out[0])

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.float64)
        self.state = kernels.fill_uniform(self.state, out)
        return out

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.float64)
        self.state = kernels.fill_normal(self.state, out)
        return out

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers uniform on ``[0, high)``."""
        if high < 1:
            raise ValueError("high must be >= 1")
        idx = np.floor(self.uniforms(n) * high).astype(np.int64)
        return np.minimum(idx, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniforms(n), kind="stable")

    def spawn(self, *keys) -> "Rng":
        """Independent child stream; consumes one draw from this stream."""
        return Rng(derive_seed(self.next_u64(), *keys))


def rng_from_state(state: int, seed: int = 0) -> Rng:
    """Rebuild a generator positioned at a recorded ``state``."""
    rng = Rng(seed)
    rng.state = int(state) & MASK64
    return rng
