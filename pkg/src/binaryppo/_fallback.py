"""Pure-Python PRNG stream fills; used when the compiled extension is unavailable.

Must stay draw-for-draw identical to ``_kernels.pyx``.
"""
import math

MASK64 = (1 << 64) - 1
XORSHIFT_MULT = 0x2545F4914F6CDD1D
TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0
INV_2_32 = 1.0 / 4294967296.0


def xorshift_next(state):
    """One xorshift64* step; returns ``(new_state, output)``."""
    x = state
    x ^= x >> 12
    x ^= (x << 25) & MASK64
    x ^= x >> 27
    return x, (x * XORSHIFT_MULT) & MASK64


def fill_uniform(state, out):
    for i in range(out.shape[0]):
        state, z = xorshift_next(state)
        out[i] = (z >> 11) * INV_2_53
    return state


def fill_normal(state, out):
    # Box-Muller on the two 32-bit halves of a single output word.
    for i in range(out.shape[0]):
        state, z = xorshift_next(state)
        u1 = ((z >> 32) + 0.5) * INV_2_32
        u2 = (z & 0xFFFFFFFF) * INV_2_32
        out[i] = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
    return state
