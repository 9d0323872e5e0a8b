# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled xorshift64* stream fills; draw-for-draw identical to ``_fallback.py``."""
from libc.math cimport cos, log, sqrt
from libc.stdint cimport uint64_t

cdef uint64_t XORSHIFT_MULT = 0x2545F4914F6CDD1D
cdef uint64_t LOW32 = 0xFFFFFFFF
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double INV_2_32 = 1.0 / 4294967296.0


cdef inline uint64_t _next(uint64_t* s) noexcept nogil:
    cdef uint64_t x = s[0]
    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    s[0] = x
    return x * XORSHIFT_MULT


def fill_uniform(uint64_t state, double[::1] out):
    cdef Py_ssize_t i
    cdef uint64_t z
    with nogil:
        for i in range(out.shape[0]):
            z = _next(&state)
            out[i] = <double>(z >> 11) * INV_2_53
    return state


def fill_normal(uint64_t state, double[::1] out):
    cdef Py_ssize_t i
    cdef uint64_t z
    cdef double u1, u2
    with nogil:
        for i in range(out.shape[0]):
            z = _next(&state)
            u1 = (<double>(z >> 32) + 0.5) * INV_2_32
            u2 = <double>(z & LOW32) * INV_2_32
            out[i] = sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)
    return state
