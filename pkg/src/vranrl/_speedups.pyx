# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled tile-coding kernels.

Hot-loop twins of `_kernels`: same hashing, same output, written as tight C
loops. The per-period action-value scan dominates simulation runtime, which
is why it lives here.
"""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

BACKEND_NAME = "compiled"

cdef uint64_t GOLD = 0x9E3779B97F4A7C15UL
cdef uint64_t MIX1 = 0xFF51AFD7ED558CCDUL
cdef uint64_t MIX2 = 0xC4CEB9FE1A85EC53UL


cdef inline uint64_t _fmix64(uint64_t z) nogil:
    z ^= z >> 33
    z *= MIX1
    z ^= z >> 33
    z *= MIX2
    z ^= z >> 33
    return z


def fmix64(z):
    """murmur3 64-bit finalizer (scalar, for parity tests)."""
    return int(_fmix64(<uint64_t> (z & 0xFFFFFFFFFFFFFFFF)))


def fold_keys(coords, seed):
    """Fold per-tiling tile coordinates into one 64-bit key per tiling."""
    cdef int64_t[:, ::1] c = np.ascontiguousarray(coords, dtype=np.int64)
    cdef Py_ssize_t tilings = c.shape[0]
    cdef Py_ssize_t dims = c.shape[1]
    out = np.empty(tilings, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef uint64_t k, s = <uint64_t> seed
    cdef Py_ssize_t t, d
    for t in range(tilings):
        k = _fmix64(s * GOLD + <uint64_t> (t + 1))
        for d in range(dims):
            k = _fmix64(k ^ (<uint64_t> c[t, d] * GOLD + <uint64_t> (d + 1)))
        o[t] = k
    return out


def features_for_action(keys, action, segment):
    """Active table indices for one action: tiling t lands in segment t."""
    cdef uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t tilings = k.shape[0]
    out = np.empty(tilings, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef uint64_t salt = (<uint64_t> (action + 1)) * GOLD
    cdef uint64_t seg = <uint64_t> segment
    cdef Py_ssize_t t
    for t in range(tilings):
        o[t] = t * segment + <int64_t> (_fmix64(k[t] ^ salt) % seg)
    return out


def scan_q(keys, n_actions, segment, weights):
    """Action values for every action index in [0, n_actions) at once."""
    cdef uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t tilings = k.shape[0]
    cdef Py_ssize_t n = n_actions
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] q = out
    cdef uint64_t seg = <uint64_t> segment
    cdef Py_ssize_t seg_i = segment
    cdef Py_ssize_t t, a, base
    cdef uint64_t salt, key
    with nogil:
        for t in range(tilings):
            key = k[t]
            base = t * seg_i
            for a in range(n):
                salt = (<uint64_t> (a + 1)) * GOLD
                q[a] += w[base + <Py_ssize_t> (_fmix64(key ^ salt) % seg)]
    return out
