"""Pure-Python/numpy tile-coding kernels.

Fallback implementations of the hot hashing routines, kept bit-identical to
the compiled versions in `_speedups`. All hashing is 64-bit wrapping
arithmetic built on the murmur3 finalizer, so numpy uint64 vector code and
plain Python int code produce the same indices.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_MASK = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xFF51AFD7ED558CCD
_MIX2 = 0xC4CEB9FE1A85EC53


def fmix64(z: int) -> int:
    """murmur3 64-bit finalizer on a Python int, wrapping at 2**64."""
    z &= _MASK
    z ^= z >> 33
    z = (z * _MIX1) & _MASK
    z ^= z >> 33
    z = (z * _MIX2) & _MASK
    z ^= z >> 33
    return z


def fold_keys(coords: np.ndarray, seed: int) -> np.ndarray:
    """Fold per-tiling integer tile coordinates into one 64-bit key per tiling.

    coords has shape (num_tilings, num_dims) with small non-negative ints.
    """
    tilings, dims = coords.shape
    keys = np.empty(tilings, dtype=np.uint64)
    for t in range(tilings):
        k = fmix64((seed * _GOLD + t + 1) & _MASK)
        for d in range(dims):
            k = fmix64(k ^ ((int(coords[t, d]) * _GOLD + d + 1) & _MASK))
        keys[t] = k
    return keys


def features_for_action(keys: np.ndarray, action: int, segment: int) -> np.ndarray:
    """Active table indices for one action: tiling t lands in segment t."""
    tilings = keys.shape[0]
    out = np.empty(tilings, dtype=np.int64)
    salt = ((action + 1) * _GOLD) & _MASK
    for t in range(tilings):
        h = fmix64(int(keys[t]) ^ salt)
        out[t] = t * segment + h % segment
    return out


def scan_q(
    keys: np.ndarray, n_actions: int, segment: int, weights: np.ndarray
) -> np.ndarray:
    """Action values for every action index in [0, n_actions) at once.

    Vectorized over actions: per tiling, the context key is mixed with each
    action salt, reduced into that tiling's table segment, and the selected
    weights are accumulated.
    """
    salts = (np.arange(1, n_actions + 1, dtype=np.uint64)) * np.uint64(_GOLD)
    q = np.zeros(n_actions, dtype=np.float64)
    seg = np.uint64(segment)
    for t in range(keys.shape[0]):
        z = keys[t] ^ salts
        z ^= z >> np.uint64(33)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(33)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(33)
        idx = (z % seg).astype(np.int64) + t * segment
        q += weights[idx]
    return q
