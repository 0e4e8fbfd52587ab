"""Hashed tile coding of (mean context, action) pairs into sparse binary features.

The normalized context space is covered by `num_tilings` offset grids. Each
tiling hashes its tile coordinate together with the action index into its own
segment of the weight table, so a featurization always yields exactly
`num_tilings` distinct active indices. Neighboring contexts share tiles and
therefore features; the action participates in the hash, so different actions
map to (almost surely) different feature sets.

The hashing kernels come in two flavors selected at import time: a compiled
Cython extension (`_speedups`) and a numpy fallback (`_kernels`). Set
``VRANRL_KERNEL=python`` to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .domain import ContextBounds, ContextSample
from . import _kernels as _py_kernels

if os.environ.get("VRANRL_KERNEL", "").lower() == "python":
    _impl = _py_kernels
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _py_kernels


def kernel_backend() -> str:
    """Name of the active kernel implementation: 'compiled' or 'python'."""
    return _impl.BACKEND_NAME


@dataclass(frozen=True)
class TileCoderConfig:
    """Static tile-coder parameters.

    `table_size` is split into `num_tilings` equal segments (default
    8 x 512 = 4096 weight slots). `restrict_dims` optionally tiles only a
    subset of the context dimensions, e.g. (0, 1) for an SNR+buffer-only
    ablation.
    """

    bounds: ContextBounds
    num_tilings: int = 8
    tiles_per_dim: int = 8
    table_size: int = 4096
    seed: int = 0
    restrict_dims: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.num_tilings < 1:
            raise ValueError("num_tilings must be >= 1")
        if self.table_size < self.num_tilings:
            raise ValueError("table_size must be >= num_tilings")
        if self.tiles_per_dim < 1:
            raise ValueError("tiles_per_dim must be >= 1")
        if self.restrict_dims is not None:
            for d in self.restrict_dims:
                if not 0 <= d < len(self.bounds):
                    raise ValueError(f"restricted dim {d} outside context bounds")

    @property
    def segment(self) -> int:
        return self.table_size // self.num_tilings


@dataclass(frozen=True)
class FeatureSet:
    """Exactly `num_tilings` distinct active indices into the weight table."""

    active_indices: frozenset[int]


class TileCoder:
    """Turns contexts into tile coordinates and hashes them against actions."""

    def __init__(self, config: TileCoderConfig) -> None:
        self.config = config
        dims = (
            config.restrict_dims
            if config.restrict_dims is not None
            else tuple(range(len(config.bounds)))
        )
        self._dims = dims
        self._lo = np.array([config.bounds.dims[d][0] for d in dims])
        self._span = np.array(
            [config.bounds.dims[d][1] - config.bounds.dims[d][0] for d in dims]
        )
        t = np.arange(config.num_tilings)[:, None]
        odd = 2 * np.arange(len(dims))[None, :] + 1
        # standard asymmetric displacement: tiling t shifts dim d by
        # t*(2d+1)/num_tilings tile widths
        self._offsets = t * odd / config.num_tilings

    def coords(self, context: ContextSample) -> np.ndarray:
        """Integer tile coordinates, shape (num_tilings, dims). Out-of-bounds
        context values are clamped to the configured bounds."""
        v = np.asarray(context.values(), dtype=np.float64)[list(self._dims)]
        pos = np.clip((v - self._lo) / self._span, 0.0, 1.0) * self.config.tiles_per_dim
        return np.floor(pos[None, :] + self._offsets).astype(np.int64)

    def keys(self, context: ContextSample) -> np.ndarray:
        """Per-tiling 64-bit context keys (action not yet mixed in)."""
        return _impl.fold_keys(self.coords(context), self.config.seed)

    def featurize(self, context: ContextSample, action: int) -> FeatureSet:
        """Active feature indices for one (context, action) pair."""
        idx = _impl.features_for_action(
            self.keys(context), action, self.config.segment
        )
        return FeatureSet(active_indices=frozenset(int(i) for i in idx))

    def scan_action_values(
        self, weights: np.ndarray, context: ContextSample, n_actions: int
    ) -> np.ndarray:
        """q_hat for every action index in [0, n_actions), as one vector."""
        if len(weights) < self.config.table_size:
            raise IndexError("weight vector shorter than the feature table")
        return _impl.scan_q(
            self.keys(context), n_actions, self.config.segment, weights
        )


def q_hat(weights: np.ndarray, features: FeatureSet) -> float:
    """Linear action value: sum of the weights at the active (binary) features."""
    total = 0.0
    n = len(weights)
    for i in features.active_indices:
        if i >= n:
            raise IndexError(f"feature index {i} outside weight table of {n}")
        total += weights[i]
    return float(total)
