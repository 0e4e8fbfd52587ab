"""Shared domain types, the action codec, and the reward algebra.

Everything in this module is an immutable value or a pure function, so it is
safe to share across threads and simulation replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

# Action indices are plain non-negative ints; the codec validates ranges.
ActionIndex = int

_LOAD_TOL = 1e-9


@dataclass(frozen=True)
class KpiTargets:
    """Per-flow KPI targets: packet-loss rate as a fraction, latency in seconds."""

    loss: float = 0.01
    latency_s: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError(f"loss target must be in [0, 1], got {self.loss}")
        if self.latency_s <= 0.0:
            raise ValueError(f"latency target must be > 0, got {self.latency_s}")


@dataclass(frozen=True)
class ContextSample:
    """Per-MT observation: SNR in dB, queued bytes, and per-link load fractions.

    `buffer_bytes` is an integer for raw slot observations but becomes
    fractional for weighted-mean contexts, so it is stored as a float.
    """

    snr_db: float
    buffer_bytes: float
    link_loads: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.buffer_bytes < 0:
            raise ValueError("buffer_bytes must be non-negative")
        for l in self.link_loads:
            if not -_LOAD_TOL <= l <= 1.0 + _LOAD_TOL:
                raise ValueError(f"link load {l} outside [0, 1]")

    def values(self) -> tuple[float, ...]:
        """Flat vector (snr, buffer, load_0, ..., load_{L-1}) used for tiling."""
        return (self.snr_db, float(self.buffer_bytes), *self.link_loads)


@dataclass(frozen=True)
class ContextBounds:
    """Per-dimension (min, max) pairs used to normalize contexts before tiling."""

    dims: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        for lo, hi in self.dims:
            if not lo < hi:
                raise ValueError(f"bounds require min < max, got ({lo}, {hi})")

    def __len__(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class DecodedAction:
    """The (link, MCS, resource level) triple behind a single action index."""

    link_id: int
    mcs_index: int
    resource_level: int


@dataclass(frozen=True)
class SlotOutcome:
    """Per-MT per-slot KPIs observed at the MAC layer."""

    loss: float
    latency_s: float
    delivered_bytes: int
    queue_bytes: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError(f"loss fraction {self.loss} outside [0, 1]")
        if self.latency_s < 0.0:
            raise ValueError("latency must be non-negative")
        if self.delivered_bytes < 0 or self.queue_bytes < 0:
            raise ValueError("byte counts must be non-negative")


@dataclass(frozen=True)
class RewardValue:
    """Reward split into its loss and latency components; total = r_x + r_l."""

    r_x: float
    r_l: float
    total: float


@dataclass(frozen=True)
class Assignment:
    """A committed radio decision for one MT: the encoded action plus the
    actual resource amount `rho` (in link units) the scheduler applies.

    `rho` normally equals the catalog value of `resource_level`; it only
    deviates when the fair allocator had to fall back to proportional
    scaling on a link whose smallest levels still overflow capacity.
    """

    mt: int
    action: ActionIndex
    link_id: int
    mcs_index: int
    resource_level: int
    rho: float


def action_count(link_catalog: Sequence) -> int:
    """Total number of encodable actions, sum of i_l * p_l over links."""
    return sum(link.mcs_count * link.level_count for link in link_catalog)


def encode_action(
    link_id: int, mcs_index: int, resource_level: int, link_catalog: Sequence
) -> ActionIndex:
    """Map a (link, MCS, resource level) triple onto a single action index.

    Links occupy contiguous blocks in catalog order; within a block the
    layout is resource-major: value = level * mcs_count + mcs.
    """
    if not 0 <= link_id < len(link_catalog):
        raise IndexError(f"link_id {link_id} outside catalog of {len(link_catalog)}")
    link = link_catalog[link_id]
    if not 0 <= mcs_index < link.mcs_count:
        raise IndexError(f"mcs_index {mcs_index} outside [0, {link.mcs_count})")
    if not 0 <= resource_level < link.level_count:
        raise IndexError(
            f"resource_level {resource_level} outside [0, {link.level_count})"
        )
    offset = sum(
        l.mcs_count * l.level_count for l in link_catalog[:link_id]
    )
    return offset + resource_level * link.mcs_count + mcs_index


def decode_action(a: ActionIndex, link_catalog: Sequence) -> DecodedAction:
    """Inverse of encode_action."""
    if a < 0:
        raise IndexError(f"action index {a} is negative")
    offset = 0
    for link_id, link in enumerate(link_catalog):
        block = link.mcs_count * link.level_count
        if a < offset + block:
            within = a - offset
            return DecodedAction(
                link_id=link_id,
                mcs_index=within % link.mcs_count,
                resource_level=within // link.mcs_count,
            )
        offset += block
    raise IndexError(f"action index {a} outside action space of {offset}")


def reward_component(observed: float, threshold: float) -> float:
    """Reward for one KPI: 1 - erf(th - obs) when met (obs <= th), erf(th - obs) otherwise.

    Equals 1 exactly at the threshold, stays in (0, 1] on the met side and in
    [-1, 0) once the threshold is violated.
    """
    diff = threshold - observed
    if observed <= threshold:
        return 1.0 - math.erf(diff)
    return math.erf(diff)


def slot_reward(outcome: SlotOutcome, targets: KpiTargets) -> RewardValue:
    """Per-slot reward: sum of the loss and latency components, in [-2, 2]."""
    r_x = reward_component(outcome.loss, targets.loss)
    r_l = reward_component(outcome.latency_s, targets.latency_s)
    return RewardValue(r_x=r_x, r_l=r_l, total=r_x + r_l)


def mean_reward(slot_rewards: Sequence[float], n: int) -> float:
    """Arithmetic mean of the N per-slot rewards of one decision period."""
    if n < 1 or len(slot_rewards) == 0:
        raise ValueError("mean_reward requires at least one slot reward")
    if len(slot_rewards) != n:
        raise ValueError(f"expected {n} slot rewards, got {len(slot_rewards)}")
    return sum(slot_rewards) / n
