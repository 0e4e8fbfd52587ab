"""Slotted simulator of the heterogeneous vRAN downlink.

Per monitoring slot and per MT: traffic arrives into a FIFO buffer, the
committed (link, MCS, resource) assignment yields a transmission budget,
packets are sent FIFO with an SNR-dependent block error probability and ARQ
retransmission up to a retry cap, and the KPIs (loss fraction, mean MAC
latency), the delivered bytes, and the next context sample are produced.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import Assignment, ContextSample, SlotOutcome

CAP_TOL = 1e-9


@dataclass(frozen=True)
class LinkSpec:
    """One radio link: capacity, resource levels, and its MCS catalog.

    `rates` holds bits per resource unit per slot; `snr50`/`slope` are the
    logistic error-curve parameters per MCS. `level_values` are the resource
    amounts (in link units) an action's resource level maps to.
    """

    link_id: int
    name: str
    kind: str  # "rb" or "airtime"
    rho_max: float
    level_values: tuple[float, ...]
    rates: tuple[float, ...]
    snr50: tuple[float, ...]
    slope: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("rb", "airtime"):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.rho_max <= 0:
            raise ValueError("rho_max must be positive")
        if not self.level_values or any(v <= 0 for v in self.level_values):
            raise ValueError("level values must be positive")
        if list(self.level_values) != sorted(self.level_values):
            raise ValueError("level values must be ascending")
        if max(self.level_values) > self.rho_max + CAP_TOL:
            raise ValueError("level values cannot exceed rho_max")
        if not (len(self.rates) == len(self.snr50) == len(self.slope)):
            raise ValueError("rates, snr50 and slope must have equal length")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rate table must be strictly increasing in MCS")
        if any(b <= a for a, b in zip(self.snr50, self.snr50[1:])):
            raise ValueError("snr50 table must be strictly increasing in MCS")

    @property
    def mcs_count(self) -> int:
        return len(self.rates)

    @property
    def level_count(self) -> int:
        return len(self.level_values)

    def level_fraction(self, level: int) -> float:
        return self.level_values[level] / self.rho_max


@dataclass(frozen=True)
class TrafficSpec:
    """Offered downlink traffic and channel model for one MT."""

    load_mbps: float
    packet_bytes: int = 1250
    arrivals: str = "cbr"  # "cbr" or "poisson"
    snr_model: str = "uniform"  # "uniform" or "gauss-markov"
    snr_min_db: float = 8.0
    snr_max_db: float = 21.0
    gm_corr: float = 0.9

    def __post_init__(self) -> None:
        if self.load_mbps < 0:
            raise ValueError("load must be non-negative")
        if self.packet_bytes <= 0:
            raise ValueError("packet size must be positive")
        if self.arrivals not in ("cbr", "poisson"):
            raise ValueError(f"unknown arrival process {self.arrivals!r}")
        if self.snr_model not in ("uniform", "gauss-markov"):
            raise ValueError(f"unknown SNR model {self.snr_model!r}")
        if not self.snr_min_db < self.snr_max_db:
            raise ValueError("snr_min_db must be below snr_max_db")


@dataclass
class Packet:
    size_bytes: int
    arrival_s: float
    mt: int
    retx: int = 0


@dataclass
class SlotObservation:
    """What one MT yields from one slot: KPIs, context, and resource usage."""

    outcome: SlotOutcome
    context: ContextSample
    used_units: float  # resource units actually spent (incl. failed attempts)


def block_error_probability(link: LinkSpec, mcs: int, snr_db: float) -> float:
    """Logistic block error curve: 0.5 at snr50, falling with SNR, rising with MCS."""
    z = link.slope[mcs] * (snr_db - link.snr50[mcs])
    z = min(max(z, -60.0), 60.0)
    return 1.0 / (1.0 + math.exp(z))


def measure_throughput(
    outcomes: Sequence[SlotOutcome], slot_seconds: float
) -> float:
    """Delivered Mbps over a window of slot outcomes."""
    if not outcomes:
        raise ValueError("throughput needs at least one slot")
    bytes_total = sum(o.delivered_bytes for o in outcomes)
    return bytes_total * 8.0 / (len(outcomes) * slot_seconds) / 1e6


class VranEnv:
    """Mutable simulation state for one run; drive it with step_slot."""

    def __init__(
        self,
        links: Sequence[LinkSpec],
        traffic: Sequence[TrafficSpec],
        slot_seconds: float = 0.1,
        max_retx: int = 3,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.links = list(links)
        self.traffic = list(traffic)
        self.slot_seconds = slot_seconds
        self.max_retx = max_retx
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.n_mts = len(traffic)
        self.slot = 0
        self.queues: list[deque[Packet]] = [deque() for _ in traffic]
        self._carry_bytes = [0.0] * self.n_mts
        self.snr_db = [self.sample_snr(mt) for mt in range(self.n_mts)]
        # conservation counters, in bytes
        self.arrived_bytes = [0] * self.n_mts
        self.delivered_bytes = [0] * self.n_mts
        self.dropped_bytes = [0] * self.n_mts

    def queue_bytes(self, mt: int) -> int:
        return sum(p.size_bytes for p in self.queues[mt])

    def sample_snr(self, mt: int) -> float:
        """Next-slot SNR for one MT under its configured channel model."""
        spec = self.traffic[mt]
        if spec.snr_model == "uniform":
            return float(self.rng.uniform(spec.snr_min_db, spec.snr_max_db))
        mu = (spec.snr_min_db + spec.snr_max_db) / 2.0
        sigma = (spec.snr_max_db - spec.snr_min_db) / 4.0
        prev = self.snr_db[mt] if hasattr(self, "snr_db") else mu
        nxt = mu + spec.gm_corr * (prev - mu) + sigma * math.sqrt(
            1.0 - spec.gm_corr**2
        ) * float(self.rng.standard_normal())
        return float(min(max(nxt, spec.snr_min_db), spec.snr_max_db))

    def _enqueue_arrivals(self, mt: int, now_s: float) -> None:
        spec = self.traffic[mt]
        bytes_per_slot = spec.load_mbps * 1e6 * self.slot_seconds / 8.0
        if spec.arrivals == "cbr":
            self._carry_bytes[mt] += bytes_per_slot
            n = int(self._carry_bytes[mt] // spec.packet_bytes)
            self._carry_bytes[mt] -= n * spec.packet_bytes
        else:
            mean_pkts = bytes_per_slot / spec.packet_bytes
            n = int(self.rng.poisson(mean_pkts))
        for _ in range(n):
            self.queues[mt].append(Packet(spec.packet_bytes, now_s, mt))
            self.arrived_bytes[mt] += spec.packet_bytes

    def step_slot(
        self, assignments: Mapping[int, Assignment]
    ) -> list[SlotObservation]:
        """Advance one monitoring slot for all MTs under the given assignments."""
        per_link_rho = [0.0] * len(self.links)
        for mt in range(self.n_mts):
            a = assignments[mt]
            per_link_rho[a.link_id] += a.rho
        for link, rho in zip(self.links, per_link_rho):
            if rho > link.rho_max + CAP_TOL:
                raise RuntimeError(
                    f"capacity violated on link {link.name}: "
                    f"{rho} > {link.rho_max} (allocator bug)"
                )
        loads = tuple(
            min(rho / link.rho_max, 1.0)
            for link, rho in zip(self.links, per_link_rho)
        )

        now_s = self.slot * self.slot_seconds
        end_s = now_s + self.slot_seconds
        observations = []
        for mt in range(self.n_mts):
            self._enqueue_arrivals(mt, now_s)
            a = assignments[mt]
            link = self.links[a.link_id]
            snr = self.snr_db[mt]
            bler = block_error_probability(link, a.mcs_index, snr)
            budget = a.rho * link.rates[a.mcs_index]  # bits this slot
            spent = 0.0
            delivered = dropped = 0
            delivered_bytes = 0
            latencies = []
            q = self.queues[mt]
            while q and spent + q[0].size_bytes * 8 <= budget + CAP_TOL:
                pkt = q[0]
                spent += pkt.size_bytes * 8
                if float(self.rng.random()) < bler:
                    pkt.retx += 1
                    if pkt.retx > self.max_retx:
                        q.popleft()
                        dropped += 1
                        self.dropped_bytes[mt] += pkt.size_bytes
                else:
                    q.popleft()
                    delivered += 1
                    delivered_bytes += pkt.size_bytes
                    self.delivered_bytes[mt] += pkt.size_bytes
                    done_s = now_s + (spent / budget) * self.slot_seconds
                    latencies.append(done_s - pkt.arrival_s)
            if latencies:
                latency = sum(latencies) / len(latencies)
            elif q:
                latency = end_s - q[0].arrival_s  # head-of-line packet age
            else:
                latency = 0.0
            loss = dropped / (dropped + delivered) if dropped + delivered else 0.0
            outcome = SlotOutcome(
                loss=loss,
                latency_s=latency,
                delivered_bytes=delivered_bytes,
                queue_bytes=self.queue_bytes(mt),
            )
            context = ContextSample(
                snr_db=snr,
                buffer_bytes=outcome.queue_bytes,
                link_loads=loads,
            )
            used = spent / link.rates[a.mcs_index] if budget > 0 else 0.0
            observations.append(SlotObservation(outcome, context, used))
            self.snr_db[mt] = self.sample_snr(mt)
        self.slot += 1
        return observations
