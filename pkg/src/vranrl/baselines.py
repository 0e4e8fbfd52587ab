"""Comparison policies: a contextual bandit and a static CQI-driven LTE stand-in.

The bandit shares the tile coding and epsilon-greedy selection of the SARSA
agent; its update regresses the weights toward the immediate mean reward with
no average-reward term and no bootstrapped next-state value. The static
policy maps reported SNR to an MCS through a CQI-style threshold table and
always splits the link's resources equally across its MTs.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import Assignment, ContextSample, DecodedAction, KpiTargets
from .agent import Decision, TileCodedPolicy, select_epsilon_greedy
from .tilecoding import FeatureSet, q_hat


class BanditAgent(TileCodedPolicy):
    """Contextual bandit twin of the SARSA agent: same features, same
    selection, myopic update target."""

    kind = "cb"

    def cb_select(
        self, mean_context: ContextSample, rng: np.random.Generator
    ) -> tuple[int, bool]:
        """Epsilon-greedy pick over the full action-value scan (shared path)."""
        return select_epsilon_greedy(
            self.action_values(mean_context), self.epsilon, rng
        )

    def cb_update(self, mean_rew: float, features: FeatureSet) -> None:
        """w_f += alpha * (mean reward - q_hat) on the active features only."""
        delta = mean_rew - q_hat(self.weights, features)
        for f in features.active_indices:
            self.weights[f] += self.alpha * delta

    def learn(self, mean_rewards, prev_decision, decision) -> None:
        for mt in range(self.n_mts):
            self.cb_update(mean_rewards[mt], prev_decision.features[mt])


@dataclass(frozen=True)
class CqiTable:
    """Ordered (snr_threshold_db, mcs_index) pairs driving static MCS choice."""

    entries: tuple[tuple[float, int], ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("CQI table must not be empty")
        thresholds = [t for t, _ in self.entries]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("CQI thresholds must be strictly increasing")
        mcs = [m for _, m in self.entries]
        if any(b < a for a, b in zip(mcs, mcs[1:])):
            raise ValueError("CQI MCS indices must be non-decreasing")

    def lookup(self, snr_db: float) -> int:
        """MCS of the highest threshold not above snr; the lowest MCS below the table."""
        thresholds = [t for t, _ in self.entries]
        i = bisect_right(thresholds, snr_db) - 1
        return self.entries[max(i, 0)][1]


def default_cqi_table(link) -> CqiTable:
    """15 evenly spaced thresholds over [0, 22] dB mapped onto the MCS catalog."""
    n = 15
    entries = []
    for c in range(n):
        thr = 22.0 * c / (n - 1)
        mcs = round(c * (link.mcs_count - 1) / (n - 1))
        entries.append((thr, mcs))
    return CqiTable(entries=tuple(entries))


def static_lte_select(
    snr_db: float, table: CqiTable, link, n_mts: int
) -> tuple[DecodedAction, float]:
    """Static standard-LTE-style choice: CQI-mapped MCS, equal resource split.

    Returns the decoded action (resource level floored to the catalog) and the
    exact per-MT share actually applied.
    """
    mcs = table.lookup(snr_db)
    share = link.rho_max / n_mts
    i = bisect_right(list(link.level_values), share + 1e-9) - 1
    return DecodedAction(link.link_id, mcs, max(i, 0)), share


class StaticLtePolicy:
    """Non-learning baseline: CQI table on link 0, equal split across MTs."""

    kind = "static-lte"

    def __init__(
        self,
        catalog: Sequence,
        n_mts: int,
        table: CqiTable | None = None,
        decision_slots: int = 1,
        targets: KpiTargets | None = None,
    ) -> None:
        self.catalog = list(catalog)
        self.n_mts = n_mts
        self.link = self.catalog[0]
        self.table = table if table is not None else default_cqi_table(self.link)
        self.decision_slots = decision_slots
        self.targets = targets if targets is not None else KpiTargets()
        self.epsilon = 0.0
        self.periods_done = 0

    def r_hat_value(self, mt: int) -> float:
        return 0.0

    def decide(
        self,
        mean_contexts: Sequence[ContextSample],
        rng: np.random.Generator,
        base_loads: Sequence[float] | None = None,
    ) -> Decision:
        from .domain import encode_action

        assignments = {}
        greedy_actions = {}
        for mt, ctx in enumerate(mean_contexts):
            decoded, share = static_lte_select(
                ctx.snr_db, self.table, self.link, self.n_mts
            )
            action = encode_action(
                decoded.link_id, decoded.mcs_index, decoded.resource_level, self.catalog
            )
            assignments[mt] = Assignment(
                mt=mt,
                action=action,
                link_id=decoded.link_id,
                mcs_index=decoded.mcs_index,
                resource_level=decoded.resource_level,
                rho=share,
            )
            greedy_actions[mt] = action
        self.periods_done += 1
        return Decision(
            assignments=assignments,
            greedy_actions=greedy_actions,
            greedy_flags={mt: True for mt in assignments},
            features={mt: None for mt in assignments},
            selection_contexts={mt: c for mt, c in enumerate(mean_contexts)},
        )

    def learn(self, mean_rewards, prev_decision, decision) -> None:
        pass
