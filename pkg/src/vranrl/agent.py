"""Differential semi-gradient SARSA over tile-coded features.

Holds the radio-policy machinery shared by the learning agents: weighted mean
contexts, epsilon-greedy selection over a full action-value scan, the
sequential per-MT decision pass with link-load carry-forward, Pareto-fair
refinement, and the per-period TD update of the weight vector and the
average-reward estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import (
    Assignment,
    ContextSample,
    DecodedAction,
    KpiTargets,
    decode_action,
    encode_action,
    action_count,
    mean_reward,
    slot_reward,
)
from .env import SlotObservation, VranEnv, block_error_probability
from .pareto import allocate, monotone_envelope
from .tilecoding import FeatureSet, TileCoder, q_hat
from .domain import SlotOutcome, RewardValue

SNAPSHOT_MAGIC = "vranrl-agent-state"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class DifferentialReturn:
    """Cumulative reward relative to the long-run average; the quantity the
    action values estimate. Kept as an explicit type purely for bookkeeping.
    """

    value: float


def weighted_mean_context(samples: Sequence[ContextSample]) -> ContextSample:
    """Componentwise mean with weights 1..N, so the latest slot counts most."""
    n = len(samples)
    if n == 0:
        raise ValueError("weighted_mean_context requires at least one sample")
    if n == 1:
        return samples[0]
    total = n * (n + 1) / 2
    loads_len = len(samples[0].link_loads)
    snr = 0.0
    buf = 0.0
    loads = [0.0] * loads_len
    for i, s in enumerate(samples):
        if len(s.link_loads) != loads_len:
            raise ValueError("context samples disagree on link count")
        w = (i + 1) / total
        snr += w * s.snr_db
        buf += w * s.buffer_bytes
        for l in range(loads_len):
            loads[l] += w * s.link_loads[l]
    return ContextSample(snr_db=snr, buffer_bytes=buf, link_loads=tuple(loads))


def select_epsilon_greedy(
    q_values: np.ndarray, epsilon: float, rng: np.random.Generator
) -> tuple[int, bool]:
    """Argmax with probability 1-epsilon (lowest index on ties), else uniform.

    Returns (action, greedy_flag); the flag is False on exploratory draws even
    if they happen to hit the argmax.
    """
    if len(q_values) == 0:
        raise ValueError("empty action-value vector")
    if float(rng.random()) < epsilon:
        return int(rng.integers(len(q_values))), False
    return int(np.argmax(q_values)), True


def td_error(mean_rew: float, r_hat: float, q_prev: float, q_next: float) -> float:
    """Temporal-difference error of one period transition."""
    return mean_rew - r_hat + q_next - q_prev


@dataclass
class Decision:
    """Output of one decision pass: what each MT will apply next period."""

    assignments: dict[int, Assignment]
    greedy_actions: dict[int, int]  # epsilon-greedy picks before refinement
    greedy_flags: dict[int, bool]
    features: dict[int, FeatureSet]  # of (selection context, applied action)
    selection_contexts: dict[int, ContextSample]


@dataclass(frozen=True)
class PeriodTrace:
    """Everything one MT produced in one decision period."""

    mt: int
    period: int
    slot_contexts: tuple[ContextSample, ...]
    slot_rewards: tuple[RewardValue, ...]
    slot_outcomes: tuple[SlotOutcome, ...]
    slot_used_units: tuple[float, ...]
    mean_context: ContextSample
    mean_reward: float
    greedy_action: int
    applied_action: int
    applied_during: Assignment
    epsilon: float
    r_hat: float


class TileCodedPolicy:
    """Shared selection machinery for the SARSA agent and the bandit baseline."""

    kind = "base"

    def __init__(
        self,
        catalog: Sequence,
        coder: TileCoder,
        n_mts: int,
        *,
        epsilon0: float = 0.5,
        epsilon_decay: float = 0.999,
        alpha: float = 0.01,
        decision_slots: int = 1,
        criterion: str = "q",
        targets: KpiTargets | None = None,
        slot_seconds: float = 0.1,
        max_retx: int = 3,
    ) -> None:
        if not 0.0 <= epsilon0 <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if decision_slots < 1:
            raise ValueError("decision_slots must be >= 1")
        if criterion not in ("q", "model"):
            raise ValueError(f"unknown criterion mode {criterion!r}")
        self.catalog = list(catalog)
        self.coder = coder
        self.n_mts = n_mts
        self.n_actions = action_count(catalog)
        self.weights = np.zeros(coder.config.table_size)
        self.epsilon0 = epsilon0
        self.epsilon_decay = epsilon_decay
        self.periods_done = 0
        self.alpha = alpha
        self.decision_slots = decision_slots
        self.criterion = criterion
        self.targets = targets if targets is not None else KpiTargets()
        self.slot_seconds = slot_seconds
        self.max_retx = max_retx

    @property
    def epsilon(self) -> float:
        # closed form keeps the schedule exact: eps0 * decay**periods
        return self.epsilon0 * self.epsilon_decay**self.periods_done

    def action_values(
        self, mean_context: ContextSample
    ) -> np.ndarray:
        return self.coder.scan_action_values(
            self.weights, mean_context, self.n_actions
        )

    def _criterion_for(
        self, ctx: ContextSample, decoded: DecodedAction, q: np.ndarray
    ):
        link = self.catalog[decoded.link_id]
        if self.criterion == "q":
            raw = [
                q[encode_action(decoded.link_id, decoded.mcs_index, lvl, self.catalog)]
                for lvl in range(link.level_count)
            ]
        else:
            raw = [
                self._predicted_reward(ctx, link, decoded.mcs_index, v)
                for v in link.level_values
            ]
        return monotone_envelope(link.level_values, raw)

    def _predicted_reward(self, ctx, link, mcs, rho) -> float:
        # crude capacity model used only by the "model" criterion ablation
        bler = block_error_probability(link, mcs, ctx.snr_db)
        demand_bits = max(ctx.buffer_bytes * 8.0, 1.0)
        service = max(rho * link.rates[mcs] * (1.0 - bler), 1e-9)
        latency = self.slot_seconds * min(demand_bits / service, 10.0)
        loss = min(bler ** (self.max_retx + 1), 1.0)
        outcome = SlotOutcome(
            loss=loss, latency_s=latency, delivered_bytes=0, queue_bytes=0
        )
        return slot_reward(outcome, self.targets).total

    def decide(
        self,
        mean_contexts: Sequence[ContextSample],
        rng: np.random.Generator,
        base_loads: Sequence[float] | None = None,
    ) -> Decision:
        """One sequential decision pass over all MTs, then Pareto refinement.

        While iterating MTs in index order, the link-load components of each
        MT's mean context are overwritten with the carried-over loads plus the
        loads implied by the picks already made this period. Epsilon decays
        once at the end.
        """
        loads = list(base_loads) if base_loads is not None else [0.0] * len(self.catalog)
        eps = self.epsilon
        greedy_actions: dict[int, int] = {}
        greedy_flags: dict[int, bool] = {}
        decoded: dict[int, DecodedAction] = {}
        criteria = {}
        sel_ctxs: dict[int, ContextSample] = {}
        for mt, mean_ctx in enumerate(mean_contexts):
            ctx = replace(
                mean_ctx, link_loads=tuple(min(l, 1.0) for l in loads)
            )
            sel_ctxs[mt] = ctx
            q = self.action_values(ctx)
            a, was_greedy = select_epsilon_greedy(q, eps, rng)
            d = decode_action(a, self.catalog)
            greedy_actions[mt] = a
            greedy_flags[mt] = was_greedy
            decoded[mt] = d
            link = self.catalog[d.link_id]
            loads[d.link_id] += link.level_values[d.resource_level] / link.rho_max
            criteria[mt] = self._criterion_for(ctx, d, q)
        assignments = allocate(decoded, self.catalog, criteria)
        features = {
            mt: self.coder.featurize(sel_ctxs[mt], assignments[mt].action)
            for mt in assignments
        }
        self.periods_done += 1
        return Decision(
            assignments=assignments,
            greedy_actions=greedy_actions,
            greedy_flags=greedy_flags,
            features=features,
            selection_contexts=sel_ctxs,
        )

    def learn(
        self,
        mean_rewards: Sequence[float],
        prev_decision: Decision,
        decision: Decision,
    ) -> None:
        raise NotImplementedError

    def r_hat_value(self, mt: int) -> float:
        return 0.0


class SarsaAgent(TileCodedPolicy):
    """Differential semi-gradient SARSA: one shared weight vector, one
    average-reward estimate per MT (or a single shared one)."""

    kind = "sarsa"

    def __init__(
        self,
        catalog: Sequence,
        coder: TileCoder,
        n_mts: int,
        *,
        beta: float = 0.01,
        shared_r_hat: bool = False,
        **kwargs,
    ) -> None:
        super().__init__(catalog, coder, n_mts, **kwargs)
        if not 0.0 < beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        self.beta = beta
        self.shared_r_hat = shared_r_hat
        self.r_hat = np.zeros(1 if shared_r_hat else n_mts)

    def r_hat_value(self, mt: int) -> float:
        return float(self.r_hat[0 if self.shared_r_hat else mt])

    def td_error(
        self,
        mt: int,
        mean_rew: float,
        features_prev: FeatureSet,
        features_next: FeatureSet,
    ) -> float:
        return td_error(
            mean_rew,
            self.r_hat_value(mt),
            q_hat(self.weights, features_prev),
            q_hat(self.weights, features_next),
        )

    def apply_update(self, mt: int, delta: float, features: FeatureSet) -> None:
        """Move r_hat by beta*delta and each active weight by alpha*delta."""
        self.r_hat[0 if self.shared_r_hat else mt] += self.beta * delta
        for f in features.active_indices:
            self.weights[f] += self.alpha * delta

    def learn(self, mean_rewards, prev_decision, decision) -> None:
        for mt in range(self.n_mts):
            delta = self.td_error(
                mt,
                mean_rewards[mt],
                prev_decision.features[mt],
                decision.features[mt],
            )
            self.apply_update(mt, delta, prev_decision.features[mt])


def bootstrap_assignments(
    catalog: Sequence, n_mts: int
) -> dict[int, Assignment]:
    """Initial applied actions before any decision exists: first link, lowest
    MCS, maximum resource level, run through the allocator so capacity holds.
    """
    top = catalog[0].level_count - 1
    decoded = {mt: DecodedAction(0, 0, top) for mt in range(n_mts)}
    flat = {mt: (lambda rho: 0.0) for mt in range(n_mts)}
    return allocate(decoded, catalog, flat)


class ExperimentDriver:
    """Runs decision periods: apply, observe, average, decide, update."""

    def __init__(
        self,
        policy,
        env: VranEnv,
        targets: KpiTargets,
        rng: np.random.Generator,
    ) -> None:
        self.policy = policy
        self.env = env
        self.targets = targets
        self.rng = rng
        self.period = 0
        self.prev_decision: Decision | None = None
        self.prev_mean_ctx: list[ContextSample] | None = None
        self.applied = bootstrap_assignments(policy.catalog, env.n_mts)

    def run_period(self) -> list[PeriodTrace]:
        """Advance N monitoring slots under the standing actions, then decide
        for the next period and apply the TD update."""
        n = self.policy.decision_slots
        k = self.env.n_mts
        slots: list[list[SlotObservation]] = [
            self.env.step_slot(self.applied) for _ in range(n)
        ]
        mean_ctxs: list[ContextSample] = []
        mean_rews: list[float] = []
        per_mt = []
        for mt in range(k):
            obs = [slots[s][mt] for s in range(n)]
            rewards = [slot_reward(o.outcome, self.targets) for o in obs]
            contexts = [o.context for o in obs]
            if n >= 2 and self.prev_mean_ctx is not None:
                # period boundary carries the previous mean context as the
                # first slot's context sample (degenerate at N = 1, where the
                # observed slot is used instead)
                contexts[0] = self.prev_mean_ctx[mt]
            m_ctx = weighted_mean_context(contexts)
            m_rew = mean_reward([r.total for r in rewards], n)
            mean_ctxs.append(m_ctx)
            mean_rews.append(m_rew)
            per_mt.append((obs, rewards, contexts))
        decision = self.policy.decide(mean_ctxs, self.rng)
        if self.prev_decision is not None:
            self.policy.learn(mean_rews, self.prev_decision, decision)
        traces = []
        for mt in range(k):
            obs, rewards, contexts = per_mt[mt]
            traces.append(
                PeriodTrace(
                    mt=mt,
                    period=self.period,
                    slot_contexts=tuple(contexts),
                    slot_rewards=tuple(rewards),
                    slot_outcomes=tuple(o.outcome for o in obs),
                    slot_used_units=tuple(o.used_units for o in obs),
                    mean_context=mean_ctxs[mt],
                    mean_reward=mean_rews[mt],
                    greedy_action=decision.greedy_actions.get(mt, -1),
                    applied_action=decision.assignments[mt].action,
                    applied_during=self.applied[mt],
                    epsilon=self.policy.epsilon,
                    r_hat=self.policy.r_hat_value(mt),
                )
            )
        self.applied = decision.assignments
        self.prev_decision = decision
        self.prev_mean_ctx = mean_ctxs
        self.period += 1
        return traces


def save_snapshot(policy, path: str | Path) -> None:
    """Serialize a learning policy's state to a versioned JSON snapshot."""
    coder_cfg = policy.coder.config
    state = {
        "magic": SNAPSHOT_MAGIC,
        "version": SNAPSHOT_VERSION,
        "kind": policy.kind,
        "table_size": coder_cfg.table_size,
        "weights": policy.weights.tolist(),
        "epsilon0": policy.epsilon0,
        "epsilon_decay": policy.epsilon_decay,
        "periods_done": policy.periods_done,
        "alpha": policy.alpha,
        "decision_slots": policy.decision_slots,
        "coder_seed": coder_cfg.seed,
        "num_tilings": coder_cfg.num_tilings,
        "tiles_per_dim": coder_cfg.tiles_per_dim,
        "bounds": [list(d) for d in coder_cfg.bounds.dims],
        "restrict_dims": list(coder_cfg.restrict_dims)
        if coder_cfg.restrict_dims is not None
        else None,
    }
    if policy.kind == "sarsa":
        state["beta"] = policy.beta
        state["shared_r_hat"] = policy.shared_r_hat
        state["r_hat"] = policy.r_hat.tolist()
    Path(path).write_text(json.dumps(state))


def load_snapshot(path: str | Path) -> dict:
    """Read and validate a snapshot file; returns the raw state dict."""
    state = json.loads(Path(path).read_text())
    if state.get("magic") != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not an agent snapshot (bad magic)")
    if state.get("version") != SNAPSHOT_VERSION:
        raise ValueError(
            f"{path}: unsupported snapshot version {state.get('version')}"
        )
    return state


def restore_policy_state(policy, state: dict) -> None:
    """Apply a loaded snapshot onto a freshly built policy (pre-training)."""
    if state["kind"] != policy.kind:
        raise ValueError(
            f"snapshot holds a {state['kind']!r} policy, config asks for {policy.kind!r}"
        )
    cfg = policy.coder.config
    geometry = {
        "table_size": cfg.table_size,
        "coder_seed": cfg.seed,
        "num_tilings": cfg.num_tilings,
        "tiles_per_dim": cfg.tiles_per_dim,
        "bounds": [list(d) for d in cfg.bounds.dims],
        "restrict_dims": list(cfg.restrict_dims)
        if cfg.restrict_dims is not None
        else None,
    }
    for key, want in geometry.items():
        if state.get(key) != want:
            raise ValueError(
                f"snapshot tile-coder geometry differs on {key!r}: "
                f"{state.get(key)} vs {want}; weights are not transferable"
            )
    policy.weights = np.asarray(state["weights"], dtype=np.float64)
    policy.periods_done = int(state["periods_done"])
    if policy.kind == "sarsa":
        r_hat = np.asarray(state["r_hat"], dtype=np.float64)
        if r_hat.shape != policy.r_hat.shape:
            raise ValueError("snapshot r_hat shape does not match the MT count")
        policy.r_hat = r_hat
