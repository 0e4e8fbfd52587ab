"""Scenario configs, the experiment runner, CSV metrics, and summaries.

A scenario lives in one INI-style text file with sections [sim], [links],
[mts], [agent] plus one [mcs.<link>] table section per link. Runs are fully
reproducible from (config, seed): the same invocation writes byte-identical
CSVs.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .agent import (
    ExperimentDriver,
    SarsaAgent,
    load_snapshot,
    restore_policy_state,
    save_snapshot,
)
from .baselines import BanditAgent, CqiTable, StaticLtePolicy
from .domain import ContextBounds, KpiTargets
from .env import LinkSpec, TrafficSpec, VranEnv
from .tilecoding import TileCoder, TileCoderConfig

CSV_COLUMNS = [
    "period",
    "slot",
    "mt",
    "reward",
    "r_x",
    "r_l",
    "x_o",
    "l_o",
    "throughput_mbps",
    "link",
    "mcs",
    "level",
    "rho_frac",
    "used_frac",
    "epsilon",
    "r_hat",
]

AGENT_KINDS = ("sarsa", "cb", "static-lte")


class ConfigError(ValueError):
    """Malformed scenario file; the message names the offending section/key."""


@dataclass(frozen=True)
class AgentConfig:
    kind: str = "sarsa"
    epsilon: float = 0.5
    epsilon_decay: float = 0.999
    alpha: float = 0.01
    beta: float = 0.01
    tilings: int = 8
    table_size: int = 4096
    tiles_per_dim: int = 8
    tile_context: str = "full"  # "full" or "snr-buffer"
    shared_avg_reward: bool = False
    criterion: str = "q"
    buffer_bound_bytes: int | None = None
    cqi_entries: tuple[tuple[float, int], ...] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    links: tuple[LinkSpec, ...]
    traffic: tuple[TrafficSpec, ...]
    targets: KpiTargets
    agent: AgentConfig
    periods: int = 1000
    decision_slots: int = 1
    slot_seconds: float = 0.1
    seed: int = 1
    max_retx: int = 3

    def __post_init__(self) -> None:
        if not self.links or not self.traffic:
            raise ConfigError("a scenario needs at least one link and one MT")
        if self.decision_slots < 1 or self.periods < 1:
            raise ConfigError("periods and decision_slots must be >= 1")

    def context_bounds(self) -> ContextBounds:
        snr_lo = min(t.snr_min_db for t in self.traffic)
        snr_hi = max(t.snr_max_db for t in self.traffic)
        if self.agent.buffer_bound_bytes is not None:
            buf_hi = float(self.agent.buffer_bound_bytes)
        else:
            per_slot = max(
                t.load_mbps * 1e6 * self.slot_seconds / 8.0 for t in self.traffic
            )
            buf_hi = max(16.0 * per_slot, 1.0)
        dims = [(snr_lo, snr_hi), (0.0, buf_hi)]
        dims.extend((0.0, 1.0) for _ in self.links)
        return ContextBounds(dims=tuple(dims))


def _split_row(section: str, key: str, raw: str, n_min: int) -> list[str]:
    parts = raw.split()
    if len(parts) < n_min:
        raise ConfigError(
            f"[{section}] {key}: expected at least {n_min} fields, got {len(parts)}"
        )
    return parts


def _parse_links(cp: configparser.ConfigParser) -> tuple[LinkSpec, ...]:
    if not cp.has_section("links"):
        raise ConfigError("missing [links] section")
    links = []
    for link_id, (name, raw) in enumerate(cp.items("links")):
        parts = _split_row("links", name, raw, 3)
        kind, rho_max_s, levels_s = parts[0], parts[1], parts[2]
        try:
            rho_max = float(rho_max_s)
            fractions = [float(x) for x in levels_s.split(",")]
        except ValueError as e:
            raise ConfigError(f"[links] {name}: {e}") from None
        table_sec = f"mcs.{name}"
        if not cp.has_section(table_sec):
            raise ConfigError(f"missing [{table_sec}] table for link {name!r}")
        rates, snr50, slope = [], [], []
        for idx_s, row in cp.items(table_sec):
            cols = _split_row(table_sec, idx_s, row, 3)
            try:
                int(idx_s)
                rates.append(float(cols[0]))
                snr50.append(float(cols[1]))
                slope.append(float(cols[2]))
            except ValueError as e:
                raise ConfigError(f"[{table_sec}] {idx_s}: {e}") from None
        try:
            links.append(
                LinkSpec(
                    link_id=link_id,
                    name=name,
                    kind=kind,
                    rho_max=rho_max,
                    level_values=tuple(f * rho_max for f in fractions),
                    rates=tuple(rates),
                    snr50=tuple(snr50),
                    slope=tuple(slope),
                )
            )
        except ValueError as e:
            raise ConfigError(f"[links] {name}: {e}") from None
    return tuple(links)


def _parse_mts(cp: configparser.ConfigParser) -> tuple[TrafficSpec, ...]:
    if not cp.has_section("mts"):
        raise ConfigError("missing [mts] section")
    specs = []
    for name, raw in cp.items("mts"):
        parts = _split_row("mts", name, raw, 6)
        try:
            spec = TrafficSpec(
                load_mbps=float(parts[0]),
                packet_bytes=int(parts[1]),
                arrivals=parts[2],
                snr_model=parts[3],
                snr_min_db=float(parts[4]),
                snr_max_db=float(parts[5]),
                gm_corr=float(parts[6]) if len(parts) > 6 else 0.9,
            )
        except ValueError as e:
            raise ConfigError(f"[mts] {name}: {e}") from None
        specs.append(spec)
    return tuple(specs)


def _parse_agent(cp: configparser.ConfigParser) -> AgentConfig:
    if not cp.has_section("agent"):
        return AgentConfig()
    sec = cp["agent"]
    kind = sec.get("kind", "sarsa")
    if kind not in AGENT_KINDS:
        raise ConfigError(f"[agent] kind must be one of {AGENT_KINDS}, got {kind!r}")
    cqi = None
    if "cqi_table" in sec:
        entries = []
        for line in sec["cqi_table"].strip().splitlines():
            cols = line.split()
            if len(cols) != 2:
                raise ConfigError(f"[agent] cqi_table row {line!r}: expected 'snr mcs'")
            entries.append((float(cols[0]), int(cols[1])))
        cqi = tuple(entries)
    try:
        return AgentConfig(
            kind=kind,
            epsilon=sec.getfloat("epsilon", 0.5),
            epsilon_decay=sec.getfloat("epsilon_decay", 0.999),
            alpha=sec.getfloat("alpha", 0.01),
            beta=sec.getfloat("beta", 0.01),
            tilings=sec.getint("tilings", 8),
            table_size=sec.getint("table_size", 4096),
            tiles_per_dim=sec.getint("tiles_per_dim", 8),
            tile_context=sec.get("tile_context", "full"),
            shared_avg_reward=sec.getboolean("shared_avg_reward", False),
            criterion=sec.get("criterion", "q"),
            buffer_bound_bytes=sec.getint("buffer_bound_bytes")
            if "buffer_bound_bytes" in sec
            else None,
            cqi_entries=cqi,
        )
    except ValueError as e:
        raise ConfigError(f"[agent]: {e}") from None


def parse_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario config file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    path = Path(path)
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    if not cp.has_section("sim"):
        raise ConfigError("missing [sim] section")
    sim = cp["sim"]
    try:
        return ScenarioConfig(
            links=_parse_links(cp),
            traffic=_parse_mts(cp),
            targets=KpiTargets(
                loss=sim.getfloat("loss_target", 0.01),
                latency_s=sim.getfloat("latency_target_s", 0.1),
            ),
            agent=_parse_agent(cp),
            periods=sim.getint("periods", 1000),
            decision_slots=sim.getint("decision_slots", 1),
            slot_seconds=sim.getfloat("slot_seconds", 0.1),
            seed=sim.getint("seed", 1),
            max_retx=sim.getint("max_retx", 3),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"[sim]: {e}") from None


def build_policy(cfg: ScenarioConfig):
    """Instantiate the configured policy against the scenario's catalog."""
    a = cfg.agent
    n_mts = len(cfg.traffic)
    if a.kind == "static-lte":
        table = CqiTable(a.cqi_entries) if a.cqi_entries else None
        return StaticLtePolicy(
            cfg.links,
            n_mts,
            table=table,
            decision_slots=cfg.decision_slots,
            targets=cfg.targets,
        )
    restrict = (0, 1) if a.tile_context == "snr-buffer" else None
    # the coder seed only shapes the hashing geometry; keeping it fixed makes
    # snapshots transferable across run seeds
    coder = TileCoder(
        TileCoderConfig(
            bounds=cfg.context_bounds(),
            num_tilings=a.tilings,
            tiles_per_dim=a.tiles_per_dim,
            table_size=a.table_size,
            seed=0,
            restrict_dims=restrict,
        )
    )
    common = dict(
        epsilon0=a.epsilon,
        epsilon_decay=a.epsilon_decay,
        alpha=a.alpha,
        decision_slots=cfg.decision_slots,
        criterion=a.criterion,
        targets=cfg.targets,
        slot_seconds=cfg.slot_seconds,
        max_retx=cfg.max_retx,
    )
    if a.kind == "cb":
        return BanditAgent(cfg.links, coder, n_mts, **common)
    return SarsaAgent(
        cfg.links,
        coder,
        n_mts,
        beta=a.beta,
        shared_r_hat=a.shared_avg_reward,
        **common,
    )


def run_experiment(
    cfg: ScenarioConfig,
    out_csv: str | Path | None = None,
    snapshot_in: str | Path | None = None,
    snapshot_out: str | Path | None = None,
) -> list[tuple]:
    """Run the scenario to completion; returns the metric rows and optionally
    writes them as CSV. Deterministic given (config, seed)."""
    env_seq, policy_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    env = VranEnv(
        cfg.links,
        cfg.traffic,
        slot_seconds=cfg.slot_seconds,
        max_retx=cfg.max_retx,
        rng=np.random.default_rng(env_seq),
    )
    policy = build_policy(cfg)
    if snapshot_in is not None:
        if cfg.agent.kind == "static-lte":
            raise ConfigError("static-lte has no learnable state to load")
        restore_policy_state(policy, load_snapshot(snapshot_in))
    driver = ExperimentDriver(
        policy, env, cfg.targets, np.random.default_rng(policy_seq)
    )
    rows: list[tuple] = []
    n = cfg.decision_slots
    for period in range(cfg.periods):
        for tr in driver.run_period():
            link = cfg.links[tr.applied_during.link_id]
            for s in range(n):
                o = tr.slot_outcomes[s]
                rows.append(
                    (
                        period,
                        period * n + s,
                        tr.mt,
                        tr.slot_rewards[s].total,
                        tr.slot_rewards[s].r_x,
                        tr.slot_rewards[s].r_l,
                        o.loss,
                        o.latency_s,
                        o.delivered_bytes * 8.0 / cfg.slot_seconds / 1e6,
                        tr.applied_during.link_id,
                        tr.applied_during.mcs_index,
                        tr.applied_during.resource_level,
                        tr.applied_during.rho / link.rho_max,
                        tr.slot_used_units[s] / link.rho_max,
                        tr.epsilon,
                        tr.r_hat,
                    )
                )
    if snapshot_out is not None:
        if cfg.agent.kind == "static-lte":
            raise ConfigError("static-lte has no learnable state to save")
        save_snapshot(policy, snapshot_out)
    if out_csv is not None:
        write_metrics_csv(rows, out_csv)
    return rows


def write_metrics_csv(rows: Iterable[tuple], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def read_metrics_csv(path: str | Path) -> list[tuple]:
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected CSV columns {header}")
        for line in r:
            rows.append(
                tuple(
                    int(v) if i in (0, 1, 2, 9, 10, 11) else float(v)
                    for i, v in enumerate(line)
                )
            )
    return rows


def per_period_mean_reward(rows: Sequence[tuple]) -> list[float]:
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for row in rows:
        p = row[0]
        sums[p] = sums.get(p, 0.0) + row[3]
        counts[p] = counts.get(p, 0) + 1
    return [sums[p] / counts[p] for p in sorted(sums)]


def convergence_cutoff(
    period_rewards: Sequence[float], window: int = 100, tol: float = 0.01
) -> int | None:
    """First period after which the `window`-period moving-average reward
    changes by less than `tol` (relative) for `window` consecutive periods."""
    n = len(period_rewards)
    if n < 2 * window + 1:
        return None
    csum = np.cumsum(np.asarray(period_rewards, dtype=np.float64))
    ma = (csum[window - 1 :] - np.concatenate(([0.0], csum[:-window]))) / window
    stable = 0
    for i in range(1, len(ma)):
        prev = ma[i - 1]
        if abs(ma[i] - prev) < tol * max(abs(prev), 1e-12):
            stable += 1
            if stable >= window:
                # the stable stretch began at ma index i - window + 1, whose
                # moving average covers periods up to that index + window - 1
                return i
        else:
            stable = 0
    return None


@dataclass
class Summary:
    """Aggregate statistics of one metrics file."""

    periods: int
    slots: int
    n_mts: int
    cutoff_period: int
    per_mt_mean_reward: dict[int, float]
    best_mt: int
    worst_mt: int
    compliance: float  # joint: x_o <= loss target and l_o <= latency target
    loss_compliance: float
    latency_compliance: float
    mean_latency_s: float
    mean_loss: float
    per_mt_throughput_mbps: dict[int, float]
    link_used_utilization: dict[int, float]
    link_allocated_utilization: dict[int, float]
    mcs_histogram: dict[int, dict[int, float]]
    resource_histogram: dict[int, dict[float, float]]

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["per_mt_mean_reward"] = {str(k): v for k, v in self.per_mt_mean_reward.items()}
        d["per_mt_throughput_mbps"] = {
            str(k): v for k, v in self.per_mt_throughput_mbps.items()
        }
        d["link_used_utilization"] = {
            str(k): v for k, v in self.link_used_utilization.items()
        }
        d["link_allocated_utilization"] = {
            str(k): v for k, v in self.link_allocated_utilization.items()
        }
        d["mcs_histogram"] = {
            str(k): {str(m): f for m, f in h.items()}
            for k, h in self.mcs_histogram.items()
        }
        d["resource_histogram"] = {
            str(k): {repr(m): f for m, f in h.items()}
            for k, h in self.resource_histogram.items()
        }
        return d


def summarize_rows(
    rows: Sequence[tuple],
    cutoff: int | None = None,
    targets: KpiTargets = KpiTargets(),
) -> Summary:
    """Summary statistics over metric rows; post-cutoff stats use periods >=
    cutoff. With cutoff=None the moving-average convergence rule is applied
    (falling back to half the run when it never fires)."""
    if not rows:
        raise ValueError("no metric rows to summarize")
    periods = max(r[0] for r in rows) + 1
    slots = max(r[1] for r in rows) + 1
    mts = sorted({r[2] for r in rows})
    if cutoff is None:
        detected = convergence_cutoff(per_period_mean_reward(rows))
        cutoff = detected if detected is not None else periods // 2
    if cutoff >= periods:
        raise ValueError(f"cutoff period {cutoff} beyond run length {periods}")

    reward_sum = {mt: 0.0 for mt in mts}
    reward_n = {mt: 0 for mt in mts}
    thpt_sum = {mt: 0.0 for mt in mts}
    thpt_n = {mt: 0 for mt in mts}
    links = sorted({r[9] for r in rows})
    used_per_slot: dict[tuple[int, int], float] = {}
    alloc_per_slot: dict[tuple[int, int], float] = {}
    mcs_hist: dict[int, dict[int, int]] = {l: {} for l in links}
    res_hist: dict[int, dict[float, int]] = {l: {} for l in links}
    post = 0
    ok_joint = ok_loss = ok_lat = 0
    lat_sum = loss_sum = 0.0
    for r in rows:
        (p, s, mt, reward, _rx, _rl, x_o, l_o, thpt, link, mcs, _lvl, rho_f, used_f, _e, _rh) = r
        reward_sum[mt] += reward
        reward_n[mt] += 1
        if p < cutoff:
            continue
        post += 1
        ok_loss += x_o <= targets.loss
        ok_lat += l_o <= targets.latency_s
        ok_joint += (x_o <= targets.loss) and (l_o <= targets.latency_s)
        lat_sum += l_o
        loss_sum += x_o
        thpt_sum[mt] += thpt
        thpt_n[mt] += 1
        used_per_slot[(link, s)] = used_per_slot.get((link, s), 0.0) + used_f
        alloc_per_slot[(link, s)] = alloc_per_slot.get((link, s), 0.0) + rho_f
        mcs_hist[link][mcs] = mcs_hist[link].get(mcs, 0) + 1
        res_hist[link][rho_f] = res_hist[link].get(rho_f, 0) + 1

    per_mt_reward = {mt: reward_sum[mt] / reward_n[mt] for mt in mts}
    best = max(mts, key=lambda mt: (per_mt_reward[mt], -mt))
    worst = min(mts, key=lambda mt: (per_mt_reward[mt], mt))
    post_slots = slots - min(r[1] for r in rows if r[0] >= cutoff)
    link_used = {
        l: sum(v for (ll, _s), v in used_per_slot.items() if ll == l)
        / max(post_slots, 1)
        for l in links
    }
    link_alloc = {
        l: sum(v for (ll, _s), v in alloc_per_slot.items() if ll == l)
        / max(post_slots, 1)
        for l in links
    }
    n_hist = {l: sum(mcs_hist[l].values()) for l in links}
    return Summary(
        periods=periods,
        slots=slots,
        n_mts=len(mts),
        cutoff_period=cutoff,
        per_mt_mean_reward=per_mt_reward,
        best_mt=best,
        worst_mt=worst,
        compliance=ok_joint / post if post else 0.0,
        loss_compliance=ok_loss / post if post else 0.0,
        latency_compliance=ok_lat / post if post else 0.0,
        mean_latency_s=lat_sum / post if post else 0.0,
        mean_loss=loss_sum / post if post else 0.0,
        per_mt_throughput_mbps={
            mt: thpt_sum[mt] / thpt_n[mt] if thpt_n[mt] else 0.0 for mt in mts
        },
        link_used_utilization=link_used,
        link_allocated_utilization=link_alloc,
        mcs_histogram={
            l: {m: c / n_hist[l] for m, c in sorted(mcs_hist[l].items())}
            for l in links
            if n_hist[l]
        },
        resource_histogram={
            l: {f: c / n_hist[l] for f, c in sorted(res_hist[l].items())}
            for l in links
            if n_hist[l]
        },
    )


def summarize_csv(
    path: str | Path,
    cutoff: int | None = None,
    targets: KpiTargets = KpiTargets(),
) -> Summary:
    return summarize_rows(read_metrics_csv(path), cutoff=cutoff, targets=targets)


def format_summary(s: Summary) -> str:
    lines = [
        f"periods={s.periods} slots={s.slots} mts={s.n_mts} cutoff_period={s.cutoff_period}",
        f"best MT: {s.best_mt} (mean reward {s.per_mt_mean_reward[s.best_mt]:.4f})",
        f"worst MT: {s.worst_mt} (mean reward {s.per_mt_mean_reward[s.worst_mt]:.4f})",
        f"post-cutoff KPI compliance: joint={s.compliance:.4f} "
        f"loss={s.loss_compliance:.4f} latency={s.latency_compliance:.4f}",
        f"post-cutoff mean latency: {s.mean_latency_s * 1e3:.2f} ms, "
        f"mean loss: {s.mean_loss:.5f}",
    ]
    for mt, t in s.per_mt_throughput_mbps.items():
        lines.append(f"MT {mt} throughput: {t:.4f} Mbps")
    for l in s.link_used_utilization:
        lines.append(
            f"link {l} utilization: used={s.link_used_utilization[l] * 100:.2f}% "
            f"allocated={s.link_allocated_utilization[l] * 100:.2f}%"
        )
    for l, h in s.mcs_histogram.items():
        top = sorted(h.items(), key=lambda kv: -kv[1])[:5]
        lines.append(
            "link %d top MCS: %s" % (l, ", ".join(f"{m}:{f:.2f}" for m, f in top))
        )
    return "\n".join(lines)
