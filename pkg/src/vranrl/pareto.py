"""Per-link Pareto-efficient fair refinement of greedy resource allocations.

When the greedy actions of the MTs sharing a link ask for more resource than
the link holds, the allocator expands the greedy solution upward, rescales by
the number of MTs, keeps the Pareto-dominant set under per-MT criteria, and
picks the max-min fair member. Criteria callables map a candidate resource
amount (in link units) to a score and must be monotone non-decreasing;
`monotone_envelope` builds such a callable from raw per-level scores.

For large MT/level counts the full expansion is exponential, so `allocate`
switches to a componentwise reduction that is exact for monotone criteria
(every expanded solution is weakly dominated by the all-max corner, hence the
front collapses to the solutions whose per-MT scores are all maximal, and the
fixed tie-break selects the componentwise-first of them).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from itertools import product
from typing import Callable, Mapping, Sequence

from .domain import Assignment, DecodedAction, encode_action

CAP_TOL = 1e-9
# expansion sets larger than this use the monotone componentwise reduction
ENUM_LIMIT = 64

Criterion = Callable[[float], float]


def monotone_envelope(levels: Sequence[float], scores: Sequence[float]) -> Criterion:
    """Monotone non-decreasing criterion from raw per-level scores.

    `levels` are the link's resource values in ascending order. A candidate
    rho is floored to the largest level <= rho (the smallest level if rho is
    below the grid) and scored with the running maximum, which makes the
    criterion monotone by construction.
    """
    lv = list(levels)
    env: list[float] = []
    best = -math.inf
    for s in scores:
        best = max(best, s)
        env.append(best)

    def crit(rho: float) -> float:
        i = bisect_right(lv, rho + CAP_TOL) - 1
        return env[max(i, 0)]

    return crit


def needs_refinement(rhos: Sequence[float], rho_max: float) -> bool:
    """True iff the summed allocations on the link exceed its capacity."""
    return sum(rhos) > rho_max + CAP_TOL


def expand_solutions(
    s1: Sequence[float],
    level_grids: Sequence[Sequence[float]],
    rho_max: float,
) -> list[tuple[float, ...]]:
    """Expanded solution set: all grid combinations componentwise >= S1 whose
    sum stays within |K| * rho_max, in ascending product order (S1 first).
    """
    if len(s1) != len(level_grids):
        raise ValueError("one level grid per MT is required")
    grids: list[list[float]] = []
    for k, grid in enumerate(level_grids):
        if len(grid) == 0:
            raise ValueError(f"empty level grid for MT position {k}")
        up = [v for v in sorted(grid) if v >= s1[k] - CAP_TOL]
        if not up:
            raise ValueError(
                f"level grid for MT position {k} has no value >= {s1[k]}"
            )
        grids.append(up)
    cap = len(s1) * rho_max + CAP_TOL
    return [sol for sol in product(*grids) if sum(sol) <= cap]


def scale_solutions(
    solutions: Sequence[Sequence[float]], k_count: int
) -> list[tuple[float, ...]]:
    """Divide every component of every solution by the MT count on the link."""
    if k_count < 1:
        raise ValueError("k_count must be >= 1")
    return [tuple(v / k_count for v in sol) for sol in solutions]


def _score_vectors(
    solutions: Sequence[Sequence[float]], criteria: Sequence[Criterion]
) -> list[tuple[float, ...]]:
    cache: list[dict[float, float]] = [{} for _ in criteria]
    out = []
    for sol in solutions:
        vec = []
        for k, v in enumerate(sol):
            if v not in cache[k]:
                cache[k][v] = criteria[k](v)
            vec.append(cache[k][v])
        out.append(tuple(vec))
    return out


def _dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """a dominates b: a >= b everywhere and a > b somewhere."""
    strict = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            strict = True
    return strict


def pareto_front(
    solutions: Sequence[Sequence[float]], criteria: Sequence[Criterion]
) -> list[tuple[float, ...]]:
    """Pareto-dominant subset, preserving the input enumeration order."""
    if not solutions:
        raise ValueError("pareto_front requires at least one solution")
    scores = _score_vectors(solutions, criteria)
    kept: list[int] = []
    for i, si in enumerate(scores):
        dominated = False
        still = []
        for j in kept:
            if _dominates(scores[j], si):
                dominated = True
                still.append(j)
            elif not _dominates(si, scores[j]):
                still.append(j)
        if not dominated:
            still.append(i)
        kept = still
    kept.sort()
    return [tuple(solutions[i]) for i in kept]


def select_fair(
    front: Sequence[Sequence[float]],
    criteria: Sequence[Criterion],
    weights: Sequence[float] | None = None,
) -> tuple[float, ...]:
    """Max-min fair member of the front under weighted criteria.

    Ties on the minimum are broken by the lexicographically largest sorted
    weighted-score vector (leximin), then by the lowest enumeration index.
    """
    if not front:
        raise ValueError("select_fair requires a non-empty front")
    v = _normalized_weights(weights, len(front[0]))
    scores = _score_vectors(front, criteria)
    best_i = 0
    best_key = tuple(sorted(v_k * s for v_k, s in zip(v, scores[0])))
    for i in range(1, len(front)):
        key = tuple(sorted(v_k * s for v_k, s in zip(v, scores[i])))
        if key > best_key:
            best_key = key
            best_i = i
    return tuple(front[best_i])


def _normalized_weights(weights: Sequence[float] | None, k: int) -> list[float]:
    if weights is None:
        return [1.0 / k] * k
    if len(weights) != k:
        raise ValueError("one weight per MT is required")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    total = sum(weights)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {total}")
    return list(weights)


def _refine_link(
    s1: Sequence[float],
    grids: Sequence[Sequence[float]],
    rho_max: float,
    criteria: Sequence[Criterion],
    weights: Sequence[float] | None,
) -> tuple[float, ...]:
    """Scaled fair solution for one overloaded link (before level rounding)."""
    k = len(s1)
    size = 1
    for g, s in zip(grids, s1):
        size *= sum(1 for v in g if v >= s - CAP_TOL)
        if size > ENUM_LIMIT:
            break
    if size <= ENUM_LIMIT:
        expanded = expand_solutions(s1, grids, rho_max)
        scaled = scale_solutions(expanded, k)
        front = pareto_front(scaled, criteria)
        return select_fair(front, criteria, weights)
    # componentwise reduction, exact for monotone non-decreasing criteria
    best = []
    for kk in range(k):
        cands = [v / k for v in sorted(grids[kk]) if v >= s1[kk] - CAP_TOL]
        scores = [criteria[kk](c) for c in cands]
        best.append(cands[scores.index(max(scores))])
    return tuple(best)


def _floor_level(levels: Sequence[float], rho: float) -> int:
    """Index of the largest level <= rho, or 0 if rho is below the grid."""
    i = bisect_right(list(levels), rho + CAP_TOL) - 1
    return max(i, 0)


def allocate(
    greedy: Mapping[int, DecodedAction],
    link_catalog: Sequence,
    criteria: Mapping[int, Criterion],
    weights: Mapping[int, Sequence[float]] | None = None,
) -> dict[int, Assignment]:
    """Refine greedy actions so every link's summed allocation fits rho_max.

    Links whose greedy allocations already fit pass through unchanged. For
    overloaded links the expand/scale/front/max-min pipeline runs, the result
    is rounded down to catalog levels (clamped up to the smallest level when
    it falls below the grid), and capacity is re-verified. If even the
    smallest levels overflow, the greedy allocation is proportionally scaled
    to exactly rho_max; only in that case does an Assignment's `rho` differ
    from its recorded level value.
    """
    out: dict[int, Assignment] = {}
    by_link: dict[int, list[int]] = {}
    for mt in sorted(greedy):
        by_link.setdefault(greedy[mt].link_id, []).append(mt)

    for link_id, mts in by_link.items():
        link = link_catalog[link_id]
        levels = link.level_values
        s1 = [levels[greedy[mt].resource_level] for mt in mts]
        if not needs_refinement(s1, link.rho_max):
            for mt, rho in zip(mts, s1):
                out[mt] = _make_assignment(mt, greedy[mt], link_id, link_catalog, rho)
            continue
        crits = [criteria[mt] for mt in mts]
        v = weights.get(link_id) if weights is not None else None
        star = _refine_link(s1, [levels] * len(mts), link.rho_max, crits, v)
        floored = [levels[_floor_level(levels, rho)] for rho in star]
        if sum(floored) <= link.rho_max + CAP_TOL:
            for mt, rho in zip(mts, floored):
                out[mt] = _make_assignment(mt, greedy[mt], link_id, link_catalog, rho)
            continue
        # smallest feasible levels still overflow: fall back to proportional
        # scaling of the greedy allocation, leaving rho off the level grid
        total = sum(s1)
        for mt, rho_greedy in zip(mts, s1):
            rho = rho_greedy * link.rho_max / total
            out[mt] = _make_assignment(mt, greedy[mt], link_id, link_catalog, rho)
    return out


def _make_assignment(
    mt: int,
    decoded: DecodedAction,
    link_id: int,
    link_catalog: Sequence,
    rho: float,
) -> Assignment:
    link = link_catalog[link_id]
    level = _floor_level(link.level_values, rho)
    action = encode_action(link_id, decoded.mcs_index, level, link_catalog)
    return Assignment(
        mt=mt,
        action=action,
        link_id=link_id,
        mcs_index=decoded.mcs_index,
        resource_level=level,
        rho=rho,
    )
