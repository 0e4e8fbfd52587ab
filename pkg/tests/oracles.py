"""Independent reference implementations used to check the package.

Everything here is deliberately written from the definitions, not from the
package code paths it verifies.
"""

from itertools import product

import numpy as np


def oracle_refine(s1, levels, rho_max, criteria, weights=None):
    """Literal expand -> scale -> dominance filter -> max-min pipeline."""
    k = len(s1)
    grids = [[v for v in levels if v >= s - 1e-9] for s in s1]
    expanded = [sol for sol in product(*grids) if sum(sol) <= k * rho_max + 1e-9]
    scaled = [tuple(v / k for v in sol) for sol in expanded]
    scores = [tuple(c(v) for c, v in zip(criteria, sol)) for sol in scaled]

    def dominated(i):
        si = scores[i]
        for j in range(len(scaled)):
            if j == i:
                continue
            sj = scores[j]
            if all(a >= b for a, b in zip(sj, si)) and any(
                a > b for a, b in zip(sj, si)
            ):
                return True
        return False

    front = [i for i in range(len(scaled)) if not dominated(i)]
    v = weights if weights is not None else [1.0 / k] * k
    best, best_key = None, None
    for i in front:
        key = tuple(sorted(w * s for w, s in zip(v, scores[i])))
        if best_key is None or key > best_key:
            best, best_key = i, key
    return scaled[best]


def oracle_round(star, levels, rho_max, s1):
    """Floor to catalog levels, clamp below-grid values up, re-verify, fall
    back to proportional scaling of the greedy allocation."""
    floored = []
    for rho in star:
        cands = [v for v in levels if v <= rho + 1e-9]
        floored.append(cands[-1] if cands else levels[0])
    if sum(floored) <= rho_max + 1e-9:
        return tuple(floored)
    total = sum(s1)
    return tuple(r * rho_max / total for r in s1)


def mdp_policy_average_rewards(P, R):
    """Average reward of every deterministic stationary policy, by solving
    the stationary distribution of each induced chain."""
    n_states, n_actions = R.shape
    out = {}
    for policy in product(range(n_actions), repeat=n_states):
        T = np.array([P[s, policy[s]] for s in range(n_states)])
        # stationary distribution: solve pi (T - I) = 0 with sum(pi) = 1
        a = np.vstack([(T.T - np.eye(n_states)), np.ones(n_states)])
        b = np.concatenate([np.zeros(n_states), [1.0]])
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        out[policy] = float(sum(pi[s] * R[s, policy[s]] for s in range(n_states)))
    return out


def mdp_optimal_average_reward_vi(P, R, sweeps=100000, tol=1e-12):
    """Relative value iteration for the optimal average reward of a unichain
    continuing MDP."""
    n_states, _ = R.shape
    h = np.zeros(n_states)
    rho = 0.0
    for _ in range(sweeps):
        q = R + np.einsum("saj,j->sa", P, h)
        v = q.max(axis=1)
        rho_new = v[0]
        h_new = v - rho_new
        if np.max(np.abs(h_new - h)) < tol and abs(rho_new - rho) < tol:
            return float(rho_new)
        h, rho = h_new, rho_new
    return float(rho)
