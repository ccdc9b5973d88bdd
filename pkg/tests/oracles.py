"""Independent brute-force oracles used to freeze expected test values.

Each oracle recomputes a quantity by exhaustive enumeration or direct
summation, sharing no code path with the implementation it checks.
"""
from __future__ import annotations

import math

from trajrepair.env import ACTION_ORDER, GridLanderEnv, GridState


def best_return_exhaustive(env: GridLanderEnv, s0: GridState, t_max: int) -> float:
    """Maximum undiscounted return over every action sequence of length t_max.

    Sequences stop early at terminal states; non-terminal length-t_max
    prefixes count as complete episodes (matching a rollout truncated at
    t_max).
    """

    def search(s: GridState, depth: int) -> float:
        if env.is_terminal(s) or depth == 0:
            return 0.0
        best = -math.inf
        for a in ACTION_ORDER:
            nxt, r = env.step(s, a)
            best = max(best, r + search(nxt, depth - 1))
        return best

    return search(s0, t_max)


def frechet_brute_force(p, q) -> float:
    """Minimum over all monotone couplings of the maximum pointwise distance.

    Plain recursion over coupling moves; exponential, for short polylines
    only.
    """

    def dist(i: int, j: int) -> float:
        return math.hypot(p[i][0] - q[j][0], p[i][1] - q[j][1])

    n, m = len(p), len(q)

    def walk(i: int, j: int) -> float:
        here = dist(i, j)
        if i == n - 1 and j == m - 1:
            return here
        best = math.inf
        if i + 1 < n:
            best = min(best, walk(i + 1, j))
        if j + 1 < m:
            best = min(best, walk(i, j + 1))
        if i + 1 < n and j + 1 < m:
            best = min(best, walk(i + 1, j + 1))
        return max(here, best)

    return walk(0, 0)


def occupancy_direct(steps, ref, t_offset: int = 0) -> float:
    """Direct summation of the discounted visitation-weighted overlap."""
    total = 0.0
    for step in steps:
        probs = ref.policy_probs.get(step.state)
        if probs is None:
            continue
        weight = probs[step.action]
        inner = 0.0
        for tau in range(len(steps) + 1):
            inner += (ref.gamma**tau) * ref.visit_estimate.get(
                (step.state, t_offset + tau), 0.0
            )
        total += weight * inner
    return total
