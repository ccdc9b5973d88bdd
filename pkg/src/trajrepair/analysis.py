"""Executable oracles for the policy-dominance and repair-convergence claims.

The properties checked here, stated operationally:

- a policy whose value ratio against a better policy falls below 1 - eps_p
  (a *dominated* policy) must produce rollouts that diverge from the better
  policy's rollouts (positive Fréchet distance from at least one shared
  start).  The converse does not hold, and the sampler is expected to find
  divergent-but-not-dominated witnesses.
- iteratively repairing the dominated policy at reward-deficient states of
  time-aligned rollout pairs drives the value gap down monotonically and the
  trajectory divergence to zero once no deficient state remains.
- splitting a dominated pair of policies into temporal segments leaves at
  least one segment where the dominated policy's segment value is strictly
  smaller.

Every suite is a pure function of (environment, seed); samples are
independent and could be evaluated in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from trajrepair.divergence import frechet_distance
from trajrepair.env import ACTION_ORDER, GridLanderEnv, GridState
from trajrepair.imitation import Policy, evaluate
from trajrepair.trajectories import Trajectory, rollout


@dataclass(frozen=True)
class DominanceResult:
    ratio: float
    dominated: bool


@dataclass(frozen=True)
class RepairSet:
    """States repaired, in selection order, plus the convergence trace."""

    states: tuple[GridState, ...]
    final_ratio: float
    trace: tuple[tuple[float, float], ...]  # (value gap, divergence) per step


@dataclass(frozen=True)
class SuiteResult:
    n_sampled: int
    n_checked: int
    n_skipped: int
    counterexamples: tuple[str, ...]
    witnesses: int = 0

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def is_dominated(
    pi: Policy,
    pi_prime: Policy,
    env: GridLanderEnv,
    starts: Sequence[GridState],
    eps_p: float,
    t_max: int | None = None,
) -> DominanceResult:
    """Value ratio over deterministic rollouts and the strict < 1 - eps_p flag."""
    t_max = t_max or 4 * env.height
    ref = evaluate(pi_prime, env, starts, t_max).mean_return
    if ref == 0.0:
        raise ZeroDivisionError("reference policy has zero mean return")
    ratio = evaluate(pi, env, starts, t_max).mean_return / ref
    return DominanceResult(ratio, ratio < 1.0 - eps_p)


def closed_polyline(env: GridLanderEnv, t: Trajectory):
    """Step observations plus the final successor state's observation.

    Closing the polyline keeps hovering beside a landing point from aliasing
    the landing itself: the Fréchet coupling collapses repeated points, so
    without the terminal observation a policy stalling one cell above the pad
    would be indistinguishable from one that lands.
    """
    end, _ = env.step(t.steps[-1].state, t.steps[-1].action)
    return t.observations() + (env.observe(end),)


def are_divergent(
    t1: Trajectory,
    t2: Trajectory,
    delta: float = 0.0,
    env: GridLanderEnv | None = None,
) -> bool:
    """Fréchet distance on observation polylines exceeds ``delta``.

    Pass the environment to compare polylines closed with their terminal
    observations, which the theory suites rely on.
    """
    if env is None:
        return frechet_distance(t1.observations(), t2.observations()) > delta
    return frechet_distance(closed_polyline(env, t1), closed_polyline(env, t2)) > delta


def max_divergence(
    pi: Policy,
    pi_prime: Policy,
    env: GridLanderEnv,
    starts: Sequence[GridState],
    t_max: int,
) -> float:
    """Largest closed-polyline Fréchet distance over the shared start states."""
    best = 0.0
    for s0 in starts:
        d = frechet_distance(
            closed_polyline(env, rollout(env, pi, s0, t_max)),
            closed_polyline(env, rollout(env, pi_prime, s0, t_max)),
        )
        best = max(best, d)
    return best


def local_repair(pi: Policy, s: GridState, pi_target: Policy) -> Policy:
    """Replace pi's action distribution at exactly one state with the target's."""
    return pi.with_row(s, pi_target.action_probs(s))


def _rule1_state(
    env: GridLanderEnv,
    pi: Policy,
    target: Policy,
    starts: Sequence[GridState],
    t_max: int,
    already: set[GridState],
) -> GridState | None:
    """First state (by start order, then time) where the repaired policy's
    time-aligned reward falls strictly below the target's."""
    for s0 in starts:
        tau_pi = rollout(env, pi, s0, t_max).steps
        tau_tar = rollout(env, target, s0, t_max).steps
        for a, b in zip(tau_pi, tau_tar):
            if a.reward < b.reward - 1e-12 and a.state not in already:
                return a.state
    return None


def build_repair_set(
    pi: Policy,
    pi_target: Policy,
    env: GridLanderEnv,
    starts: Sequence[GridState],
    eps_p: float,
    t_max: int | None = None,
    max_repairs: int | None = None,
) -> RepairSet:
    """Iterate reward-deficient-state repair until the value ratio recovers.

    Stops when the ratio reaches 1 - eps_p, no unrepaired deficient state
    remains on the paired rollouts, or the iteration cap (grid size) fires.
    """
    t_max = t_max or 4 * env.height
    cap = max_repairs or env.width * env.height
    target_value = evaluate(pi_target, env, starts, t_max).mean_return
    if target_value == 0.0:
        raise ZeroDivisionError("target policy has zero mean return")
    repaired: list[GridState] = []
    trace: list[tuple[float, float]] = []
    current = pi
    while len(repaired) < cap:
        ratio = evaluate(current, env, starts, t_max).mean_return / target_value
        if ratio >= 1.0 - eps_p and (eps_p > 0.0 or ratio >= 1.0):
            break
        s = _rule1_state(env, current, pi_target, starts, t_max, set(repaired))
        if s is None:
            break
        current = local_repair(current, s, pi_target)
        repaired.append(s)
        gap = target_value - evaluate(current, env, starts, t_max).mean_return
        trace.append((gap, max_divergence(current, pi_target, env, starts, t_max)))
    final = evaluate(current, env, starts, t_max).mean_return / target_value
    return RepairSet(tuple(repaired), final, tuple(trace))


def repair_convergence_trace(
    pi: Policy,
    pi_target: Policy,
    env: GridLanderEnv,
    starts: Sequence[GridState],
    eps_p: float,
    t_max: int | None = None,
) -> RepairSet:
    """Alias emphasising the (value gap, divergence) trace consumers."""
    return build_repair_set(pi, pi_target, env, starts, eps_p, t_max)


def trace_is_monotone(trace: Sequence[tuple[float, float]]) -> bool:
    gaps = [g for g, _ in trace]
    return all(b <= a + 1e-9 for a, b in zip(gaps, gaps[1:]))


def random_policy_edit(
    pi: Policy, env: GridLanderEnv, rng: np.random.Generator, n_edits: int
) -> Policy:
    """Copy of the policy with ``n_edits`` states forced to different actions."""
    candidates = sorted(s for s in pi.visited() if not env.is_terminal(s))
    picks = rng.choice(len(candidates), size=min(n_edits, len(candidates)), replace=False)
    edited = pi
    for i in sorted(int(p) for p in picks):
        s = candidates[i]
        current = edited.greedy(s)
        others = [a for a in ACTION_ORDER if a != current]
        a = others[int(rng.integers(len(others)))]
        probs = [0.0, 0.0, 0.0, 0.0]
        probs[a] = 1.0
        edited = edited.with_row(s, tuple(probs))
    return edited


def check_dominance_implies_divergence(
    env: GridLanderEnv,
    pi_star: Policy,
    n: int,
    seed: int,
    starts: Sequence[GridState],
    eps_p: float = 0.1,
    delta: float = 0.0,
    t_max: int | None = None,
) -> SuiteResult:
    """Sample edited policies; every dominated one must diverge from the target.

    Also counts divergent-but-not-dominated witnesses, demonstrating that
    divergence alone does not certify dominance.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    t_max = t_max or 4 * env.height
    rng = np.random.default_rng(seed)
    checked = skipped = witnesses = 0
    counterexamples: list[str] = []
    for _ in range(n):
        edited = random_policy_edit(pi_star, env, rng, int(rng.integers(1, 4)))
        dom = is_dominated(edited, pi_star, env, starts, eps_p, t_max)
        divergence = max_divergence(edited, pi_star, env, starts, t_max)
        if dom.dominated:
            checked += 1
            if divergence <= delta:
                counterexamples.append(
                    f"dominated pair (ratio {dom.ratio:.4f}) with divergence "
                    f"{divergence:.6f} <= {delta}"
                )
        else:
            skipped += 1
            if divergence > delta:
                witnesses += 1
    return SuiteResult(n, checked, skipped, tuple(counterexamples), witnesses)


def segment_sums(rewards: Sequence[float], m: int) -> list[float]:
    """Partition a reward sequence into m proportional segments and sum each.

    Segments may be empty for short sequences; the segment sums always add
    up to the full return.
    """
    n = len(rewards)
    sums = []
    for j in range(m):
        lo = (j * n) // m
        hi = ((j + 1) * n) // m
        sums.append(sum(rewards[lo:hi]))
    return sums


def check_segment_dominance(
    env: GridLanderEnv,
    pi_star: Policy,
    n: int,
    m: int,
    seed: int,
    starts: Sequence[GridState],
    t_max: int | None = None,
) -> SuiteResult:
    """Dominated pairs must lose in at least one of the m temporal segments."""
    if n < 1 or m < 2:
        raise ValueError("need n >= 1 and m >= 2")
    t_max = t_max or 4 * env.height
    rng = np.random.default_rng(seed)
    checked = skipped = 0
    counterexamples: list[str] = []
    for _ in range(n):
        edited = random_policy_edit(pi_star, env, rng, int(rng.integers(1, 4)))
        dom = is_dominated(edited, pi_star, env, starts, eps_p=0.0, t_max=t_max)
        if not dom.dominated:
            skipped += 1
            continue
        checked += 1
        seg_pi = np.zeros(m)
        seg_tar = np.zeros(m)
        for s0 in starts:
            r_pi = [s.reward for s in rollout(env, edited, s0, t_max).steps]
            r_tar = [s.reward for s in rollout(env, pi_star, s0, t_max).steps]
            seg_pi += np.array(segment_sums(r_pi, m))
            seg_tar += np.array(segment_sums(r_tar, m))
        if not any(seg_pi[j] < seg_tar[j] for j in range(m)):
            counterexamples.append(
                f"dominated pair (ratio {dom.ratio:.4f}) with no losing segment: "
                f"{seg_pi.tolist()} vs {seg_tar.tolist()}"
            )
    return SuiteResult(n, checked, skipped, tuple(counterexamples))


def format_suite_report(name: str, result: SuiteResult) -> str:
    lines = [
        f"suite: {name}",
        f"  sampled: {result.n_sampled}",
        f"  checked (dominated): {result.n_checked}",
        f"  skipped (not dominated): {result.n_skipped}",
        f"  witnesses (divergent, not dominated): {result.witnesses}",
        f"  counterexamples: {len(result.counterexamples)}",
    ]
    for c in result.counterexamples:
        lines.append(f"    - {c}")
    lines.append(f"  verdict: {'PASS' if result.passed else 'FAIL'}")
    return "\n".join(lines)
