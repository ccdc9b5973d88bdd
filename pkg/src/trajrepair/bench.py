"""Desk-scale benchmark construction: expert, pools, classifiers, starts.

Layout of the standard benchmark on the default 10x8 grid:

- the guaranteed-clean reference set holds one expert rollout per column,
  all launched from the top row.  Together they cover every pad-reachable
  state, so a policy trained on clean parts alone still lands from every
  evaluation start.
- demonstration pools launch from lower altitudes (the top three rows,
  cycled deterministically, with seeded columns).  Trajectories starting two
  rows below the reference look spatially divergent (their first point is
  already two cells under every reference polyline) even though they are
  perfectly benign: these are the novel-but-correct demonstrations that only
  the return-ratio override can keep.
- classifier pools are built from reference-height rollouts and attacked
  copies of them across the full attack grid; each part sample inherits the
  accept/reject label of its parent trajectory's return.
- evaluation starts are all pad-reachable states of altitude two or higher,
  in row-major order.

Builders are cached: everything downstream of (env, seed) is immutable.
"""
from __future__ import annotations

import zlib
from functools import lru_cache

from trajrepair.attacks import AttackKind, AttackSpec, apply_attack
from trajrepair.classifier import (
    Decision,
    LabeledFeature,
    TrajectoryClassifier,
    label,
    train_classifier,
)
from trajrepair.divergence import build_reference, features
from trajrepair.env import (
    GridLanderEnv,
    GridState,
    action_value_gap,
    optimal_state_values,
    value_iteration,
)
from trajrepair.imitation import Policy, PolicyValue, clone_from_trajectories, evaluate
from trajrepair.trajectories import (
    Provenance,
    TrajectorySet,
    rollout,
    split,
    trajectory_return,
)

DEFAULT_EPS_P = 0.1
DEFAULT_N_DEMO = 100
# denser coverage at low strengths, where the contaminated fraction of a
# part changes fastest with gamma
TRAIN_GAMMAS = (0.25, 0.3, 0.4, 0.6, 0.9)
TEST_GAMMAS = (0.2, 0.45, 0.7, 0.95)
ALL_KINDS = (AttackKind.BEG, AttackKind.MID, AttackKind.END, AttackKind.FLP)

# an action is treated as adversarial when it gives up more than this much
# value; hovering costs ~3.5 and crash moves far more, while reordering an
# optimal plan costs well under 0.1
JUNK_VALUE_GAP = 1.0


def stable_seed(*parts) -> int:
    """Deterministic 31-bit seed derived from a run seed plus cell labels."""
    return zlib.crc32("|".join(str(p) for p in parts).encode()) & 0x7FFFFFFF


@lru_cache(maxsize=None)
def optimal_policy(env: GridLanderEnv) -> Policy:
    return value_iteration(env, tol=1e-9)


@lru_cache(maxsize=None)
def optimal_values(env: GridLanderEnv) -> dict[GridState, float]:
    return optimal_state_values(env, tol=1e-9)


@lru_cache(maxsize=None)
def reference_set(env: GridLanderEnv) -> TrajectorySet:
    """One top-row expert rollout per column; the guaranteed-clean set."""
    pi = optimal_policy(env)
    top = env.height - 1
    trajectories = tuple(
        rollout(env, pi, GridState(x, top), 4 * env.height, Provenance.CLEAN, x)
        for x in range(env.width)
    )
    return TrajectorySet(trajectories, eta=0.0, gamma_frac=0.0)


def demo_heights(env: GridLanderEnv) -> tuple[int, ...]:
    """Launch altitudes of demonstration pools.

    Two heights adjacent to the reference row plus one noticeably lower:
    trajectories from the low cohort are benign yet spatially novel (their
    whole polyline sits a quarter of the observation height under every
    reference polyline), which is what exercises the return-ratio override.
    """
    return (env.height - 3, env.height - 2, env.height - 1)


@lru_cache(maxsize=None)
def demo_set(
    env: GridLanderEnv, n: int = DEFAULT_N_DEMO, seed: int = 0
) -> TrajectorySet:
    """n clean expert rollouts from cycled heights and seeded columns."""
    import numpy as np

    pi = optimal_policy(env)
    rng = np.random.default_rng(stable_seed(seed, "demo"))
    heights = demo_heights(env)
    trajectories = []
    for i in range(n):
        y = heights[i % len(heights)]
        while True:
            x = int(rng.integers(env.width))
            if env.pad_reachable(GridState(x, y)):
                break
        trajectories.append(
            rollout(env, pi, GridState(x, y), 4 * env.height, Provenance.CLEAN, i)
        )
    return TrajectorySet(tuple(trajectories), eta=0.0, gamma_frac=0.0)


@lru_cache(maxsize=None)
def eval_starts(env: GridLanderEnv) -> tuple[GridState, ...]:
    """All pad-reachable states of altitude >= 2, row-major order."""
    return tuple(
        s
        for s in env.states()
        if s.y >= 2 and env.pad_reachable(s)
    )


@lru_cache(maxsize=None)
def clean_clone_value(
    env: GridLanderEnv, n: int = DEFAULT_N_DEMO, seed: int = 0
) -> PolicyValue:
    """Mean return of a policy cloned from the unattacked demo pool."""
    pi = clone_from_trajectories(demo_set(env, n, seed).trajectories, env)
    return evaluate(pi, env, eval_starts(env), 4 * env.height)


@lru_cache(maxsize=None)
def classifier_base(env: GridLanderEnv, heights: tuple[int, ...]) -> TrajectorySet:
    """Clean rollouts from every column at the given start altitudes."""
    pi = optimal_policy(env)
    trajectories = []
    tid = 0
    for y in heights:
        for x in range(env.width):
            trajectories.append(
                rollout(env, pi, GridState(x, y), 4 * env.height, Provenance.CLEAN, tid)
            )
            tid += 1
    return TrajectorySet(tuple(trajectories), eta=0.0, gamma_frac=0.0)


def pool_heights(env: GridLanderEnv, m: int) -> tuple[int, ...]:
    """Start altitudes of the classifier pool at granularity ``m``.

    The full-trajectory pool stays at the two reference-adjacent heights so
    that lower launches remain genuinely novel to it; part pools cover every
    demonstration height, since a part's shape should be judged by its
    content rather than by where its parent launched.
    """
    if m == 1:
        return (env.height - 2, env.height - 1)
    return demo_heights(env)


def labeled_pool(
    env: GridLanderEnv,
    m: int,
    gammas: tuple[float, ...],
    seed: int,
    eps_p: float = DEFAULT_EPS_P,
) -> list[LabeledFeature]:
    """Part-level (oc, fd) samples across the attack grid.

    Full trajectories (m == 1) carry the return-rule label against the best
    clean return.  For m >= 2 a part is labelled Reject when most of its
    steps no longer demonstrate expert-quality behaviour, where a step is bad
    if its action sacrifices over ``JUNK_VALUE_GAP`` of achievable value at
    the visited state or the step is off the descent schedule (a clean
    episode loses exactly one altitude cell per step, so any hovering shifts
    every later altitude).  The value-gap test deliberately tolerates actions
    that merely reorder an optimal plan; part returns themselves are
    uninformative here (a clean descent part sums to ~0), and a minority of
    perturbed steps leaves a part usable for cloning.
    """
    base = classifier_base(env, pool_heights(env, m))
    values = optimal_values(env)
    ref = build_reference(reference_set(env), env.gamma)
    ref_parts = [[] for _ in range(m)]
    for t in reference_set(env).trajectories:
        for part in split(t, m, env):
            ref_parts[part.index].append(part)
    r_max = max(trajectory_return(t) for t in base.trajectories)

    pools = [base]
    for kind in ALL_KINDS:
        for g in gammas:
            spec = AttackSpec(kind, 1.0, g, stable_seed(seed, "pool", kind.value, g))
            pools.append(apply_attack(base, spec, env))

    samples: list[LabeledFeature] = []
    for pool in pools:
        for t in pool.trajectories:
            full_label = label(trajectory_return(t), r_max, eps_p)
            y0 = t.steps[0].state.y
            for part in split(t, m, env):
                f = features(part, ref_parts[part.index], ref)
                if m == 1:
                    lab = full_label
                else:
                    bad = sum(
                        1
                        for j, s in enumerate(part.steps)
                        if s.state.y != y0 - (part.start + j)
                        or action_value_gap(env, values, s.state, s.action)
                        > JUNK_VALUE_GAP
                    )
                    lab = (
                        Decision.REJECT
                        if bad * 2 > len(part.steps)
                        else Decision.ACCEPT
                    )
                samples.append(LabeledFeature(f, lab))
    return samples


@lru_cache(maxsize=None)
def trained_classifiers(
    env: GridLanderEnv, seed: int = 0, eps_p: float = DEFAULT_EPS_P
) -> dict[int, TrajectoryClassifier]:
    """One voting ensemble per partition granularity m in {1, 2, 3}."""
    out = {}
    for m in (1, 2, 3):
        pool = labeled_pool(env, m, TRAIN_GAMMAS, seed, eps_p)
        out[m] = train_classifier(pool, seed=stable_seed(seed, "chi", m))
    return out


def held_out_pool(
    env: GridLanderEnv, m: int, seed: int = 0, eps_p: float = DEFAULT_EPS_P
) -> list[LabeledFeature]:
    """Evaluation samples at attack strengths absent from training."""
    return labeled_pool(env, m, TEST_GAMMAS, stable_seed(seed, "test"), eps_p)


def accept_share(samples: list[LabeledFeature]) -> float:
    return sum(1 for s in samples if s.label == Decision.ACCEPT) / len(samples)
