"""Options-based trajectory repair and run-time option chaining.

``repair_options`` splits clean and demonstrated trajectories into M temporal
parts, scores every demonstrated part against the clean reference, and admits
a part into the training pool when the classifier accepts it or when the
classifier rejects it but the demonstration's return stays within ``eps_p``
of its Fréchet-matched clean trajectory's return (the return-ratio override,
which can only rescue rejects, never revoke accepts).  Clean parts are always
included.  Each part index then gets a behaviour-cloned sub-policy packaged
as an option (initiation states, policy, termination states), and a chain
table maps every termination state of option i to the nearest initiation
state of option i+1.

``chain_options`` executes the options in sequence.  Hand-off follows the
chain table as policy-query aliasing: the environment always advances from
the true state, but the first query to the next option's policy is made at
the mapped initiation state.  Aliasing never teleports the lander, so repair
cannot fabricate reward.

Decisions are a pure function of divergence features and returns; provenance
metadata is stripped before any scoring and never influences the outcome.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from trajrepair.classifier import Decision, TrajectoryClassifier
from trajrepair.divergence import (
    CleanReference,
    DivergenceFeatures,
    build_reference,
    features,
    frechet_distance,
)
from trajrepair.env import GridLanderEnv, GridState
from trajrepair.imitation import Policy, PolicyValue, behavior_clone
from trajrepair.trajectories import (
    Step,
    Trajectory,
    TrajectoryPart,
    TrajectorySet,
    split,
    trajectory_return,
)


class DecisionReason(Enum):
    CLASSIFIER_ACCEPT = "ClassifierAccept"
    RETURN_RATIO_OVERRIDE = "ReturnRatioOverride"
    REJECT = "Reject"


@dataclass(frozen=True)
class Option:
    index: int
    initiation: frozenset[GridState]
    policy: Policy
    termination: frozenset[GridState]

    def __post_init__(self) -> None:
        if not self.initiation or not self.termination:
            raise ValueError("initiation and termination sets must be non-empty")


@dataclass(frozen=True)
class PartDecision:
    traj_id: int
    part_index: int
    decision: Decision
    reason: DecisionReason
    features: DivergenceFeatures
    return_ratio: float


@dataclass(frozen=True)
class RepairReport:
    """Per-part decisions plus accounting of demonstrated data kept/discarded."""

    n_parts: int
    decisions: tuple[PartDecision, ...]
    skipped: tuple[int, ...]
    demo_steps_used: int
    demo_steps_discarded: int
    pre: PolicyValue | None = None
    post: PolicyValue | None = None

    def counts(self, part_index: int) -> tuple[int, int, int]:
        """(classifier accepts, override accepts, rejects) at one part index."""
        acc = ovr = rej = 0
        for d in self.decisions:
            if d.part_index != part_index:
                continue
            if d.reason == DecisionReason.CLASSIFIER_ACCEPT:
                acc += 1
            elif d.reason == DecisionReason.RETURN_RATIO_OVERRIDE:
                ovr += 1
            else:
                rej += 1
        return acc, ovr, rej

    def aggregate_decision(self, part_index: int) -> tuple[Decision, bool]:
        """Majority decision over the demonstrated parts at one index.

        The asterisk flag marks decisions that depend on the return-ratio
        override: with the rescued parts counted as rejects the majority
        would flip.
        """
        acc, ovr, rej = self.counts(part_index)
        with_override = Decision.ACCEPT if acc + ovr > rej else Decision.REJECT
        without = Decision.ACCEPT if acc > rej + ovr else Decision.REJECT
        return with_override, with_override != without

    def aggregate_decisions(self) -> tuple[tuple[Decision, bool], ...]:
        return tuple(self.aggregate_decision(i) for i in range(self.n_parts))

    def with_values(self, pre: PolicyValue, post: PolicyValue) -> "RepairReport":
        return replace(self, pre=pre, post=post)


def report(
    pre: PolicyValue, post: PolicyValue, decisions: "RepairReport"
) -> RepairReport:
    """Attach pre/post policy values to a decision record."""
    return decisions.with_values(pre, post)


def match_clean_part(
    demo_part: TrajectoryPart, clean_parts: Sequence[TrajectoryPart]
) -> TrajectoryPart:
    """Clean part of the same index closest in Fréchet distance."""
    if not clean_parts:
        raise ValueError("clean_parts must not be empty")
    if any(cp.index != demo_part.index for cp in clean_parts):
        raise ValueError("clean parts must share the demonstrated part's index")
    obs = demo_part.observations()
    return min(
        clean_parts, key=lambda cp: (frechet_distance(obs, cp.observations()), cp.parent_id)
    )


def _return_ratio(demo_return: float, clean_return: float) -> float:
    if clean_return == 0.0:
        if demo_return == 0.0:
            return 1.0
        return math.inf if demo_return > 0.0 else -math.inf
    return demo_return / clean_return


def part_decisions(
    env: GridLanderEnv,
    clean: TrajectorySet,
    demo: TrajectorySet,
    m: int,
    classifiers: Sequence[TrajectoryClassifier] | TrajectoryClassifier,
    eps_p: float = 0.1,
    use_override: bool = True,
    ref: CleanReference | None = None,
) -> RepairReport:
    """Score and decide every demonstrated part without building options."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not clean.trajectories:
        raise ValueError("clean trajectory set must not be empty")
    if isinstance(classifiers, TrajectoryClassifier):
        classifiers = [classifiers] * m
    if len(classifiers) != m:
        raise ValueError(f"need one classifier per part, got {len(classifiers)}")
    demo = demo.without_provenance()
    if ref is None:
        ref = build_reference(clean, env.gamma)

    clean_parts: list[list[TrajectoryPart]] = [[] for _ in range(m)]
    clean_returns: dict[int, float] = {}
    for t in clean.trajectories:
        if len(t.steps) < m:
            raise ValueError(
                f"clean trajectory {t.traj_id} shorter than {m} parts"
            )
        clean_returns[t.traj_id] = trajectory_return(t)
        for part in split(t, m, env):
            clean_parts[part.index].append(part)

    decisions: list[PartDecision] = []
    skipped: list[int] = []
    used = discarded = 0
    for t in demo.trajectories:
        if len(t.steps) < m:
            skipped.append(t.traj_id)
            continue
        demo_return = trajectory_return(t)
        for part in split(t, m, env):
            f = features(part, clean_parts[part.index], ref)
            pred = classifiers[part.index].predict(f)
            matched = match_clean_part(part, clean_parts[part.index])
            ratio = _return_ratio(demo_return, clean_returns[matched.parent_id])
            if pred == Decision.ACCEPT:
                reason = DecisionReason.CLASSIFIER_ACCEPT
            elif use_override and ratio > 1.0 - eps_p:
                reason = DecisionReason.RETURN_RATIO_OVERRIDE
            else:
                reason = DecisionReason.REJECT
            decision = (
                Decision.REJECT
                if reason == DecisionReason.REJECT
                else Decision.ACCEPT
            )
            if decision == Decision.ACCEPT:
                used += len(part)
            else:
                discarded += len(part)
            decisions.append(
                PartDecision(t.traj_id, part.index, decision, reason, f, ratio)
            )
    return RepairReport(m, tuple(decisions), tuple(skipped), used, discarded)


def repair_options(
    env: GridLanderEnv,
    clean: TrajectorySet,
    demo: TrajectorySet,
    m: int,
    classifiers: Sequence[TrajectoryClassifier] | TrajectoryClassifier,
    eps_p: float = 0.1,
    use_override: bool = True,
) -> tuple[tuple[Option, ...], dict[GridState, GridState], RepairReport]:
    """Build repaired options, the chain table, and the decision report."""
    rep = part_decisions(env, clean, demo, m, classifiers, eps_p, use_override)
    demo = demo.without_provenance()

    accepted: dict[tuple[int, int], bool] = {
        (d.traj_id, d.part_index): d.decision == Decision.ACCEPT
        for d in rep.decisions
    }
    members: list[list[TrajectoryPart]] = [[] for _ in range(m)]
    for t in clean.trajectories:
        for part in split(t, m, env):
            members[part.index].append(part)
    skipped = set(rep.skipped)
    for t in demo.trajectories:
        if t.traj_id in skipped or len(t.steps) < m:
            continue
        for part in split(t, m, env):
            if accepted.get((t.traj_id, part.index)):
                members[part.index].append(part)

    options = []
    for i in range(m):
        pi = behavior_clone((p.steps for p in members[i]), env)
        initiation = frozenset(p.steps[0].state for p in members[i])
        termination = frozenset(p.steps[-1].state for p in members[i])
        options.append(Option(i, initiation, pi, termination))

    chain: dict[GridState, GridState] = {}
    for i in range(m - 1):
        targets = sorted(options[i + 1].initiation)
        for s in sorted(options[i].termination):
            obs = env.observe(s)
            chain[s] = min(
                targets,
                key=lambda c: (env.observation_distance(obs, env.observe(c)), c),
            )
    return tuple(options), chain, rep


def landed_on_pad(env: GridLanderEnv) -> Callable[[GridState], bool]:
    """Goal predicate for the lander task: terminal on a pad column."""
    return lambda s: env.is_terminal(s) and s.x in env.pad


def chain_options(
    s0: GridState,
    goal: Callable[[GridState], bool],
    options: Sequence[Option],
    chain: Mapping[GridState, GridState],
    env: GridLanderEnv,
    eps_chain: float,
    t_max: int,
) -> tuple[bool, Trajectory]:
    """Execute the option sequence from ``s0``; True on goal, False on budget.

    Execution begins with the option whose initiation set lies closest to
    ``s0`` (ties to the earliest option), so episodes may start mid-task.
    After every step the true state is compared against the current option's
    termination set within ``eps_chain`` (observation L2).  On a match the
    closest termination state is chained to the next option's initiation
    state, which serves as the next policy query whenever the true state is
    outside that policy's table; dynamics always continue from the true
    state, so aliasing can bridge uncovered states but never teleport.
    """
    if not options:
        raise ValueError("options must not be empty")
    if env.is_terminal(s0):
        raise ValueError(f"cannot start from terminal state {s0}")

    def initiation_distance(opt: Option, s: GridState) -> float:
        obs = env.observe(s)
        return min(
            env.observation_distance(obs, env.observe(i)) for i in opt.initiation
        )

    idx = min(range(len(options)), key=lambda i: (initiation_distance(options[i], s0), i))
    s_true = s0
    s_query = s0
    steps: list[Step] = []
    success = False
    for _ in range(t_max):
        a = options[idx].policy.greedy(s_query)
        nxt, r = env.step(s_true, a)
        steps.append(Step(s_true, a, r, env.observe(s_true)))
        s_true = nxt
        if env.is_terminal(s_true):
            success = goal(s_true)
            break
        s_query = s_true
        if idx < len(options) - 1:
            obs = env.observe(s_true)
            matches = [
                s
                for s in options[idx].termination
                if env.observation_distance(obs, env.observe(s)) <= eps_chain
            ]
            if matches:
                s_end = min(
                    matches,
                    key=lambda s: (
                        env.observation_distance(obs, env.observe(s)),
                        s,
                    ),
                )
                if s_end not in chain:
                    raise KeyError(
                        f"termination state {s_end} has no chain entry"
                    )
                idx += 1
                if s_true not in options[idx].policy.visited():
                    s_query = chain[s_end]
    return success, Trajectory(tuple(steps))


def evaluate_options(
    options: Sequence[Option],
    chain: Mapping[GridState, GridState],
    env: GridLanderEnv,
    starts: Sequence[GridState],
    eps_chain: float,
    t_max: int,
) -> PolicyValue:
    """One chained episode per start; returns are sums of recorded rewards."""
    if not starts:
        raise ValueError("starts must not be empty")
    goal = landed_on_pad(env)
    returns = []
    for s0 in starts:
        _, traj = chain_options(s0, goal, options, chain, env, eps_chain, t_max)
        returns.append(trajectory_return(traj))
    return PolicyValue(sum(returns) / len(returns), len(returns), tuple(returns))


def default_eps_chain(env: GridLanderEnv) -> float:
    """1.5 grid cells in observation space."""
    return 1.5 * max(1.0 / env.width, 1.0 / env.height)


_DECISION_FIELDS = ["traj_id", "part_index", "decision", "reason", "oc", "fd", "ratio"]


def write_decision_csv(rep: RepairReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_DECISION_FIELDS)
        for d in rep.decisions:
            writer.writerow(
                [
                    d.traj_id,
                    d.part_index,
                    d.decision.value,
                    d.reason.value,
                    repr(d.features.oc),
                    repr(d.features.fd),
                    repr(d.return_ratio),
                ]
            )


def read_decision_csv(path: str | Path, n_parts: int) -> RepairReport:
    decisions = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _DECISION_FIELDS:
            raise ValueError(f"{path}: unexpected decision CSV header")
        for row in reader:
            decisions.append(
                PartDecision(
                    int(row[0]),
                    int(row[1]),
                    Decision(row[2]),
                    DecisionReason(row[3]),
                    DivergenceFeatures(float(row[4]), float(row[5])),
                    float(row[6]),
                )
            )
    used = sum(1 for d in decisions if d.decision == Decision.ACCEPT)
    discarded = len(decisions) - used
    return RepairReport(n_parts, tuple(decisions), (), used, discarded)
