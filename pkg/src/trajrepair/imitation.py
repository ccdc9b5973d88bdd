"""Tabular behavior cloning and rollout-based policy evaluation.

A policy is a table of empirical action frequencies per visited state; greedy
queries take the argmax with the fixed action order as tie-break.  Unvisited
states fall back to the table entry of the nearest visited state, measured by
Euclidean distance between observation embeddings (ties resolved by
lexicographic state order).  Trained policies are immutable and safe to
evaluate concurrently.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from trajrepair.env import ACTION_ORDER, GridAction, GridLanderEnv, GridState
from trajrepair.trajectories import Step, Trajectory, rollout

ProbVector = tuple[float, float, float, float]


class Policy:
    """State -> action-probability table with a nearest-neighbour fallback."""

    def __init__(
        self, table: dict[GridState, ProbVector], width: int, height: int
    ) -> None:
        if not table:
            raise ValueError("policy table must not be empty")
        for s, probs in table.items():
            if abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError(f"action probabilities at {s} do not sum to 1")
        self._table = dict(table)
        self.width = width
        self.height = height

    @property
    def table(self) -> dict[GridState, ProbVector]:
        return dict(self._table)

    def visited(self) -> frozenset[GridState]:
        return frozenset(self._table)

    def _observe(self, s: GridState) -> tuple[float, float]:
        return (s.x / self.width, s.y / self.height)

    def _nearest_visited(self, s: GridState) -> GridState:
        ox, oy = self._observe(s)
        best = None
        best_key = None
        for v in self._table:
            vx, vy = self._observe(v)
            key = ((ox - vx) ** 2 + (oy - vy) ** 2, v.x, v.y)
            if best_key is None or key < best_key:
                best_key = key
                best = v
        assert best is not None
        return best

    def action_probs(self, s: GridState) -> ProbVector:
        probs = self._table.get(s)
        if probs is None:
            probs = self._table[self._nearest_visited(s)]
        return probs

    def greedy(self, s: GridState) -> GridAction:
        probs = self.action_probs(s)
        best = max(range(4), key=lambda i: (probs[i], -i))
        return ACTION_ORDER[best]

    def with_row(self, s: GridState, probs: ProbVector) -> "Policy":
        """Copy with the distribution at one state replaced."""
        table = dict(self._table)
        table[s] = probs
        return Policy(table, self.width, self.height)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Policy)
            and self._table == other._table
            and self.width == other.width
            and self.height == other.height
        )


@dataclass(frozen=True)
class PolicyValue:
    mean_return: float
    episodes: int
    returns: tuple[float, ...]

    @property
    def median_return(self) -> float:
        return statistics.median(self.returns)


def behavior_clone(
    train: Iterable[Sequence[Step]], env: GridLanderEnv
) -> Policy:
    """Fit empirical action frequencies per visited state.

    The greedy table minimises the empirical 0-1 loss at every state; adding
    duplicate copies of the training data leaves the result unchanged.
    """
    counts: dict[GridState, list[int]] = {}
    n_steps = 0
    for steps in train:
        for step in steps:
            row = counts.setdefault(step.state, [0, 0, 0, 0])
            row[step.action] += 1
            n_steps += 1
    if n_steps == 0:
        raise ValueError("behavior cloning needs at least one training step")
    table: dict[GridState, ProbVector] = {}
    for s, row in counts.items():
        total = sum(row)
        table[s] = tuple(c / total for c in row)
    return Policy(table, env.width, env.height)


def evaluate(
    pi: Policy,
    env: GridLanderEnv,
    starts: Sequence[GridState],
    t_max: int,
) -> PolicyValue:
    """One deterministic rollout per start state."""
    if not starts:
        raise ValueError("starts must not be empty")
    returns = tuple(
        sum(s.reward for s in rollout(env, pi, s0, t_max).steps) for s0 in starts
    )
    return PolicyValue(sum(returns) / len(returns), len(returns), returns)


def value_ratio(
    pi: Policy,
    pi_ref: Policy,
    env: GridLanderEnv,
    starts: Sequence[GridState],
    t_max: int,
) -> float:
    ref = evaluate(pi_ref, env, starts, t_max)
    if ref.mean_return == 0.0:
        raise ZeroDivisionError("reference policy has zero mean return")
    return evaluate(pi, env, starts, t_max).mean_return / ref.mean_return


def save_policy(pi: Policy, path: str | Path) -> None:
    """Text table, one row per visited state: x y p_noop p_main p_left p_right."""
    lines = [f"#policy width={pi.width} height={pi.height}"]
    for s in sorted(pi.visited()):
        p = pi.action_probs(s)
        lines.append(f"{s.x} {s.y} {p[0]!r} {p[1]!r} {p[2]!r} {p[3]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_policy(path: str | Path) -> Policy:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#policy "):
        raise ValueError(f"{path}:1: missing '#policy' header")
    fields = dict(item.split("=", 1) for item in lines[0][8:].split())
    width, height = int(fields["width"]), int(fields["height"])
    table: dict[GridState, ProbVector] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 fields")
        s = GridState(int(parts[0]), int(parts[1]))
        table[s] = tuple(float(v) for v in parts[2:])
    return Policy(table, width, height)


def clone_from_trajectories(
    trajectories: Iterable[Trajectory], env: GridLanderEnv
) -> Policy:
    return behavior_clone((t.steps for t in trajectories), env)
