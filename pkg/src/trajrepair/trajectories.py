"""Trajectory data model: steps, provenance, temporal parts, persistence.

File format (one step per line, one trajectory per block):

    #set eta=<float> gamma=<float>
    #traj id=<n> provenance=<C|A|U>
    x y action reward ox oy
    ...
    #end

Reals are written with ``repr`` so a save/load round trip is bit-exact.
All types are immutable after construction and every operation is pure.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from trajrepair.env import GridAction, GridLanderEnv, GridState, Observation


class Provenance(Enum):
    """Evaluation-only metadata: decision code paths never read it."""

    CLEAN = "C"
    ADVERSARIAL = "A"
    UNKNOWN = "U"


@dataclass(frozen=True)
class Step:
    state: GridState
    action: GridAction
    reward: float
    observation: Observation


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    provenance: Provenance = Provenance.UNKNOWN
    traj_id: int = -1

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("trajectory must contain at least one step")

    def __len__(self) -> int:
        return len(self.steps)

    def without_provenance(self) -> "Trajectory":
        """Provenance-stripped view handed to decision code."""
        return replace(self, provenance=Provenance.UNKNOWN)

    def observations(self) -> tuple[Observation, ...]:
        return tuple(s.observation for s in self.steps)


@dataclass(frozen=True)
class TrajectorySet:
    trajectories: tuple[Trajectory, ...]
    eta: float = 0.0
    gamma_frac: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0 or not 0.0 <= self.gamma_frac <= 1.0:
            raise ValueError("eta and gamma_frac must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.trajectories)

    def without_provenance(self) -> "TrajectorySet":
        return TrajectorySet(
            tuple(t.without_provenance() for t in self.trajectories),
            self.eta,
            self.gamma_frac,
        )


@dataclass(frozen=True)
class TrajectoryPart:
    """Contiguous slice of a parent trajectory.

    ``start`` is the absolute time index of the first step within the parent,
    which the occupancy measure needs to line up visit probabilities.
    ``closing`` is the observation of the state the part hands to its
    successor part (None for the parent's final part); including it in the
    polyline makes a modified action at the part's last step geometrically
    visible.
    """

    parent_id: int
    index: int
    start: int
    steps: tuple[Step, ...]
    closing: Observation | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def observations(self) -> tuple[Observation, ...]:
        obs = tuple(s.observation for s in self.steps)
        if self.closing is not None:
            obs = obs + (self.closing,)
        return obs


def trajectory_return(t: Trajectory | TrajectoryPart | Sequence[Step]) -> float:
    steps = t.steps if hasattr(t, "steps") else t
    return sum(s.reward for s in steps)


def split(
    t: Trajectory, m: int, env: GridLanderEnv | None = None
) -> tuple[TrajectoryPart, ...]:
    """Split into ``m`` contiguous parts; remainders go to the earliest parts.

    Interior parts close with the next part's first observation.  When the
    environment is given, the final part closes with the observation of the
    trajectory's terminal successor state, so that a part ending on the pad,
    hovering mid-air, or crashing off-pad each trace geometrically distinct
    polylines.
    """
    n = len(t.steps)
    if not 1 <= m <= n:
        raise ValueError(f"cannot split a length-{n} trajectory into {m} parts")
    final_closing = None
    if env is not None:
        last = t.steps[-1]
        end_state, _ = env.step(last.state, last.action)
        final_closing = env.observe(end_state)
    base, rem = divmod(n, m)
    parts = []
    start = 0
    for i in range(m):
        size = base + (1 if i < rem else 0)
        end = start + size
        closing = t.steps[end].observation if end < n else final_closing
        parts.append(
            TrajectoryPart(t.traj_id, i, start, t.steps[start:end], closing)
        )
        start = end
    return tuple(parts)


def rollout(
    env: GridLanderEnv,
    pi,
    s0: GridState,
    t_max: int,
    provenance: Provenance = Provenance.UNKNOWN,
    traj_id: int = -1,
) -> Trajectory:
    """Greedy rollout of ``pi`` from ``s0`` until terminal or ``t_max`` steps."""
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    if env.is_terminal(s0):
        raise ValueError(f"cannot roll out from terminal state {s0}")
    steps = []
    s = s0
    for _ in range(t_max):
        a = pi.greedy(s)
        nxt, r = env.step(s, a)
        steps.append(Step(s, a, r, env.observe(s)))
        s = nxt
        if env.is_terminal(s):
            break
    return Trajectory(tuple(steps), provenance, traj_id)


def replay_actions(
    env: GridLanderEnv,
    s0: GridState,
    actions: Sequence[GridAction],
    provenance: Provenance = Provenance.UNKNOWN,
    traj_id: int = -1,
) -> Trajectory:
    """Re-simulate an action list through the dynamics from ``s0``.

    Stops early if a terminal state is reached before the list is exhausted;
    used to keep modified trajectories consistent with the transition model.
    """
    steps = []
    s = s0
    for a in actions:
        if env.is_terminal(s):
            break
        nxt, r = env.step(s, a)
        steps.append(Step(s, a, r, env.observe(s)))
        s = nxt
    if not steps:
        raise ValueError("no executable action before the terminal state")
    return Trajectory(tuple(steps), provenance, traj_id)


def measure_gamma(t: Trajectory, clean_policy) -> float:
    """Fraction of steps whose action differs from the clean policy's choice."""
    mismatches = sum(1 for s in t.steps if s.action != clean_policy.greedy(s.state))
    return mismatches / len(t.steps)


def dynamics_consistent(env: GridLanderEnv, t: Trajectory) -> bool:
    """Every (s, a, s') triple and reward must agree with ``env.step``."""
    for cur, nxt in zip(t.steps, t.steps[1:]):
        expected, r = env.step(cur.state, cur.action)
        if expected != nxt.state or r != cur.reward:
            return False
    last = t.steps[-1]
    _, r = env.step(last.state, last.action)
    return r == last.reward


def save_set(ts: TrajectorySet, path: str | Path) -> None:
    lines = [f"#set eta={ts.eta!r} gamma={ts.gamma_frac!r}"]
    for t in ts.trajectories:
        lines.append(f"#traj id={t.traj_id} provenance={t.provenance.value}")
        for s in t.steps:
            lines.append(
                f"{s.state.x} {s.state.y} {s.action.name} {s.reward!r} "
                f"{s.observation[0]!r} {s.observation[1]!r}"
            )
        lines.append("#end")
    Path(path).write_text("\n".join(lines) + "\n")


class TrajectoryFormatError(ValueError):
    """Malformed trajectory file; the message names the offending line."""


def load_set(path: str | Path) -> TrajectorySet:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#set "):
        raise TrajectoryFormatError(f"{path}:1: missing '#set' header")
    try:
        fields = dict(item.split("=", 1) for item in lines[0][5:].split())
        eta = float(fields["eta"])
        gamma_frac = float(fields["gamma"])
    except (KeyError, ValueError) as exc:
        raise TrajectoryFormatError(f"{path}:1: malformed '#set' header") from exc

    trajectories: list[Trajectory] = []
    steps: list[Step] | None = None
    header: tuple[int, Provenance] | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#traj"):
            if steps is not None:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: '#traj' before previous block's '#end'"
                )
            try:
                fields = dict(item.split("=", 1) for item in line[6:].split())
                header = (int(fields["id"]), Provenance(fields["provenance"]))
            except (KeyError, ValueError) as exc:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: malformed '#traj' header"
                ) from exc
            steps = []
        elif line == "#end":
            if steps is None or header is None:
                raise TrajectoryFormatError(f"{path}:{lineno}: '#end' without '#traj'")
            if not steps:
                raise TrajectoryFormatError(f"{path}:{lineno}: empty trajectory block")
            trajectories.append(Trajectory(tuple(steps), header[1], header[0]))
            steps = None
            header = None
        else:
            if steps is None:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: step record outside a '#traj' block"
                )
            parts = line.split()
            if len(parts) != 6:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: expected 6 fields, got {len(parts)}"
                )
            try:
                state = GridState(int(parts[0]), int(parts[1]))
                action = GridAction[parts[2]]
                reward = float(parts[3])
                obs = (float(parts[4]), float(parts[5]))
            except (KeyError, ValueError) as exc:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: malformed step record"
                ) from exc
            steps.append(Step(state, action, reward, obs))
    if steps is not None:
        raise TrajectoryFormatError(f"{path}:{len(lines)}: truncated file, missing '#end'")
    return TrajectorySet(tuple(trajectories), eta, gamma_frac)


def all_steps(trajectories: Iterable[Trajectory]) -> list[Step]:
    out: list[Step] = []
    for t in trajectories:
        out.extend(t.steps)
    return out
