"""Deterministic "GridLander" environment and its exact optimal-policy solver.

A lander sits on a W x H grid of cells; y counts altitude and y == 0 is the
ground row.  Gravity pulls the lander down one cell per step unless the main
engine fires:

- NOOP:  drop one cell, no cost
- MAIN:  hold altitude, costs c_main
- LEFT:  shift one column left (clamped) while dropping, costs c_side
- RIGHT: shift one column right (clamped) while dropping, costs c_side

Touching the ground ends the episode: landing on a pad column pays r_land,
any other column pays r_crash.  Transitions and rewards are fully
deterministic, every value is immutable after construction, and all
operations are pure, so instances are safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator, NamedTuple


class GridState(NamedTuple):
    """Grid cell (column, altitude); altitude 0 is the ground row."""

    x: int
    y: int


class GridAction(IntEnum):
    """The four engine commands.  Enum order doubles as the tie-break order."""

    NOOP = 0
    MAIN = 1
    LEFT = 2
    RIGHT = 3


ACTION_ORDER = (GridAction.NOOP, GridAction.MAIN, GridAction.LEFT, GridAction.RIGHT)

Observation = tuple[float, float]


@dataclass(frozen=True)
class GridLanderEnv:
    width: int = 10
    height: int = 8
    pad: frozenset[int] = field(default_factory=lambda: frozenset({4, 5}))
    gamma: float = 0.99
    r_land: float = 320.0
    r_crash: float = -100.0
    c_main: float = -0.3
    c_side: float = -0.03
    kappa: float = 25.0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 2:
            raise ValueError("grid must be at least 1x2")
        if not self.pad or not all(0 <= p < self.width for p in self.pad):
            raise ValueError("pad must be a non-empty subset of the columns")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")

    def is_terminal(self, s: GridState) -> bool:
        return s.y == 0

    def states(self) -> Iterator[GridState]:
        for y in range(self.height):
            for x in range(self.width):
                yield GridState(x, y)

    def contains(self, s: GridState) -> bool:
        return 0 <= s.x < self.width and 0 <= s.y < self.height

    def pad_reachable(self, s: GridState) -> bool:
        """Whether some action sequence from ``s`` can still reach a pad.

        Horizontal travel costs one cell of altitude per column, so the pad
        is reachable iff the nearest pad column is at most ``y`` away.
        """
        return min(abs(s.x - p) for p in self.pad) <= s.y

    def action_cost(self, a: GridAction) -> float:
        if a == GridAction.MAIN:
            return self.c_main
        if a in (GridAction.LEFT, GridAction.RIGHT):
            return self.c_side
        return 0.0

    def step(self, s: GridState, a: GridAction) -> tuple[GridState, float]:
        """Deterministic successor and reward; raises on terminal states."""
        if not self.contains(s):
            raise ValueError(f"state {s} outside the {self.width}x{self.height} grid")
        if self.is_terminal(s):
            raise ValueError(f"cannot step terminal state {s}")
        x, y = s
        if a == GridAction.MAIN:
            nxt = GridState(x, y)
        elif a == GridAction.LEFT:
            nxt = GridState(max(0, x - 1), y - 1)
        elif a == GridAction.RIGHT:
            nxt = GridState(min(self.width - 1, x + 1), y - 1)
        else:
            nxt = GridState(x, y - 1)
        reward = self.action_cost(a)
        if nxt.y == 0:
            reward += self.r_land if nxt.x in self.pad else self.r_crash
        return nxt, reward

    def observe(self, s: GridState) -> Observation:
        """Continuous embedding (x/W, y/H); injective on the grid."""
        return (s.x / self.width, s.y / self.height)

    def observation_distance(self, a: Observation, b: Observation) -> float:
        return math.hypot(a[0] - b[0], a[1] - b[1])

    def pad_top_observations(self) -> tuple[Observation, ...]:
        return tuple((p / self.width, 0.0) for p in sorted(self.pad))

    def reward_of_observation(self, o: Observation, a: GridAction) -> float:
        """Smooth surrogate of the discrete reward over continuous observations.

        Action cost plus a Gaussian landing bump centred on the pad columns of
        the ground row, weighted by (1 - altitude).  On the ground row its
        argmax over x coincides with the discrete reward's pad columns, and it
        is differentiable everywhere so finite-difference gradients exist.
        """
        d2 = min(
            (o[0] - px) ** 2 + (o[1] - py) ** 2
            for px, py in self.pad_top_observations()
        )
        shaping = self.r_land * math.exp(-self.kappa * d2) * (1.0 - o[1])
        return self.action_cost(a) + shaping


def optimal_state_values(env: GridLanderEnv, tol: float = 1e-9) -> dict[GridState, float]:
    """Optimal value of every state; Bellman residual below ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    values = {s: 0.0 for s in env.states()}
    nonterminal = [s for s in env.states() if not env.is_terminal(s)]
    while True:
        residual = 0.0
        for s in nonterminal:
            best = -math.inf
            for a in ACTION_ORDER:
                nxt, r = env.step(s, a)
                q = r + env.gamma * (0.0 if env.is_terminal(nxt) else values[nxt])
                if q > best:
                    best = q
            residual = max(residual, abs(best - values[s]))
            values[s] = best
        if residual < tol:
            break
    return values


def action_value_gap(
    env: GridLanderEnv, values: dict[GridState, float], s: GridState, a: GridAction
) -> float:
    """How much value taking ``a`` at ``s`` sacrifices against acting optimally."""
    nxt, r = env.step(s, a)
    q = r + env.gamma * (0.0 if env.is_terminal(nxt) else values[nxt])
    return values[s] - q


def value_iteration(env: GridLanderEnv, tol: float = 1e-9):
    """Exact optimal policy by value iteration; plays the benign expert.

    Ties are broken by the fixed action order NOOP < MAIN < LEFT < RIGHT.
    The returned policy is deterministic (one-hot action distributions) and
    defined on every non-terminal state.
    """
    from trajrepair.imitation import Policy  # deferred: imitation imports env types

    values = optimal_state_values(env, tol)
    nonterminal = [s for s in env.states() if not env.is_terminal(s)]
    table: dict[GridState, tuple[float, float, float, float]] = {}
    for s in nonterminal:
        best_a = GridAction.NOOP
        best_q = -math.inf
        for a in ACTION_ORDER:
            nxt, r = env.step(s, a)
            q = r + env.gamma * (0.0 if env.is_terminal(nxt) else values[nxt])
            if q > best_q + tol:
                best_q = q
                best_a = a
        probs = [0.0, 0.0, 0.0, 0.0]
        probs[best_a] = 1.0
        table[s] = tuple(probs)
    return Policy(table, env.width, env.height)


_CONFIG_KEYS = (
    "width",
    "height",
    "pad",
    "gamma",
    "r_land",
    "r_crash",
    "c_main",
    "c_side",
    "kappa",
)


def save_env_config(env: GridLanderEnv, path: str | Path) -> None:
    """Write the environment as a flat key=value text file."""
    lines = [
        f"width={env.width}",
        f"height={env.height}",
        "pad=" + ",".join(str(p) for p in sorted(env.pad)),
        f"gamma={env.gamma!r}",
        f"r_land={env.r_land!r}",
        f"r_crash={env.r_crash!r}",
        f"c_main={env.c_main!r}",
        f"c_side={env.c_side!r}",
        f"kappa={env.kappa!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_env_config(path: str | Path) -> GridLanderEnv:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    kwargs: dict = {}
    try:
        if "width" in values:
            kwargs["width"] = int(values["width"])
        if "height" in values:
            kwargs["height"] = int(values["height"])
        if "pad" in values:
            kwargs["pad"] = frozenset(int(p) for p in values["pad"].split(",") if p)
        for key in ("gamma", "r_land", "r_crash", "c_main", "c_side", "kappa"):
            if key in values:
                kwargs[key] = float(values[key])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed value: {exc}") from exc
    return GridLanderEnv(**kwargs)
