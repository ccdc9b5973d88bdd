"""Adversarial trajectory modification: directed runs and gradient-led swaps.

Directed attacks replace a consecutive run of actions (at the beginning,
middle, or end of a trajectory) with the action whose successor lies farthest
from the recorded clean successor.  The gradient attack ranks steps by the
finite-difference gradient magnitude of the smooth surrogate reward and swaps
the actions at the extremes.  After any modification the downstream states
are re-simulated through the dynamics so modified trajectories stay
physically consistent.

Given a fixed seed both attacks are pure functions of their inputs.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from trajrepair.env import ACTION_ORDER, GridAction, GridLanderEnv, GridState
from trajrepair.trajectories import (
    Provenance,
    Trajectory,
    TrajectorySet,
    replay_actions,
)

FD_STEP = 1e-4  # central-difference step for the surrogate-reward gradient


class AttackKind(Enum):
    BEG = "BEG"
    MID = "MID"
    END = "END"
    FLP = "FLP"


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    eta: float
    gamma_frac: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0 or not 0.0 <= self.gamma_frac <= 1.0:
            raise ValueError("eta and gamma_frac must lie in [0, 1]")


def parse_attack_spec(text: str) -> AttackSpec:
    """Parse the CLI form ``kind=END,eta=0.6,gamma=0.3,seed=7``."""
    fields: dict[str, str] = {}
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"malformed attack spec item {item!r}")
        key, _, value = item.partition("=")
        fields[key.strip()] = value.strip()
    try:
        return AttackSpec(
            kind=AttackKind(fields["kind"].upper()),
            eta=float(fields.get("eta", "1.0")),
            gamma_frac=float(fields.get("gamma", "1.0")),
            seed=int(fields.get("seed", "0")),
        )
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed attack spec {text!r}: {exc}") from exc


def most_divergent_action(
    env: GridLanderEnv, s: GridState, s_next: GridState
) -> GridAction:
    """Action whose successor from ``s`` is farthest from ``s_next``.

    Distance is Euclidean between observation embeddings; ties fall back to
    the fixed action order.
    """
    target = env.observe(s_next)
    best = GridAction.NOOP
    best_d = -1.0
    for a in ACTION_ORDER:
        nxt, _ = env.step(s, a)
        d = env.observation_distance(env.observe(nxt), target)
        if d > best_d + 1e-12:
            best_d = d
            best = a
    return best


def _select_indices(n: int, eta: float, seed: int) -> list[int]:
    k = math.floor(eta * n)
    if k == 0:
        return []
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))


def _attack_window(length: int, gamma_frac: float, kind: AttackKind) -> range:
    k = math.ceil(gamma_frac * length)
    if k == 0:
        return range(0)
    if kind == AttackKind.BEG:
        start = 0
    elif kind == AttackKind.MID:
        start = (length - k) // 2
    else:
        start = length - k
    return range(start, start + k)


def directed_attack(
    clean: TrajectorySet, spec: AttackSpec, env: GridLanderEnv
) -> TrajectorySet:
    """Replace a consecutive run of recorded actions and re-simulate."""
    if spec.kind not in (AttackKind.BEG, AttackKind.MID, AttackKind.END):
        raise ValueError(f"directed attack cannot use kind {spec.kind}")
    if not clean.trajectories:
        raise ValueError("cannot attack an empty trajectory set")
    selected = set(_select_indices(len(clean.trajectories), spec.eta, spec.seed))
    out = []
    for i, t in enumerate(clean.trajectories):
        if i not in selected:
            out.append(t)
            continue
        actions = [s.action for s in t.steps]
        for j in _attack_window(len(t.steps), spec.gamma_frac, spec.kind):
            s_next, _ = env.step(t.steps[j].state, t.steps[j].action)
            actions[j] = most_divergent_action(env, t.steps[j].state, s_next)
        out.append(
            replay_actions(
                env, t.steps[0].state, actions, Provenance.ADVERSARIAL, t.traj_id
            )
        )
    return TrajectorySet(tuple(out), len(selected) / len(out), spec.gamma_frac)


def _gradient_magnitudes(env: GridLanderEnv, t: Trajectory) -> np.ndarray:
    grads = np.empty(len(t.steps))
    for j, step in enumerate(t.steps):
        ox, oy = step.observation
        gx = (
            env.reward_of_observation((ox + FD_STEP, oy), step.action)
            - env.reward_of_observation((ox - FD_STEP, oy), step.action)
        ) / (2 * FD_STEP)
        gy = (
            env.reward_of_observation((ox, oy + FD_STEP), step.action)
            - env.reward_of_observation((ox, oy - FD_STEP), step.action)
        ) / (2 * FD_STEP)
        grads[j] = math.hypot(gx, gy)
    return grads


def gradient_attack(
    clean: TrajectorySet, spec: AttackSpec, env: GridLanderEnv
) -> TrajectorySet:
    """Swap the actions at the extreme-gradient steps, then re-simulate.

    One swap per iteration; indices already swapped are excluded from
    re-selection so swaps cannot oscillate.  The argmin takes the first and
    the argmax the last index among ties.
    """
    if spec.kind != AttackKind.FLP:
        raise ValueError(f"gradient attack requires kind FLP, got {spec.kind}")
    if not clean.trajectories:
        raise ValueError("cannot attack an empty trajectory set")
    selected = set(_select_indices(len(clean.trajectories), spec.eta, spec.seed))
    out = []
    for i, t in enumerate(clean.trajectories):
        if i not in selected:
            out.append(t)
            continue
        if len(t.steps) < 2:
            warnings.warn(
                f"trajectory {t.traj_id} shorter than 2 steps, cannot swap",
                stacklevel=2,
            )
            out.append(t)
            continue
        grads = _gradient_magnitudes(env, t)
        actions = [s.action for s in t.steps]
        available = list(range(len(actions)))
        for _ in range(math.ceil(spec.gamma_frac * len(actions))):
            if len(available) < 2:
                break
            sub = grads[available]
            j_min = available[int(np.argmin(sub))]
            j_max = available[len(available) - 1 - int(np.argmax(sub[::-1]))]
            if j_min == j_max:
                break
            actions[j_min], actions[j_max] = actions[j_max], actions[j_min]
            available.remove(j_min)
            available.remove(j_max)
        out.append(
            replay_actions(
                env, t.steps[0].state, actions, Provenance.ADVERSARIAL, t.traj_id
            )
        )
    return TrajectorySet(tuple(out), len(selected) / len(out), spec.gamma_frac)


def apply_attack(
    clean: TrajectorySet, spec: AttackSpec, env: GridLanderEnv
) -> TrajectorySet:
    if spec.kind == AttackKind.FLP:
        return gradient_attack(clean, spec, env)
    return directed_attack(clean, spec, env)
