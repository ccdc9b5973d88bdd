"""Trajectory divergence scores against a clean reference set.

Two complementary measures:

- occupancy measure: discounted, clean-policy-weighted probability that the
  clean trajectories visit the demonstrated state-action pairs.  High when
  the demonstration retraces clean behaviour, exactly 0 with no overlap.
- discrete Fréchet distance between observation polylines: order-respecting
  min-over-couplings of the max pointwise Euclidean distance.  0 only for
  pointwise-identical curves, grows as the curves separate.

The reference is immutable after ``build_reference`` and all scoring here is
pure, so parts can be scored in parallel.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from trajrepair.env import GridState, Observation
from trajrepair.trajectories import Step, TrajectoryPart, TrajectorySet

ProbVector = tuple[float, float, float, float]


@dataclass(frozen=True)
class CleanReference:
    """Empirical statistics of the guaranteed-clean trajectory set.

    ``policy_probs`` holds per-state action frequencies of the clean policy;
    ``visit_estimate`` maps (state, absolute time index) to the fraction of
    clean trajectories whose t-th state is that state.  Episodes shorter than
    t contribute zero mass, so per-t probabilities sum to at most 1.
    """

    policy_probs: dict[GridState, ProbVector]
    visit_estimate: dict[tuple[GridState, int], float]
    gamma: float
    n_trajectories: int


@dataclass(frozen=True)
class DivergenceFeatures:
    oc: float
    fd: float


def build_reference(clean: TrajectorySet, gamma: float) -> CleanReference:
    if not clean.trajectories:
        raise ValueError("clean reference set must not be empty")
    counts: dict[GridState, list[int]] = {}
    visits: dict[tuple[GridState, int], int] = {}
    for t in clean.trajectories:
        for idx, step in enumerate(t.steps):
            row = counts.setdefault(step.state, [0, 0, 0, 0])
            row[step.action] += 1
            key = (step.state, idx)
            visits[key] = visits.get(key, 0) + 1
    n = len(clean.trajectories)
    policy_probs = {
        s: tuple(c / sum(row) for c in row) for s, row in counts.items()
    }
    visit_estimate = {key: c / n for key, c in visits.items()}
    return CleanReference(policy_probs, visit_estimate, gamma, n)


def occupancy_measure(
    steps: Sequence[Step], ref: CleanReference, t_offset: int = 0
) -> float:
    """Sum over demonstrated (s, a) of pi_clean(a|s) * sum_t gamma^t p(s_t = s).

    The inner sum runs over the demonstration's own time window, i.e. indices
    t_offset .. t_offset + len(steps) inclusive, discounted from the window
    start.  Returns 0 when no demonstrated pair overlaps clean behaviour.
    """
    total = 0.0
    horizon = len(steps)
    for step in steps:
        probs = ref.policy_probs.get(step.state)
        if probs is None:
            continue
        pi_w = probs[step.action]
        if pi_w == 0.0:
            continue
        inner = 0.0
        for tau in range(horizon + 1):
            visit = ref.visit_estimate.get((step.state, t_offset + tau))
            if visit:
                inner += (ref.gamma**tau) * visit
        total += pi_w * inner
    return total


def frechet_distance(
    p: Sequence[Observation], q: Sequence[Observation]
) -> float:
    """Discrete Fréchet distance between two observation polylines.

    Dynamic program of Eiter & Mannila (1994) over pairwise Euclidean
    distances; symmetric in its arguments.
    """
    if len(p) == 0 or len(q) == 0:
        raise ValueError("polylines must not be empty")
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    diff = pa[:, None, :] - qa[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    n, m = dist.shape
    dp = np.empty((n, m))
    dp[0, 0] = dist[0, 0]
    for i in range(1, n):
        dp[i, 0] = max(dp[i - 1, 0], dist[i, 0])
    for j in range(1, m):
        dp[0, j] = max(dp[0, j - 1], dist[0, j])
    for i in range(1, n):
        for j in range(1, m):
            dp[i, j] = max(
                min(dp[i - 1, j], dp[i - 1, j - 1], dp[i, j - 1]), dist[i, j]
            )
    return float(dp[-1, -1])


def features(
    part: TrajectoryPart,
    clean_parts: Sequence[TrajectoryPart],
    ref: CleanReference,
) -> DivergenceFeatures:
    """Divergence features of one demonstrated part against the clean parts.

    The occupancy measure is restricted to the part's absolute time window;
    the Fréchet distance is the minimum over the clean parts with the same
    part index.
    """
    if not clean_parts:
        raise ValueError("need at least one clean part to compare against")
    if any(cp.index != part.index for cp in clean_parts):
        raise ValueError("clean parts must share the demonstrated part's index")
    oc = occupancy_measure(part.steps, ref, t_offset=part.start)
    obs = part.observations()
    fd = min(frechet_distance(obs, cp.observations()) for cp in clean_parts)
    return DivergenceFeatures(oc, fd)


def write_feature_csv(
    path: str | Path,
    rows: Sequence[tuple[int, int, DivergenceFeatures, str | None]],
) -> None:
    """Rows of (traj_id, part_idx, features, optional label) for training."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["traj_id", "part_idx", "oc", "fd", "label"])
        for traj_id, part_idx, feats, lab in rows:
            writer.writerow(
                [traj_id, part_idx, repr(feats.oc), repr(feats.fd), lab or ""]
            )


def read_feature_csv(
    path: str | Path,
) -> list[tuple[int, int, DivergenceFeatures, str | None]]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["traj_id", "part_idx", "oc", "fd"]:
            raise ValueError(f"{path}: unexpected feature CSV header {header}")
        for row in reader:
            out.append(
                (
                    int(row[0]),
                    int(row[1]),
                    DivergenceFeatures(float(row[2]), float(row[3])),
                    row[4] or None,
                )
            )
    return out
