"""Accept/reject decision ensemble over (occupancy, Fréchet) features.

Three deterministic voters trained from scratch on min-max normalised
features:

- 2-nearest-neighbour voter (distance ties resolved by training order,
  split votes resolved by the nearer neighbour),
- axis-aligned decision tree of maximum depth 9 (Gini impurity, midpoint
  thresholds, first-feature/lowest-threshold tie-break),
- linear margin voter on the perpendicular bisector of the class means.

The final prediction is a uniform-weight majority; exact ties go to Reject,
since a wrongly rejected part can still be rescued by the return-ratio
override while a wrongly accepted one has no safety net.  A trained ensemble
is immutable and predictions are pure.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from trajrepair.divergence import DivergenceFeatures
from trajrepair.trajectories import Trajectory, TrajectoryPart, trajectory_return


class Decision(Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


@dataclass(frozen=True)
class LabeledFeature:
    features: DivergenceFeatures
    label: Decision


def label(
    t: Trajectory | TrajectoryPart | float, r_max: float, eps_p: float
) -> Decision:
    """Accept iff the return reaches (1 - eps_p) of the best clean return."""
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    ret = t if isinstance(t, (int, float)) else trajectory_return(t)
    return Decision.ACCEPT if ret >= (1.0 - eps_p) * r_max else Decision.REJECT


class _MinMaxScaler:
    def __init__(self, x: np.ndarray) -> None:
        self.lo = x.min(axis=0)
        span = x.max(axis=0) - self.lo
        span[span == 0.0] = 1.0
        self.span = span

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.lo) / self.span


class _KnnVoter:
    def __init__(self, x: np.ndarray, y: np.ndarray, k: int = 2) -> None:
        self.x = x
        self.y = y
        self.k = k

    def predict(self, p: np.ndarray) -> int:
        d = np.sqrt(((self.x - p) ** 2).sum(axis=1))
        order = np.lexsort((np.arange(len(d)), d))[: self.k]
        votes = self.y[order]
        if votes.sum() * 2 > len(votes):
            return 1
        if votes.sum() * 2 < len(votes):
            return 0
        # split vote: defer to the strictly nearer neighbour, reject on a
        # distance tie
        if d[order[0]] < d[order[1]] - 1e-15:
            return int(votes[0])
        return 0


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "leaf")

    def __init__(self, leaf: int | None = None) -> None:
        self.feature = -1
        self.threshold = 0.0
        self.left: "_TreeNode | None" = None
        self.right: "_TreeNode | None" = None
        self.leaf = leaf


def _gini(y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    p = y.mean()
    return 2.0 * p * (1.0 - p)


def _majority(y: np.ndarray) -> int:
    ones = int(y.sum())
    zeros = len(y) - ones
    if ones > zeros:
        return 1
    return 0  # ties go to reject


class _TreeVoter:
    def __init__(self, x: np.ndarray, y: np.ndarray, max_depth: int = 9) -> None:
        self.root = self._grow(x, y, max_depth)

    def _grow(self, x: np.ndarray, y: np.ndarray, depth: int) -> _TreeNode:
        if depth == 0 or len(np.unique(y)) == 1 or len(y) < 2:
            return _TreeNode(leaf=_majority(y))
        parent = _gini(y) * len(y)
        best = None
        for feature in range(x.shape[1]):
            values = np.unique(x[:, feature])
            for lo, hi in zip(values[:-1], values[1:]):
                threshold = (lo + hi) / 2.0
                mask = x[:, feature] <= threshold
                cost = _gini(y[mask]) * mask.sum() + _gini(y[~mask]) * (~mask).sum()
                gain = parent - cost
                if best is None or gain > best[0] + 1e-12:
                    best = (gain, feature, threshold, mask)
        if best is None or best[0] <= 1e-12:
            return _TreeNode(leaf=_majority(y))
        _, feature, threshold, mask = best
        node = _TreeNode()
        node.feature = feature
        node.threshold = threshold
        node.left = self._grow(x[mask], y[mask], depth - 1)
        node.right = self._grow(x[~mask], y[~mask], depth - 1)
        return node

    def predict(self, p: np.ndarray) -> int:
        node = self.root
        while node.leaf is None:
            node = node.left if p[node.feature] <= node.threshold else node.right
        return node.leaf


class _LinearVoter:
    def __init__(self, x: np.ndarray, y: np.ndarray) -> None:
        mu_acc = x[y == 1].mean(axis=0)
        mu_rej = x[y == 0].mean(axis=0)
        self.w = mu_acc - mu_rej
        self.b = float(self.w @ (mu_acc + mu_rej) / 2.0)

    def predict(self, p: np.ndarray) -> int:
        return 1 if float(self.w @ p) - self.b > 0.0 else 0


class TrajectoryClassifier:
    """Majority-vote ensemble mapping (oc, fd) to Accept/Reject."""

    def __init__(
        self,
        scaler: _MinMaxScaler,
        members: Sequence,
        seed: int,
        train_x: np.ndarray,
        train_y: np.ndarray,
    ) -> None:
        self._scaler = scaler
        self._members = tuple(members)
        self.seed = seed
        self._train_x = train_x
        self._train_y = train_y

    def predict(self, f: DivergenceFeatures) -> Decision:
        p = self._scaler.transform(np.array([[f.oc, f.fd]], dtype=float))[0]
        votes = sum(m.predict(p) for m in self._members)
        if votes * 2 > len(self._members):
            return Decision.ACCEPT
        return Decision.REJECT

    def training_accuracy(self) -> float:
        raw = self._scaler.lo + self._train_x * self._scaler.span
        correct = 0
        for row, y in zip(raw, self._train_y):
            pred = self.predict(DivergenceFeatures(row[0], row[1]))
            correct += int((pred == Decision.ACCEPT) == bool(y))
        return correct / len(self._train_y)

    def dump(self, path: str | Path) -> None:
        """Reproducibility record: normalisation, voters, training points."""
        lines = [
            f"#classifier seed={self.seed} members=knn2,tree9,linear",
            f"#scale lo={self._scaler.lo.tolist()!r} span={self._scaler.span.tolist()!r}",
            f"#linear w={self._members[2].w.tolist()!r} b={self._members[2].b!r}",
        ]
        for row, y in zip(self._train_x, self._train_y):
            lines.append(f"{row[0]!r} {row[1]!r} {int(y)}")
        Path(path).write_text("\n".join(lines) + "\n")


def train_classifier(
    data: Sequence[LabeledFeature], seed: int = 0
) -> TrajectoryClassifier:
    """Train the voting ensemble; requires both labels to be present.

    Training is deterministic: the seed is recorded for provenance but no
    random draw is made.
    """
    if not data:
        raise ValueError("training data must not be empty")
    x = np.array([[lf.features.oc, lf.features.fd] for lf in data], dtype=float)
    y = np.array([1 if lf.label == Decision.ACCEPT else 0 for lf in data], dtype=int)
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both labels")
    scaler = _MinMaxScaler(x)
    xn = scaler.transform(x)
    members = (_KnnVoter(xn, y, k=2), _TreeVoter(xn, y, max_depth=9), _LinearVoter(xn, y))
    return TrajectoryClassifier(scaler, members, seed, xn, y)


# alias matching the ensemble's role in the pipeline
train_chi = train_classifier


def predict(chi: TrajectoryClassifier, f: DivergenceFeatures) -> Decision:
    return chi.predict(f)


def score(
    chi: TrajectoryClassifier, test: Sequence[LabeledFeature]
) -> tuple[float, float, float]:
    """(accuracy, F1 on Accept-as-positive, rate of accepting Reject-labeled)."""
    if not test:
        raise ValueError("test data must not be empty")
    tp = fp = tn = fn = 0
    for lf in test:
        pred = chi.predict(lf.features)
        if lf.label == Decision.ACCEPT:
            if pred == Decision.ACCEPT:
                tp += 1
            else:
                fn += 1
        else:
            if pred == Decision.ACCEPT:
                fp += 1
            else:
                tn += 1
    accuracy = (tp + tn) / len(test)
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    false_accept = fp / (fp + tn) if (fp + tn) else 0.0
    return accuracy, f1, false_accept
