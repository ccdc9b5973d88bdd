"""Options-based trajectory repair for imitation learning on a grid lander.

The package splits demonstrated trajectories into temporal parts, scores each
part against a guaranteed-clean reference set (occupancy measure + discrete
Fréchet distance), accepts or rejects parts with a voting classifier plus a
return-ratio override, clones per-part sub-policies, and chains them as
options at run time.
"""

from trajrepair.env import GridAction, GridLanderEnv, GridState, value_iteration
from trajrepair.trajectories import (
    Provenance,
    Step,
    Trajectory,
    TrajectorySet,
    rollout,
    split,
    trajectory_return,
)
from trajrepair.imitation import Policy, PolicyValue, behavior_clone, evaluate
from trajrepair.divergence import (
    CleanReference,
    DivergenceFeatures,
    build_reference,
    frechet_distance,
    occupancy_measure,
)
from trajrepair.attacks import AttackKind, AttackSpec, directed_attack, gradient_attack
from trajrepair.classifier import Decision, TrajectoryClassifier, label, train_classifier
from trajrepair.repair import Option, RepairReport, chain_options, repair_options

__all__ = [
    "AttackKind",
    "AttackSpec",
    "CleanReference",
    "Decision",
    "DivergenceFeatures",
    "GridAction",
    "GridLanderEnv",
    "GridState",
    "Option",
    "Policy",
    "PolicyValue",
    "Provenance",
    "RepairReport",
    "Step",
    "Trajectory",
    "TrajectoryClassifier",
    "TrajectorySet",
    "behavior_clone",
    "build_reference",
    "chain_options",
    "directed_attack",
    "evaluate",
    "frechet_distance",
    "gradient_attack",
    "label",
    "occupancy_measure",
    "repair_options",
    "rollout",
    "split",
    "trajectory_return",
    "train_classifier",
    "value_iteration",
]
