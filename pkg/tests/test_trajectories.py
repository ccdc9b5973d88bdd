import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajrepair.env import GridAction, GridLanderEnv, GridState
from trajrepair.trajectories import (
    Provenance,
    Step,
    Trajectory,
    TrajectoryFormatError,
    TrajectorySet,
    dynamics_consistent,
    load_set,
    measure_gamma,
    replay_actions,
    rollout,
    save_set,
    split,
    trajectory_return,
)


def _traj(rewards, provenance=Provenance.UNKNOWN, traj_id=0):
    steps = tuple(
        Step(GridState(0, i + 1), GridAction.NOOP, r, (0.0, (i + 1) / 8))
        for i, r in enumerate(rewards)
    )
    return Trajectory(steps, provenance, traj_id)


def test_trajectory_return_sums_rewards():
    assert trajectory_return(_traj([1.0, -0.5, 2.5])) == 3.0
    assert trajectory_return(_traj([0.0, 0.0])) == 0.0


def test_trajectory_return_clean_descent(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(2, 3), 16)
    assert trajectory_return(traj) == 320.0


def test_trajectory_requires_steps():
    with pytest.raises(ValueError):
        Trajectory(())


def test_split_even():
    parts = split(_traj([0.0] * 6), 2)
    assert [len(p) for p in parts] == [3, 3]


def test_split_remainder_goes_first():
    parts = split(_traj([0.0] * 7), 3)
    assert [len(p) for p in parts] == [3, 2, 2]
    assert [p.start for p in parts] == [0, 3, 5]


def test_split_identity():
    t = _traj([1.0, 2.0, 3.0])
    (part,) = split(t, 1)
    assert part.steps == t.steps
    assert part.closing is None


def test_split_rejects_too_many_parts():
    with pytest.raises(ValueError):
        split(_traj([0.0, 0.0]), 3)


def test_split_closing_observations():
    t = _traj([0.0] * 5)
    parts = split(t, 2)
    assert parts[0].closing == t.steps[3].observation
    assert parts[1].closing is None


def test_split_final_closing_with_env(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(2, 3), 16)
    parts = split(traj, 2, small_env)
    # the final part closes at the landing cell
    assert parts[-1].closing == small_env.observe(GridState(2, 0))


@given(n=st.integers(1, 30), m=st.integers(1, 30))
@settings(max_examples=60, deadline=None)
def test_split_concat_identity_property(n, m):
    if m > n:
        return
    t = _traj([float(i) for i in range(n)])
    parts = split(t, m)
    assert sum(p.steps for p in parts, ()) == t.steps
    assert sum(trajectory_return(p) for p in parts) == pytest.approx(
        trajectory_return(t)
    )


def test_measure_gamma_zero_for_own_policy(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(0, 3), 16)
    assert measure_gamma(traj, small_optimal) == 0.0


def test_measure_gamma_one_when_all_actions_replaced(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(2, 3), 16)
    flipped = Trajectory(
        tuple(
            Step(s.state, GridAction.MAIN, s.reward, s.observation)
            for s in traj.steps
        )
    )
    assert measure_gamma(flipped, small_optimal) == 1.0


def test_replay_actions_reproduces_clean_rollout(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(0, 3), 16)
    redo = replay_actions(small_env, traj.steps[0].state, [s.action for s in traj.steps])
    assert redo.steps == traj.steps


def test_replay_actions_truncates_at_terminal(small_env):
    redo = replay_actions(
        small_env, GridState(2, 1), [GridAction.NOOP, GridAction.NOOP, GridAction.NOOP]
    )
    assert len(redo.steps) == 1  # lands after one drop


def test_dynamics_consistent(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(1, 3), 16)
    assert dynamics_consistent(small_env, traj)
    broken = Trajectory(traj.steps[:1] + traj.steps[2:])
    assert not dynamics_consistent(small_env, broken)


def test_without_provenance():
    t = _traj([1.0], Provenance.ADVERSARIAL)
    assert t.without_provenance().provenance == Provenance.UNKNOWN
    assert t.without_provenance().steps == t.steps


def _round_trip(ts, tmp_path):
    path = tmp_path / "set.traj"
    save_set(ts, path)
    return load_set(path)


def test_save_load_round_trip(tmp_path, small_env, small_optimal):
    trajs = tuple(
        rollout(small_env, small_optimal, GridState(x, 3), 16, Provenance.CLEAN, x)
        for x in range(small_env.width)
    )
    ts = TrajectorySet(trajs, eta=0.25, gamma_frac=0.6180339887498949)
    assert _round_trip(ts, tmp_path) == ts


def test_save_load_empty_set(tmp_path):
    ts = TrajectorySet((), eta=0.0, gamma_frac=0.0)
    assert _round_trip(ts, tmp_path) == ts


def test_load_truncated_file_names_line(tmp_path):
    path = tmp_path / "bad.traj"
    path.write_text(
        "#set eta=0.0 gamma=0.0\n#traj id=0 provenance=C\n0 3 NOOP 0.0 0.0 0.75\n"
    )
    with pytest.raises(TrajectoryFormatError, match=r":3"):
        load_set(path)


def test_load_malformed_step_names_line(tmp_path):
    path = tmp_path / "bad.traj"
    path.write_text(
        "#set eta=0.0 gamma=0.0\n"
        "#traj id=0 provenance=C\n"
        "0 3 WHOOSH 0.0 0.0 0.75\n"
        "#end\n"
    )
    with pytest.raises(TrajectoryFormatError, match=r":3"):
        load_set(path)


def test_load_missing_header(tmp_path):
    path = tmp_path / "bad.traj"
    path.write_text("#traj id=0 provenance=C\n#end\n")
    with pytest.raises(TrajectoryFormatError, match=r":1"):
        load_set(path)


def test_set_eta_metadata_counts_adversarial(small_env, small_optimal):
    clean = rollout(small_env, small_optimal, GridState(2, 3), 16, Provenance.CLEAN, 0)
    adv = rollout(small_env, small_optimal, GridState(1, 3), 16, Provenance.ADVERSARIAL, 1)
    ts = TrajectorySet((clean, adv), eta=0.5, gamma_frac=0.3)
    marked = sum(1 for t in ts.trajectories if t.provenance == Provenance.ADVERSARIAL)
    assert marked / len(ts) == ts.eta
