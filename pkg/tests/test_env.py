import math

import pytest

from trajrepair.env import (
    GridAction,
    GridLanderEnv,
    GridState,
    action_value_gap,
    load_env_config,
    optimal_state_values,
    save_env_config,
    value_iteration,
)
from trajrepair.trajectories import rollout, trajectory_return

from .oracles import best_return_exhaustive


def test_step_descent_onto_pad_pays_landing_reward():
    env = GridLanderEnv(width=5, height=4, pad=frozenset({2}))
    nxt, r = env.step(GridState(2, 1), GridAction.NOOP)
    assert nxt == GridState(2, 0)
    assert r == 320.0


def test_step_descent_off_pad_crashes():
    env = GridLanderEnv(width=5, height=4, pad=frozenset({2}))
    nxt, r = env.step(GridState(0, 1), GridAction.NOOP)
    assert nxt == GridState(0, 0)
    assert r == -100.0


def test_step_main_engine_hovers_at_cost():
    env = GridLanderEnv(width=5, height=4, pad=frozenset({2}))
    nxt, r = env.step(GridState(2, 3), GridAction.MAIN)
    assert nxt == GridState(2, 3)
    assert r == -0.3


def test_step_side_engines_shift_and_descend():
    env = GridLanderEnv()
    assert env.step(GridState(5, 4), GridAction.LEFT) == (GridState(4, 3), -0.03)
    assert env.step(GridState(5, 4), GridAction.RIGHT) == (GridState(6, 3), -0.03)
    # clamped at the walls
    assert env.step(GridState(0, 4), GridAction.LEFT)[0] == GridState(0, 3)
    assert env.step(GridState(9, 4), GridAction.RIGHT)[0] == GridState(9, 3)


def test_step_rejects_terminal_state():
    env = GridLanderEnv()
    with pytest.raises(ValueError):
        env.step(GridState(4, 0), GridAction.NOOP)


def test_step_is_deterministic(env):
    for s in env.states():
        if env.is_terminal(s):
            continue
        for a in GridAction:
            assert env.step(s, a) == env.step(s, a)


def test_observe_examples():
    env = GridLanderEnv(width=10, height=8)
    assert env.observe(GridState(0, 0)) == (0.0, 0.0)
    assert env.observe(GridState(5, 4)) == (0.5, 0.5)
    assert env.observe(GridState(9, 7)) == (0.9, 0.875)


def test_observe_is_injective(env):
    seen = {env.observe(s) for s in env.states()}
    assert len(seen) == env.width * env.height


def test_reward_of_observation_at_pad_top():
    env = GridLanderEnv()
    o = env.pad_top_observations()[0]
    assert env.reward_of_observation(o, GridAction.NOOP) == pytest.approx(320.0, abs=1e-9)


def test_reward_of_observation_zero_weight_at_top():
    env = GridLanderEnv()
    assert env.reward_of_observation((0.4, 1.0), GridAction.NOOP) == 0.0


def test_reward_of_observation_closed_form_off_pad():
    env = GridLanderEnv()
    dx = 0.15
    o = (0.4 - dx, 0.0)
    expected = 320.0 * math.exp(-25.0 * dx * dx)
    assert env.reward_of_observation(o, GridAction.NOOP) == pytest.approx(expected)
    # action cost is added on top of the shaping term
    assert env.reward_of_observation(o, GridAction.MAIN) == pytest.approx(expected - 0.3)


def test_reward_of_observation_ground_row_argmax_on_pad(env):
    rewards = [
        env.reward_of_observation(env.observe(GridState(x, 0)), GridAction.NOOP)
        for x in range(env.width)
    ]
    best = max(range(env.width), key=lambda x: rewards[x])
    assert best in env.pad


def test_value_iteration_direct_descent(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(2, 3), 16)
    assert [s.action for s in traj.steps] == [GridAction.NOOP] * 3
    assert trajectory_return(traj) == 320.0


def test_value_iteration_offset_start_return(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(0, 3), 16)
    assert trajectory_return(traj) == pytest.approx(319.94)
    oracle = best_return_exhaustive(small_env, GridState(0, 3), 4)
    assert trajectory_return(traj) == pytest.approx(oracle)


def test_value_iteration_terminal_states_have_zero_value(small_env):
    values = optimal_state_values(small_env)
    for x in range(small_env.width):
        assert values[GridState(x, 0)] == 0.0


@pytest.mark.parametrize(
    "spec",
    [
        dict(width=5, height=4, pad=frozenset({2})),
        dict(width=6, height=6, pad=frozenset({2, 3})),
    ],
)
def test_value_iteration_beats_exhaustive_search(spec):
    env = GridLanderEnv(**spec)
    pi = value_iteration(env)
    for s0 in env.states():
        if env.is_terminal(s0):
            continue
        got = trajectory_return(rollout(env, pi, s0, env.height))
        oracle = best_return_exhaustive(env, s0, env.height)
        assert got >= oracle - 1e-9, f"suboptimal from {s0}: {got} < {oracle}"


def test_rollout_records_rewards_summing_to_return(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(1, 3), 16)
    assert trajectory_return(traj) == sum(s.reward for s in traj.steps)


def test_rollout_crash_under_noop_policy(small_env):
    from trajrepair.imitation import Policy

    table = {
        s: (1.0, 0.0, 0.0, 0.0)
        for s in small_env.states()
        if not small_env.is_terminal(s)
    }
    pi = Policy(table, small_env.width, small_env.height)
    traj = rollout(small_env, pi, GridState(0, 2), 16)
    assert trajectory_return(traj) == -100.0


def test_rollout_t_max_one_yields_single_transition(small_env, small_optimal):
    traj = rollout(small_env, small_optimal, GridState(2, 3), 1)
    assert len(traj.steps) == 1


def test_action_value_gap_separates_hover_from_reordering(env):
    values = optimal_state_values(env)
    # hovering forfeits the discount on the eventual landing
    assert action_value_gap(env, values, GridState(4, 5), GridAction.MAIN) > 1.0
    # an early side move toward the pad merely reorders an optimal plan
    assert action_value_gap(env, values, GridState(2, 5), GridAction.RIGHT) < 0.1


def test_pad_reachable(env):
    assert env.pad_reachable(GridState(0, 4))
    assert not env.pad_reachable(GridState(0, 3))
    assert env.pad_reachable(GridState(4, 1))


def test_env_config_round_trip(tmp_path):
    env = GridLanderEnv(width=7, height=5, pad=frozenset({1, 2}), gamma=0.95, kappa=12.5)
    path = tmp_path / "env.cfg"
    save_env_config(env, path)
    assert load_env_config(path) == env


def test_env_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "env.cfg"
    path.write_text("width=5\nbogus=1\n")
    with pytest.raises(ValueError, match="bogus"):
        load_env_config(path)


def test_env_validation():
    with pytest.raises(ValueError):
        GridLanderEnv(pad=frozenset())
    with pytest.raises(ValueError):
        GridLanderEnv(pad=frozenset({99}))
    with pytest.raises(ValueError):
        GridLanderEnv(gamma=0.0)
