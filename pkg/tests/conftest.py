import pytest

from trajrepair.env import GridLanderEnv, value_iteration


@pytest.fixture(scope="session")
def env():
    return GridLanderEnv()


@pytest.fixture(scope="session")
def small_env():
    return GridLanderEnv(width=5, height=4, pad=frozenset({2}))


@pytest.fixture(scope="session")
def small_optimal(small_env):
    return value_iteration(small_env, tol=1e-9)
