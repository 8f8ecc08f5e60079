import numpy as np
import pytest

from rwre_lab import Environment, sample_environment, standard_two_point


@pytest.fixture(scope="session")
def std_dist():
    return standard_two_point()


@pytest.fixture(scope="session")
def std_env(std_dist):
    """A generously sized window of the standard law, shared across tests."""
    return sample_environment(std_dist, -3000, 9000, seed=20240718)


@pytest.fixture()
def fair_env():
    return Environment.constant(0.5, -50, 400)


@pytest.fixture()
def rho2_env():
    """rho = 2 everywhere (omega = 1/3): left tail sums converge to 1."""
    return Environment.constant(1.0 / 3.0, -3000, 3400)
