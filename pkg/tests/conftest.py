import pytest

from vadp.instances import make_instance
from vadp.oracle import solve_latent

ALL_INSTANCES = ["chain2", "chain3", "bandit(2)", "parity", "tmaze(3)",
                 "randomLatent(3,2,3,seed=1)", "randomLatent(6,3,2,seed=4)"]


@pytest.fixture
def chain2():
    return make_instance("chain2")


@pytest.fixture
def chain2_oracle(chain2):
    return solve_latent(chain2, 0.5)
