import numpy as np
import pytest

from lqrlab import LinearSystem, LqrInstance, QuadraticCost
from lqrlab.bench import instance_double_integrator, instance_laplacian

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0  # scalar a=b=q=r=1 value, M^2 = M + 1


@pytest.fixture
def scalar_instance():
    """a = b = q = r = 1 with unit process noise; value matrix is GOLDEN."""
    system = LinearSystem(A=[[1.0]], B=[[1.0]], noise_cov=[[1.0]])
    cost = QuadraticCost(Q=[[1.0]], R=[[1.0]])
    return LqrInstance(system=system, cost=cost, x0=[1.0], episode_len=10)


@pytest.fixture
def double_integrator():
    return instance_double_integrator()


@pytest.fixture
def laplacian():
    return instance_laplacian()
