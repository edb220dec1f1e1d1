import numpy as np
import pytest

from hexqaoa import hexising, statevec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Trigger one-time kernel compilation so timed tests measure math only."""
    graph = hexising.heavy_hex_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    instance = hexising.generate_instance(graph, seed=0)
    cost = statevec.cost_vector(instance)
    state = statevec.qaoa_state(cost, [0.1], [0.2])
    statevec.expectation(state, cost)
    statevec.gradient(cost, [0.1], [0.2])
    statevec.sample(state, shots=16, seed=0)
