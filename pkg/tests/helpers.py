"""Shared oracles for the test suite.

Everything here is deliberately naive: direct term sums, dense
Kronecker products, and gate-by-gate matrix application.  The package
is always checked against these slow references, never against itself.
"""

import numpy as np

from hexqaoa import hexising


def naive_energy(instance, spins):
    """Direct sum over terms for one +-1 spin vector."""
    total = 0.0
    for qubits, coeff in instance.terms():
        prod = coeff
        for q in qubits:
            prod *= spins[q]
        total += prod
    return total


def all_spin_table(n):
    """(2^n, n) table of spin vectors; bit j of the row index = qubit j."""
    idx = np.arange(2 ** n)
    return hexising.index_to_spins(idx, n)


def naive_cost_values(instance):
    table = all_spin_table(instance.n)
    return np.array([naive_energy(instance, row) for row in table])


def dense_qaoa(instance, betas, gammas):
    """Dense Kronecker-product QAOA evolution, usable up to n ~ 12."""
    n = instance.n
    values = naive_cost_values(instance)
    state = np.full(2 ** n, 2 ** (-n / 2), dtype=np.complex128)
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    for beta, gamma in zip(betas, gammas):
        state = np.exp(-1j * gamma * values) * state
        rot = np.cos(beta) * np.eye(2) - 1j * np.sin(beta) * x
        mixer = np.array([[1.0]])
        for _ in range(n):
            mixer = np.kron(rot, mixer)  # qubit j acts on bit j of the index
        state = mixer @ state
    return state


def fd_gradient(fun, x, h=1e-6):
    """Central finite differences of a scalar function."""
    grad = np.zeros_like(x, dtype=float)
    for i in range(len(x)):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fun(up) - fun(dn)) / (2 * h)
    return grad


SINGLE_QUBIT = {
    "h": lambda p: np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    "rz": lambda p: np.diag([np.exp(-1j * p / 2), np.exp(1j * p / 2)]),
    "rx": lambda p: np.array(
        [[np.cos(p / 2), -1j * np.sin(p / 2)],
         [-1j * np.sin(p / 2), np.cos(p / 2)]]),
}


def dense_gate_sim(n, gates):
    """Apply a gate list to |0...0>; bit j of the index = qubit j."""
    state = np.zeros(2 ** n, dtype=np.complex128)
    state[0] = 1.0
    tensor = state.reshape((2,) * n)

    def axis(q):
        return n - 1 - q  # reshape puts qubit 0 on the last axis

    for gate in gates:
        if gate.kind == "measure":
            continue
        if gate.kind in SINGLE_QUBIT:
            mat = SINGLE_QUBIT[gate.kind](gate.param)
            q = gate.qubits[0]
            tensor = np.moveaxis(
                np.tensordot(mat, tensor, axes=([1], [axis(q)])), 0, axis(q))
        else:
            a, w = gate.qubits
            mat = np.eye(4, dtype=np.complex128)
            if gate.kind == "cx":
                mat[2:, 2:] = [[0, 1], [1, 0]]  # control = first operand
            else:
                mat[3, 3] = -1.0
            mat = mat.reshape(2, 2, 2, 2)
            tensor = np.moveaxis(
                np.tensordot(mat, tensor, axes=([2, 3], [axis(a), axis(w)])),
                [0, 1], [axis(a), axis(w)])
    return tensor.reshape(-1)


def mps_to_dense(mps):
    """Contract an MPS to the full vector indexed by qubit bits."""
    result = mps.tensors[0]
    for core in mps.tensors[1:]:
        result = np.einsum("l...r,rse->l...se", result, core)
    amps_by_site = np.squeeze(result, axis=(0, -1)).reshape(-1)
    n = len(mps.tensors)
    by_qubit = np.zeros(2 ** n, dtype=np.complex128)
    site_bits = [(np.arange(2 ** n) >> (n - 1 - s)) & 1 for s in range(n)]
    index = np.zeros(2 ** n, dtype=np.int64)
    for s in range(n):
        index |= site_bits[s] << int(mps.qubit_of_site[s])
    by_qubit[index] = amps_by_site
    return by_qubit


def path_graph(k):
    return hexising.heavy_hex_from_edges(k, [(i, i + 1) for i in range(k - 1)])


def star3_graph():
    """Three cubic triples sharing a degree-3 hub."""
    edges = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6)]
    return hexising.heavy_hex_from_edges(7, edges)


def random_fragment(rng):
    """A small random heavy-hex-valid graph for property tests."""
    choice = rng.integers(0, 3)
    if choice == 0:
        return path_graph(int(rng.integers(4, 11)))
    if choice == 1:
        return star3_graph()
    return hexising.build_heavy_hex("guadalupe16")


def random_instance(rng, graph=None):
    if graph is None:
        graph = random_fragment(rng)
    return hexising.generate_instance(graph, seed=int(rng.integers(0, 2 ** 31)))
