"""Tests for edge coloring, circuit building, and OpenQASM emission."""

import os

import numpy as np
import pytest

from hexqaoa import circuitgen, hexising, statevec
from hexqaoa.angles import AngleSchedule
from hexqaoa.circuitgen import Circuit, EdgeColoring, Gate
from hexqaoa.errors import ConfigError, FormatError
from hexqaoa.hexising import HeavyHexGraph

from helpers import dense_gate_sim, path_graph, random_instance, star3_graph

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


# ---------------------------------------------------------------------------
# gates


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("h", (0, 1))  # wrong arity
    with pytest.raises(ValueError):
        Gate("cx", (2, 2))  # duplicate operands
    with pytest.raises(ValueError):
        Gate("rz", (0,))  # missing parameter
    with pytest.raises(ValueError):
        Gate("h", (0,), param=0.5)  # spurious parameter
    with pytest.raises(ValueError):
        Gate("bogus", (0,))


def test_gate_param_coerced_to_builtin_float():
    gate = Gate("rz", (3,), param=np.float64(0.25))
    assert type(gate.param) is float


# ---------------------------------------------------------------------------
# edge coloring


def test_edge_coloring_validation():
    with pytest.raises(ValueError):
        EdgeColoring(classes=(((0, 1),),))  # must be exactly three classes
    with pytest.raises(ValueError):
        EdgeColoring(classes=(((0, 1),), ((0, 1),), ()))  # duplicate edge
    with pytest.raises(ValueError):
        EdgeColoring(classes=(((0, 1), (1, 2)), (), ()))  # not a matching


@pytest.mark.parametrize(
    "layout,sizes",
    [
        ("guadalupe16", [6, 6, 4]),
        ("falcon27", [10, 9, 9]),
        ("eagle127", [53, 50, 41]),
        ("heron133", [54, 50, 46]),
        ("heron156", [62, 61, 53]),
    ],
)
def test_edge_coloring_devices(layout, sizes):
    graph = hexising.build_heavy_hex(layout)
    coloring = circuitgen.edge_coloring(graph, seed=0)
    assert coloring.edges == frozenset(graph.edges)
    assert sorted((len(c) for c in coloring.classes), reverse=True) == sizes
    for cls in coloring.classes:
        touched = [q for edge in cls for q in edge]
        assert len(touched) == len(set(touched))  # proper matching


def test_edge_coloring_deterministic():
    graph = hexising.build_heavy_hex("falcon27")
    a = circuitgen.edge_coloring(graph, seed=3)
    b = circuitgen.edge_coloring(graph, seed=3)
    assert a.classes == b.classes


def test_edge_coloring_rejects_high_degree():
    star4 = HeavyHexGraph(
        n=5,
        edges=((0, 1), (0, 2), (0, 3), (0, 4)),
        v2=frozenset({1, 2, 3, 4}),
        v3=frozenset({0}),
        cubic=(),
    )
    with pytest.raises(ConfigError):
        circuitgen.edge_coloring(star4)


# ---------------------------------------------------------------------------
# circuit building


def _schedule(p, rng=None):
    rng = rng or np.random.default_rng(7)
    return AngleSchedule(
        p=p,
        betas=tuple(rng.uniform(-1.0, 1.0, p).tolist()),
        gammas=tuple(rng.uniform(-1.0, 1.0, p).tolist()),
    )


def test_skeleton_circuit_without_schedule():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    circuit = circuitgen.build_circuit(instance, None)
    assert circuit.p == 0
    assert circuitgen.gate_counts(circuit) == {
        "two_qubit": 0,
        "single_qubit_x_family": 16,
        "single_qubit_z_family": 0,
        "measure": 16,
    }


def test_build_rejects_foreign_coloring():
    graph = hexising.build_heavy_hex("guadalupe16")
    other = hexising.build_heavy_hex("falcon27")
    instance = hexising.generate_instance(graph, seed=7)
    with pytest.raises(ConfigError):
        circuitgen.build_circuit(instance, _schedule(1), coloring=circuitgen.edge_coloring(other))


def test_gate_count_identities():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    p = 3
    circuit = circuitgen.build_circuit(instance, _schedule(p))
    counts = circuitgen.gate_counts(circuit)
    n, m, t = graph.n, len(graph.edges), len(graph.cubic)
    assert counts["two_qubit"] == 2 * m * p
    assert counts["single_qubit_z_family"] == (n + m + t) * p
    assert counts["single_qubit_x_family"] == n + n * p  # prep + one mixer per layer
    assert counts["measure"] == n


def test_eagle_p3_two_qubit_count():
    graph = hexising.build_heavy_hex("eagle127")
    instance = hexising.generate_instance(graph, seed=1)
    circuit = circuitgen.build_circuit(instance, _schedule(3))
    assert circuitgen.gate_counts(circuit)["two_qubit"] == 864


def test_per_layer_two_qubit_depth():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    circuit = circuitgen.build_circuit(instance, _schedule(3))
    assert circuit.layer_two_qubit_depths == (6, 6, 6)

    # with an explicit two-class coloring each pass has only two slots
    path = path_graph(7)
    instance = hexising.generate_instance(path, seed=2)
    two_color = EdgeColoring(
        classes=(tuple(path.edges[0::2]), tuple(path.edges[1::2]), ())
    )
    circuit = circuitgen.build_circuit(instance, _schedule(2), coloring=two_color)
    assert circuit.layer_two_qubit_depths == (4, 4)


def test_circuit_matches_alternating_operator_state(rng):
    for _ in range(6):
        instance = random_instance(rng)
        p = int(rng.integers(1, 4))
        schedule = _schedule(p, rng)
        circuit = circuitgen.build_circuit(instance, schedule)
        produced = dense_gate_sim(instance.n, circuit.gates)
        expected = statevec.qaoa_state(instance, schedule)
        assert np.max(np.abs(produced - expected)) < 1e-10


def test_color_class_permutation_leaves_state_unchanged():
    graph = star3_graph()
    instance = hexising.generate_instance(graph, seed=5)
    schedule = _schedule(2)
    base = circuitgen.edge_coloring(graph, seed=0)
    permuted = EdgeColoring(classes=(base.classes[2], base.classes[0], base.classes[1]))
    psi_a = dense_gate_sim(
        instance.n, circuitgen.build_circuit(instance, schedule, coloring=base).gates
    )
    psi_b = dense_gate_sim(
        instance.n, circuitgen.build_circuit(instance, schedule, coloring=permuted).gates
    )
    assert np.max(np.abs(psi_a - psi_b)) < 1e-12


# ---------------------------------------------------------------------------
# OpenQASM emission


def test_golden_qasm_file():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    schedule = AngleSchedule(p=1, betas=(0.3,), gammas=(-0.7,))
    coloring = circuitgen.edge_coloring(graph, seed=0)
    circuit = circuitgen.build_circuit(instance, schedule, coloring=coloring)
    text = circuitgen.emit_qasm(circuit)
    with open(os.path.join(DATA_DIR, "guadalupe16_p1.qasm"), encoding="utf-8") as fh:
        assert text == fh.read()


def test_validate_qasm_counts_match_gate_counts():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    circuit = circuitgen.build_circuit(instance, _schedule(2))
    for basis in ("cx", "cz"):
        counts = circuitgen.validate_qasm(circuitgen.emit_qasm(circuit, basis=basis))
        expected = circuitgen.gate_counts(circuit)
        if basis == "cz":
            expected = dict(expected)
            expected["single_qubit_x_family"] += 2 * expected["two_qubit"]
        assert counts == expected


def test_emit_qasm_rejects_unknown_basis():
    graph = path_graph(4)
    instance = hexising.generate_instance(graph, seed=1)
    circuit = circuitgen.build_circuit(instance, _schedule(1))
    with pytest.raises(ConfigError):
        circuitgen.emit_qasm(circuit, basis="iswap")


def test_cz_lowering_preserves_state():
    graph = path_graph(6)
    instance = hexising.generate_instance(graph, seed=4)
    circuit = circuitgen.build_circuit(instance, _schedule(2))
    lowered = []
    for gate in circuit.gates:
        if gate.kind == "cx":
            control, target = gate.qubits
            lowered.append(Gate("h", (target,)))
            lowered.append(Gate("cz", (control, target)))
            lowered.append(Gate("h", (target,)))
        else:
            lowered.append(gate)
    psi_cx = dense_gate_sim(instance.n, circuit.gates)
    psi_cz = dense_gate_sim(instance.n, lowered)
    assert np.max(np.abs(psi_cx - psi_cz)) < 1e-12


def _valid_text():
    graph = path_graph(4)
    instance = hexising.generate_instance(graph, seed=1)
    circuit = circuitgen.build_circuit(instance, _schedule(1))
    return circuitgen.emit_qasm(circuit)


@pytest.mark.parametrize(
    "mangle",
    [
        lambda t: t.replace("OPENQASM 2.0;", "OPENQASM 3.0;"),
        lambda t: t.replace('include "qelib1.inc";\n', ""),
        lambda t: t.replace("qreg q[4];", "qreg q[four];"),
        lambda t: t + "swap q[0],q[1];\n",
        lambda t: t.replace("h q[0];", "h q[9];"),  # index out of range
        lambda t: t.replace("cx q[", "cx q[0],q[0]; // q[", 1),  # duplicate operands
        lambda t: t.replace("measure q[0] -> c[0];", "measure q[0] -> c[1];"),
        lambda t: t.replace("rz(", "rz[", 1),
    ],
)
def test_validate_qasm_rejects_corruption(mangle):
    with pytest.raises(FormatError):
        circuitgen.validate_qasm(mangle(_valid_text()))


def test_validate_qasm_accepts_exponent_params():
    text = _valid_text()
    base = circuitgen.validate_qasm(text)["single_qubit_z_family"]
    widened = text.replace("creg c[4];\n", "creg c[4];\nrz(1e-3) q[0];\n")
    counts = circuitgen.validate_qasm(widened)
    assert counts["single_qubit_z_family"] == base + 1
