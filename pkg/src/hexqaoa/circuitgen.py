"""Hardware-shaped circuits for heavy-hex QAOA schedules.

The phase separator is compiled around the two-coloring structure of
the lattice: every cost term touching a degree-1 or degree-2 node of
the low-degree class is realized by sandwiching single-qubit Z
rotations between entanglers that accumulate neighbor parities onto
that node.  Entanglers are scheduled into six time slots (two passes
over a 3-edge-coloring), so the two-qubit depth of each QAOA layer is
six and the two-qubit count is exactly 2 * |E| per layer.  Cubic terms
cost no extra two-qubit gates: the center qubit already holds the full
triple parity between the two passes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .angles import AngleSchedule
from .errors import ConfigError, FormatError
from .hexising import HeavyHexGraph, IsingInstance

Edge = tuple[int, int]

QASM_HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'

GATE_ARITY = {"h": 1, "rz": 1, "rx": 1, "cx": 2, "cz": 2, "measure": 1}
GATE_HAS_PARAM = {"h": False, "rz": True, "rx": True, "cx": False, "cz": False,
                  "measure": False}


@dataclass(frozen=True)
class Gate:
    """One circuit operation.

    kind "cx" is the abstract entangler; the emitter may lower it to a
    literal controlled-X or to an H-conjugated controlled-Z.  "rz" is
    the true exponential diag(exp(-i t/2), exp(+i t/2)) and "rx" is
    exp(-i t X / 2); an emitted rz that a consumer reads as
    diag(1, exp(i t)) differs only by a global phase.
    """

    kind: str
    qubits: tuple[int, ...]
    param: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise ConfigError(f"{self.kind} takes {GATE_ARITY[self.kind]} qubits")
        if len(set(self.qubits)) != len(self.qubits):
            raise ConfigError("gate qubits must be distinct")
        if GATE_HAS_PARAM[self.kind] != (self.param is not None):
            raise ConfigError(f"bad parameter for gate {self.kind}")
        if self.param is not None:
            object.__setattr__(self, "param", float(self.param))


@dataclass(frozen=True)
class EdgeColoring:
    """Partition of the edge set into at most three matchings.

    classes always has length 3; unused colors are empty tuples so the
    color index doubles as the entangler time slot.
    """

    classes: tuple[tuple[Edge, ...], ...]

    def __post_init__(self):
        if len(self.classes) != 3:
            raise ValueError("an edge coloring carries exactly 3 classes")
        seen = set()
        for cls in self.classes:
            endpoints = set()
            for u, v in cls:
                if not (0 <= u < v):
                    raise ValueError("edges must be sorted pairs")
                if (u, v) in seen:
                    raise ValueError("classes must be disjoint")
                seen.add((u, v))
                if u in endpoints or v in endpoints:
                    raise ValueError("a color class must be a matching")
                endpoints.update((u, v))

    @property
    def edges(self) -> frozenset:
        return frozenset(e for cls in self.classes for e in cls)

    def color_of(self) -> dict:
        return {e: c for c, cls in enumerate(self.classes) for e in cls}


def edge_coloring(graph: HeavyHexGraph, seed: int = 0) -> EdgeColoring:
    """Proper 3-edge-coloring, deterministic under seed.

    Greedy lowest-free-color over a seeded edge order; when an edge has
    no color free at both ends, the alternating two-color path from one
    end is flipped first.  On a bipartite graph with degree <= 3 the
    flip always frees a shared color, so three classes always suffice.
    """
    degs = graph.degrees()
    if len(graph.edges) and int(degs.max()) > 3:
        raise ConfigError("edge coloring requires max degree <= 3")
    order = list(graph.edges)
    np.random.default_rng(seed).shuffle(order)

    color = {}
    at_vertex = {v: {} for v in range(graph.n)}  # vertex -> color -> neighbor

    def assign(u, v, c):
        color[(u, v)] = c
        at_vertex[u][c] = v
        at_vertex[v][c] = u

    for u, v in order:
        free_u = {0, 1, 2} - at_vertex[u].keys()
        free_v = {0, 1, 2} - at_vertex[v].keys()
        common = free_u & free_v
        if common:
            assign(u, v, min(common))
            continue
        a, b = min(free_u), min(free_v)
        # walk the a/b alternating path from v; bipartite parity keeps u
        # off this path, so flipping frees color a at v and keeps it
        # free at u
        path = []
        cur, want = v, a
        while want in at_vertex[cur]:
            nxt = at_vertex[cur][want]
            path.append((min(cur, nxt), max(cur, nxt)))
            cur, want = nxt, (b if want == a else a)
        for e in path:
            old = color[e]
            del at_vertex[e[0]][old]
            del at_vertex[e[1]][old]
        for e in path:
            old = color.pop(e)
            assign(e[0], e[1], b if old == a else a)
        assign(u, v, a)

    classes = [[], [], []]
    for e in sorted(color):
        classes[color[e]].append(e)
    return EdgeColoring(classes=tuple(tuple(cls) for cls in classes))


@dataclass(frozen=True)
class Circuit:
    """Immutable gate list with per-layer two-qubit depth annotations."""

    n: int
    p: int
    gates: tuple[Gate, ...]
    layer_two_qubit_depths: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1 or self.p < 0:
            raise ValueError("need n >= 1 and p >= 0")
        if len(self.layer_two_qubit_depths) != self.p:
            raise ValueError("one depth annotation per QAOA layer")
        for g in self.gates:
            if any(q >= self.n for q in g.qubits):
                raise ValueError("gate addresses qubit outside register")


def _phase_layer(instance: IsingInstance, gamma: float, color_of: dict) -> tuple:
    """Gate list and two-qubit depth for one exp(-i gamma C) block."""
    graph = instance.graph
    adjacency = graph.adjacency()
    quad_coeff = {e: d for e, d in zip(graph.edges, instance.d_quad)}
    cubic_coeff = {t[1]: d for t, d in zip(graph.cubic, instance.d_cubic)}

    gates = [Gate("rz", (q,), -2.0 * gamma * instance.d_lin[q])
             for q in range(graph.n)]
    slot_cx = [[] for _ in range(6)]
    slot_rz = [[] for _ in range(6)]
    for w in sorted(graph.v2):
        nbrs = sorted(adjacency[w], key=lambda a: color_of[(min(a, w), max(a, w))])
        if not nbrs:
            continue
        by_color = [(color_of[(min(a, w), max(a, w))], a) for a in nbrs]
        for c, a in by_color:
            slot_cx[c].append((a, w))
            slot_cx[3 + c].append((a, w))
        c1, a1 = by_color[0]
        # after the first-pass entangler on edge (a1, w) the node carries
        # -s_w s_a1, so a +2 gamma d rotation applies the quadratic term
        slot_rz[c1].append((w, 2.0 * gamma * quad_coeff[(min(a1, w), max(a1, w))]))
        if len(by_color) == 2:
            c2, a2 = by_color[1]
            # full triple parity sits on w between the two passes
            slot_rz[c2].append((w, -2.0 * gamma * cubic_coeff[w]))
            # second pass of edge (a1, w) leaves -s_w s_a2 on the node
            slot_rz[3 + c1].append(
                (w, 2.0 * gamma * quad_coeff[(min(a2, w), max(a2, w))]))
    depth = 0
    for s in range(6):
        if slot_cx[s]:
            depth += 1
        for a, w in sorted(slot_cx[s], key=lambda cw: cw[1]):
            gates.append(Gate("cx", (a, w)))
        for q, theta in sorted(slot_rz[s]):
            gates.append(Gate("rz", (q,), theta))
    return gates, depth


def build_circuit(
    instance: IsingInstance,
    schedule: AngleSchedule | None,
    coloring: EdgeColoring | None = None,
) -> Circuit:
    """Compile an instance and schedule into a hardware-shaped circuit.

    schedule None produces the preparation-plus-measurement skeleton.
    The same coloring is reused for every layer; passing None colors the
    graph deterministically with seed 0.
    """
    graph = instance.graph
    if coloring is None:
        coloring = edge_coloring(graph)
    if coloring.edges != frozenset(graph.edges):
        raise ConfigError("coloring does not cover this instance's edge set")
    color_of = coloring.color_of()

    gates = [Gate("h", (q,)) for q in range(graph.n)]
    depths = []
    if schedule is not None:
        for beta, gamma in zip(schedule.betas, schedule.gammas):
            layer_gates, depth = _phase_layer(instance, gamma, color_of)
            gates.extend(layer_gates)
            depths.append(depth)
            gates.extend(Gate("rx", (q,), 2.0 * beta) for q in range(graph.n))
    gates.extend(Gate("measure", (q,)) for q in range(graph.n))
    return Circuit(
        n=graph.n,
        p=0 if schedule is None else schedule.p,
        gates=tuple(gates),
        layer_two_qubit_depths=tuple(depths),
    )


def gate_counts(circuit: Circuit) -> dict:
    """Family totals over the abstract gate list.

    two_qubit counts entanglers regardless of the emission basis; the
    H pair added per entangler by controlled-Z lowering is an emitter
    detail and is not included here.
    """
    counts = {"two_qubit": 0, "single_qubit_x_family": 0,
              "single_qubit_z_family": 0, "measure": 0}
    for g in circuit.gates:
        if g.kind in ("cx", "cz"):
            counts["two_qubit"] += 1
        elif g.kind in ("h", "rx"):
            counts["single_qubit_x_family"] += 1
        elif g.kind == "rz":
            counts["single_qubit_z_family"] += 1
        else:
            counts["measure"] += 1
    return counts


def emit_qasm(circuit: Circuit, basis: str = "cx") -> str:
    """OpenQASM 2.0 text for a circuit.

    basis "cx" emits entanglers literally; basis "cz" lowers each to
    h(target), cz, h(target), which leaves measurement statistics
    unchanged.
    """
    if basis not in ("cx", "cz"):
        raise ConfigError(f"unknown emission basis {basis!r}")
    lines = [QASM_HEADER + f"qreg q[{circuit.n}];\ncreg c[{circuit.n}];"]
    for g in circuit.gates:
        if g.kind == "measure":
            lines.append(f"measure q[{g.qubits[0]}] -> c[{g.qubits[0]}];")
        elif g.kind == "cx" and basis == "cz":
            a, w = g.qubits
            lines.append(f"h q[{w}];")
            lines.append(f"cz q[{a}],q[{w}];")
            lines.append(f"h q[{w}];")
        elif g.kind in ("cx", "cz"):
            lines.append(f"{g.kind} q[{g.qubits[0]}],q[{g.qubits[1]}];")
        elif g.kind == "h":
            lines.append(f"h q[{g.qubits[0]}];")
        else:
            lines.append(f"{g.kind}({g.param!r}) q[{g.qubits[0]}];")
    return "\n".join(lines) + "\n"


_QASM_GATE_RE = re.compile(
    r"^(?P<name>h|rz|rx|cx|cz)"
    r"(?:\((?P<param>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\))?"
    r" q\[(?P<q0>\d+)\](?:,q\[(?P<q1>\d+)\])?;$"
)
_QASM_MEASURE_RE = re.compile(r"^measure q\[(?P<q>\d+)\] -> c\[(?P<c>\d+)\];$")


def validate_qasm(text: str) -> dict:
    """Parser-lite check of emitted OpenQASM 2.0; returns family counts.

    Accepts exactly the shape emit_qasm produces: fixed header, one
    statement per line.  Raises FormatError on anything else.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if len(lines) < 4:
        raise FormatError("truncated qasm text")
    if lines[0] != "OPENQASM 2.0;" or lines[1] != 'include "qelib1.inc";':
        raise FormatError("bad qasm header")
    m_qreg = re.match(r"^qreg q\[(\d+)\];$", lines[2])
    m_creg = re.match(r"^creg c\[(\d+)\];$", lines[3])
    if not m_qreg or not m_creg or m_qreg.group(1) != m_creg.group(1):
        raise FormatError("bad register declarations")
    n = int(m_qreg.group(1))
    counts = {"two_qubit": 0, "single_qubit_x_family": 0,
              "single_qubit_z_family": 0, "measure": 0}
    for i, line in enumerate(lines[4:], start=5):
        m = _QASM_MEASURE_RE.match(line)
        if m:
            if int(m.group("q")) >= n or int(m.group("q")) != int(m.group("c")):
                raise FormatError(f"line {i}: bad measurement target")
            counts["measure"] += 1
            continue
        m = _QASM_GATE_RE.match(line)
        if not m:
            raise FormatError(f"line {i}: unrecognized statement {line!r}")
        name = m.group("name")
        has_param = m.group("param") is not None
        has_q1 = m.group("q1") is not None
        if GATE_HAS_PARAM[name] != has_param or (GATE_ARITY[name] == 2) != has_q1:
            raise FormatError(f"line {i}: malformed {name} statement")
        qubits = [int(m.group("q0"))] + ([int(m.group("q1"))] if has_q1 else [])
        if any(q >= n for q in qubits) or len(set(qubits)) != len(qubits):
            raise FormatError(f"line {i}: bad qubit operands")
        if name in ("cx", "cz"):
            counts["two_qubit"] += 1
        elif name in ("h", "rx"):
            counts["single_qubit_x_family"] += 1
        else:
            counts["single_qubit_z_family"] += 1
    return counts
