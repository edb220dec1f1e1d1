"""Heavy-hex lattices and Ising cost models with local cubic terms.

The cost function studied by this package lives on a heavy-hex graph,
the sparse bipartite lattice used by several transmon devices.  Vertices
split into V3 (degree at most 3) and V2 (degree at most 2), and every
edge joins a V3 vertex to a V2 vertex.  On top of field and coupling
terms there is one three-body term per degree-2 V2 vertex w, acting on
(i, w, k) where i and k are the two neighbors of w:

    C(z) = sum_i a_i z_i
         + sum_(u,v) b_uv z_u z_v
         + sum_(i,w,k) c_iwk z_i z_w z_k

with every coefficient in {-1, +1} and spins z_i in {-1, +1}.

Spin convention used throughout the package: basis states are indexed
by integers whose bit j describes qubit j, and bit value 1 maps to spin
+1 (bit 0 to spin -1).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._jsonio import read_artifact, write_artifact
from .errors import CapacityError, ConfigError, FormatError

INSTANCE_FORMAT = "hexqaoa/instance"
INSTANCE_VERSION = 1
EXTREMA_FORMAT = "hexqaoa/extrema"
EXTREMA_VERSION = 1
COUPLING_MAP_FORMAT = "hexqaoa/coupling-map"
COUPLING_MAP_VERSION = 1

NAMED_LAYOUTS = ("eagle127", "heron133", "heron156", "guadalupe16", "falcon27")

COEFFICIENT_MODES = ("random_pm1", "all_positive", "all_negative")

#: Spin assignments are plain numpy arrays of -1/+1 with shape (..., n).
SpinConfig = np.ndarray


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class HeavyHexGraph:
    """A validated heavy-hex interaction graph.

    Attributes:
        n: number of vertices, labeled 0..n-1.
        edges: sorted tuples (u, v) with u < v, lexicographically ordered.
        v2: vertices with degree cap 2 (one bipartition class).
        v3: vertices with degree cap 3 (the other class).
        cubic: triples (i, w, k) with i < k, one per degree-2 V2 vertex w,
            ordered by w.  These carry the three-body terms.
        layout: label of the generator that produced the graph.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    v2: frozenset[int]
    v3: frozenset[int]
    cubic: tuple[tuple[int, int, int], ...]
    layout: str = "custom"

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [sorted(nbrs) for nbrs in adj]


def _two_color(n: int, adj: list[list[int]]) -> np.ndarray:
    """2-color a connected graph by BFS, raising if an odd cycle exists."""
    color = np.full(n, -1, dtype=np.int64)
    color[0] = 0
    queue = [0]
    while queue:
        u = queue.pop()
        for v in adj[u]:
            if color[v] == -1:
                color[v] = 1 - color[u]
                queue.append(v)
            elif color[v] == color[u]:
                raise ValueError("graph is not bipartite, cannot be heavy-hex")
    if np.any(color == -1):
        raise ValueError("graph is not connected")
    return color


def heavy_hex_from_edges(
    n: int, edges: Iterable[tuple[int, int]], layout: str = "custom"
) -> HeavyHexGraph:
    """Build and validate a HeavyHexGraph from an explicit edge list.

    The bipartition is inferred: the class holding a degree-3 vertex
    becomes V3; if the maximum degree is 2 either class satisfies the
    caps and the class containing vertex 0 is used.
    """
    if n < 2:
        raise ValueError("heavy-hex graph needs at least 2 vertices")
    canon = []
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u},{v}) out of range for n={n}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        canon.append(key)
    canon.sort()
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in canon:
        adj[u].append(v)
        adj[v].append(u)
    deg = np.array([len(a) for a in adj], dtype=np.int64)
    color = _two_color(n, adj)

    deg3 = np.nonzero(deg >= 3)[0]
    if deg3.size:
        if np.max(deg) > 3:
            raise ValueError(f"vertex degree {int(np.max(deg))} exceeds heavy-hex cap 3")
        v3_color = int(color[deg3[0]])
        if np.any(deg[color != v3_color] > 2):
            raise ValueError("a degree-3 vertex appears in both bipartition classes")
    else:
        v3_color = int(color[0])

    v3 = frozenset(int(u) for u in np.nonzero(color == v3_color)[0])
    v2 = frozenset(int(u) for u in np.nonzero(color != v3_color)[0])
    if any(deg[u] > 2 for u in v2):
        raise ValueError("degree cap 2 violated on the V2 class")

    cubic = []
    for w in sorted(v2):
        if deg[w] == 2:
            a, b = sorted(adj[w])
            cubic.append((a, w, b))
    return HeavyHexGraph(
        n=n,
        edges=tuple(canon),
        v2=v2,
        v3=v3,
        cubic=tuple(cubic),
        layout=layout,
    )


def _stacked_rows_edges(
    row_cols: Sequence[Sequence[int]],
    connector_cols: Sequence[Sequence[int]],
    dangling_cols: Sequence[int] = (),
) -> tuple[int, list[tuple[int, int]]]:
    """Edge list for a lattice of horizontal qubit rows joined by connectors.

    Vertices are numbered row by row, each row followed by the connectors
    of the gap below it; dangling connectors hang below the final row and
    have a single edge.
    """
    if len(connector_cols) != len(row_cols) - 1:
        raise ValueError("need exactly one connector column set per row gap")
    index: dict[tuple[str, int, int], int] = {}
    nxt = 0
    for r, cols in enumerate(row_cols):
        for c in cols:
            index[("row", r, c)] = nxt
            nxt += 1
        if r < len(connector_cols):
            for c in connector_cols[r]:
                index[("conn", r, c)] = nxt
                nxt += 1
    for c in dangling_cols:
        index[("dang", 0, c)] = nxt
        nxt += 1

    edges = []
    for r, cols in enumerate(row_cols):
        for c in cols:
            if ("row", r, c + 1) in index:
                edges.append((index[("row", r, c)], index[("row", r, c + 1)]))
    for g, cols in enumerate(connector_cols):
        for c in cols:
            above = index.get(("row", g, c))
            below = index.get(("row", g + 1, c))
            if above is None or below is None:
                raise ValueError(f"connector column {c} missing in rows {g} or {g + 1}")
            conn = index[("conn", g, c)]
            edges.append((above, conn))
            edges.append((conn, below))
    last = len(row_cols) - 1
    for c in dangling_cols:
        above = index.get(("row", last, c))
        if above is None:
            raise ValueError(f"dangling connector column {c} missing in bottom row")
        edges.append((above, index[("dang", 0, c)]))
    return nxt, edges


def _parametric_edges(rows: int, cols: int) -> tuple[int, list[tuple[int, int]]]:
    """Hexagonal-cell lattice with `rows` x `cols` heavy hexagons."""
    if rows < 1 or cols < 1:
        raise ConfigError("parametric layout needs rows >= 1 and cols >= 1")
    width = 4 * cols + 1
    row_cols = [list(range(width)) for _ in range(rows + 1)]
    connector_cols = []
    for g in range(rows):
        if g % 2 == 0:
            connector_cols.append(list(range(0, width, 4)))
        else:
            connector_cols.append(list(range(2, width - 1, 4)))
    return _stacked_rows_edges(row_cols, connector_cols)


def _load_named_layout(name: str) -> tuple[int, list[tuple[int, int]]]:
    resource = importlib.resources.files("hexqaoa.data").joinpath(f"{name}.json")
    if not resource.is_file():
        raise ConfigError(f"no coupling map shipped for layout {name!r}")
    import json

    doc = json.loads(resource.read_text(encoding="utf-8"))
    if doc.get("format") != COUPLING_MAP_FORMAT or doc.get("version") != COUPLING_MAP_VERSION:
        raise FormatError(f"coupling map {name}: bad format tag or version")
    return int(doc["n"]), [(int(u), int(v)) for u, v in doc["edges"]]


def build_heavy_hex(
    layout: str, *, rows: int | None = None, cols: int | None = None
) -> HeavyHexGraph:
    """Build one of the shipped device layouts or a parametric lattice.

    Args:
        layout: one of ``eagle127``, ``heron133``, ``heron156``,
            ``guadalupe16``, ``falcon27``, or ``parametric``.
        rows, cols: cell counts, required for ``parametric`` only.
    """
    if layout == "parametric":
        if rows is None or cols is None:
            raise ConfigError("parametric layout requires rows and cols")
        n, edges = _parametric_edges(rows, cols)
        return heavy_hex_from_edges(n, edges, layout=f"parametric-{rows}x{cols}")
    if rows is not None or cols is not None:
        raise ConfigError("rows/cols are only valid with layout='parametric'")
    if layout not in NAMED_LAYOUTS:
        raise ConfigError(f"unknown layout {layout!r}; expected one of {NAMED_LAYOUTS}")
    n, edges = _load_named_layout(layout)
    return heavy_hex_from_edges(n, edges, layout=layout)


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class IsingInstance:
    """Coefficients of the cost function on a heavy-hex graph.

    d_lin is indexed by vertex, d_quad aligns with graph.edges and
    d_cubic with graph.cubic.  All coefficients are -1 or +1.
    """

    graph: HeavyHexGraph
    d_lin: tuple[int, ...]
    d_quad: tuple[int, ...]
    d_cubic: tuple[int, ...]
    seed: int | None = None
    mode: str = "custom"

    def __post_init__(self):
        g = self.graph
        if len(self.d_lin) != g.n:
            raise ValueError("d_lin length must equal vertex count")
        if len(self.d_quad) != len(g.edges):
            raise ValueError("d_quad length must equal edge count")
        if len(self.d_cubic) != len(g.cubic):
            raise ValueError("d_cubic length must equal cubic triple count")
        for c in (*self.d_lin, *self.d_quad, *self.d_cubic):
            if c not in (-1, 1):
                raise ValueError("all coefficients must be -1 or +1")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def n_terms(self) -> int:
        return len(self.d_lin) + len(self.d_quad) + len(self.d_cubic)

    @property
    def label(self) -> str:
        seed = "none" if self.seed is None else str(self.seed)
        return f"{self.graph.layout}/{self.mode}/s{seed}"

    def terms(self) -> list[tuple[tuple[int, ...], int]]:
        """All monomials as (vertex tuple, coefficient) pairs."""
        out: list[tuple[tuple[int, ...], int]] = []
        for i, d in enumerate(self.d_lin):
            out.append(((i,), int(d)))
        for (u, v), d in zip(self.graph.edges, self.d_quad):
            out.append(((u, v), int(d)))
        for (i, w, k), d in zip(self.graph.cubic, self.d_cubic):
            out.append(((i, w, k), int(d)))
        return out


def _philox_sign(seed: int, kind: int, index: int) -> int:
    """One +-1 draw from a counter-based stream keyed by (seed, kind, index).

    Keying each term by its own counter keeps every coefficient stable
    under changes to the number of other terms.
    """
    bitgen = np.random.Philox(key=np.array([seed, kind], dtype=np.uint64),
                              counter=np.array([index, 0, 0, 0], dtype=np.uint64))
    bit = np.random.Generator(bitgen).integers(0, 2)
    return int(2 * bit - 1)


def generate_instance(graph: HeavyHexGraph, seed: int, mode: str = "random_pm1") -> IsingInstance:
    """Draw an instance on ``graph`` with seed-deterministic coefficients."""
    if mode not in COEFFICIENT_MODES:
        raise ConfigError(f"unknown coefficient mode {mode!r}; expected one of {COEFFICIENT_MODES}")
    if mode == "all_positive":
        lin = (1,) * graph.n
        quad = (1,) * len(graph.edges)
        cub = (1,) * len(graph.cubic)
    elif mode == "all_negative":
        lin = (-1,) * graph.n
        quad = (-1,) * len(graph.edges)
        cub = (-1,) * len(graph.cubic)
    else:
        lin = tuple(_philox_sign(seed, 0, i) for i in range(graph.n))
        quad = tuple(_philox_sign(seed, 1, i) for i in range(len(graph.edges)))
        cub = tuple(_philox_sign(seed, 2, i) for i in range(len(graph.cubic)))
    return IsingInstance(graph=graph, d_lin=lin, d_quad=quad, d_cubic=cub, seed=seed, mode=mode)


def instance_to_json(instance: IsingInstance, path: str) -> None:
    """Write an instance artifact (coupling, triples, and coefficients)."""
    payload = {
        "layout": instance.graph.layout,
        "n": instance.n,
        "edges": [list(e) for e in instance.graph.edges],
        "cubic": [list(t) for t in instance.graph.cubic],
        "d_lin": list(instance.d_lin),
        "d_quad": list(instance.d_quad),
        "d_cubic": list(instance.d_cubic),
        "seed": instance.seed,
        "mode": instance.mode,
    }
    write_artifact(path, INSTANCE_FORMAT, INSTANCE_VERSION, payload)


def instance_from_json(path: str) -> IsingInstance:
    """Read an instance artifact, revalidating the graph invariants."""
    doc = read_artifact(path, INSTANCE_FORMAT, INSTANCE_VERSION)
    try:
        graph = heavy_hex_from_edges(
            int(doc["n"]),
            [tuple(e) for e in doc["edges"]],
            layout=str(doc["layout"]),
        )
        declared = [tuple(t) for t in doc["cubic"]]
        if list(graph.cubic) != declared:
            raise FormatError("cubic triples do not match the graph structure")
        seed = doc["seed"]
        inst = IsingInstance(
            graph=graph,
            d_lin=tuple(int(c) for c in doc["d_lin"]),
            d_quad=tuple(int(c) for c in doc["d_quad"]),
            d_cubic=tuple(int(c) for c in doc["d_cubic"]),
            seed=None if seed is None else int(seed),
            mode=str(doc["mode"]),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing instance field {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return inst


def import_external_instance(path: str) -> IsingInstance:
    """Ingest an externally published instance file.

    Accepts either this package's native instance artifact or a generic
    term-list JSON with keys ``n``, ``linear``, ``quadratic``, ``cubic``:
    linear as a coefficient list, pair list, or index-to-value mapping;
    quadratic as [u, v, d] rows; cubic as [i, w, k, d] rows.  The graph
    is rebuilt from the quadratic support and must be valid heavy-hex,
    and the cubic rows must cover exactly the structural triples.
    """
    import json
    import os

    from .errors import MissingInputError

    if not os.path.exists(path):
        raise MissingInputError(f"missing input file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(doc, dict) and doc.get("format") == INSTANCE_FORMAT:
        return instance_from_json(path)
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")

    try:
        quad_rows = [(int(u), int(v), int(d)) for u, v, d in doc["quadratic"]]
        cubic_rows = [(int(i), int(w), int(k), int(d)) for i, w, k, d in doc["cubic"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed term lists ({exc})") from exc

    peak = max(
        [max(u, v) for u, v, _ in quad_rows] + [max(i, w, k) for i, w, k, _ in cubic_rows],
        default=-1,
    )
    n = int(doc.get("n", peak + 1))

    lin_raw = doc.get("linear", [])
    lin = [0] * n
    if isinstance(lin_raw, Mapping):
        items = [(int(q), int(d)) for q, d in lin_raw.items()]
    elif lin_raw and isinstance(lin_raw[0], (list, tuple)):
        items = [(int(q), int(d)) for q, d in lin_raw]
    else:
        if len(lin_raw) != n:
            raise FormatError(f"{path}: linear coefficient list must have length n")
        items = list(enumerate(int(d) for d in lin_raw))
    for q, d in items:
        if not 0 <= q < n:
            raise FormatError(f"{path}: linear index {q} out of range")
        lin[q] = d

    try:
        graph = heavy_hex_from_edges(n, [(u, v) for u, v, _ in quad_rows], layout="imported")
    except ValueError as exc:
        raise FormatError(f"{path}: quadratic support is not heavy-hex ({exc})") from exc

    quad_map = {(min(u, v), max(u, v)): d for u, v, d in quad_rows}
    cubic_map = {(min(i, k), w, max(i, k)): d for i, w, k, d in cubic_rows}
    if set(cubic_map) != set(graph.cubic):
        raise FormatError(f"{path}: cubic rows do not match the structural triples")
    try:
        return IsingInstance(
            graph=graph,
            d_lin=tuple(lin),
            d_quad=tuple(quad_map[e] for e in graph.edges),
            d_cubic=tuple(cubic_map[t] for t in graph.cubic),
            seed=None,
            mode="imported",
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# energies


def index_to_spins(indices: np.ndarray | int, n: int) -> np.ndarray:
    """Spins (..., n) for integer basis indices, bit 1 mapping to +1."""
    idx = np.asarray(indices, dtype=np.int64)
    bits = (idx[..., None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def energy(instance: IsingInstance, spins: SpinConfig) -> np.ndarray | float:
    """Cost value C(z) for one spin assignment or a batch (..., n)."""
    z = np.asarray(spins)
    if z.shape[-1] != instance.n:
        raise ValueError(f"spin config has {z.shape[-1]} sites, instance has {instance.n}")
    if not np.all(np.abs(z) == 1):
        raise ValueError("spins must be -1 or +1")
    z = z.astype(np.int64)
    total = z @ np.asarray(instance.d_lin, dtype=np.int64)
    if instance.graph.edges:
        u, v = np.transpose(np.asarray(instance.graph.edges, dtype=np.int64))
        total = total + (z[..., u] * z[..., v]) @ np.asarray(instance.d_quad, dtype=np.int64)
    if instance.graph.cubic:
        i, w, k = np.transpose(np.asarray(instance.graph.cubic, dtype=np.int64))
        total = total + (z[..., i] * z[..., w] * z[..., k]) @ np.asarray(
            instance.d_cubic, dtype=np.int64
        )
    if total.ndim == 0:
        return float(total)
    return total.astype(np.float64)


def add_spin_monomial(values: np.ndarray, qubits: Sequence[int], coeff: float) -> None:
    """Add coeff * prod_j spin(bit_j) onto a dense table indexed by basis state.

    ``values`` has length 2**m and every qubit index must be below m.
    The table is updated through reshaped views, so no (2**m, m) spin
    matrix is ever materialized.
    """
    m = int(np.log2(len(values)))
    if len(values) != 1 << m:
        raise ValueError("table length must be a power of two")
    if not qubits:
        values += coeff
        return
    qs = sorted(int(q) for q in qubits)
    if qs[0] < 0 or qs[-1] >= m or len(set(qs)) != len(qs):
        raise ValueError("qubit indices must be distinct and within the table")
    # Shape (..., 2, gap, 2, gap, ..., 2, 2**q0), one axis of size 2 per qubit.
    dims = []
    prev = m
    for q in reversed(qs):
        dims.append(1 << (prev - q - 1))
        dims.append(2)
        prev = q
    dims.append(1 << prev)
    view = values.reshape(dims)
    for bits in product((0, 1), repeat=len(qs)):
        sign = 1
        for b in bits:
            sign *= 2 * b - 1
        sel: list[slice | int] = [slice(None)] * len(dims)
        for axis_pos, b in enumerate(bits):
            sel[2 * axis_pos + 1] = b
        view[tuple(sel)] += coeff * sign


# ---------------------------------------------------------------------------
# extrema


@dataclass(frozen=True)
class Extrema:
    """Ground and anti-ground energies of an instance.

    gs_degeneracy counts minimizing assignments; 0 means unknown (the
    heuristic and imported paths do not count states).  method is one of
    ``brute_force``, ``heuristic``, ``imported``.
    """

    c_min: int
    c_max: int
    gs_degeneracy: int = 0
    method: str = "brute_force"

    def __post_init__(self):
        if self.method not in ("brute_force", "heuristic", "imported"):
            raise ValueError(f"unknown extrema method {self.method!r}")
        if self.c_min > self.c_max:
            raise ValueError("c_min must not exceed c_max")
        if (self.c_max - self.c_min) % 2 != 0:
            raise ValueError("c_min and c_max must have equal parity")
        if self.gs_degeneracy < 0:
            raise ValueError("gs_degeneracy must be nonnegative")

    def validate_for(self, instance: IsingInstance) -> None:
        """Check the parity invariant against an instance's term count."""
        if (self.c_min - instance.n_terms) % 2 != 0:
            raise ValueError("extrema parity does not match the instance term count")


def extrema_to_json(extrema: Extrema, path: str) -> None:
    write_artifact(
        path,
        EXTREMA_FORMAT,
        EXTREMA_VERSION,
        {
            "c_min": extrema.c_min,
            "c_max": extrema.c_max,
            "gs_degeneracy": extrema.gs_degeneracy,
            "method": extrema.method,
        },
    )


def extrema_from_json(path: str) -> Extrema:
    doc = read_artifact(path, EXTREMA_FORMAT, EXTREMA_VERSION)
    try:
        return Extrema(
            c_min=int(doc["c_min"]),
            c_max=int(doc["c_max"]),
            gs_degeneracy=int(doc["gs_degeneracy"]),
            method=str(doc["method"]),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def brute_force_extrema(instance: IsingInstance, cap: int = 30) -> Extrema:
    """Exact extrema and ground-state degeneracy by full enumeration.

    Enumerates in blocks of at most 2**22 states so memory stays flat;
    raises CapacityError above ``cap`` qubits.
    """
    n = instance.n
    if n > cap:
        raise CapacityError(f"brute force capped at {cap} qubits, instance has {n}")
    terms = instance.terms()
    block_bits = min(n, 22)
    block_len = 1 << block_bits
    c_min = None
    c_max = None
    degeneracy = 0
    for block in range(1 << (n - block_bits)):
        vals = np.zeros(block_len, dtype=np.int32)
        for qs, d in terms:
            low = [q for q in qs if q < block_bits]
            sign = 1
            for q in qs:
                if q >= block_bits:
                    sign *= 2 * ((block >> (q - block_bits)) & 1) - 1
            add_spin_monomial(vals, low, d * sign)
        lo = int(vals.min())
        hi = int(vals.max())
        if c_min is None or lo < c_min:
            c_min = lo
            degeneracy = 0
        if lo == c_min:
            degeneracy += int(np.count_nonzero(vals == lo))
        if c_max is None or hi > c_max:
            c_max = hi
    ext = Extrema(c_min=c_min, c_max=c_max, gs_degeneracy=degeneracy, method="brute_force")
    ext.validate_for(instance)
    return ext


@dataclass(frozen=True)
class SaParams:
    """Simulated-annealing schedule for anneal_extrema.

    sweeps=None selects the default budget of n * 1000 sweeps per
    restart; the temperature interpolates geometrically from t_init to
    t_final over the sweep sequence.
    """

    restarts: int = 64
    sweeps: int | None = None
    t_init: float = 8.0
    t_final: float = 0.05
    seed: int = 0
    polish_passes: int = 50

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("restarts must be positive")
        if self.sweeps is not None and self.sweeps < 1:
            raise ConfigError("sweeps must be positive")
        if not (self.t_init > 0 and self.t_final > 0 and self.t_init >= self.t_final):
            raise ConfigError("need t_init >= t_final > 0")


def _interaction_classes(instance: IsingInstance) -> list[np.ndarray]:
    """Greedy coloring of vertices so no two in a class share a term."""
    n = instance.n
    conflict: list[set[int]] = [set() for _ in range(n)]
    for qs, _ in instance.terms():
        for a in qs:
            for b in qs:
                if a != b:
                    conflict[a].add(b)
    color = [-1] * n
    for u in range(n):
        used = {color[v] for v in conflict[u] if color[v] >= 0}
        c = 0
        while c in used:
            c += 1
        color[u] = c
    n_colors = max(color) + 1
    return [np.nonzero(np.asarray(color) == c)[0] for c in range(n_colors)]


def _class_tables(instance: IsingInstance, members: np.ndarray):
    """Padded gather tables for the local field of one color class.

    For vertex j the field is d_j + sum_e d_e z_nbr + sum_t d_t z_a z_b,
    so flipping j changes the energy by -2 z_j field_j.
    """
    pair_lists: list[list[tuple[int, int]]] = [[] for _ in members]
    trip_lists: list[list[tuple[int, int, int]]] = [[] for _ in members]
    pos = {int(j): idx for idx, j in enumerate(members)}
    for (u, v), d in zip(instance.graph.edges, instance.d_quad):
        if u in pos:
            pair_lists[pos[u]].append((v, d))
        if v in pos:
            pair_lists[pos[v]].append((u, d))
    for (i, w, k), d in zip(instance.graph.cubic, instance.d_cubic):
        if i in pos:
            trip_lists[pos[i]].append((w, k, d))
        if w in pos:
            trip_lists[pos[w]].append((i, k, d))
        if k in pos:
            trip_lists[pos[k]].append((i, w, d))
    m2 = max((len(p) for p in pair_lists), default=0) or 1
    m3 = max((len(t) for t in trip_lists), default=0) or 1
    quad_idx = np.zeros((len(members), m2), dtype=np.int64)
    quad_coef = np.zeros((len(members), m2), dtype=np.float64)
    cub_a = np.zeros((len(members), m3), dtype=np.int64)
    cub_b = np.zeros((len(members), m3), dtype=np.int64)
    cub_coef = np.zeros((len(members), m3), dtype=np.float64)
    for row, plist in enumerate(pair_lists):
        for col, (nbr, d) in enumerate(plist):
            quad_idx[row, col] = nbr
            quad_coef[row, col] = d
    for row, tlist in enumerate(trip_lists):
        for col, (a, b, d) in enumerate(tlist):
            cub_a[row, col] = a
            cub_b[row, col] = b
            cub_coef[row, col] = d
    lin = np.asarray(instance.d_lin, dtype=np.float64)[members]
    return lin, quad_idx, quad_coef, cub_a, cub_b, cub_coef


def _anneal_minimum(instance: IsingInstance, params: SaParams, rng_seed: int) -> int:
    n = instance.n
    sweeps = params.sweeps if params.sweeps is not None else n * 1000
    classes = _interaction_classes(instance)
    tables = [_class_tables(instance, members) for members in classes]
    rng = np.random.default_rng(rng_seed)
    z = (2 * rng.integers(0, 2, size=(params.restarts, n)) - 1).astype(np.float64)
    e = np.asarray(energy(instance, z), dtype=np.float64)
    best = e.copy()
    # Geometric cooling; all restarts advance through the same schedule.
    ratio = params.t_final / params.t_init
    denom = max(sweeps - 1, 1)
    for sweep in range(sweeps):
        t = params.t_init * ratio ** (sweep / denom)
        for members, (lin, qi, qc, ca, cb, cc) in zip(classes, tables):
            fld = lin[None, :] + np.einsum("rcm,cm->rc", z[:, qi], qc)
            if cc.size:
                fld += np.einsum("rcm,rcm,cm->rc", z[:, ca], z[:, cb], cc)
            de = -2.0 * z[:, members] * fld
            accept = (de <= 0.0) | (rng.random(de.shape) < np.exp(-de / t))
            z[:, members] = np.where(accept, -z[:, members], z[:, members])
            e += np.where(accept, de, 0.0).sum(axis=1)
        np.minimum(best, e, out=best)
    # Zero-temperature polish until no strictly improving flip remains.
    for _ in range(params.polish_passes):
        improved = False
        for members, (lin, qi, qc, ca, cb, cc) in zip(classes, tables):
            fld = lin[None, :] + np.einsum("rcm,cm->rc", z[:, qi], qc)
            if cc.size:
                fld += np.einsum("rcm,rcm,cm->rc", z[:, ca], z[:, cb], cc)
            de = -2.0 * z[:, members] * fld
            accept = de < 0.0
            if np.any(accept):
                improved = True
                z[:, members] = np.where(accept, -z[:, members], z[:, members])
                e += np.where(accept, de, 0.0).sum(axis=1)
        if not improved:
            break
    np.minimum(best, e, out=best)
    return int(round(float(best.min())))


def anneal_extrema(instance: IsingInstance, params: SaParams | None = None) -> Extrema:
    """Heuristic extrema by vectorized simulated annealing.

    Runs the configured restarts in parallel as numpy rows, sweeping
    vertices one conflict-free color class at a time; the maximum comes
    from annealing the negated instance.  Result carries method
    ``heuristic`` and unknown degeneracy.
    """
    params = params or SaParams()
    negated = IsingInstance(
        graph=instance.graph,
        d_lin=tuple(-c for c in instance.d_lin),
        d_quad=tuple(-c for c in instance.d_quad),
        d_cubic=tuple(-c for c in instance.d_cubic),
        seed=instance.seed,
        mode=instance.mode,
    )
    c_min = _anneal_minimum(instance, params, rng_seed=params.seed)
    c_max = -_anneal_minimum(negated, params, rng_seed=params.seed + 1)
    ext = Extrema(c_min=c_min, c_max=c_max, gs_degeneracy=0, method="heuristic")
    ext.validate_for(instance)
    return ext


def approximation_ratio(value: float | np.ndarray, extrema: Extrema) -> float | np.ndarray:
    """Affine rescaling of an energy so c_min maps to 1 and c_max to 0."""
    if extrema.c_max <= extrema.c_min:
        raise ValueError("approximation ratio needs c_max > c_min")
    e = np.asarray(value, dtype=np.float64)
    ar = (extrema.c_max - e) / (extrema.c_max - extrema.c_min)
    if ar.ndim == 0:
        return float(ar)
    return ar
