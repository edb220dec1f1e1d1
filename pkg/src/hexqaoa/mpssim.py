r"""Matrix-product-state simulation of the alternating circuit.

The diagonal cost layer is not applied term by term: all monomials
supported inside one cubic triple (i, w, k) are collected into a single
three-qubit diagonal unitary, and whatever is left over forms one- or
two-qubit diagonal factors.  Each factor, being diagonal, splits by
successive SVD into an exact MPO whose internal bonds never exceed 2;
sites strictly between the factor's qubits get identity carrier
tensors.  Factors whose site intervals are disjoint form a layer, the
MPS is compressed after each layer, and every truncation is logged as
a (layer, bond, discarded weight) record.  The mixer is a product of
single-site rotations and needs no compression.

Chain order: qubits are laid out along the chain by reverse
Cuthill-McKee on the interaction graph, which keeps every factor's
site interval short on heavy-hex lattices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import ConfigError
from .hexising import HeavyHexGraph, IsingInstance
from .statevec import SampleSet

DEFAULT_CUTOFF = 1e-12


@dataclass(frozen=True)
class TruncationRecord:
    """One truncated bond: which compression event, where, how much."""

    layer: int
    bond: int
    discarded_weight: float


class MpsState:
    """Open-boundary MPS with site tensors of shape (Dl, 2, Dr).

    center is the orthogonality center index when known (tensors left
    of it left-canonical, right of it right-canonical), or None after
    operator applications.  qubit_of_site maps chain position to the
    graph vertex living there.
    """

    def __init__(self, tensors, chi_max: int, cutoff: float = DEFAULT_CUTOFF,
                 center: int | None = None, qubit_of_site=None):
        if chi_max < 1:
            raise ConfigError("chi_max must be positive")
        if not 0.0 <= cutoff < 1.0:
            raise ConfigError("cutoff must be in [0, 1)")
        self.tensors = list(tensors)
        self.chi_max = int(chi_max)
        self.cutoff = float(cutoff)
        self.center = center
        self.qubit_of_site = None if qubit_of_site is None else tuple(qubit_of_site)
        self.ledger: list[TruncationRecord] = []

    @classmethod
    def plus_state(cls, n: int, chi_max: int, cutoff: float = DEFAULT_CUTOFF,
                   qubit_of_site=None) -> "MpsState":
        amp = np.full((1, 2, 1), 1.0 / np.sqrt(2.0), dtype=np.complex128)
        return cls([amp.copy() for _ in range(n)], chi_max, cutoff,
                   center=0, qubit_of_site=qubit_of_site)

    @property
    def n(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def norm(self) -> float:
        env = np.ones((1, 1), dtype=np.complex128)
        for a in self.tensors:
            env = np.einsum("lm,lsr,mst->rt", env, np.conj(a), a, optimize=True)
        return float(np.sqrt(np.real(env[0, 0])))


def site_order(graph: HeavyHexGraph) -> np.ndarray:
    """Chain layout of graph vertices: order[s] is the vertex at site s."""
    rows = [u for u, v in graph.edges] + [v for u, v in graph.edges]
    cols = [v for u, v in graph.edges] + [u for u, v in graph.edges]
    adj = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(graph.n, graph.n)
    )
    return np.asarray(reverse_cuthill_mckee(adj, symmetric_mode=True), dtype=np.int64)


@dataclass(frozen=True)
class DiagonalFactor:
    """A diagonal unitary factor on up to three chain sites.

    sites are chain positions in increasing order; each monomial is a
    (support, coefficient) pair with support a subset of sites.
    """

    sites: tuple[int, ...]
    monomials: tuple[tuple[tuple[int, ...], int], ...]

    def __post_init__(self):
        if not 1 <= len(self.sites) <= 3:
            raise ValueError("factors act on one to three sites")
        if list(self.sites) != sorted(set(self.sites)):
            raise ValueError("factor sites must be strictly increasing")
        for support, _ in self.monomials:
            if not set(support) <= set(self.sites):
                raise ValueError("monomial support must lie inside factor sites")

    @property
    def start(self) -> int:
        return self.sites[0]

    @property
    def end(self) -> int:
        return self.sites[-1]


def collect_terms(instance: IsingInstance, order: np.ndarray | None = None) -> list[DiagonalFactor]:
    """Group every Z-monomial of the cost into diagonal factors.

    Each monomial lands in exactly one factor.  Monomials supported
    inside a cubic triple go to the lexicographically first such triple;
    leftover quadratics form two-site factors, and leftover linears join
    the lexicographically first leftover pair covering them or stand
    alone.  Factor sites are chain positions under ``order``.
    """
    graph = instance.graph
    if order is None:
        order = site_order(graph)
    pos = np.empty(graph.n, dtype=np.int64)
    pos[np.asarray(order)] = np.arange(graph.n)

    groups = sorted(graph.cubic)
    group_monomials: dict[tuple[int, ...], list[tuple[tuple[int, ...], int]]] = {
        g: [] for g in groups
    }
    leftover: list[tuple[tuple[int, ...], int]] = []
    for qs, d in instance.terms():
        qset = set(qs)
        home = next((g for g in groups if qset <= set(g)), None)
        if home is not None:
            group_monomials[home].append((qs, d))
        else:
            leftover.append((qs, d))

    pair_factors: dict[tuple[int, ...], list[tuple[tuple[int, ...], int]]] = {}
    for qs, d in leftover:
        if len(qs) == 2:
            pair_factors.setdefault(qs, []).append((qs, d))
    single_leftovers = []
    for qs, d in leftover:
        if len(qs) == 1:
            pair = next((pq for pq in sorted(pair_factors) if qs[0] in pq), None)
            if pair is not None:
                pair_factors[pair].append((qs, d))
            else:
                single_leftovers.append((qs, d))

    def _to_chain(vertices: tuple[int, ...], monos) -> DiagonalFactor:
        sites = tuple(sorted(int(pos[v]) for v in vertices))
        chain_monos = tuple(
            (tuple(sorted(int(pos[v]) for v in support)), int(d)) for support, d in monos
        )
        return DiagonalFactor(sites=sites, monomials=chain_monos)

    factors = [_to_chain(g, group_monomials[g]) for g in groups]
    factors += [_to_chain(pq, monos) for pq, monos in sorted(pair_factors.items())]
    factors += [_to_chain(qs, [(qs, d)]) for qs, d in single_leftovers]

    assigned = sum(len(f.monomials) for f in factors)
    if assigned != instance.n_terms:
        raise AssertionError("term collection lost or duplicated monomials")
    return sorted(factors, key=lambda f: (f.start, f.end, f.sites))


@dataclass(frozen=True)
class ThreeQubitMpo:
    """Exact MPO of one diagonal factor over a contiguous site interval.

    cores[i] acts on site start+i with shape (Dl, 2, Dr); internal
    bonds never exceed 2.  Sites that are not factor qubits hold
    identity carriers.  Being diagonal, a core multiplies the physical
    index of the underlying MPS tensor instead of contracting it.
    """

    start: int
    cores: tuple[np.ndarray, ...]

    def full_diagonal(self) -> np.ndarray:
        """Contract the cores into the diagonal over the whole interval."""
        result = self.cores[0][0]  # (2, Dr)
        for core in self.cores[1:]:
            result = np.einsum("...d,dse->...se", result, core)
        return result[..., 0]


def _spin(bit: int) -> int:
    return 2 * bit - 1


def _factor_diagonal(factor: DiagonalFactor, gamma: float) -> np.ndarray:
    """Dense diagonal exp(-i gamma * partial cost) over the factor qubits."""
    q = len(factor.sites)
    phase = np.zeros((2,) * q, dtype=np.float64)
    local = {s: i for i, s in enumerate(factor.sites)}
    for support, d in factor.monomials:
        for bits in np.ndindex(*(2,) * q):
            prod = 1
            for s in support:
                prod *= _spin(bits[local[s]])
            phase[bits] += d * prod
    return np.exp(-1j * gamma * phase)


def three_qubit_mpo(factor: DiagonalFactor, gamma: float) -> ThreeQubitMpo:
    """Split a diagonal factor into an exact bond<=2 MPO.

    Successive SVDs of the reshaped diagonal keep every internal bond
    at most 2 because the matricizations have at most two rows (or
    columns).  Carrier identities fill the interval between factor
    qubits.
    """
    diag = _factor_diagonal(factor, gamma)
    q = len(factor.sites)
    cores_at_qubits: list[np.ndarray] = []
    rest = diag.reshape(1, -1)  # (bond * remaining phys)
    left_bond = 1
    for i in range(q - 1):
        mat = rest.reshape(left_bond * 2, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = int(np.sum(s > s[0] * 1e-14)) if s.size else 1
        keep = max(keep, 1)
        cores_at_qubits.append(u[:, :keep].reshape(left_bond, 2, keep))
        rest = (s[:keep, None] * vh[:keep]).reshape(keep, -1)
        left_bond = keep
    cores_at_qubits.append(rest.reshape(left_bond, 2, 1))

    cores: list[np.ndarray] = []
    for i, s in enumerate(range(factor.start, factor.end + 1)):
        if s in factor.sites:
            cores.append(cores_at_qubits[factor.sites.index(s)])
        else:
            d = cores[-1].shape[2]
            carrier = np.zeros((d, 2, d), dtype=np.complex128)
            carrier[:, 0, :] = np.eye(d)
            carrier[:, 1, :] = np.eye(d)
            cores.append(carrier)
    return ThreeQubitMpo(start=factor.start, cores=tuple(cores))


def layer_partition(factors: list[DiagonalFactor]) -> list[list[int]]:
    """Greedy partition into layers of strictly disjoint site intervals.

    Returns lists of indices into ``factors``; within a layer every
    pair of factors satisfies one interval ending before the other
    starts, so their MPOs commute structurally and apply in one pass.
    """
    order = sorted(range(len(factors)), key=lambda i: (factors[i].start, factors[i].end))
    layers: list[list[int]] = []
    ends: list[int] = []
    for idx in order:
        f = factors[idx]
        placed = False
        for li, end in enumerate(ends):
            if end < f.start:
                layers[li].append(idx)
                ends[li] = f.end
                placed = True
                break
        if not placed:
            layers.append([idx])
            ends.append(f.end)
    return layers


def _apply_mpo(mps: MpsState, mpo: ThreeQubitMpo) -> None:
    for offset, core in enumerate(mpo.cores):
        s = mpo.start + offset
        a = mps.tensors[s]
        grown = np.einsum("dse,lsr->dlser", core, a, optimize=True)
        dl, al, _, dr, ar = grown.shape
        mps.tensors[s] = np.ascontiguousarray(grown.reshape(dl * al, 2, dr * ar))
    mps.center = None


def _compress(mps: MpsState, layer_id: int) -> None:
    """Left-canonicalize, then truncate right-to-left; center ends at 0.

    Truncation keeps at most chi_max singular values per bond and drops
    the smallest tail whose relative squared weight stays at or below
    cutoff; each bond's discarded weight is appended to the ledger.
    The state is renormalized afterwards.
    """
    n = mps.n
    for i in range(n - 1):
        a = mps.tensors[i]
        dl, _, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl * 2, dr))
        k = q.shape[1]
        mps.tensors[i] = np.ascontiguousarray(q.reshape(dl, 2, k))
        mps.tensors[i + 1] = np.einsum("kr,rst->kst", r, mps.tensors[i + 1], optimize=True)
    for i in range(n - 1, 0, -1):
        a = mps.tensors[i]
        dl, _, dr = a.shape
        u, s, vh = np.linalg.svd(a.reshape(dl, 2 * dr), full_matrices=False)
        total = float(np.sum(s**2))
        if total == 0.0:
            raise FloatingPointError("MPS norm collapsed to zero during compression")
        keep = len(s)
        # largest tail with relative weight within cutoff
        tail = 0.0
        while keep > 1:
            cand = tail + float(s[keep - 1] ** 2)
            if cand / total > mps.cutoff:
                break
            tail = cand
            keep -= 1
        keep = min(keep, mps.chi_max)
        discarded = float(np.sum(s[keep:] ** 2)) / total
        mps.ledger.append(TruncationRecord(layer=layer_id, bond=i, discarded_weight=discarded))
        mps.tensors[i] = np.ascontiguousarray(vh[:keep].reshape(keep, 2, dr))
        carry = u[:, :keep] * s[:keep]
        mps.tensors[i - 1] = np.einsum("lsr,rk->lsk", mps.tensors[i - 1], carry, optimize=True)
    head = mps.tensors[0]
    nrm = float(np.linalg.norm(head))
    if nrm == 0.0:
        raise FloatingPointError("MPS norm collapsed to zero during compression")
    mps.tensors[0] = head / nrm
    mps.center = 0


def _apply_mixer(mps: MpsState, beta: float) -> None:
    rot = np.array(
        [[np.cos(beta), -1j * np.sin(beta)], [-1j * np.sin(beta), np.cos(beta)]],
        dtype=np.complex128,
    )
    for i, a in enumerate(mps.tensors):
        mps.tensors[i] = np.einsum("st,ltr->lsr", rot, a, optimize=True)
    # single-site unitaries preserve every canonical property


def canonicalize_right(mps: MpsState) -> None:
    """QR sweep making sites 1..n-1 right-canonical; center moves to 0."""
    if mps.center == 0:
        return
    for i in range(mps.n - 1, 0, -1):
        a = mps.tensors[i]
        dl, _, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl, 2 * dr).conj().T)
        k = q.shape[1]
        mps.tensors[i] = np.ascontiguousarray(q.conj().T.reshape(k, 2, dr))
        mps.tensors[i - 1] = np.einsum("lsr,kr->lsk", mps.tensors[i - 1], r.conj().T, optimize=True)
    mps.center = 0


def evolve_mps(
    instance: IsingInstance,
    schedule_or_betas,
    gammas=None,
    chi_max: int = 64,
    cutoff: float = DEFAULT_CUTOFF,
) -> tuple[MpsState, list[TruncationRecord]]:
    """Run the full alternating evolution from the plus state.

    Each cost round applies the diagonal factors layer by layer with a
    compression (and ledger entry per bond) after every layer; mixer
    rounds are single-site and uncompressed.  Returns the final state
    and its truncation ledger; compression events are numbered from 1
    in application order across the whole circuit.
    """
    if gammas is None:
        betas = np.asarray(schedule_or_betas.betas, dtype=np.float64)
        gammas = np.asarray(schedule_or_betas.gammas, dtype=np.float64)
    else:
        betas = np.asarray(schedule_or_betas, dtype=np.float64)
        gammas = np.asarray(gammas, dtype=np.float64)
    if betas.shape != gammas.shape or betas.ndim != 1:
        raise ValueError("betas and gammas must be equal-length 1-D sequences")

    order = site_order(instance.graph)
    factors = collect_terms(instance, order)
    layers = layer_partition(factors)
    mps = MpsState.plus_state(instance.n, chi_max, cutoff, qubit_of_site=order)
    layer_id = 0
    for beta, gamma in zip(betas, gammas):
        for layer in layers:
            layer_id += 1
            for idx in layer:
                _apply_mpo(mps, three_qubit_mpo(factors[idx], gamma))
            _compress(mps, layer_id)
        _apply_mixer(mps, beta)
    return mps, mps.ledger


def _transfer(env: np.ndarray, a: np.ndarray, z_weight: bool) -> np.ndarray:
    if z_weight:
        spin = np.array([-1.0, 1.0])
        weighted = a * spin[None, :, None]
    else:
        weighted = a
    tmp = np.einsum("lm,lsr->msr", env, np.conj(a), optimize=True)
    return np.einsum("msr,mst->rt", tmp, weighted, optimize=True)


def mps_expectation(mps: MpsState, instance: IsingInstance) -> float:
    """Exact cost expectation of the (normalized) MPS.

    Works in mixed canonical form with the center at site 0: one sweep
    accumulates identity environments from the left, and each monomial
    is closed against the right-canonical remainder by a trace.
    """
    if mps.qubit_of_site is None:
        raise ValueError("MPS does not record its qubit ordering")
    if len(mps.qubit_of_site) != instance.n:
        raise ValueError("MPS and instance sizes differ")
    pos = {q: s for s, q in enumerate(mps.qubit_of_site)}
    canonicalize_right(mps)
    n = mps.n
    left = [np.ones((1, 1), dtype=np.complex128)]
    for s in range(n):
        left.append(_transfer(left[s], mps.tensors[s], z_weight=False))

    total = 0.0
    for qs, d in instance.terms():
        sites = sorted(pos[q] for q in qs)
        a, b = sites[0], sites[-1]
        env = left[a]
        occupied = set(sites)
        for s in range(a, b + 1):
            env = _transfer(env, mps.tensors[s], z_weight=(s in occupied))
        total += d * float(np.real(np.trace(env)))
    return total


def delta_e(e_ref: float, e_mps: float) -> float:
    """Relative deviation |(e_ref - e_mps) / e_ref| of two energies."""
    if e_ref == 0.0:
        raise ValueError("reference energy is zero, relative deviation undefined")
    return abs((e_ref - e_mps) / e_ref)


def sample_mps(mps: MpsState, shots: int, seed: int) -> SampleSet:
    """Draw i.i.d. basis-state samples by sweeping the chain once.

    With the center at site 0 the conditional outcome distribution at
    each site comes from the running left vectors; all shots advance
    together as rows of a matrix.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    if mps.qubit_of_site is None:
        raise ValueError("MPS does not record its qubit ordering")
    canonicalize_right(mps)
    rng = np.random.default_rng(seed)
    front = np.ones((shots, 1), dtype=np.complex128)
    indices = np.zeros(shots, dtype=object)
    for s in range(mps.n):
        a = mps.tensors[s]
        branch0 = front @ a[:, 0, :]
        branch1 = front @ a[:, 1, :]
        w0 = np.einsum("ij,ij->i", branch0.real, branch0.real) + np.einsum(
            "ij,ij->i", branch0.imag, branch0.imag
        )
        w1 = np.einsum("ij,ij->i", branch1.real, branch1.real) + np.einsum(
            "ij,ij->i", branch1.imag, branch1.imag
        )
        p1 = w1 / (w0 + w1)
        bits = rng.random(shots) < p1
        chosen = np.where(bits[:, None], branch1, branch0)
        weights = np.where(bits, w1, w0)
        front = chosen / np.sqrt(weights)[:, None]
        qubit = mps.qubit_of_site[s]
        for i in range(shots):
            if bits[i]:
                indices[i] = int(indices[i]) | (1 << qubit)
    counts: dict[int, int] = {}
    for i in range(shots):
        key = int(indices[i])
        counts[key] = counts.get(key, 0) + 1
    return SampleSet(n=mps.n, shots=shots, counts=counts)
