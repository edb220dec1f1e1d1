"""Tests for the matrix-product-state simulator."""

import numpy as np
import pytest

from hexqaoa import hexising, mpssim, statevec
from hexqaoa.errors import ConfigError

from helpers import mps_to_dense, path_graph, star3_graph


def _chain_positions(graph):
    order = mpssim.site_order(graph)
    pos = np.empty(graph.n, dtype=np.int64)
    pos[order] = np.arange(graph.n)
    return order, pos


# ---------------------------------------------------------------------------
# site ordering


def test_site_order_is_permutation():
    graph = hexising.build_heavy_hex("guadalupe16")
    order, _ = _chain_positions(graph)
    assert sorted(order.tolist()) == list(range(graph.n))


def test_site_order_path_has_unit_bandwidth():
    graph = path_graph(9)
    _, pos = _chain_positions(graph)
    assert all(abs(pos[u] - pos[v]) == 1 for u, v in graph.edges)


def test_site_order_device_bandwidth():
    graph = hexising.build_heavy_hex("guadalupe16")
    _, pos = _chain_positions(graph)
    assert max(abs(pos[u] - pos[v]) for u, v in graph.edges) == 4


# ---------------------------------------------------------------------------
# grouping cost monomials into local factors


def test_collect_terms_path3_single_factor():
    graph = path_graph(3)
    instance = hexising.generate_instance(graph, seed=5)
    factors = mpssim.collect_terms(instance)
    assert len(factors) == 1
    assert factors[0].sites == (0, 1, 2)
    assert len(factors[0].monomials) == 6  # 3 linear + 2 quadratic + 1 cubic


def test_collect_terms_reconstructs_term_multiset():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    order = mpssim.site_order(graph)
    factors = mpssim.collect_terms(instance, order)

    rebuilt = []
    for factor in factors:
        for support, d in factor.monomials:
            qubits = tuple(sorted(int(order[s]) for s in support))
            rebuilt.append((qubits, int(d)))
    expected = [(tuple(sorted(qs)), int(d)) for qs, d in instance.terms()]
    assert sorted(rebuilt) == sorted(expected)


def test_collect_terms_every_factor_at_most_three_sites():
    graph = star3_graph()
    instance = hexising.generate_instance(graph, seed=2)
    for factor in mpssim.collect_terms(instance):
        assert 1 <= len(factor.sites) <= 3
        assert list(factor.sites) == sorted(set(factor.sites))


def test_diagonal_factor_validation():
    with pytest.raises(ValueError):
        mpssim.DiagonalFactor(sites=(), monomials=())
    with pytest.raises(ValueError):
        mpssim.DiagonalFactor(sites=(2, 1), monomials=())
    with pytest.raises(ValueError):
        mpssim.DiagonalFactor(sites=(0, 1), monomials=(((3,), 1),))


# ---------------------------------------------------------------------------
# exact small MPOs


def _naive_diagonal(factor, gamma):
    """Independent reconstruction of exp(-i*gamma*partial cost)."""
    span = range(factor.start, factor.end + 1)
    width = len(list(span))
    local = {s: i for i, s in enumerate(span)}
    phase = np.zeros((2,) * width, dtype=np.float64)
    for bits in np.ndindex(*(2,) * width):
        for support, d in factor.monomials:
            prod = d
            for s in support:
                prod *= 2 * bits[local[s]] - 1
            phase[bits] += prod
    return np.exp(-1j * gamma * phase)


def test_three_qubit_mpo_reconstruction(rng):
    signs = [-1, 1]
    for _ in range(100):
        gamma = rng.uniform(-np.pi, np.pi)
        monomials = tuple(
            (support, int(rng.choice(signs)))
            for support in [(0,), (1,), (2,), (0, 1), (1, 2), (0, 1, 2)]
        )
        factor = mpssim.DiagonalFactor(sites=(0, 1, 2), monomials=monomials)
        mpo = mpssim.three_qubit_mpo(factor, gamma)
        assert len(mpo.cores) == 3
        assert all(core.shape[0] <= 2 and core.shape[2] <= 2 for core in mpo.cores)
        diff = np.max(np.abs(mpo.full_diagonal() - _naive_diagonal(factor, gamma)))
        assert diff < 1e-12


def test_mpo_carrier_site_fills_gap():
    factor = mpssim.DiagonalFactor(
        sites=(0, 2), monomials=(((0, 2), 1), ((0,), -1), ((2,), 1))
    )
    mpo = mpssim.three_qubit_mpo(factor, gamma=0.71)
    assert len(mpo.cores) == 3  # interval [0, 2] includes the untouched site 1
    diff = np.max(np.abs(mpo.full_diagonal() - _naive_diagonal(factor, 0.71)))
    assert diff < 1e-12


# ---------------------------------------------------------------------------
# layering


def _assert_layers_disjoint(factors, layers):
    seen = sorted(i for layer in layers for i in layer)
    assert seen == list(range(len(factors)))
    for layer in layers:
        intervals = sorted((factors[i].start, factors[i].end) for i in layer)
        for (_, prev_end), (next_start, _) in zip(intervals, intervals[1:]):
            assert prev_end < next_start


def test_layer_partition_strictly_disjoint_intervals():
    for graph, seed in [(path_graph(5), 5), (hexising.build_heavy_hex("guadalupe16"), 7)]:
        instance = hexising.generate_instance(graph, seed=seed)
        factors = mpssim.collect_terms(instance)
        _assert_layers_disjoint(factors, mpssim.layer_partition(factors))


def test_layer_partition_splits_overlapping_factors():
    graph = path_graph(5)
    instance = hexising.generate_instance(graph, seed=5)
    factors = mpssim.collect_terms(instance)
    # the two cubic intervals share their middle chain site
    assert len(factors) == 2
    assert factors[0].end >= factors[1].start or factors[1].end >= factors[0].start
    assert len(mpssim.layer_partition(factors)) == 2


# ---------------------------------------------------------------------------
# state container


def test_mps_state_validation():
    with pytest.raises(ConfigError):
        mpssim.MpsState.plus_state(4, chi_max=0)
    with pytest.raises(ConfigError):
        mpssim.MpsState.plus_state(4, chi_max=8, cutoff=1.0)


def test_plus_state_shape_and_norm():
    mps = mpssim.MpsState.plus_state(6, chi_max=8)
    assert mps.n == 6
    assert mps.bond_dims() == [1] * 5
    assert abs(mps.norm() - 1.0) < 1e-14


# ---------------------------------------------------------------------------
# full evolution vs dense statevector


def test_evolve_input_validation():
    graph = path_graph(4)
    instance = hexising.generate_instance(graph, seed=1)
    with pytest.raises(ValueError):
        mpssim.evolve_mps(instance, np.array([0.1, 0.2]), np.array([0.3]))


def test_evolve_matches_statevector_exact_regime():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    betas = np.array([0.3, -0.2, 0.5])
    gammas = np.array([0.4, 0.8, -0.3])

    mps, _ = mpssim.evolve_mps(instance, betas, gammas, chi_max=256, cutoff=0.0)
    dense = mps_to_dense(mps)
    psi = statevec.qaoa_state(instance, betas, gammas)

    overlap = np.vdot(dense, psi)
    assert abs(abs(overlap) - 1.0) < 1e-12
    aligned = dense * (overlap / abs(overlap))
    assert np.max(np.abs(aligned - psi)) < 1e-12

    e_sv = statevec.expectation(psi, statevec.cost_vector(instance))
    e_mps = mpssim.mps_expectation(mps, instance)
    assert abs(e_sv - e_mps) < 1e-10


def test_shallow_evolution_discards_nothing():
    graph = hexising.build_heavy_hex("parametric", rows=1, cols=1)
    instance = hexising.generate_instance(graph, seed=3)
    betas = np.array([0.31, -0.44])
    gammas = np.array([0.57, 0.23])

    mps, ledger = mpssim.evolve_mps(instance, betas, gammas, chi_max=512, cutoff=0.0)
    assert sum(record.discarded_weight for record in ledger) == 0.0

    psi = statevec.qaoa_state(instance, betas, gammas)
    e_sv = statevec.expectation(psi, statevec.cost_vector(instance))
    assert abs(e_sv - mpssim.mps_expectation(mps, instance)) < 1e-10


def test_schedule_object_accepted():
    from hexqaoa.angles import AngleSchedule

    graph = path_graph(6)
    instance = hexising.generate_instance(graph, seed=4)
    schedule = AngleSchedule(p=2, betas=(0.2, 0.4), gammas=(-0.5, 0.1))
    via_schedule, _ = mpssim.evolve_mps(instance, schedule, chi_max=64, cutoff=0.0)
    via_arrays, _ = mpssim.evolve_mps(
        instance, np.array(schedule.betas), np.array(schedule.gammas), chi_max=64, cutoff=0.0
    )
    assert np.max(np.abs(mps_to_dense(via_schedule) - mps_to_dense(via_arrays))) < 1e-14


# ---------------------------------------------------------------------------
# truncation bookkeeping


def test_bond_cap_is_enforced():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    betas = np.array([0.3, -0.2, 0.5])
    gammas = np.array([0.4, 0.8, -0.3])
    mps, _ = mpssim.evolve_mps(instance, betas, gammas, chi_max=2, cutoff=0.0)
    assert max(mps.bond_dims()) <= 2


def test_aggressive_cutoff_populates_ledger_and_renormalizes():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    betas = np.array([0.3, -0.2, 0.5])
    gammas = np.array([0.4, 0.8, -0.3])
    mps, ledger = mpssim.evolve_mps(instance, betas, gammas, chi_max=8, cutoff=0.5)

    assert ledger, "aggressive truncation must record discarded weight"
    assert any(record.discarded_weight > 0 for record in ledger)
    assert all(record.layer >= 1 for record in ledger)
    assert all(record.bond >= 0 for record in ledger)
    assert max(mps.bond_dims()) <= 8
    assert abs(mps.norm() - 1.0) < 1e-12


def test_delta_e():
    assert mpssim.delta_e(2.0, 1.5) == pytest.approx(0.25)
    assert mpssim.delta_e(-4.0, -5.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        mpssim.delta_e(0.0, 1.0)


# ---------------------------------------------------------------------------
# expectation plumbing


def test_mps_expectation_requires_qubit_order():
    mps = mpssim.MpsState.plus_state(4, chi_max=8)  # no qubit_of_site
    graph = path_graph(4)
    instance = hexising.generate_instance(graph, seed=1)
    with pytest.raises(ValueError):
        mpssim.mps_expectation(mps, instance)


def test_mps_expectation_size_mismatch():
    mps = mpssim.MpsState.plus_state(4, chi_max=8, qubit_of_site=(0, 1, 2, 3))
    graph = path_graph(5)
    instance = hexising.generate_instance(graph, seed=1)
    with pytest.raises(ValueError):
        mpssim.mps_expectation(mps, instance)


def test_plus_state_expectation_is_zero():
    graph = hexising.build_heavy_hex("guadalupe16")
    instance = hexising.generate_instance(graph, seed=7)
    order = mpssim.site_order(graph)
    mps = mpssim.MpsState.plus_state(graph.n, chi_max=8, qubit_of_site=order)
    assert abs(mpssim.mps_expectation(mps, instance)) < 1e-12


# ---------------------------------------------------------------------------
# sampling


def _evolved_pair(seed=4):
    graph = path_graph(7)
    instance = hexising.generate_instance(graph, seed=seed)
    betas = np.array([0.35, -0.15])
    gammas = np.array([0.6, 0.25])
    mps, _ = mpssim.evolve_mps(instance, betas, gammas, chi_max=64, cutoff=0.0)
    psi = statevec.qaoa_state(instance, betas, gammas)
    return mps, psi


def test_sample_mps_validation():
    mps, _ = _evolved_pair()
    with pytest.raises(ValueError):
        mpssim.sample_mps(mps, shots=0, seed=1)
    bare = mpssim.MpsState.plus_state(3, chi_max=4)
    with pytest.raises(ValueError):
        mpssim.sample_mps(bare, shots=10, seed=1)


def test_sample_mps_deterministic():
    mps, _ = _evolved_pair()
    a = mpssim.sample_mps(mps, shots=500, seed=11)
    b = mpssim.sample_mps(mps, shots=500, seed=11)
    c = mpssim.sample_mps(mps, shots=500, seed=12)
    assert a.counts == b.counts
    assert a.counts != c.counts
    assert sum(a.counts.values()) == 500


def test_sample_mps_matches_dense_distribution():
    mps, psi = _evolved_pair()
    shots = 20000
    samples = mpssim.sample_mps(mps, shots=shots, seed=99)

    probs = np.abs(psi) ** 2
    observed = np.zeros(probs.size)
    for index, count in samples.counts.items():
        observed[index] = count

    expected, obs = [], []
    lump_e = lump_o = 0.0
    for k in range(probs.size):
        e = probs[k] * shots
        if e >= 5.0:
            expected.append(e)
            obs.append(observed[k])
        else:
            lump_e += e
            lump_o += observed[k]
    if lump_e > 0:
        expected.append(lump_e)
        obs.append(lump_o)
    else:
        assert lump_o == 0
    expected = np.array(expected)
    obs = np.array(obs)
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    dof = len(expected) - 1
    # generous: reject only catastrophic mismatch (mean + 6 sigma)
    assert chi2 < dof + 6.0 * np.sqrt(2.0 * dof)
