"""Exact statevector simulation of alternating-operator circuits.

States are dense complex vectors over the 2**n computational basis,
indexed so that bit j of the basis index carries qubit j (bit 1 means
spin +1).  The circuit alternates the diagonal cost phase
exp(-i gamma C) with the transverse mixer exp(-i beta sum_j X_j);
the initial state is the uniform superposition.

All mutating kernels update the state buffer in place through reshaped
views and return it, so a full evolution allocates O(2**n) once.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import hexising
from .errors import CapacityError

DEFAULT_SIM_CAP = 28

# The butterfly kernels are memory bound in pure numpy, so the hot
# paths are jitted when numba is importable; HEXQAOA_NO_NUMBA=1 forces
# the plain numpy implementations, which stay as the reference path.
if os.environ.get("HEXQAOA_NO_NUMBA"):
    _NUMBA = None
else:
    try:
        import numba as _NUMBA
    except ImportError:  # pragma: no cover
        _NUMBA = None

if _NUMBA is not None:

    @_NUMBA.njit(cache=True)
    def _nb_mixer(state, n, c, s):  # pragma: no cover - exercised via apply_mixer
        for j in range(n):
            half = 1 << j
            step = half << 1
            for base in range(0, len(state), step):
                for k in range(base, base + half):
                    a = state[k]
                    b = state[k + half]
                    state[k] = c * a + s * b
                    state[k + half] = s * a + c * b

    @_NUMBA.njit(cache=True)
    def _nb_xsum_vdot(lam, phi, n):  # pragma: no cover - exercised via gradient
        acc = 0.0j
        for j in range(n):
            half = 1 << j
            step = half << 1
            for base in range(0, len(phi), step):
                for k in range(base, base + half):
                    acc += np.conj(lam[k]) * phi[k + half]
                    acc += np.conj(lam[k + half]) * phi[k]
        return acc


@dataclass
class CostVector:
    """Dense table of cost values over all basis states of n qubits.

    ``values`` holds integer energies; ``lo`` and ``offsets`` cache the
    shift values - lo so diagonal phases can be looked up from a small
    table of distinct integer costs instead of exponentiating 2**n
    entries.
    """

    n: int
    values: np.ndarray
    lo: int
    offsets: np.ndarray

    def phase_table(self, gamma: float) -> np.ndarray:
        span = int(self.values.max()) - self.lo + 1
        return np.exp(-1j * gamma * (self.lo + np.arange(span)))


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CapacityError(f"statevector simulation capped at {cap} qubits, got {n}")


def cost_vector(instance: hexising.IsingInstance, cap: int = DEFAULT_SIM_CAP) -> CostVector:
    """Tabulate C(z) for every basis state of the instance."""
    n = instance.n
    _check_cap(n, cap)
    values = np.zeros(1 << n, dtype=np.int32)
    for qs, d in instance.terms():
        hexising.add_spin_monomial(values, qs, d)
    lo = int(values.min())
    offsets = (values - lo).astype(np.uint32)
    return CostVector(n=n, values=values, lo=lo, offsets=offsets)


def initial_state(n: int, cap: int = DEFAULT_SIM_CAP) -> np.ndarray:
    """Uniform superposition over all 2**n basis states."""
    _check_cap(n, cap)
    state = np.full(1 << n, 1.0 / np.sqrt(1 << n), dtype=np.complex128)
    return state


def apply_phase(state: np.ndarray, cost: CostVector, gamma: float) -> np.ndarray:
    """Multiply in the diagonal phase exp(-i gamma C), in place."""
    state *= cost.phase_table(gamma)[cost.offsets]
    return state


def apply_mixer(state: np.ndarray, beta: float) -> np.ndarray:
    """Apply exp(-i beta X) to every qubit, in place.

    Per qubit this is the butterfly [[cos b, -i sin b], [-i sin b, cos b]]
    acting on the paired halves of the state.
    """
    n = int(np.log2(len(state)))
    c = complex(np.cos(beta))
    s = -1j * complex(np.sin(beta))
    if _NUMBA is not None and state.flags.c_contiguous:
        _nb_mixer(state, n, c, s)
        return state
    for j in range(n):
        view = state.reshape(-1, 2, 1 << j)
        top = view[:, 0, :].copy()
        view[:, 0, :] *= c
        view[:, 0, :] += s * view[:, 1, :]
        view[:, 1, :] *= c
        view[:, 1, :] += s * top
    return state


def _apply_x_sum(state: np.ndarray) -> np.ndarray:
    """Return (sum_j X_j) applied to the state, without modifying it."""
    n = int(np.log2(len(state)))
    out = np.zeros_like(state)
    for j in range(n):
        sv = state.reshape(-1, 2, 1 << j)
        ov = out.reshape(-1, 2, 1 << j)
        ov[:, 0, :] += sv[:, 1, :]
        ov[:, 1, :] += sv[:, 0, :]
    return out


def _angles(schedule_or_betas, gammas):
    if gammas is None:
        betas = np.asarray(schedule_or_betas.betas, dtype=np.float64)
        gammas = np.asarray(schedule_or_betas.gammas, dtype=np.float64)
    else:
        betas = np.asarray(schedule_or_betas, dtype=np.float64)
        gammas = np.asarray(gammas, dtype=np.float64)
    if betas.shape != gammas.shape or betas.ndim != 1:
        raise ValueError("betas and gammas must be equal-length 1-D sequences")
    return betas, gammas


def _as_cost(target, cap: int) -> CostVector:
    if isinstance(target, CostVector):
        return target
    return cost_vector(target, cap=cap)


def qaoa_state(target, schedule_or_betas, gammas=None, cap: int = DEFAULT_SIM_CAP) -> np.ndarray:
    """Evolve the uniform state through p phase/mixer rounds.

    Args:
        target: IsingInstance or a precomputed CostVector.
        schedule_or_betas: an angle schedule object, or the beta array
            when ``gammas`` is passed separately.
    """
    cost = _as_cost(target, cap)
    betas, gammas = _angles(schedule_or_betas, gammas)
    state = initial_state(cost.n, cap=cap)
    for beta, gamma in zip(betas, gammas):
        apply_phase(state, cost, gamma)
        apply_mixer(state, beta)
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-10:
        raise FloatingPointError(f"statevector norm drifted to {norm}")
    return state


def expectation(state: np.ndarray, cost: CostVector) -> float:
    """Energy expectation <state| diag(C) |state>."""
    if len(state) != len(cost.values):
        raise ValueError("state and cost vector dimensions differ")
    probs = state.real**2 + state.imag**2
    return float(probs @ cost.values)


def gradient(
    target,
    schedule_or_betas,
    gammas=None,
    cap: int = DEFAULT_SIM_CAP,
    return_value: bool = False,
):
    """Exact gradient of the expectation in all 2p angles.

    Returns the length-2p array [d/dbeta_1..p, d/dgamma_1..p], computed
    by one forward evolution plus one adjoint sweep that rewinds the
    circuit layer by layer on two buffers, so the cost is a constant
    factor over a single evolution regardless of p.  With
    ``return_value`` the expectation at the evaluation point is returned
    alongside, reusing the forward pass.
    """
    cost = _as_cost(target, cap)
    betas, gammas = _angles(schedule_or_betas, gammas)
    p = len(betas)
    values = cost.values.astype(np.float64)
    phi = initial_state(cost.n, cap=cap)
    for beta, gamma in zip(betas, gammas):
        apply_phase(phi, cost, gamma)
        apply_mixer(phi, beta)
    value = expectation(phi, cost)
    lam = values * phi
    g_beta = np.zeros(p)
    g_gamma = np.zeros(p)
    for layer in range(p - 1, -1, -1):
        if _NUMBA is not None and phi.flags.c_contiguous and lam.flags.c_contiguous:
            overlap = _nb_xsum_vdot(lam, phi, cost.n)
        else:
            overlap = np.vdot(lam, _apply_x_sum(phi))
        g_beta[layer] = 2.0 * np.imag(overlap)
        apply_mixer(phi, -betas[layer])
        apply_mixer(lam, -betas[layer])
        g_gamma[layer] = 2.0 * np.imag(np.vdot(lam, values * phi))
        apply_phase(phi, cost, -gammas[layer])
        apply_phase(lam, cost, -gammas[layer])
    grad = np.concatenate([g_beta, g_gamma])
    if return_value:
        return value, grad
    return grad


@dataclass(frozen=True)
class SampleSet:
    """Measurement outcomes as counts over basis indices."""

    n: int
    shots: int
    counts: dict

    def __post_init__(self):
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to shots")

    def energy_histogram(self, instance: hexising.IsingInstance) -> dict:
        """Aggregate counts by cost value, as an int-to-int mapping."""
        hist: dict[int, int] = {}
        idx = np.fromiter(self.counts.keys(), dtype=np.int64, count=len(self.counts))
        spins = hexising.index_to_spins(idx, self.n)
        energies = np.asarray(hexising.energy(instance, spins)).reshape(-1)
        for e, c in zip(energies, self.counts.values()):
            key = int(round(float(e)))
            hist[key] = hist.get(key, 0) + c
        return dict(sorted(hist.items()))

    def frequency_of_energy(self, instance: hexising.IsingInstance, value: int) -> float:
        return self.energy_histogram(instance).get(int(value), 0) / self.shots


def sample(state: np.ndarray, shots: int, seed: int) -> SampleSet:
    """Draw i.i.d. basis-state measurements from |state|^2."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    n = int(np.log2(len(state)))
    probs = state.real**2 + state.imag**2
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    draws = np.searchsorted(cdf, rng.random(shots), side="right")
    idx, cnt = np.unique(draws, return_counts=True)
    counts = {int(i): int(c) for i, c in zip(idx, cnt)}
    return SampleSet(n=n, shots=shots, counts=counts)
