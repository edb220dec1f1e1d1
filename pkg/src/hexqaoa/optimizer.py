"""Incremental-depth schedule training.

Depth p is trained from a warm start extrapolated from depth p-1, with
basin hopping layered over plain gradient descent; if the warm start
fails to improve on the previous depth the round is retried from fresh
uniform-random angles, up to a retry cap.  Accepted expectations are
strictly decreasing in p by construction, and training stops early once
the expectation is within a fixed gap of the exact ground energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import statevec
from ._jsonio import read_artifact, write_artifact
from .angles import AngleEnsemble, AngleSchedule, ScheduleSource, canonicalize
from .errors import ConfigError, FormatError
from .hexising import Extrema, IsingInstance, approximation_ratio

TRACE_FORMAT = "hexqaoa/train-trace"
TRACE_VERSION = 1

#: Training stops once the expectation is this close to the ground energy.
GROUND_GAP_DEFAULT = 0.01


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the incremental trainer.

    improvement_threshold is the minimum decrease in expectation that
    counts as progress when moving from depth p to p+1; hop_scale is
    the standard deviation of basin-hop perturbations in radians.
    """

    max_p: int
    improvement_threshold: float = 1e-6
    basin_hops_per_p: int = 1
    max_retries_per_p: int = 10
    gd_step: float = 0.2
    gd_tolerance: float = 1e-5
    gd_max_iters: int = 300
    hop_scale: float = 0.3
    seed: int = 0
    stop_energy_gap: float = GROUND_GAP_DEFAULT

    def __post_init__(self):
        if self.max_p < 1:
            raise ConfigError("max_p must be at least 1")
        if self.improvement_threshold < 0 or self.stop_energy_gap < 0:
            raise ConfigError("thresholds must be nonnegative")
        if self.basin_hops_per_p < 0 or self.max_retries_per_p < 0:
            raise ConfigError("counts must be nonnegative")
        if self.gd_step <= 0 or self.gd_tolerance <= 0 or self.gd_max_iters < 1:
            raise ConfigError("descent parameters must be positive")
        if self.hop_scale <= 0:
            raise ConfigError("hop_scale must be positive")


@dataclass(frozen=True)
class TracePoint:
    """One accepted depth: raw angles and their quality."""

    p: int
    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    expectation: float
    ar: float | None
    retries_used: int


@dataclass(frozen=True)
class TrainTrace:
    """Accepted points for p = 1..k plus the reason training ended.

    stopped_reason is one of ``max_p``, ``ground_gap``,
    ``no_improvement``.
    """

    source: ScheduleSource
    entries: tuple[TracePoint, ...]
    stopped_reason: str

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a trace needs at least the p=1 entry")
        for i, e in enumerate(self.entries):
            if e.p != i + 1:
                raise ValueError("trace depths must be contiguous from 1")
        exps = [e.expectation for e in self.entries]
        if any(b >= a for a, b in zip(exps, exps[1:])):
            raise ValueError("accepted expectations must strictly decrease with p")


class QaoaObjective:
    """Expectation and gradient as functions of packed angles.

    The argument vector is [betas..., gammas...] of length 2p.  The
    cost table is built once and shared across evaluations.
    """

    def __init__(self, cost: statevec.CostVector, p: int):
        self.cost = cost
        self.p = p

    def _split(self, x: np.ndarray):
        if len(x) != 2 * self.p:
            raise ValueError("angle vector length must be 2p")
        return x[: self.p], x[self.p :]

    def value(self, x: np.ndarray) -> float:
        betas, gammas = self._split(x)
        state = statevec.qaoa_state(self.cost, betas, gammas)
        return statevec.expectation(state, self.cost)

    def value_and_grad(self, x: np.ndarray):
        betas, gammas = self._split(x)
        return statevec.gradient(self.cost, betas, gammas, return_value=True)


def gradient_descent(objective, x0: np.ndarray, config: TrainConfig):
    """Armijo-backtracking descent to a stationary point.

    Returns (x, value).  Terminates on gradient norm below
    gd_tolerance, on iteration budget, or when backtracking cannot find
    a decreasing step.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = objective.value_and_grad(x)
    step = config.gd_step
    for _ in range(config.gd_max_iters):
        if np.max(np.abs(g)) < config.gd_tolerance:
            break
        gsq = float(g @ g)
        tau = step
        accepted = False
        for _ in range(40):
            xn = x - tau * g
            fn = objective.value(xn)
            if fn <= f - 1e-4 * tau * gsq:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            break
        x = xn
        f, g = objective.value_and_grad(x)
        step = min(config.gd_step * 4.0, tau * 2.0)
    return x, f


def basin_hop(objective, x: np.ndarray, value: float, config: TrainConfig, rng):
    """One hop: Gaussian perturbation, descent, accept on improvement."""
    trial = x + rng.normal(0.0, config.hop_scale, size=len(x))
    xt, ft = gradient_descent(objective, trial, config)
    if ft < value:
        return xt, ft, True
    return x, value, False


def _polish(objective, x0: np.ndarray, config: TrainConfig, rng):
    """Descent followed by the configured number of basin hops."""
    x, f = gradient_descent(objective, x0, config)
    for _ in range(config.basin_hops_per_p):
        x, f, _ = basin_hop(objective, x, f, config, rng)
    return x, f


def train_p1(target, config: TrainConfig):
    """Optimize depth 1 from a uniform-random start.

    Returns (schedule, expectation) with raw (uncanonicalized) angles.
    """
    cost = target if isinstance(target, statevec.CostVector) else statevec.cost_vector(target)
    rng = np.random.default_rng(config.seed)
    objective = QaoaObjective(cost, 1)
    x, f = _polish(objective, rng.uniform(0.0, 2.0 * np.pi, 2), config, rng)
    schedule = AngleSchedule(p=1, betas=(float(x[0]),), gammas=(float(x[1]),))
    return schedule, float(f)


def extend_schedule(schedule_or_betas, gammas=None):
    """Warm-start guess for depth p+1 from a depth-p schedule.

    At p=1 the single layer is duplicated; at larger depth the new
    layer linearly extrapolates the last two, so betas (0.6, 0.4)
    extend to (0.6, 0.4, 0.2).
    """
    if gammas is None:
        betas = np.asarray(schedule_or_betas.betas, dtype=np.float64)
        gammas = np.asarray(schedule_or_betas.gammas, dtype=np.float64)
    else:
        betas = np.asarray(schedule_or_betas, dtype=np.float64)
        gammas = np.asarray(gammas, dtype=np.float64)
    if len(betas) != len(gammas) or len(betas) < 1:
        raise ValueError("need equal-length nonempty angle arrays")

    def _extend(a):
        nxt = a[-1] if len(a) == 1 else 2.0 * a[-1] - a[-2]
        return np.append(a, nxt)

    return _extend(betas), _extend(gammas)


def train_incremental(
    instance: IsingInstance, config: TrainConfig, extrema: Extrema | None = None
) -> TrainTrace:
    """Train depths 1..max_p with warm starts and random-restart retries.

    Each new depth must beat the previous accepted expectation by
    improvement_threshold; otherwise fresh uniform-random starts are
    tried up to max_retries_per_p before training stops.  With exact
    extrema provided, training also stops once the expectation is
    within stop_energy_gap of the ground energy, and every accepted
    point carries its approximation ratio.
    """
    cost = statevec.cost_vector(instance)
    rng = np.random.default_rng(config.seed)
    source = ScheduleSource(instance_id=instance.label, n=instance.n, mode=instance.mode)

    def _ratio(value: float):
        return None if extrema is None else float(approximation_ratio(value, extrema))

    objective = QaoaObjective(cost, 1)
    x, f = _polish(objective, rng.uniform(0.0, 2.0 * np.pi, 2), config, rng)
    entries = [
        TracePoint(
            p=1,
            betas=(float(x[0]),),
            gammas=(float(x[1]),),
            expectation=float(f),
            ar=_ratio(f),
            retries_used=0,
        )
    ]
    reason = "max_p"
    for p in range(2, config.max_p + 1):
        if extrema is not None and f <= extrema.c_min + config.stop_energy_gap:
            reason = "ground_gap"
            break
        objective = QaoaObjective(cost, p)
        warm_b, warm_g = extend_schedule(x[: p - 1], x[p - 1 :])
        xc, fc = _polish(objective, np.concatenate([warm_b, warm_g]), config, rng)
        retries = 0
        while fc >= f - config.improvement_threshold and retries < config.max_retries_per_p:
            retries += 1
            xr, fr = _polish(objective, rng.uniform(0.0, 2.0 * np.pi, 2 * p), config, rng)
            if fr < fc:
                xc, fc = xr, fr
        if fc >= f - config.improvement_threshold:
            reason = "no_improvement"
            break
        x, f = xc, fc
        entries.append(
            TracePoint(
                p=p,
                betas=tuple(float(b) for b in x[:p]),
                gammas=tuple(float(g) for g in x[p:]),
                expectation=float(f),
                ar=_ratio(f),
                retries_used=retries,
            )
        )
    else:
        if extrema is not None and f <= extrema.c_min + config.stop_energy_gap:
            reason = "ground_gap"
    return TrainTrace(source=source, entries=tuple(entries), stopped_reason=reason)


def ensemble_from_trace(trace: TrainTrace) -> AngleEnsemble:
    """Export a trace as canonicalized ensemble schedules."""
    ensemble = AngleEnsemble()
    for e in trace.entries:
        raw = AngleSchedule(
            p=e.p,
            betas=e.betas,
            gammas=e.gammas,
            source=trace.source,
            trained_expectation=e.expectation,
            trained_ar=e.ar,
        )
        ensemble.add(canonicalize(raw))
    return ensemble


def trace_to_json(trace: TrainTrace, path: str) -> None:
    payload = {
        "source": {
            "instance_id": trace.source.instance_id,
            "n": trace.source.n,
            "mode": trace.source.mode,
        },
        "stopped_reason": trace.stopped_reason,
        "entries": [
            {
                "p": e.p,
                "betas": list(e.betas),
                "gammas": list(e.gammas),
                "expectation": e.expectation,
                "ar": e.ar,
                "retries_used": e.retries_used,
            }
            for e in trace.entries
        ],
    }
    write_artifact(path, TRACE_FORMAT, TRACE_VERSION, payload)


def trace_from_json(path: str) -> TrainTrace:
    doc = read_artifact(path, TRACE_FORMAT, TRACE_VERSION)
    try:
        src = doc["source"]
        return TrainTrace(
            source=ScheduleSource(
                instance_id=str(src["instance_id"]), n=int(src["n"]), mode=str(src["mode"])
            ),
            entries=tuple(
                TracePoint(
                    p=int(e["p"]),
                    betas=tuple(float(b) for b in e["betas"]),
                    gammas=tuple(float(g) for g in e["gammas"]),
                    expectation=float(e["expectation"]),
                    ar=None if e["ar"] is None else float(e["ar"]),
                    retries_used=int(e["retries_used"]),
                )
                for e in doc["entries"]
            ),
            stopped_reason=str(doc["stopped_reason"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
