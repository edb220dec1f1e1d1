"""Fixed-angle reuse: evaluate trained schedules on other instances.

A transfer run takes the full schedule series of one source (depths
1..p_max) and scores every depth on a target instance, recording the
expectation, approximation ratio, whether the ratio dipped relative to
the previous depth, and optionally the sampled ground-state
probability.  The volume figure of a run is target size times the
depth reached before the first non-improvement.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import statevec
from ._jsonio import read_artifact, write_artifact
from .angles import AngleSchedule
from .errors import ConfigError, FormatError
from .hexising import Extrema, IsingInstance, approximation_ratio

REPORT_FORMAT = "hexqaoa/transfer-report"
REPORT_VERSION = 1

CSV_COLUMNS = ("source", "target", "p", "expectation", "ar", "dip", "gs_prob")

DEFAULT_GS_SHOTS = 1000


@dataclass(frozen=True)
class Backend:
    """Simulation engine selector: exact statevector or MPS.

    String forms accepted by ``parse``: ``statevec`` and ``mps:<chi>``
    with an optional ``:<cutoff>`` third field.
    """

    kind: str
    chi: int | None = None
    cutoff: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("statevec", "mps"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "mps" and (self.chi is None or self.chi < 1):
            raise ConfigError("mps backend needs a positive chi")
        if not 0.0 <= self.cutoff < 1.0:
            raise ConfigError("backend cutoff must be in [0, 1)")
        if self.kind == "statevec" and self.chi is not None:
            raise ConfigError("statevec backend takes no chi")

    @classmethod
    def parse(cls, text: str) -> "Backend":
        parts = text.split(":")
        if parts[0] == "statevec" and len(parts) == 1:
            return cls(kind="statevec")
        if parts[0] == "mps" and len(parts) in (2, 3):
            try:
                chi = int(parts[1])
                cutoff = float(parts[2]) if len(parts) == 3 else 1e-12
            except ValueError as exc:
                raise ConfigError(f"bad backend spec {text!r}") from exc
            return cls(kind="mps", chi=chi, cutoff=cutoff)
        raise ConfigError(f"bad backend spec {text!r}")

    def describe(self) -> str:
        if self.kind == "statevec":
            return "statevec"
        return f"mps:{self.chi}:{self.cutoff:g}"


@dataclass(frozen=True)
class TransferPoint:
    """Transfer quality at one depth."""

    p: int
    expectation: float
    ar: float
    dip: bool
    gs_prob: float | None = None


@dataclass(frozen=True)
class TransferReport:
    """Per-depth transfer results for one (source, target) pair.

    Depths are contiguous from 1; dip flags mark depths whose ratio
    fell below the previous depth's.  qaoa_volume is target_n times the
    last depth of the strictly improving prefix (at least target_n).
    """

    source_id: str
    target_id: str
    target_n: int
    backend: str
    points: tuple[TransferPoint, ...]
    qaoa_volume: int

    def __post_init__(self):
        if not self.points:
            raise ValueError("a transfer report needs at least depth 1")
        for i, pt in enumerate(self.points):
            if pt.p != i + 1:
                raise ValueError("report depths must be contiguous from 1")
        ars = [pt.ar for pt in self.points]
        for i, pt in enumerate(self.points[1:], start=1):
            if pt.dip != (ars[i] < ars[i - 1]):
                raise ValueError("dip flags must match the ratio series")
        if self.points[0].dip:
            raise ValueError("depth 1 cannot dip")
        if self.qaoa_volume != qaoa_volume([pt.ar for pt in self.points], self.target_n):
            raise ValueError("qaoa_volume does not match the ratio series")


def qaoa_volume(ars: Sequence[float], n: int) -> int:
    """n times the largest depth reached with strictly improving ratio.

    The streak starts at depth 1 and ends at the first tie or dip, so
    any nonempty series yields at least n * 1.
    """
    if not len(ars):
        raise ValueError("need at least one ratio")
    if n < 1:
        raise ValueError("n must be positive")
    p_star = 1
    for i in range(1, len(ars)):
        if ars[i] > ars[i - 1]:
            p_star = i + 1
        else:
            break
    return n * p_star


def _seed_for(seed: int, p: int) -> int:
    return int(np.random.SeedSequence((seed, p)).generate_state(1)[0])


def _evolve_and_measure(
    instance: IsingInstance,
    schedule: AngleSchedule,
    backend: Backend,
    cost: statevec.CostVector | None,
    gs_energy: int | None,
    gs_shots: int,
    seed: int,
):
    """Expectation and optional ground-state frequency on one backend."""
    if backend.kind == "statevec":
        state = statevec.qaoa_state(cost, schedule)
        value = statevec.expectation(state, cost)
        if gs_energy is None:
            return value, None
        shots = statevec.sample(state, gs_shots, seed)
        return value, shots.frequency_of_energy(instance, gs_energy)
    from . import mpssim

    mps, _ = mpssim.evolve_mps(
        instance, schedule, chi_max=backend.chi, cutoff=backend.cutoff
    )
    value = mpssim.mps_expectation(mps, instance)
    if gs_energy is None:
        return value, None
    shots = mpssim.sample_mps(mps, gs_shots, seed)
    return value, shots.frequency_of_energy(instance, gs_energy)


def evaluate_transfer(
    schedules: Sequence[AngleSchedule],
    target: IsingInstance,
    extrema: Extrema,
    backend: Backend = Backend(kind="statevec"),
    include_gs_prob: bool = False,
    gs_shots: int = DEFAULT_GS_SHOTS,
    seed: int = 0,
) -> TransferReport:
    """Score a contiguous schedule series on a target instance.

    Ground-state probabilities are only sampled when requested and
    require exact extrema (brute-force or imported); the sampling seed
    is derived per depth so reports are reproducible.
    """
    if not schedules:
        raise ValueError("need at least one schedule")
    for i, s in enumerate(schedules):
        if s.p != i + 1:
            raise ValueError("schedules must cover contiguous depths from 1")
    if include_gs_prob and extrema.method == "heuristic":
        raise ValueError("ground-state probability needs exact extrema, got heuristic")

    source_id = schedules[0].source.instance_id if schedules[0].source else "unspecified"
    cost = statevec.cost_vector(target) if backend.kind == "statevec" else None
    gs_energy = extrema.c_min if include_gs_prob else None

    points = []
    prev_ar = None
    for s in schedules:
        value, gs_prob = _evolve_and_measure(
            target, s, backend, cost, gs_energy, gs_shots, _seed_for(seed, s.p)
        )
        ar = float(approximation_ratio(value, extrema))
        points.append(
            TransferPoint(
                p=s.p,
                expectation=float(value),
                ar=ar,
                dip=(prev_ar is not None and ar < prev_ar),
                gs_prob=gs_prob,
            )
        )
        prev_ar = ar
    return TransferReport(
        source_id=source_id,
        target_id=target.label,
        target_n=target.n,
        backend=backend.describe(),
        points=tuple(points),
        qaoa_volume=qaoa_volume([pt.ar for pt in points], target.n),
    )


def gs_probability(
    instance: IsingInstance,
    schedule: AngleSchedule,
    extrema: Extrema,
    shots: int = DEFAULT_GS_SHOTS,
    backend: Backend = Backend(kind="statevec"),
    seed: int = 0,
    method: str = "sampled",
) -> float:
    """Probability of measuring a ground state after the circuit.

    Refuses heuristic extrema because a wrong ground energy makes the
    answer meaningless.  method ``sampled`` draws the configured number
    of shots; ``exact`` sums |amplitude|^2 over minimizing states and
    is available on the statevector backend as a cross-check.
    """
    if extrema.method == "heuristic":
        raise ValueError("ground-state probability needs exact extrema, got heuristic")
    if method not in ("sampled", "exact"):
        raise ConfigError(f"unknown gs probability method {method!r}")
    if method == "exact":
        if backend.kind != "statevec":
            raise ConfigError("exact ground-state probability needs the statevec backend")
        cost = statevec.cost_vector(instance)
        state = statevec.qaoa_state(cost, schedule)
        mask = cost.values == extrema.c_min
        return float(np.sum(state.real[mask] ** 2 + state.imag[mask] ** 2))
    cost = statevec.cost_vector(instance) if backend.kind == "statevec" else None
    _, prob = _evolve_and_measure(
        instance, schedule, backend, cost, extrema.c_min, shots, seed
    )
    return prob


def report_to_json(report: TransferReport, path: str) -> None:
    payload = {
        "source_id": report.source_id,
        "target_id": report.target_id,
        "target_n": report.target_n,
        "backend": report.backend,
        "qaoa_volume": report.qaoa_volume,
        "points": [
            {
                "p": pt.p,
                "expectation": pt.expectation,
                "ar": pt.ar,
                "dip": pt.dip,
                "gs_prob": pt.gs_prob,
            }
            for pt in report.points
        ],
    }
    write_artifact(path, REPORT_FORMAT, REPORT_VERSION, payload)


def report_from_json(path: str) -> TransferReport:
    doc = read_artifact(path, REPORT_FORMAT, REPORT_VERSION)
    try:
        return TransferReport(
            source_id=str(doc["source_id"]),
            target_id=str(doc["target_id"]),
            target_n=int(doc["target_n"]),
            backend=str(doc["backend"]),
            points=tuple(
                TransferPoint(
                    p=int(pt["p"]),
                    expectation=float(pt["expectation"]),
                    ar=float(pt["ar"]),
                    dip=bool(pt["dip"]),
                    gs_prob=None if pt["gs_prob"] is None else float(pt["gs_prob"]),
                )
                for pt in doc["points"]
            ),
            qaoa_volume=int(doc["qaoa_volume"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def report_csv_rows(report: TransferReport) -> list[dict]:
    """Flat per-depth rows matching CSV_COLUMNS."""
    return [
        {
            "source": report.source_id,
            "target": report.target_id,
            "p": str(pt.p),
            "expectation": repr(pt.expectation),
            "ar": repr(pt.ar),
            "dip": "1" if pt.dip else "0",
            "gs_prob": "" if pt.gs_prob is None else repr(pt.gs_prob),
        }
        for pt in report.points
    ]


def reports_to_csv(reports: Sequence[TransferReport], path: str) -> None:
    """Write one flat CSV over all reports, ordered as given."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for row in report_csv_rows(report):
            writer.writerow(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
