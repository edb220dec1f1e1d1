"""Angle schedules, their symmetry reduction, and ensemble files.

The circuit family has three exact angle symmetries: shifting any
gamma by pi (cost values share one parity, giving a global phase),
shifting any beta by pi (global sign), and flipping the sign of every
angle at once (complex conjugation of the state).  Canonical form
reduces each angle modulo pi into (-pi/2, pi/2], then fixes the global
sign, which minimizes the total squared angle over the orbit.

Training works on unconstrained angles; schedules are canonicalized
only when exported into an ensemble file.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import pi
from typing import Iterable

import numpy as np

from ._jsonio import read_artifact, write_artifact
from .errors import FormatError

ENSEMBLE_FORMAT = "hexqaoa/angle-ensemble"
ENSEMBLE_VERSION = 1


@dataclass(frozen=True)
class ScheduleSource:
    """Identity of the instance a schedule was trained on."""

    instance_id: str
    n: int
    mode: str


@dataclass(frozen=True)
class AngleSchedule:
    """A depth-p angle assignment with training provenance.

    trained_expectation and trained_ar describe performance on the
    source instance; None when the schedule was not produced by
    training.
    """

    p: int
    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    source: ScheduleSource | None = None
    trained_expectation: float | None = None
    trained_ar: float | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("schedule depth p must be at least 1")
        if len(self.betas) != self.p or len(self.gammas) != self.p:
            raise ValueError("betas and gammas must each have length p")
        for a in (*self.betas, *self.gammas):
            if not np.isfinite(a):
                raise ValueError("angles must be finite")


def _reduce_mod_pi(x: np.ndarray) -> np.ndarray:
    """Map each angle into (-pi/2, pi/2] preserving its value mod pi."""
    y = np.mod(np.asarray(x, dtype=np.float64) + pi / 2, pi) - pi / 2
    return np.where(y == -pi / 2, pi / 2, y)


def canonicalize(schedule: AngleSchedule) -> AngleSchedule:
    """Reduce a schedule to the fundamental domain.

    Each angle lands in (-pi/2, pi/2] and the global sign is fixed by
    lexicographic comparison of the interleaved angle sequence, which
    makes the first sign-sensitive angle positive (so beta_1 >= 0).
    The map is idempotent and preserves the measurement distribution.
    """
    plus = (_reduce_mod_pi(schedule.betas), _reduce_mod_pi(schedule.gammas))
    minus = (_reduce_mod_pi(np.negative(schedule.betas)),
             _reduce_mod_pi(np.negative(schedule.gammas)))

    def interleaved(pair):
        return tuple(float(v) for bg in zip(pair[0], pair[1]) for v in bg)

    chosen = plus if interleaved(plus) >= interleaved(minus) else minus
    return replace(
        schedule,
        betas=tuple(float(b) for b in chosen[0]),
        gammas=tuple(float(g) for g in chosen[1]),
    )


def schedule_summary(schedule: AngleSchedule) -> dict:
    """Endpoint and range summary of one schedule."""
    b = np.asarray(schedule.betas)
    g = np.asarray(schedule.gammas)
    return {
        "p": schedule.p,
        "beta_first": float(b[0]),
        "beta_last": float(b[-1]),
        "gamma_first": float(g[0]),
        "gamma_last": float(g[-1]),
        "beta_min": float(b.min()),
        "beta_max": float(b.max()),
        "gamma_min": float(g.min()),
        "gamma_max": float(g.max()),
    }


class AngleEnsemble:
    """Schedules for one or more source instances, keyed by (source, p).

    For every source present, depths must form a contiguous range
    1..p_max; ``validate`` enforces this and save/load call it.
    """

    def __init__(self, schedules: Iterable[AngleSchedule] = ()):
        self._entries: dict[tuple[str, int], AngleSchedule] = {}
        for s in schedules:
            self.add(s)

    def add(self, schedule: AngleSchedule) -> None:
        if schedule.source is None:
            raise ValueError("ensemble schedules need source metadata")
        key = (schedule.source.instance_id, schedule.p)
        if key in self._entries:
            raise ValueError(f"duplicate schedule for {key}")
        self._entries[key] = schedule

    def sources(self) -> list[str]:
        return sorted({sid for sid, _ in self._entries})

    def p_max(self, instance_id: str) -> int:
        depths = [p for sid, p in self._entries if sid == instance_id]
        if not depths:
            raise KeyError(f"no schedules for source {instance_id!r}")
        return max(depths)

    def get(self, instance_id: str, p: int) -> AngleSchedule:
        return self._entries[(instance_id, p)]

    def series(self, instance_id: str) -> list[AngleSchedule]:
        """All schedules of one source in increasing p order."""
        out = [self._entries[(sid, p)] for sid, p in sorted(self._entries) if sid == instance_id]
        if not out:
            raise KeyError(f"no schedules for source {instance_id!r}")
        return out

    def __len__(self) -> int:
        return len(self._entries)

    def validate(self) -> None:
        for sid in self.sources():
            depths = sorted(p for s, p in self._entries if s == sid)
            if depths != list(range(1, len(depths) + 1)):
                raise ValueError(f"source {sid!r} depths {depths} are not contiguous from 1")


def _schedule_to_doc(s: AngleSchedule) -> dict:
    return {
        "p": s.p,
        "betas": [float(b) for b in s.betas],
        "gammas": [float(g) for g in s.gammas],
        "source": {
            "instance_id": s.source.instance_id,
            "n": s.source.n,
            "mode": s.source.mode,
        },
        "trained_expectation": s.trained_expectation,
        "trained_ar": s.trained_ar,
    }


def _schedule_from_doc(doc: dict) -> AngleSchedule:
    src = doc["source"]
    return AngleSchedule(
        p=int(doc["p"]),
        betas=tuple(float(b) for b in doc["betas"]),
        gammas=tuple(float(g) for g in doc["gammas"]),
        source=ScheduleSource(
            instance_id=str(src["instance_id"]), n=int(src["n"]), mode=str(src["mode"])
        ),
        trained_expectation=doc["trained_expectation"],
        trained_ar=doc["trained_ar"],
    )


def save_ensemble(ensemble: AngleEnsemble, path: str) -> None:
    """Write a canonical, version-tagged ensemble artifact."""
    ensemble.validate()
    docs = [
        _schedule_to_doc(ensemble.get(sid, p))
        for sid, p in sorted(ensemble._entries)
    ]
    write_artifact(path, ENSEMBLE_FORMAT, ENSEMBLE_VERSION, {"schedules": docs})


def load_ensemble(path: str) -> AngleEnsemble:
    doc = read_artifact(path, ENSEMBLE_FORMAT, ENSEMBLE_VERSION)
    try:
        ens = AngleEnsemble(_schedule_from_doc(d) for d in doc["schedules"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    ens.validate()
    return ens
