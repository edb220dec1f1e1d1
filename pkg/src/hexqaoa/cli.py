"""End-to-end experiment orchestration.

Subcommands chain generate -> solve -> train -> transfer ->
mps-validate -> emit-circuit -> report over a single JSON config.
Every command writes versioned artifacts plus a run manifest; all
randomness is seeded through the config, so re-running a command with
the same config reproduces its primary outputs byte for byte (the
manifest carries the only timestamps).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__, circuitgen, hexising, mpssim, statevec
from ._jsonio import canonical_dumps, read_artifact, write_artifact
from .angles import load_ensemble, save_ensemble
from .errors import CapacityError, ConfigError, FormatError, MissingInputError
from .hexising import COEFFICIENT_MODES, NAMED_LAYOUTS, SaParams
from .optimizer import TrainConfig, ensemble_from_trace, trace_to_json, train_incremental
from .transfer import (
    Backend,
    evaluate_transfer,
    report_from_json,
    report_to_json,
    reports_to_csv,
)

MANIFEST_FORMAT = "hexqaoa/run-manifest"
MANIFEST_VERSION = 1
COUNTS_FORMAT = "hexqaoa/gate-counts"
COUNTS_VERSION = 1
MPS_VALIDATE_FORMAT = "hexqaoa/mps-validation"
MPS_VALIDATE_VERSION = 1
REPORT_SUMMARY_FORMAT = "hexqaoa/report-summary"
REPORT_SUMMARY_VERSION = 1

DATA_DIR_ENV = "HEXQAOA_DATA_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_MISSING_INPUT = 4
EXIT_INTERNAL = 5

AR_CSV_COLUMNS = ("target", "backend", "source", "p", "expectation", "ar", "dip",
                  "gs_prob")
VOLUME_CSV_COLUMNS = ("target", "target_n", "backend", "source", "p_max",
                      "qaoa_volume")
MPS_CSV_COLUMNS = ("instance", "p", "chi", "cutoff", "e_ref", "e_mps", "delta_e",
                   "max_bond", "total_discarded")

DEFAULT_CONFIG = {
    "output_dir": "runs/default",
    "layout": "guadalupe16",
    "rows": None,
    "cols": None,
    "mode": "random_pm1",
    "seeds": [7],
    "import_paths": [],
    "solve": {
        "method": "auto",
        "brute_force_cap": 30,
        "anneal": {
            "restarts": 64,
            "sweeps": None,
            "t_init": 8.0,
            "t_final": 0.05,
            "seed": 0,
            "polish_passes": 50,
        },
    },
    "train": {
        "max_p": 5,
        "improvement_threshold": 1e-6,
        "basin_hops_per_p": 1,
        "max_retries_per_p": 10,
        "gd_step": 0.2,
        "gd_tolerance": 1e-5,
        "gd_max_iters": 300,
        "hop_scale": 0.3,
        "seed": 0,
        "stop_energy_gap": 0.01,
    },
    "transfer": {
        "targets": [],
        "backends": ["statevec"],
        "gs_prob": False,
        "shots": 1000,
        "seed": 0,
    },
    "mps_validate": {
        "p_values": [1, 2, 3],
        "chi_values": [16, 64],
        "cutoff": 1e-12,
    },
    "emit": {
        "basis": "cx",
        "p": None,
        "coloring_seed": 0,
    },
}

TARGET_SPEC_KEYS = {"layout", "rows", "cols", "mode", "seeds"}


def _merge_config(defaults: dict, user: dict, path: str = "") -> dict:
    """Defaults overlaid with user values; unknown keys are rejected."""
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            merged[key] = _merge_config(defaults[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _validate_instance_spec(spec: dict, where: str) -> None:
    layout = spec["layout"]
    _require(isinstance(layout, str), f"{where}: layout must be a string")
    _require(
        layout in NAMED_LAYOUTS or layout == "parametric",
        f"{where}: unknown layout {layout!r}",
    )
    if layout == "parametric":
        _require(
            isinstance(spec["rows"], int) and isinstance(spec["cols"], int),
            f"{where}: parametric layout needs integer rows and cols",
        )
    _require(spec["mode"] in COEFFICIENT_MODES, f"{where}: unknown mode {spec['mode']!r}")
    seeds = spec["seeds"]
    _require(
        isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds),
        f"{where}: seeds must be a nonempty list of integers",
    )
    _require(len(set(seeds)) == len(seeds), f"{where}: duplicate seeds")


def validate_config(config: dict) -> None:
    _validate_instance_spec(config, "config")
    _require(isinstance(config["output_dir"], str) and config["output_dir"],
             "output_dir must be a nonempty string")
    _require(isinstance(config["import_paths"], list)
             and all(isinstance(p, str) for p in config["import_paths"]),
             "import_paths must be a list of strings")
    for i, target in enumerate(config["transfer"]["targets"]):
        where = f"transfer.targets[{i}]"
        _require(isinstance(target, dict), f"{where} must be an object")
        _require(set(target) <= TARGET_SPEC_KEYS, f"{where}: unknown keys")
        full = {"layout": config["layout"], "rows": config["rows"],
                "cols": config["cols"], "mode": config["mode"],
                "seeds": config["seeds"]}
        full.update(target)
        _validate_instance_spec(full, where)
    backends = config["transfer"]["backends"]
    _require(isinstance(backends, list) and backends, "transfer.backends must be nonempty")
    for b in backends:
        Backend.parse(b)
    _require(len(set(backends)) == len(backends), "duplicate transfer backends")
    shots = config["transfer"]["shots"]
    _require(isinstance(shots, int) and shots > 0, "transfer.shots must be positive")
    mv = config["mps_validate"]
    _require(all(isinstance(p, int) and p >= 1 for p in mv["p_values"]) and mv["p_values"],
             "mps_validate.p_values must be positive integers")
    _require(all(isinstance(c, int) and c >= 1 for c in mv["chi_values"]) and mv["chi_values"],
             "mps_validate.chi_values must be positive integers")
    _require(isinstance(mv["cutoff"], (int, float)) and 0 <= mv["cutoff"] < 1,
             "mps_validate.cutoff must be in [0, 1)")
    _require(config["emit"]["basis"] in ("cx", "cz"), "emit.basis must be cx or cz")
    if config["emit"]["p"] is not None:
        _require(isinstance(config["emit"]["p"], int) and config["emit"]["p"] >= 1,
                 "emit.p must be a positive integer or null")
    _require(config["solve"]["method"] in ("auto", "brute_force", "anneal"),
             "solve.method must be auto, brute_force, or anneal")


def load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise MissingInputError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    config = _merge_config(DEFAULT_CONFIG, user)
    validate_config(config)
    return config


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_dumps(config).encode("utf-8")).hexdigest()


class Workspace:
    """Resolved paths plus manifest bookkeeping for one command run."""

    def __init__(self, config: dict, data_dir: str, jobs: int):
        self.config = config
        self.data_dir = data_dir
        self.jobs = max(1, jobs)
        self.root = os.path.join(data_dir, config["output_dir"])
        self.outputs = []

    def path(self, *parts: str) -> str:
        full = os.path.join(self.root, *parts)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def record(self, path: str) -> str:
        self.outputs.append(os.path.relpath(path, self.root))
        return path

    def run_jobs(self, fn, items):
        """Apply fn over items, preserving order; --jobs caps workers."""
        if self.jobs == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with concurrent.futures.ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(fn, items))

    def write_manifest(self, command: str, started_at: str, duration_s: float) -> None:
        payload = {
            "command": command,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "versions": {
                "package": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
            "started_at": started_at,
            "duration_s": duration_s,
            "outputs": sorted(self.outputs),
        }
        write_artifact(self.path("manifests", f"{command}.json"),
                       MANIFEST_FORMAT, MANIFEST_VERSION, payload)


def _instance_specs(config: dict) -> list[dict]:
    """Primary instance specs: one per (layout, mode, seed)."""
    return [
        {"layout": config["layout"], "rows": config["rows"], "cols": config["cols"],
         "mode": config["mode"], "seed": seed}
        for seed in config["seeds"]
    ]


def _target_specs(config: dict) -> list[dict]:
    """Transfer target specs; empty targets mean self-transfer."""
    specs = []
    for target in config["transfer"]["targets"]:
        full = {"layout": config["layout"], "rows": config["rows"],
                "cols": config["cols"], "mode": config["mode"],
                "seeds": config["seeds"]}
        full.update(target)
        for seed in full["seeds"]:
            specs.append({"layout": full["layout"], "rows": full["rows"],
                          "cols": full["cols"], "mode": full["mode"], "seed": seed})
    return specs or _instance_specs(config)


def _spec_stem(spec: dict) -> str:
    layout = spec["layout"]
    if layout == "parametric":
        layout = f"parametric-{spec['rows']}x{spec['cols']}"
    return f"{layout}_{spec['mode']}_s{spec['seed']}"


def _import_stem(path: str) -> str:
    return "imported_" + os.path.splitext(os.path.basename(path))[0]


def _build_spec_instance(spec: dict) -> hexising.IsingInstance:
    graph = hexising.build_heavy_hex(spec["layout"], rows=spec["rows"],
                                     cols=spec["cols"])
    return hexising.generate_instance(graph, seed=spec["seed"], mode=spec["mode"])


def _all_stems(ws: Workspace) -> tuple[list[str], list[str]]:
    """(primary stems, every stem including targets), deduplicated."""
    primary = [_spec_stem(s) for s in _instance_specs(ws.config)]
    primary += [_import_stem(p) for p in ws.config["import_paths"]]
    everything = list(primary)
    for spec in _target_specs(ws.config):
        stem = _spec_stem(spec)
        if stem not in everything:
            everything.append(stem)
    return primary, everything


def _instance_path(ws: Workspace, stem: str) -> str:
    return ws.path("instances", f"{stem}.json")


def _extrema_path(ws: Workspace, stem: str) -> str:
    return ws.path("extrema", f"{stem}.json")


def _load_instance(ws: Workspace, stem: str) -> hexising.IsingInstance:
    path = _instance_path(ws, stem)
    if not os.path.exists(path):
        raise MissingInputError(f"instance artifact not found: {path} (run generate)")
    return hexising.instance_from_json(path)


def _load_extrema(ws: Workspace, stem: str) -> hexising.Extrema:
    path = _extrema_path(ws, stem)
    if not os.path.exists(path):
        raise MissingInputError(f"extrema artifact not found: {path} (run solve)")
    return hexising.extrema_from_json(path)


def _load_series(ws: Workspace, stem: str):
    path = ws.path("train", f"{stem}.ensemble.json")
    if not os.path.exists(path):
        raise MissingInputError(f"ensemble artifact not found: {path} (run train)")
    ensemble = load_ensemble(path)
    sids = ensemble.sources()
    if len(sids) != 1:
        raise FormatError(f"{path}: expected a single-source ensemble")
    return ensemble.series(sids[0])


def cmd_generate(ws: Workspace) -> None:
    seen = set()
    for spec in _instance_specs(ws.config) + _target_specs(ws.config):
        stem = _spec_stem(spec)
        if stem in seen:
            continue
        seen.add(stem)
        instance = _build_spec_instance(spec)
        hexising.instance_to_json(instance, ws.record(_instance_path(ws, stem)))
    for path in ws.config["import_paths"]:
        if not os.path.exists(path):
            raise MissingInputError(f"import file not found: {path}")
        instance = hexising.import_external_instance(path)
        hexising.instance_to_json(
            instance, ws.record(_instance_path(ws, _import_stem(path))))


def cmd_solve(ws: Workspace) -> None:
    _, stems = _all_stems(ws)
    solve_cfg = ws.config["solve"]
    params = SaParams(**solve_cfg["anneal"])

    def solve_one(stem: str):
        instance = _load_instance(ws, stem)
        method = solve_cfg["method"]
        if method == "auto":
            method = ("brute_force" if instance.n <= solve_cfg["brute_force_cap"]
                      else "anneal")
        if method == "brute_force":
            extrema = hexising.brute_force_extrema(
                instance, cap=solve_cfg["brute_force_cap"])
        else:
            extrema = hexising.anneal_extrema(instance, params)
        return stem, extrema

    for stem, extrema in ws.run_jobs(solve_one, stems):
        hexising.extrema_to_json(extrema, ws.record(_extrema_path(ws, stem)))


def cmd_train(ws: Workspace) -> None:
    primary, _ = _all_stems(ws)
    train_cfg = TrainConfig(**ws.config["train"])

    def train_one(stem: str):
        instance = _load_instance(ws, stem)
        extrema = _load_extrema(ws, stem)
        trace = train_incremental(instance, train_cfg, extrema=extrema)
        return stem, trace

    for stem, trace in ws.run_jobs(train_one, primary):
        trace_to_json(trace, ws.record(ws.path("train", f"{stem}.trace.json")))
        save_ensemble(ensemble_from_trace(trace),
                      ws.record(ws.path("train", f"{stem}.ensemble.json")))


def _backend_stem(backend: str) -> str:
    return backend.replace(":", "-").replace(".", "_")


def cmd_transfer(ws: Workspace) -> None:
    primary, _ = _all_stems(ws)
    transfer_cfg = ws.config["transfer"]
    target_stems = []
    for spec in _target_specs(ws.config):
        stem = _spec_stem(spec)
        if stem not in target_stems:
            target_stems.append(stem)

    jobs = []
    for source_stem in primary:
        series = _load_series(ws, source_stem)
        for target_stem in target_stems:
            target = _load_instance(ws, target_stem)
            extrema = _load_extrema(ws, target_stem)
            if transfer_cfg["gs_prob"] and extrema.method == "heuristic":
                raise ConfigError(
                    f"transfer.gs_prob requires exact extrema; {target_stem} "
                    "was solved heuristically")
            for backend_text in transfer_cfg["backends"]:
                jobs.append((source_stem, series, target_stem, target, extrema,
                             backend_text))

    def transfer_one(job):
        source_stem, series, target_stem, target, extrema, backend_text = job
        report = evaluate_transfer(
            series, target, extrema,
            backend=Backend.parse(backend_text),
            include_gs_prob=transfer_cfg["gs_prob"],
            gs_shots=transfer_cfg["shots"],
            seed=transfer_cfg["seed"],
        )
        return source_stem, target_stem, backend_text, report

    reports = []
    for source_stem, target_stem, backend_text, report in ws.run_jobs(transfer_one, jobs):
        name = f"{source_stem}__{target_stem}__{_backend_stem(backend_text)}.json"
        report_to_json(report, ws.record(ws.path("transfer", name)))
        reports.append(report)
    reports_to_csv(reports, ws.record(ws.path("transfer", "transfer.csv")))


def cmd_mps_validate(ws: Workspace) -> None:
    primary, _ = _all_stems(ws)
    mv = ws.config["mps_validate"]
    rows = []
    for stem in primary:
        instance = _load_instance(ws, stem)
        series = _load_series(ws, stem)
        by_p = {s.p: s for s in series}
        cost = statevec.cost_vector(instance)
        for p in mv["p_values"]:
            if p not in by_p:
                raise ConfigError(
                    f"mps_validate.p_values includes p={p} but {stem} was "
                    f"trained to p={max(by_p)}")
            schedule = by_p[p]
            state = statevec.qaoa_state(cost, schedule)
            e_ref = statevec.expectation(state, cost)
            for chi in mv["chi_values"]:
                mps, ledger = mpssim.evolve_mps(
                    instance, schedule, chi_max=chi, cutoff=mv["cutoff"])
                e_mps = mpssim.mps_expectation(mps, instance)
                rows.append({
                    "instance": stem,
                    "p": p,
                    "chi": chi,
                    "cutoff": float(mv["cutoff"]),
                    "e_ref": e_ref,
                    "e_mps": e_mps,
                    "delta_e": mpssim.delta_e(e_ref, e_mps),
                    "max_bond": max(mps.bond_dims(), default=1),
                    "total_discarded": float(sum(r.discarded_weight for r in ledger)),
                })
    payload = {"rows": rows}
    write_artifact(ws.record(ws.path("mps", "validation.json")),
                   MPS_VALIDATE_FORMAT, MPS_VALIDATE_VERSION, payload)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=MPS_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        out = dict(row)
        for key in ("e_ref", "e_mps", "delta_e", "total_discarded", "cutoff"):
            out[key] = repr(float(row[key]))
        writer.writerow(out)
    with open(ws.record(ws.path("mps", "validation.csv")), "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def cmd_emit_circuit(ws: Workspace) -> None:
    primary, _ = _all_stems(ws)
    emit_cfg = ws.config["emit"]
    for stem in primary:
        instance = _load_instance(ws, stem)
        series = _load_series(ws, stem)
        p = emit_cfg["p"] if emit_cfg["p"] is not None else series[-1].p
        by_p = {s.p: s for s in series}
        if p not in by_p:
            raise ConfigError(f"emit.p={p} but {stem} was trained to p={series[-1].p}")
        coloring = circuitgen.edge_coloring(instance.graph, seed=emit_cfg["coloring_seed"])
        circuit = circuitgen.build_circuit(instance, by_p[p], coloring)
        qasm = circuitgen.emit_qasm(circuit, basis=emit_cfg["basis"])
        circuitgen.validate_qasm(qasm)
        name = f"{stem}.p{p}.{emit_cfg['basis']}"
        with open(ws.record(ws.path("circuits", f"{name}.qasm")), "w",
                  encoding="utf-8") as fh:
            fh.write(qasm)
        payload = {
            "instance": stem,
            "p": p,
            "basis": emit_cfg["basis"],
            "n": circuit.n,
            "counts": circuitgen.gate_counts(circuit),
            "layer_two_qubit_depths": list(circuit.layer_two_qubit_depths),
        }
        write_artifact(ws.record(ws.path("circuits", f"{name}.counts.json")),
                       COUNTS_FORMAT, COUNTS_VERSION, payload)


def cmd_report(ws: Workspace) -> None:
    transfer_dir = os.path.join(ws.root, "transfer")
    if not os.path.isdir(transfer_dir):
        raise MissingInputError(f"no transfer outputs under {transfer_dir} (run transfer)")
    report_files = sorted(
        f for f in os.listdir(transfer_dir) if f.endswith(".json"))
    if not report_files:
        raise MissingInputError(f"no transfer reports in {transfer_dir}")
    reports = [report_from_json(os.path.join(transfer_dir, f)) for f in report_files]

    ar_rows = []
    volume_rows = []
    for report in reports:
        for pt in report.points:
            ar_rows.append({
                "target": report.target_id,
                "backend": report.backend,
                "source": report.source_id,
                "p": pt.p,
                "expectation": repr(pt.expectation),
                "ar": repr(pt.ar),
                "dip": int(pt.dip),
                "gs_prob": "" if pt.gs_prob is None else repr(pt.gs_prob),
            })
        volume_rows.append({
            "target": report.target_id,
            "target_n": report.target_n,
            "backend": report.backend,
            "source": report.source_id,
            "p_max": report.points[-1].p,
            "qaoa_volume": report.qaoa_volume,
        })
    ar_rows.sort(key=lambda r: (r["target"], r["backend"], r["source"], r["p"]))
    volume_rows.sort(key=lambda r: (r["target"], r["backend"], r["source"]))

    for name, columns, rows in (("ar_vs_p.csv", AR_CSV_COLUMNS, ar_rows),
                                ("volume_summary.csv", VOLUME_CSV_COLUMNS, volume_rows)):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        with open(ws.record(ws.path("report", name)), "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    payload = {
        "n_reports": len(reports),
        "volumes": volume_rows,
    }
    write_artifact(ws.record(ws.path("report", "summary.json")),
                   REPORT_SUMMARY_FORMAT, REPORT_SUMMARY_VERSION, payload)


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "train": cmd_train,
    "transfer": cmd_transfer,
    "mps-validate": cmd_mps_validate,
    "emit-circuit": cmd_emit_circuit,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hexqaoa",
        description="Train, transfer, and validate QAOA angle schedules on "
                    "heavy-hex Ising models with cubic terms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("defaults", help="print the default config as JSON")
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} stage")
        cmd.add_argument("--config", required=True, help="path to JSON config")
        cmd.add_argument("--data-dir", default=None,
                         help=f"artifact root (default ${DATA_DIR_ENV} or '.')")
        cmd.add_argument("--jobs", type=int, default=1,
                         help="max parallel workers for independent work items")
    return parser


def run(argv: list[str]) -> None:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(canonical_dumps(DEFAULT_CONFIG))
        return
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    config = load_config(args.config)
    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV) or "."
    ws = Workspace(config, data_dir=data_dir, jobs=args.jobs)
    started_at = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    COMMANDS[args.command](ws)
    ws.write_manifest(args.command, started_at, time.monotonic() - t0)


def main(argv: list[str] | None = None) -> int:
    try:
        run(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (MissingInputError, FormatError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except Exception as exc:  # anything else is an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
