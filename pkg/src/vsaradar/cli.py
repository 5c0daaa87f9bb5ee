"""Command-line entry point: ``vsa-radar simulate | montecarlo | report``.

Exit codes: 0 success, 1 config/schema error, 2 data or manifest error,
3 I/O error. Every command writes ``manifest.json`` next to its outputs;
``report`` refuses directories whose manifest is missing or whose file
digests no longer match.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    EXPERIMENT_PRESETS, ConfigError, config_from_document, config_hash, config_to_document, load_config,
    load_schema, parse_config,
)
from .montecarlo import ExperimentError, error_cdf, estimate, run_sweep, simulate_measurements, trial_seed
from .scenario import ScenarioError

__all__ = ["main", "parse_config", "load_schema"]

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_IO = 0, 1, 2, 3
MANIFEST = "manifest.json"
TRAJECTORY_COLUMNS = ["t_s", "truth_x_m", "truth_y_m", "raw_x_m", "raw_y_m", "ekf_x_m", "ekf_y_m",
                      "vsa_x_m", "vsa_y_m", "err_ekf_m", "err_vsa_m"]
SWEEP_COLUMNS = ["axis_value", "method", "mean_rmse_m", "std_rmse_m", "mean_wall_time_s", "sigma_v_mps"]
CDF_COLUMNS = ["axis_value", "method", "error_m", "cdf"]
METHOD_LABELS = {"trilateration": "Trilateration", "ekf_baseline": "EKF", "vsa": "Proposed"}


class ManifestError(RuntimeError):
    """Missing, malformed or mismatching run manifest (exit code 2)."""


# --------------------------------------------------------------------------
# Output helpers

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    return "" if not math.isfinite(x) else repr(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return buf.getvalue()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for reproducible manifests
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(out: Path, cfg, command: str, outputs, started: str) -> Path:
    doc = {
        "tool": "vsa-radar",
        "tool_version": __version__,
        "command": command,
        "config_hash": config_hash(cfg),
        "base_seed": cfg.base_seed,
        "start_timestamp": started,
        "outputs": [{"path": name, "sha256": _sha256(out / name)} for name in outputs],
        "config": config_to_document(cfg),
    }
    path = out / MANIFEST
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(directory) -> dict:
    """Load and verify a run manifest; raises :class:`ManifestError`."""
    d = Path(directory)
    path = d / MANIFEST
    if not path.is_file():
        raise ManifestError(f"{d}: no {MANIFEST}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        outputs = doc["outputs"]
        cfg = config_from_document(doc["config"])
    except (json.JSONDecodeError, KeyError, TypeError, ConfigError) as exc:
        raise ManifestError(f"{path}: malformed manifest ({exc})") from exc
    if config_hash(cfg) != doc.get("config_hash"):
        raise ManifestError(f"{path}: config hash mismatch")
    for item in outputs:
        f = d / item["path"]
        if not f.is_file():
            raise ManifestError(f"{path}: listed output {item['path']} is missing")
        if _sha256(f) != item["sha256"]:
            raise ManifestError(f"{path}: digest mismatch for {item['path']}")
    doc["_config"] = cfg
    return doc


# --------------------------------------------------------------------------
# Commands

def trajectory_rows(cfg, trial_index: int = 0):
    """Per-frame truth and the three estimators' positions for one seeded run."""
    seed = trial_seed(cfg.base_seed, 0, trial_index, "vsa")
    rng = np.random.default_rng(np.random.SeedSequence(list(seed)))
    times, truth, frames, radars, _ = simulate_measurements(cfg, rng)
    raw, _ = estimate("trilateration", cfg, frames, radars)
    ekf, _ = estimate("ekf_baseline", cfg, frames, radars)
    vsa, _ = estimate("vsa", cfg, frames, radars)
    err_ekf = np.hypot(*(ekf - truth).T)
    err_vsa = np.hypot(*(vsa - truth).T)
    rows = []
    for k, t in enumerate(times):
        rows.append([float(t), *truth[k], *raw[k], *ekf[k], *vsa[k], err_ekf[k], err_vsa[k]])
    return rows


def cmd_simulate(cfg, out: Path) -> list[str]:
    text = _csv_text(TRAJECTORY_COLUMNS, trajectory_rows(cfg))
    (out / "trajectory.csv").write_text(text, encoding="utf-8")
    return ["trajectory.csv"]


def cmd_montecarlo(cfg, out: Path, jobs: int = 1, emit_cdf: bool = False) -> list[str]:
    table = run_sweep(cfg, jobs=jobs)
    rows = [[r.axis_value, r.method, r.mean_rmse, r.std_rmse, r.mean_wall_time, r.sigma_v] for r in table.rows]
    names = [f"sweep_{table.axis}.csv"]
    (out / names[0]).write_text(_csv_text(SWEEP_COLUMNS, rows), encoding="utf-8")
    if emit_cdf:
        cdf_rows = []
        for r in table.rows:
            errs = np.concatenate([t.per_frame_errors for t in table.trials[(r.axis_value, r.method)]])
            if errs.size:
                cdf_rows += [[r.axis_value, r.method, e, f] for e, f in error_cdf(errs)]
        names.append(f"cdf_{table.axis}.csv")
        (out / names[1]).write_text(_csv_text(CDF_COLUMNS, cdf_rows), encoding="utf-8")
    return names


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(SWEEP_COLUMNS[:5]) - set(rows[0]):
        raise ManifestError(f"{path}: not a sweep table")
    return rows


def report_table(directories) -> str:
    """Per-run, per-method mean RMSE laid out with one column per run."""
    columns, cells, methods = [], {}, []
    for d in directories:
        doc = read_manifest(d)
        name = doc["_config"].scenario.name
        sweeps = [o["path"] for o in doc["outputs"] if o["path"].startswith("sweep_")]
        if not sweeps:
            raise ManifestError(f"{d}: manifest lists no sweep table")
        for s in sweeps:
            axis = s[len("sweep_"):-len(".csv")]
            for row in read_sweep_csv(Path(d) / s):
                col = name if axis == "none" else f"{name}@{axis}={row['axis_value']}"
                if col not in columns:
                    columns.append(col)
                if row["method"] not in methods:
                    methods.append(row["method"])
                cells[(row["method"], col)] = row["mean_rmse_m"]
    order = [m for m in ("trilateration", "ekf_baseline", "vsa") if m in methods]
    width = max(12, *(len(c) + 2 for c in columns))
    lines = ["RMSE (m)".ljust(16) + "".join(c.rjust(width) for c in columns)]
    for m in order:
        vals = []
        for c in columns:
            v = cells.get((m, c), "")
            vals.append((f"{float(v):.3f}" if v else "-").rjust(width))
        lines.append(METHOD_LABELS[m].ljust(16) + "".join(vals))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Entry point

def _jobs(value) -> int:
    if value is None:
        value = os.environ.get("VSA_RADAR_JOBS", "1")
    try:
        jobs = int(value)
    except ValueError:
        raise ConfigError(f"jobs must be an integer, got {value!r}") from None
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return jobs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsa-radar", description="Multi-site FMCW radar positioning experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="JSON experiment config")
        src.add_argument("--preset", choices=sorted(EXPERIMENT_PRESETS), help="named experiment preset")
        sp.add_argument("--seed", type=int, help="override the base seed (u64)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
        sp.add_argument("--trials", type=int, help="override the number of trials")

    sim = sub.add_parser("simulate", help="one seeded run, per-frame trajectory CSV")
    run_args(sim)
    mc = sub.add_parser("montecarlo", help="Monte Carlo sweep, aggregate CSV")
    run_args(mc)
    mc.add_argument("--jobs", help="worker processes (default: $VSA_RADAR_JOBS or 1)")
    mc.add_argument("--emit-cdf", action="store_true", help="also write the pooled per-frame error CDF")
    rep = sub.add_parser("report", help="RMSE table from montecarlo output directories")
    rep.add_argument("dirs", nargs="+", type=Path, help="directories holding manifest.json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            sys.stdout.write(report_table(args.dirs))
            return EXIT_OK
        cfg = load_config(args.config, args.preset, args.seed, args.trials)
        jobs = _jobs(args.jobs) if args.command == "montecarlo" else 1
        started = _timestamp()
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            outputs = cmd_simulate(cfg, args.out)
        else:
            outputs = cmd_montecarlo(cfg, args.out, jobs, args.emit_cdf)
        write_manifest(args.out, cfg, args.command, outputs, started)
        return EXIT_OK
    except ConfigError as exc:
        print(f"vsa-radar: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ManifestError, ExperimentError, ScenarioError) as exc:
        print(f"vsa-radar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"vsa-radar: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
