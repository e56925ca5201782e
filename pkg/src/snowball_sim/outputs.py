"""Run artifact writers: rounds.csv, summary.json, audit.jsonl.

rounds.csv is the deterministic surface: identical config and seed yield
byte-identical files. Measured timing is therefore kept out of it (its
wallclock_ms column is a fixed 0.000000 placeholder) and recorded in
audit.jsonl per round and in summary.json as run totals.
"""

from __future__ import annotations

import csv
import json
import math
import subprocess
from pathlib import Path

from . import __version__
from .config import config_to_dict
from .engine import ExperimentResult

CSV_HEADER = "round,ma,ba,fpr,fnr,n_selected,n_infected_selected,wallclock_ms"


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def build_identifier() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=5)
        if rev.returncode == 0:
            return f"{__version__}+g{rev.stdout.strip()}"
    except OSError:
        pass
    return __version__


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    """Write the three run artifacts into out_dir; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "rounds": out / "rounds.csv",
        "summary": out / "summary.json",
        "audit": out / "audit.jsonl",
    }

    with open(paths["rounds"], "w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in result.records:
            m = rec.metrics
            fh.write(f"{rec.round},{m.ma:.6f},{m.ba:.6f},{m.fpr:.6f},{m.fnr:.6f},"
                     f"{m.n_selected},{m.n_infected_selected},{0.0:.6f}\n")

    with open(paths["audit"], "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps(_jsonable({
                "round": rec.round,
                "participants": rec.participants,
                "selectees": rec.selectees,
                "wallclock_ms": rec.metrics.wallclock_ms,
                "benign_dist": rec.benign_dist,
                "cross_dist": rec.cross_dist,
                "elections": rec.audits,
            }), sort_keys=True) + "\n")

    manifest = {
        "build": build_identifier(),
        "config": config_to_dict(result.config),
        "artifacts": {k: str(v) for k, v in paths.items()},
        "wallclock_ms_total": result.summary.get("wallclock_ms_total"),
    }
    summary = {
        "ma": result.summary["ma"],
        "ba": result.summary["ba"],
        "best_round": result.summary["best_round"],
        "n_rounds": result.summary["n_rounds"],
        "config": config_to_dict(result.config),
        "manifest": manifest,
    }
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def read_rounds_csv(path: str | Path) -> list[dict]:
    """Parse rounds.csv back into typed row dicts."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "round": int(row["round"]),
                "ma": float(row["ma"]),
                "ba": float(row["ba"]),
                "fpr": float(row["fpr"]),
                "fnr": float(row["fnr"]),
                "n_selected": int(row["n_selected"]),
                "n_infected_selected": int(row["n_infected_selected"]),
                "wallclock_ms": float(row["wallclock_ms"]),
            })
    return rows
