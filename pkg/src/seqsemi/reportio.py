"""Deterministic report serialization.

Reports are canonical JSON: sorted keys, fixed indentation, plain Python
scalars only, trailing newline.  Identical report dicts therefore serialize
to identical bytes.  Anything time-dependent (wall clock) lives in the run
manifest, never in a check report.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
from typing import Iterable, List, Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .cylsemi import SeqSemimartingale

__all__ = [
    "canonical_json",
    "paths_table",
    "plain",
    "report_rows",
    "write_csv",
    "write_run_artifacts",
]


def plain(obj):
    """Recursively convert to JSON-serializable builtins."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj)!r}")


def canonical_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def report_rows(report: dict) -> List[dict]:
    """Tabular view of one check report: the per-level table when present,
    otherwise the scalar metrics as a single row."""
    if "table" in report:
        return [plain(row) for row in report["table"]]
    row = {
        k: plain(v)
        for k, v in report.items()
        if isinstance(v, (int, float, bool, str, np.integer, np.floating, np.bool_)) or v is None
    }
    return [row]


def write_csv(path, rows: Iterable[dict]) -> None:
    rows = list(rows)
    if not rows:
        rows = [{}]
    headers = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=headers, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in headers})


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def paths_table(X: SeqSemimartingale) -> List[dict]:
    """Long-format path export: one row per scenario, node, coordinate and
    component; components are the total plus decomposition parts when the
    coordinate carries them."""
    rows = []
    nodes = X.grid.nodes
    for s in range(X.scenario_count):
        for k, coord in enumerate(X.coords):
            views = [("total", coord)]
            if coord.parts is not None:
                views.extend(
                    [
                        ("mart_cont", coord.parts.mart_cont),
                        ("mart_jump", coord.parts.mart_jump),
                        ("fv", coord.parts.fv),
                    ]
                )
            for label, path in views:
                for j, t in enumerate(nodes):
                    rows.append(
                        {
                            "scenario_id": s,
                            "t": float(t),
                            "coord": k,
                            "left": float(path.left[s, j]),
                            "right": float(path.right[s, j]),
                            "part": label,
                        }
                    )
    return rows


def write_run_artifacts(
    out_dir,
    config: ExperimentConfig,
    result: dict,
    paths: Optional[List[dict]] = None,
) -> List[str]:
    """Write one JSON + CSV pair per check, the combined summary, the run
    manifest, and optionally the simulated paths.  Returns written names."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    for report in result["reports"]:
        name = report["check"]
        json_name = f"{name}.json"
        with open(os.path.join(out_dir, json_name), "w", encoding="utf-8") as fh:
            fh.write(canonical_json(report))
        written.append(json_name)
        csv_name = f"{name}.csv"
        write_csv(os.path.join(out_dir, csv_name), report_rows(report))
        written.append(csv_name)

    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(canonical_json({k: v for k, v in result.items() if k != "reports"}))
    written.append("summary.json")

    if paths is not None:
        write_csv(os.path.join(out_dir, "paths.csv"), paths)
        written.append("paths.csv")

    manifest = {
        "version": __version__,
        "config": config.model_dump(),
        "master_seed": config.ensemble.master_seed,
        "scenarios": config.ensemble.scenarios,
        "artifacts": sorted(written),
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(canonical_json(manifest))
    written.append("manifest.json")
    return written
