"""CSV/JSON emitters and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy
import yaml

import rydopt

TABLE_COLUMNS = ["F", "F_s", "F_s_minus_F", "P_d", "mean_n_exc", "tau_us"]


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, default=_default) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def summary_table(fid_ensemble, fid_single, p_decay, mean_n_exc, tau) -> dict:
    """One row of the summary table: F, F_s, F_s - F, P_d(tau), <N_e>, tau."""
    return {
        "F": float(fid_ensemble),
        "F_s": float(fid_single),
        "F_s_minus_F": float(fid_single - fid_ensemble),
        "P_d": float(p_decay),
        "mean_n_exc": float(mean_n_exc),
        "tau_us": float(tau),
    }


def write_summary(outdir, row: dict, label: str) -> None:
    outdir = Path(outdir)
    write_json(outdir / "summary.json", {"label": label, **row})
    write_csv(outdir / "summary.csv", ["label"] + TABLE_COLUMNS, [[label] + [row[c] for c in TABLE_COLUMNS]])


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    return {
        "rydopt": rydopt.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def write_manifest(outdir, command: str, config_text: str, seeds: dict, inputs: dict, wall_time: float) -> Path:
    """Everything needed to rerun ``command`` and reproduce its numbers."""
    outdir = Path(outdir)
    outputs = sorted(p.name for p in outdir.iterdir() if p.is_file() and p.name != "manifest.json")
    rerun = ["rydopt", command, "--config", str((outdir / "config.resolved.yaml").resolve())]
    for name, info in inputs.items():
        rerun += [f"--{name}", info["path"]]
    return write_json(
        outdir / "manifest.json",
        {
            "command": command,
            "argv": sys.argv,
            "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
            "seeds": seeds,
            "inputs": inputs,
            "versions": versions(),
            "rerun": " ".join(rerun),
            "outputs": outputs,
            "wall_time_s": wall_time,
        },
    )
