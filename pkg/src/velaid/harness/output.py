"""CSV, gnuplot scripts and JSON report for a run."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from velaid.harness.simulate import COLUMNS

# one script per reproduced figure: (file stem, title, y label, series)
# each series is (column, label); angle columns are converted to degrees
FIGURES = [
    ("fig_v", "Velocity in body axes", "m/s", [("v", "true"), ("vm", "measured"), ("vh", "estimated")]),
    ("fig_omega", "Angular velocity", "rad/s", [("w", "true"), ("wm", "measured")]),
    ("fig_a", "Specific acceleration", "m/s^2", [("a", "true"), ("am", "measured")]),
    ("fig_beta", "Magnetic field in body axes", "-", [("b", "true"), ("bm", "measured"), ("bh", "estimated")]),
    ("fig_B", "Magnetic field in Earth axes", "-", [("B", "actual")]),
    ("fig_gamma", "Gravity in body axes", "m/s^2", [("g", "true"), ("gh", "estimated")]),
    ("fig_phi", "Roll angle", "deg", [("phi", "true"), ("phih", "estimated")]),
    ("fig_theta", "Pitch angle", "deg", [("theta", "true"), ("thetah", "estimated")]),
    ("fig_psi", "Yaw angle", "deg", [("psi", "true"), ("psih", "estimated")]),
]

_COLORS = {"true": "red", "measured": "blue", "estimated": "orange", "actual": "red"}


def emit_csv(records, path) -> Path:
    """Write records (a RunRecord, an (n, ncols) array, or a list of rows) as CSV.

    Numbers use 17 significant digits so the file round-trips exactly.
    """
    path = Path(path)
    data = getattr(records, "data", records)
    rows = np.asarray(data, dtype=float).reshape(-1, len(COLUMNS)) if len(data) else np.empty((0, len(COLUMNS)))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(COLUMNS) + "\r\n")
        if len(rows):
            np.savetxt(fh, rows, fmt="%.17g", delimiter=",", newline="\r\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(header)))
    return header, data


def _plot_script(csv_name: str, title: str, ylabel: str, series) -> str:
    lines = [
        f"# {title}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        "set xlabel 't [s]'",
        f"set ylabel '{ylabel}'",
        "set grid",
    ]
    angle = ylabel == "deg"
    if angle:
        plots = []
        for col, label in series:
            plots.append(f"'{csv_name}' using (column('t')):(column('{col}')*180/pi) "
                         f"with lines lc rgb '{_COLORS[label]}' title '{col} ({label})'")
        lines.append("plot " + ", \\\n     ".join(plots))
    else:
        lines.append("set multiplot layout 3,1")
        for axis in "xyz":
            plots = [f"'{csv_name}' using (column('t')):(column('{prefix}{axis}')) "
                     f"with lines lc rgb '{_COLORS[label]}' title '{prefix}{axis} ({label})'"
                     for prefix, label in series]
            lines.append("plot " + ", \\\n     ".join(plots))
        lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def emit_plots(records, out_dir, csv_name: str = "run.csv") -> list[Path]:
    """Write one gnuplot script per reproduced figure; data come from ``csv_name``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, title, ylabel, series in FIGURES:
        p = out_dir / f"{stem}.gp"
        p.write_text(_plot_script(csv_name, title, ylabel, series))
        paths.append(p)
    return paths


def emit_report(summary: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path
