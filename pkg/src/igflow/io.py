"""Trajectory and report serialization.

Trajectory CSV columns are the flow parameter, the model parameters, the
eta and theta coordinates, C, Phi and the products K_i^j = eta_i theta^j
(row-major, ``K11, K12, ...``). K cells are empty beyond the covered part
of the run and for deformed flows. Floats are written with 17 significant
digits; JSON uses Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .flows import Trajectory

__all__ = [
    "format_float",
    "read_trajectory_csv",
    "trajectory_columns",
    "trajectory_rows",
    "write_json",
    "write_text",
    "write_trajectory",
]


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_columns(traj: Trajectory) -> list[str]:
    m = traj.spec.model
    n = m.n
    names = list(m.params.names) if m.params is not None else [f"x{i + 1}" for i in range(n)]
    cols = [traj.parameter] + names
    cols += [f"eta{i + 1}" for i in range(n)] + [f"theta{i + 1}" for i in range(n)]
    cols += ["C", "Phi"] + [f"K{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    return cols


def trajectory_rows(traj: Trajectory) -> list[list[float | None]]:
    """Row values in column order; ``None`` marks an empty K cell."""
    m = traj.spec.model
    n = m.n
    eta, theta = traj.eta, traj.theta
    covered = 0 if traj.products is None else len(traj.products)
    rows = []
    for k in range(len(traj)):
        params = m.params.params(eta[k]) if m.params is not None else eta[k]
        row: list[float | None] = [float(traj.params[k])]
        row += [float(v) for v in params]
        row += [float(v) for v in eta[k]] + [float(v) for v in theta[k]]
        row += [float(traj.conformal[k]), float(traj.constraint[k])]
        if k < covered:
            row += [float(v) for v in traj.products[k].reshape(-1)]
        else:
            row += [None] * (n * n)
        rows.append(row)
    return rows


def _write_csv(traj: Trajectory, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trajectory_columns(traj))
        for row in trajectory_rows(traj):
            writer.writerow(["" if v is None else format_float(v) for v in row])


def _write_json_rows(traj: Trajectory, path: Path) -> None:
    cols = trajectory_columns(traj)
    samples = [dict(zip(cols, row)) for row in trajectory_rows(traj)]
    write_json(path, samples)


def write_trajectory(traj: Trajectory, path: str | Path, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "csv":
        _write_csv(traj, path)
    elif fmt == "json":
        _write_json_rows(traj, path)
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")
    return path


def read_trajectory_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and values (empty cells as NaN) of a trajectory CSV."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) if v != "" else math.nan for v in row] for row in reader]
    return header, np.asarray(rows, dtype=float).reshape(-1, len(header))


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str | Path, obj: Any) -> Path:
    """Deterministic JSON: non-finite floats become null, keys keep insertion order."""
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n")
    return path


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.write_text(text if text.endswith("\n") else text + "\n")
    return path
