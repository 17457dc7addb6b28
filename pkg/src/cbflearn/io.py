"""CSV export/import for trajectories and datasets.

Floats are written with ``repr`` so values round-trip exactly and identical
runs give byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .barrier import BarrierFunction
from .dynamics import Trajectory
from .learning import Dataset

TRAJECTORY_HEADER = ("t", "x_pos", "x_vel", "theta", "theta_dot", "u", "h", "active", "infeasible")
DATASET_HEADER = ("episode", "t", "x_pos", "x_vel", "theta", "theta_dot", "u", "hdot")


class SchemaError(ValueError):
    pass


def _f(v) -> str:
    return repr(float(v))


def write_trajectory_csv(path, traj: Trajectory, bf: BarrierFunction) -> None:
    """One row per sampled state; the final row has no input (u = nan)."""
    h = bf.value(traj.states)
    n_in = len(traj.inputs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for i, (t, x) in enumerate(zip(traj.times, traj.states)):
            if i < n_in:
                u, act, inf = _f(traj.inputs[i]), int(traj.active[i]), int(traj.infeasible[i])
            else:
                u, act, inf = "nan", 0, 0
            w.writerow([_f(t), *map(_f, x), u, _f(h[i]), act, inf])


def _read(path, header) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != header:
        raise SchemaError(f"{path}: expected header {','.join(header)}")
    body = rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric field ({exc})") from None
    if body and data.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged rows")
    return data.reshape(-1, len(header))


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    data = _read(path, TRAJECTORY_HEADER)
    return {name: data[:, i] for i, name in enumerate(TRAJECTORY_HEADER)}


def write_dataset_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for ep, t, x, u, hd in zip(data.episodes, data.times, data.states, data.inputs, data.labels):
            w.writerow([int(ep), _f(t), *map(_f, x), _f(u), _f(hd)])


def read_dataset_csv(path) -> Dataset:
    d = _read(path, DATASET_HEADER)
    return Dataset(d[:, 2:6], d[:, 6], d[:, 7], d[:, 0].astype(int), d[:, 1])
