"""CSV import/export for value fields, trajectories, and residual reports.

Floats are written with ``repr``-faithful precision so a write/read cycle is
bit-exact.
"""

from __future__ import annotations

import os

import numpy as np

from .grids import Grid, ROLE_CODES, ROLE_NAMES, ValueField

__all__ = [
    "field_to_csv",
    "field_from_csv",
    "trajectory_to_csv",
    "residual_report_to_csv",
]


def _fmt(x: float) -> str:
    # repr of a Python float is shortest-round-trip exact
    return repr(float(x))


def field_to_csv(fieldv: ValueField, path: str) -> None:
    grid = fieldv.grid
    with open(path, "w", newline="") as fh:
        fh.write(
            "# grid lower={} upper={} nodes={}\n".format(
                " ".join(_fmt(v) for v in grid.lower),
                " ".join(_fmt(v) for v in grid.upper),
                " ".join(str(n) for n in grid.nodes_per_axis),
            )
        )
        cols = [f"x{d + 1}" for d in range(grid.dim)]
        fh.write("# columns {} value role\n".format(" ".join(cols)))
        pts = grid.points()
        vals = fieldv.values.ravel()
        roles = fieldv.roles.ravel()
        for i in range(grid.n_nodes):
            coords = ",".join(_fmt(c) for c in pts[i])
            fh.write(f"{coords},{_fmt(vals[i])},{ROLE_NAMES[int(roles[i])]}\n")


def field_from_csv(path: str) -> ValueField:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# grid "):
            raise ValueError(f"{path}: missing grid metadata line")
        body = header[len("# grid ") :]
        lower = _parse_vector(body, "lower")
        upper = _parse_vector(body, "upper")
        nodes = [int(v) for v in _parse_raw(body, "nodes").split()]
        grid = Grid.regular(lower, upper, nodes)
        second = fh.readline()
        if not second.startswith("# columns"):
            raise ValueError(f"{path}: missing columns line")
        values = np.empty(grid.n_nodes)
        roles = np.empty(grid.n_nodes, dtype=np.int8)
        for i in range(grid.n_nodes):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated after {i} rows (expected {grid.n_nodes})")
            cells = line.strip().split(",")
            if len(cells) != grid.dim + 2:
                raise ValueError(f"{path}: row {i} has {len(cells)} cells")
            values[i] = float(cells[grid.dim])
            role = cells[grid.dim + 1].strip()
            if role not in ROLE_CODES:
                raise ValueError(f"{path}: unknown role {role!r} on row {i}")
            roles[i] = ROLE_CODES[role]
        if fh.readline().strip():
            raise ValueError(f"{path}: trailing data after {grid.n_nodes} rows")
    return ValueField(grid, values.reshape(grid.shape), roles.reshape(grid.shape))


def _parse_raw(body: str, key: str) -> str:
    keys = ("lower=", "upper=", "nodes=")
    start = body.index(key + "=") + len(key) + 1
    end = len(body)
    for other in keys:
        pos = body.find(other, start)
        if pos != -1:
            end = min(end, pos)
    return body[start:end].strip()


def _parse_vector(body: str, key: str) -> np.ndarray:
    return np.array([float(v) for v in _parse_raw(body, key).split()])


def trajectory_to_csv(traj, path: str) -> None:
    dim = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write("# t, {}, cost\n".format(", ".join(f"x{d + 1}" for d in range(dim))))
        for i in range(len(traj.times)):
            row = [_fmt(traj.times[i])] + [_fmt(c) for c in traj.states[i]] + [_fmt(traj.cumulative_cost[i])]
            fh.write(",".join(row) + "\n")


def residual_report_to_csv(report, path: str) -> None:
    grid = report.field.grid
    pts = grid.points()
    res = report.per_node.ravel()
    valid = report.valid_mask.ravel()
    with open(path, "w", newline="") as fh:
        fh.write("# columns {} residual evaluated\n".format(" ".join(f"x{d + 1}" for d in range(grid.dim))))
        for i in range(grid.n_nodes):
            coords = ",".join(_fmt(c) for c in pts[i])
            r = _fmt(res[i]) if valid[i] else "nan"
            fh.write(f"{coords},{r},{int(valid[i])}\n")


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
