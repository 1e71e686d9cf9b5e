"""Rectangular grids, node roles, and gridded value fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "Grid",
    "ValueField",
    "TARGET",
    "INTERIOR",
    "OUTFLOW",
    "ROLE_NAMES",
    "LARGE",
    "OutOfGridError",
    "interpolate",
]

# node roles
TARGET = 0
INTERIOR = 1
OUTFLOW = 2
ROLE_NAMES = {TARGET: "TARGET", INTERIOR: "INTERIOR", OUTFLOW: "OUTFLOW"}
ROLE_CODES = {v: k for k, v in ROLE_NAMES.items()}

#: sentinel held by outflow nodes and by unreachable interior nodes
LARGE = 1.0e6


class OutOfGridError(ValueError):
    """Query point outside the grid hull."""


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid over ``[lower, upper]`` with ``nodes_per_axis``
    nodes per axis (both faces included)."""

    lower: np.ndarray
    upper: np.ndarray
    nodes_per_axis: tuple[int, ...]

    @staticmethod
    def regular(lower, upper, nodes_per_axis) -> "Grid":
        lo = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if lo.shape != hi.shape:
            raise ValueError("grid corners must share a shape")
        if np.any(hi <= lo):
            raise ValueError("grid upper corner must exceed lower corner componentwise")
        if np.isscalar(nodes_per_axis) or np.ndim(nodes_per_axis) == 0:
            nodes = (int(nodes_per_axis),) * lo.size
        else:
            nodes = tuple(int(n) for n in nodes_per_axis)
            if len(nodes) == 1:
                nodes = nodes * lo.size
        if len(nodes) != lo.size:
            raise ValueError(f"nodes_per_axis has {len(nodes)} entries for {lo.size} axes")
        if any(n < 2 for n in nodes):
            raise ValueError("need at least 2 nodes per axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        return Grid(lower=lo, upper=hi, nodes_per_axis=nodes)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_axis

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (np.asarray(self.nodes_per_axis) - 1)

    def axis(self, d: int) -> np.ndarray:
        return np.linspace(self.lower[d], self.upper[d], self.nodes_per_axis[d])

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``(n_nodes, dim)``, row-major with the
        last axis fastest (matches ``values.ravel()`` ordering)."""
        axes = [self.axis(d) for d in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def node_coords(self, multi_index) -> np.ndarray:
        idx = np.asarray(multi_index)
        return self.lower + idx * self.spacing

    def contains_points(self, x, rtol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        pad = rtol * (self.upper - self.lower)
        return np.all((pts >= self.lower - pad) & (pts <= self.upper + pad), axis=1)


@dataclass
class ValueField:
    """Per-node values plus roles on a grid.

    Target nodes hold the exit cost (zero by default); outflow nodes hold the
    boundary sentinel.  ``meta`` carries solver diagnostics (sweep counts,
    final update norm) and is not part of the field's identity.
    """

    grid: Grid
    values: np.ndarray
    roles: np.ndarray
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        self.roles = np.asarray(self.roles, dtype=np.int8).reshape(self.grid.shape)

    def finite_mask(self, sentinel_cut: float = LARGE / 2) -> np.ndarray:
        """Nodes carrying actual field values (finite, below the sentinel scale)."""
        return np.isfinite(self.values) & (np.abs(self.values) < sentinel_cut)

    def copy(self) -> "ValueField":
        return ValueField(self.grid, self.values.copy(), self.roles.copy(), dict(self.meta))


def _interp_weights(grid: Grid, pts: np.ndarray):
    """Base node multi-indices and per-axis fractions for multilinear interpolation."""
    rel = (pts - grid.lower) / grid.spacing
    base = np.floor(rel).astype(np.int64)
    n = np.asarray(grid.nodes_per_axis)
    base = np.clip(base, 0, n - 2)
    frac = rel - base
    return base, frac


def interpolate(fieldv: ValueField, x) -> np.ndarray | float:
    """Multilinear interpolation of a field; exact on per-cell affine data.

    Raises :class:`OutOfGridError` when a query point leaves the grid hull.
    """
    grid = fieldv.grid
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != grid.dim:
        raise ValueError(f"query dim {pts.shape[1]} != grid dim {grid.dim}")
    inside = grid.contains_points(pts)
    if not np.all(inside):
        bad = pts[~inside][0]
        raise OutOfGridError(f"point {bad} outside grid hull")
    base, frac = _interp_weights(grid, pts)
    out = np.zeros(pts.shape[0])
    for corner in range(1 << grid.dim):
        offs = np.array([(corner >> d) & 1 for d in range(grid.dim)])
        w = np.prod(np.where(offs, frac, 1.0 - frac), axis=1)
        idx = tuple((base + offs).T)
        vals = fieldv.values[idx]
        nz = w > 0
        out[nz] += w[nz] * vals[nz]
    return float(out[0]) if scalar else out
