"""Value-function solvers on rectangular grids.

Two routes:

* :func:`solve_value_iteration` -- fixed point of the one-step dynamic
  programming update with multilinear interpolation at the foot points,
  iterated by Gauss-Seidel sweeps that cycle all 2^dim axis orderings.
  Stable for degenerate running costs (the regime where the cost rate is not
  bounded below by a positive constant off the target).
* :func:`solve_fast_marching` -- single-pass monotone upwind solver for
  isotropic gradient-norm equations ``|Dv| = rho(x)``, ordered by a heap of
  tentative values.

Both return a :class:`~exitgrid.grids.ValueField`.  The sklearn-style
estimators at the bottom wrap these for pipeline composition.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import _kernels
from .grids import Grid, INTERIOR, LARGE, OUTFLOW, TARGET, ValueField, interpolate
from .problems import ControlProblem, InvariantViolation, MalformedProblemError, TargetSet

__all__ = [
    "SolverParams",
    "solve_value_iteration",
    "solve_fast_marching",
    "EmptyTargetError",
    "NotConvergedError",
    "NonpositiveRHSError",
    "SemiLagrangianSolver",
    "FastMarchingSolver",
]

EPSILON_FLOOR = 1e-12


class EmptyTargetError(ValueError):
    """No grid node rasterizes into the target."""


class NonpositiveRHSError(ValueError):
    """Gradient-norm right-hand side is nonpositive outside the target."""

    def __init__(self, node_index, coords):
        super().__init__(f"rhs <= 0 at off-target node {node_index} ({coords})")
        self.node_index = node_index
        self.coords = coords


class NotConvergedError(RuntimeError):
    def __init__(self, sweeps: int, last_update: float):
        super().__init__(f"no fixed point after {sweeps} sweeps (last update {last_update:.3g})")
        self.sweeps = sweeps
        self.last_update = last_update


@dataclass
class SolverParams:
    """Iteration controls for :func:`solve_value_iteration`.

    The per-node step is ``dt(x) = h_min / (max_a |f(x,a)| + epsilon_floor)``,
    so each foot point moves about one cell.  ``boundary_mode`` is
    ``"outflow_large"`` (finite sentinel 1e6 outside the grid) or
    ``"osc_infinite"`` (leaving the box is priced +inf, the local-solution
    boundary condition).  ``max_sweeps`` defaults to ``10 * max(nodes_per_axis)``.
    """

    tolerance: float = 1e-8
    max_sweeps: int | None = None
    boundary_mode: str = "outflow_large"
    jacobi: bool = False

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.boundary_mode not in ("outflow_large", "osc_infinite"):
            raise ValueError(f"unknown boundary_mode {self.boundary_mode!r}")


def rasterize_roles(grid: Grid, target: TargetSet) -> tuple[np.ndarray, float]:
    """Tag nodes TARGET / INTERIOR / OUTFLOW.

    Target tolerance defaults to half the minimum spacing when the target
    declares none (grid nodes rarely sit exactly on the target).  Boundary
    faces are OUTFLOW except where they rasterize into the target.
    """
    pts = grid.points()
    tol = target.tolerance if target.tolerance > 0 else float(np.min(grid.spacing)) / 2
    dist = np.asarray(target.distance(pts))
    roles = np.full(grid.n_nodes, INTERIOR, dtype=np.int8)
    roles[dist <= tol] = TARGET
    shell = np.zeros(grid.shape, dtype=bool)
    for d in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[d] = 0
        shell[tuple(sl)] = True
        sl[d] = -1
        shell[tuple(sl)] = True
    roles[shell.ravel() & (roles != TARGET)] = OUTFLOW
    if not np.any(roles == TARGET):
        raise EmptyTargetError(f"no node within tolerance {tol:g} of the target")
    return roles, tol


def _eval_f(problem, pts, a, n_nodes, dim):
    f = np.asarray(problem.dynamics(pts, a), dtype=float)
    if f.shape != (n_nodes, dim):
        raise MalformedProblemError(f"dynamics returned {f.shape}, expected {(n_nodes, dim)}")
    if not np.all(np.isfinite(f)):
        raise MalformedProblemError("dynamics produced non-finite values on the grid")
    return f


def _precompute(problem: ControlProblem, grid: Grid):
    pts = grid.points()
    controls = problem.controls.enumerate()
    n_nodes, n_controls = grid.n_nodes, len(controls)
    speeds = np.zeros(n_nodes)
    for a in controls:
        f = _eval_f(problem, pts, a, n_nodes, grid.dim)
        np.maximum(speeds, np.linalg.norm(f, axis=1), out=speeds)
    dt = float(np.min(grid.spacing)) / (speeds + EPSILON_FLOOR)

    feet = np.empty((n_nodes, n_controls, grid.dim))
    step_cost = np.empty((n_nodes, n_controls))
    for c, a in enumerate(controls):
        f = _eval_f(problem, pts, a, n_nodes, grid.dim)
        l = np.asarray(problem.lagrangian(pts, a), dtype=float).reshape(n_nodes)
        if not np.all(np.isfinite(l)):
            raise MalformedProblemError("lagrangian produced non-finite values on the grid")
        if np.any(l < 0):
            raise InvariantViolation("running cost negative on the grid")
        feet[:, c, :] = pts + dt[:, None] * f
        step_cost[:, c] = dt * l
    return feet, step_cost


def solve_value_iteration(
    problem: ControlProblem,
    grid: Grid,
    params: SolverParams | None = None,
) -> ValueField:
    """Solve the exit-time value function on ``grid`` by sweeping the
    one-step dynamic programming update to a fixed point.

    Interior nodes start at the sentinel (a supersolution), so sweeps are
    pointwise nonincreasing; target nodes are pinned to the exit cost.
    Raises :class:`NotConvergedError` when ``max_sweeps`` is exhausted.
    """
    params = params or SolverParams()
    roles, tol = rasterize_roles(grid, problem.target)
    # both modes cap node values at the finite sentinel (an undiscounted
    # iteration cannot converge to +inf); the local-solution mode prices any
    # foot that leaves the box at +inf instead of the sentinel
    cap = LARGE
    offgrid = LARGE if params.boundary_mode == "outflow_large" else np.inf
    pts = grid.points()

    values = np.full(grid.n_nodes, cap)
    target_mask = roles == TARGET
    g = np.asarray(problem.eval_exit_cost(pts[target_mask]), dtype=float)
    values[target_mask] = g

    feet, step_cost = _precompute(problem, grid)
    shape = np.asarray(grid.shape, dtype=np.int64)
    strides = np.asarray(
        [int(np.prod(grid.shape[d + 1 :])) for d in range(grid.dim)], dtype=np.int64
    )
    lower = np.asarray(grid.lower, dtype=float)
    inv_h = 1.0 / grid.spacing

    max_sweeps = params.max_sweeps or 10 * max(grid.shape)
    n_orders = 1 << grid.dim
    recent: list[float] = []
    max_increase_seen = 0.0
    sweeps = 0
    last_update = np.inf
    while sweeps < max_sweeps:
        if params.jacobi:
            values, upd = _kernels.jacobi_sweep(
                values, roles, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap
            )
            inc = 0.0
        else:
            upd, inc = _kernels.gauss_seidel_sweep(
                values, roles, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap,
                sweeps % n_orders,
            )
        sweeps += 1
        last_update = float(upd)
        if sweeps > 1:  # first sweep drops from the sentinel, not monotone-tracked
            max_increase_seen = max(max_increase_seen, float(inc))
        recent.append(last_update)
        recent = recent[-n_orders:]
        if len(recent) == n_orders and max(recent) < params.tolerance:
            break
    else:
        raise NotConvergedError(sweeps, last_update)

    meta = {
        "sweeps": sweeps,
        "last_update": last_update,
        "max_increase_after_first": max_increase_seen,
        "boundary_mode": params.boundary_mode,
        "target_tolerance": tol,
        "sentinel": cap,
    }
    return ValueField(grid, values.reshape(grid.shape), roles.reshape(grid.shape), meta)


# ---------------------------------------------------------------------------
# fast marching


def solve_fast_marching(rhs, target: TargetSet, grid: Grid, exit_cost=None) -> ValueField:
    """Single-pass monotone solver for ``|Dv| = rhs(x)`` with v = exit cost on
    the target.

    ``rhs`` must be strictly positive at off-target nodes (checked; raises
    :class:`NonpositiveRHSError`).  Nodes are accepted in nondecreasing value
    order from a heap; each neighbor update solves the upwind quadratic.
    """
    pts = grid.points()
    rho = np.asarray(rhs(pts), dtype=float).reshape(grid.n_nodes)
    tol = target.tolerance if target.tolerance > 0 else float(np.min(grid.spacing)) / 2
    dist = np.asarray(target.distance(pts))
    is_target = dist <= tol
    if not np.any(is_target):
        raise EmptyTargetError(f"no node within tolerance {tol:g} of the target")
    bad = (~is_target) & (rho <= 0)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NonpositiveRHSError(idx, pts[idx])

    shape = grid.shape
    strides = [int(np.prod(shape[d + 1 :])) for d in range(grid.dim)]
    h = grid.spacing
    n = grid.n_nodes

    values = np.full(n, np.inf)
    state = np.zeros(n, dtype=np.int8)  # 0 far, 1 narrow, 2 accepted
    if exit_cost is None:
        seed_vals = np.zeros(int(np.sum(is_target)))
    else:
        seed_vals = np.asarray(exit_cost(pts[is_target]), dtype=float)
    values[is_target] = seed_vals

    heap: list[tuple[float, int]] = []
    for node in np.flatnonzero(is_target):
        heapq.heappush(heap, (values[node], int(node)))
        state[node] = 1

    def solve_local(node: int) -> float:
        # accepted-neighbor minimum per axis, then the incremental quadratic
        terms = []
        rem = node
        idx = []
        for d in range(grid.dim):
            q = rem // strides[d]
            rem -= q * strides[d]
            idx.append(q)
        for d in range(grid.dim):
            best = np.inf
            if idx[d] > 0 and state[node - strides[d]] == 2:
                best = values[node - strides[d]]
            if idx[d] < shape[d] - 1 and state[node + strides[d]] == 2:
                best = min(best, values[node + strides[d]])
            if np.isfinite(best):
                terms.append((best, h[d]))
        if not terms:
            return np.inf
        terms.sort()
        r = rho[node]
        u = terms[0][0] + terms[0][1] * r
        k = 1
        while k < len(terms) and u > terms[k][0]:
            # solve sum_{j<=k} ((u - b_j)/h_j)^2 = r^2
            a2 = sum(1.0 / hh**2 for b, hh in terms[: k + 1])
            a1 = -2.0 * sum(b / hh**2 for b, hh in terms[: k + 1])
            a0 = sum(b**2 / hh**2 for b, hh in terms[: k + 1]) - r * r
            disc = a1 * a1 - 4 * a2 * a0
            if disc < 0:
                break
            u = (-a1 + np.sqrt(disc)) / (2 * a2)
            k += 1
        return u

    while heap:
        val, node = heapq.heappop(heap)
        if state[node] == 2:
            continue
        state[node] = 2
        values[node] = val
        rem = node
        idx = []
        for d in range(grid.dim):
            q = rem // strides[d]
            rem -= q * strides[d]
            idx.append(q)
        for d in range(grid.dim):
            for step in (-1, 1):
                j = idx[d] + step
                if j < 0 or j >= shape[d]:
                    continue
                nb = node + step * strides[d]
                if state[nb] == 2 or is_target[nb]:
                    continue
                cand = solve_local(nb)
                if cand < values[nb]:
                    values[nb] = cand
                    heapq.heappush(heap, (cand, int(nb)))
                    state[nb] = 1

    roles = np.where(is_target, TARGET, INTERIOR).astype(np.int8)
    meta = {"scheme": "fast_marching", "target_tolerance": tol}
    return ValueField(grid, values.reshape(shape), roles.reshape(shape), meta)


# ---------------------------------------------------------------------------
# estimator wrappers


class _GridEstimator(BaseEstimator):
    def _grid(self) -> Grid:
        return Grid.regular(self.lower, self.upper, self.nodes)

    def _check_fitted(self):
        if not hasattr(self, "field_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        """Interpolated value-function estimates at query states ``X``
        of shape ``(n_samples, state_dim)``."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return np.asarray(interpolate(self.field_, X))


class SemiLagrangianSolver(_GridEstimator):
    """Estimator facade over :func:`solve_value_iteration`.

    ``fit(problem)`` computes the value field on the configured grid;
    ``predict(X)`` interpolates it at query states.
    """

    def __init__(
        self,
        lower=(-1.0, -1.0),
        upper=(1.0, 1.0),
        nodes=101,
        tolerance=1e-8,
        max_sweeps=None,
        boundary_mode="outflow_large",
        jacobi=False,
    ):
        self.lower = lower
        self.upper = upper
        self.nodes = nodes
        self.tolerance = tolerance
        self.max_sweeps = max_sweeps
        self.boundary_mode = boundary_mode
        self.jacobi = jacobi

    def fit(self, X: ControlProblem, y=None):
        if not isinstance(X, ControlProblem):
            raise TypeError("fit expects a ControlProblem")
        params = SolverParams(
            tolerance=self.tolerance,
            max_sweeps=self.max_sweeps,
            boundary_mode=self.boundary_mode,
            jacobi=self.jacobi,
        )
        self.field_ = solve_value_iteration(X, self._grid(), params)
        self.values_ = self.field_.values
        self.n_sweeps_ = self.field_.meta["sweeps"]
        self.last_update_ = self.field_.meta["last_update"]
        return self


class FastMarchingSolver(_GridEstimator):
    """Estimator facade over :func:`solve_fast_marching` for isotropic
    problems (unit-ball velocity dynamics, control-independent cost rate).

    ``fit`` validates that structure by sampling before extracting the
    gradient-norm right-hand side ``rho(x) = lagrangian(x, a)``.
    """

    def __init__(self, lower=(-1.0, -1.0), upper=(1.0, 1.0), nodes=101):
        self.lower = lower
        self.upper = upper
        self.nodes = nodes

    def fit(self, X: ControlProblem, y=None):
        if not isinstance(X, ControlProblem):
            raise TypeError("fit expects a ControlProblem")
        problem = X
        grid = self._grid()
        controls = problem.controls.enumerate()
        probe = grid.points()[:: max(1, grid.n_nodes // 64)]
        a0 = controls[np.argmax(np.linalg.norm(controls, axis=1))]
        for a in controls[:: max(1, len(controls) // 8)]:
            f = np.asarray(problem.dynamics(probe, a), dtype=float)
            if not np.allclose(f, np.broadcast_to(a, f.shape), atol=1e-12):
                raise ValueError("fast marching requires velocity dynamics f(x, a) = a")
            l = np.asarray(problem.lagrangian(probe, a), dtype=float)
            l0 = np.asarray(problem.lagrangian(probe, a0), dtype=float)
            if not np.allclose(l, l0, atol=1e-12):
                raise ValueError("fast marching requires a control-independent cost rate")
        if abs(np.linalg.norm(a0) - 1.0) > 1e-9:
            raise ValueError("fast marching requires unit-ball controls")
        self.field_ = solve_fast_marching(
            lambda x: np.asarray(problem.lagrangian(x, a0), dtype=float),
            problem.target,
            grid,
            exit_cost=problem.exit_cost,
        )
        self.values_ = self.field_.values
        return self
