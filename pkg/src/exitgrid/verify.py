"""Numerical certification of candidate value fields.

The checks are grid-consistent necessary conditions, not proofs: a discrete
Hamiltonian residual with per-control upwind differencing, the side
condition (bounded from below, exit cost on the target), pointwise
sub/superdifferential probes, and trajectory-based inequality checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .dynamics import ControlSignal, constant_signal, integrate, piecewise_signal
from .grids import INTERIOR, LARGE, TARGET, ValueField, interpolate
from .problems import ControlProblem

__all__ = [
    "ResidualReport",
    "SideConditionReport",
    "ProbeResult",
    "TrajectoryCheck",
    "DimensionMismatchError",
    "ProbeOutOfGridError",
    "hjb_residual",
    "check_side_condition",
    "pointwise_viscosity_probe",
    "trajectory_inequality_check",
]


class DimensionMismatchError(ValueError):
    pass


class ProbeOutOfGridError(ValueError):
    pass


@dataclass
class SideConditionReport:
    min_value: float
    min_witness: np.ndarray | None
    bounded_below_pass: bool
    target_max_abs: float
    target_witness: np.ndarray | None
    target_pass: bool
    lower_bound_threshold: float


@dataclass
class ResidualReport:
    """Per-node discrete Hamiltonian residual r(x) = max_a{-f.Dw - l} with
    summary statistics over evaluated interior off-target nodes."""

    field: ValueField
    per_node: np.ndarray
    valid_mask: np.ndarray
    max_abs_residual: float
    mean_abs_residual: float
    worst_node: np.ndarray | None
    n_evaluated: int
    target_margin: float
    side_condition: SideConditionReport | None = None

    def recompute_summary(self) -> tuple[float, float]:
        vals = np.abs(self.per_node[self.valid_mask])
        if vals.size == 0:
            return 0.0, 0.0
        return float(np.max(vals)), float(np.mean(vals))


def _one_sided_slopes(values: np.ndarray, h: np.ndarray, sentinel_cut: float):
    """Forward/backward difference quotients per axis with availability masks.

    A slope is available only when its two stencil values are finite and
    below the sentinel scale (boundary sentinels are not field samples).
    """
    dim = values.ndim
    ok = np.isfinite(values) & (np.abs(values) < sentinel_cut)
    fwd, bwd, fwd_ok, bwd_ok = [], [], [], []
    for d in range(dim):
        f = np.empty_like(values)
        b = np.empty_like(values)
        fo = np.zeros(values.shape, dtype=bool)
        bo = np.zeros(values.shape, dtype=bool)
        sl_all = [slice(None)] * dim
        lo, hi = sl_all.copy(), sl_all.copy()
        lo[d] = slice(None, -1)
        hi[d] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        f[lo] = (values[hi] - values[lo]) / h[d]
        fo[lo] = ok[hi] & ok[lo]
        b[hi] = (values[hi] - values[lo]) / h[d]
        bo[hi] = ok[hi] & ok[lo]
        edge = sl_all.copy()
        edge[d] = slice(-1, None)
        f[tuple(edge)] = 0.0
        edge[d] = slice(None, 1)
        b[tuple(edge)] = 0.0
        fwd.append(f)
        bwd.append(b)
        fwd_ok.append(fo)
        bwd_ok.append(bo)
    return fwd, bwd, fwd_ok, bwd_ok


def hjb_residual(
    w: ValueField,
    problem: ControlProblem,
    target_margin: float = 0.0,
    sentinel_cut: float = LARGE / 2,
    side_condition_threshold: float = -1e-9,
) -> ResidualReport:
    """Discrete Hamiltonian residual of a candidate field.

    For every control the directional derivative uses the one-sided
    difference per axis picked by the sign of the velocity component
    (Godunov upwinding); when that side's stencil touches a sentinel value
    the opposite side substitutes, and controls with no usable slope on a
    needed axis drop out of the max.  Residuals are evaluated at interior
    nodes off the target; ``target_margin > 0`` additionally excludes a
    fixed-width band around the target from the summary (difference
    quotients of curved fields carry O(h / distance) error there).
    """
    if w.grid.dim != problem.state_dim:
        raise DimensionMismatchError(
            f"field dim {w.grid.dim} != problem state dim {problem.state_dim}"
        )
    grid = w.grid
    values = w.values
    h = grid.spacing
    pts = grid.points()
    controls = problem.controls.enumerate()

    fwd, bwd, fwd_ok, bwd_ok = _one_sided_slopes(values, h, sentinel_cut)
    fwd = np.stack([a.ravel() for a in fwd], axis=1)
    bwd = np.stack([a.ravel() for a in bwd], axis=1)
    fwd_ok = np.stack([a.ravel() for a in fwd_ok], axis=1)
    bwd_ok = np.stack([a.ravel() for a in bwd_ok], axis=1)

    n = grid.n_nodes
    best = np.full(n, -np.inf)
    any_valid = np.zeros(n, dtype=bool)
    for a in controls:
        f = np.asarray(problem.dynamics(pts, a), dtype=float).reshape(n, grid.dim)
        l = np.asarray(problem.lagrangian(pts, a), dtype=float).reshape(n)
        term = -l
        valid = np.ones(n, dtype=bool)
        for d in range(grid.dim):
            fd = f[:, d]
            need = fd != 0.0
            prefer_fwd = fd > 0.0
            # preferred upwind side if available, else the other side, else invalid
            slope = np.where(prefer_fwd, fwd[:, d], bwd[:, d])
            avail = np.where(prefer_fwd, fwd_ok[:, d], bwd_ok[:, d])
            alt_slope = np.where(prefer_fwd, bwd[:, d], fwd[:, d])
            alt_avail = np.where(prefer_fwd, bwd_ok[:, d], fwd_ok[:, d])
            slope = np.where(avail, slope, alt_slope)
            got = avail | alt_avail
            valid &= ~need | got
            term = term - np.where(need & got, fd * slope, 0.0)
        best = np.where(valid & (term > best), term, best)
        any_valid |= valid

    roles = w.roles.ravel()
    node_ok = np.isfinite(values.ravel()) & (np.abs(values.ravel()) < sentinel_cut)
    mask = (roles == INTERIOR) & any_valid & node_ok
    if target_margin > 0:
        mask &= np.asarray(problem.target.distance(pts)) > target_margin

    per_node = np.where(mask, best, np.nan).reshape(grid.shape)
    if np.any(mask):
        absr = np.abs(best[mask])
        max_abs = float(np.max(absr))
        mean_abs = float(np.mean(absr))
        worst_flat = np.flatnonzero(mask)[int(np.argmax(absr))]
        worst = pts[worst_flat]
    else:
        max_abs, mean_abs, worst = 0.0, 0.0, None

    sc = check_side_condition(w, side_condition_threshold, exit_cost=problem.exit_cost,
                              sentinel_cut=sentinel_cut)
    return ResidualReport(
        field=w,
        per_node=per_node,
        valid_mask=mask.reshape(grid.shape),
        max_abs_residual=max_abs,
        mean_abs_residual=mean_abs,
        worst_node=worst,
        n_evaluated=int(np.sum(mask)),
        target_margin=float(target_margin),
        side_condition=sc,
    )


def check_side_condition(
    w: ValueField,
    lower_bound_threshold: float,
    exit_cost=None,
    target_value_tol: float = 1e-9,
    sentinel_cut: float = LARGE / 2,
) -> SideConditionReport:
    """Bounded-from-below and on-target value checks with witnesses.

    Sentinel-magnitude entries (boundary/unreachable markers) are not field
    values and are ignored by the minimum.
    """
    values = w.values.ravel()
    roles = w.roles.ravel()
    pts = w.grid.points()
    finite = np.isfinite(values) & (np.abs(values) < sentinel_cut)
    if np.any(finite):
        idx = int(np.flatnonzero(finite)[np.argmin(values[finite])])
        min_value = float(values[idx])
        min_witness = pts[idx]
    else:
        min_value, min_witness = np.inf, None

    t_mask = (roles == TARGET) & np.isfinite(values)
    if np.any(t_mask):
        g = np.zeros(int(np.sum(t_mask))) if exit_cost is None else np.asarray(
            exit_cost(pts[t_mask]), dtype=float
        )
        dev = np.abs(values[t_mask] - g)
        j = int(np.argmax(dev))
        target_max_abs = float(dev[j])
        target_witness = pts[np.flatnonzero(t_mask)[j]]
    else:
        target_max_abs, target_witness = np.inf, None

    return SideConditionReport(
        min_value=min_value,
        min_witness=min_witness,
        bounded_below_pass=bool(min_value >= lower_bound_threshold),
        target_max_abs=target_max_abs,
        target_witness=target_witness,
        target_pass=bool(target_max_abs <= target_value_tol),
        lower_bound_threshold=float(lower_bound_threshold),
    )


# ---------------------------------------------------------------------------
# pointwise sub/superdifferential probes


@dataclass
class ProbeResult:
    sub_ok: bool
    super_ok: bool
    superdifferential_candidates: list = dataclass_field(default_factory=list)
    subdifferential_candidates: list = dataclass_field(default_factory=list)
    tol: float = 0.0
    central_gradient: np.ndarray | None = None


def _hamiltonian(problem: ControlProblem, x: np.ndarray, p: np.ndarray) -> float:
    controls = problem.controls.enumerate()
    best = -np.inf
    for a in controls:
        f = np.asarray(problem.dynamics(x[None, :], a), dtype=float)[0]
        l = float(np.asarray(problem.lagrangian(x[None, :], a)).reshape(-1)[0])
        best = max(best, float(-f @ p - l))
    return best


def pointwise_viscosity_probe(
    w: ValueField,
    problem: ControlProblem,
    node,
    probe_radius: float | None = None,
    tol: float | None = None,
) -> ProbeResult:
    """Probe the viscosity inequalities at one interior node.

    One-sided difference quotients over the probe neighborhood generate
    candidate sub/superdifferential vectors (all sign combinations of the
    axis-wise slopes, i.e. the hull vertices of the slope box, plus its
    centroid since the Hamiltonian's hull minimum can sit inside).  A kinked
    axis (forward and backward slopes split beyond ``tol``) routes its slope
    pair to the sub- or superdifferential by convexity direction; at smooth
    nodes both sets collapse to the central gradient.  ``sub_ok`` requires
    ``H <= tol`` on the superdifferential candidates, ``super_ok`` requires
    ``H >= -tol`` on the subdifferential candidates; empty sets pass
    vacuously (report the candidate lists to see which side was tested).
    """
    grid = w.grid
    idx = np.asarray(node)
    if idx.dtype.kind == "f":
        idx = np.round((idx - grid.lower) / grid.spacing).astype(int)
    idx = idx.astype(int)
    h = grid.spacing
    if probe_radius is None:
        steps = np.ones(grid.dim, dtype=int)
    else:
        steps = np.maximum(1, np.round(probe_radius / h).astype(int))
    for d in range(grid.dim):
        if idx[d] - steps[d] < 0 or idx[d] + steps[d] > grid.shape[d] - 1:
            raise ProbeOutOfGridError(f"probe neighborhood leaves the grid on axis {d}")

    v0 = w.values[tuple(idx)]
    fwd = np.empty(grid.dim)
    bwd = np.empty(grid.dim)
    for d in range(grid.dim):
        up = idx.copy()
        up[d] += steps[d]
        dn = idx.copy()
        dn[d] -= steps[d]
        span = steps[d] * h[d]
        fwd[d] = (w.values[tuple(up)] - v0) / span
        bwd[d] = (v0 - w.values[tuple(dn)]) / span

    lip = float(max(np.max(np.abs(fwd)), np.max(np.abs(bwd))))
    if tol is None:
        tol = 10.0 * float(np.max(h)) * lip
    central = 0.5 * (fwd + bwd)

    convex = fwd > bwd + tol
    concave = fwd < bwd - tol
    x = grid.node_coords(idx)

    def candidates(which: str) -> list:
        axis_sets = []
        for d in range(grid.dim):
            if convex[d]:
                if which == "sub":
                    axis_sets.append((bwd[d], fwd[d]))
                else:
                    return []
            elif concave[d]:
                if which == "super":
                    axis_sets.append((fwd[d], bwd[d]))
                else:
                    return []
            else:
                axis_sets.append((central[d],))
        out = [np.array(combo) for combo in _product(axis_sets)]
        if len(out) > 1:
            out.append(np.mean(out, axis=0))
        return out

    sub_diff = candidates("sub")  # candidate subdifferential vectors
    super_diff = candidates("super")  # candidate superdifferential vectors

    super_ok = all(_hamiltonian(problem, x, p) >= -tol for p in sub_diff)
    sub_ok = all(_hamiltonian(problem, x, p) <= tol for p in super_diff)
    return ProbeResult(
        sub_ok=sub_ok,
        super_ok=super_ok,
        superdifferential_candidates=super_diff,
        subdifferential_candidates=sub_diff,
        tol=tol,
        central_gradient=central,
    )


def _product(axis_sets):
    if not axis_sets:
        return [()]
    rest = _product(axis_sets[1:])
    return [(v,) + r for v in axis_sets[0] for r in rest]


# ---------------------------------------------------------------------------
# trajectory-based inequality checks


@dataclass
class TrajectoryCheck:
    upper_ok: bool
    upper_slack: float
    lower_ok: bool
    lower_slack: float
    horizon_used: float
    best_signal: str


def trajectory_inequality_check(
    w: ValueField,
    problem: ControlProblem,
    x0,
    signal: ControlSignal,
    horizon: float,
    dt: float | None = None,
    n_switch_times: int = 3,
    family_cap: int = 64,
    tol: float = 1e-9,
    seed: int = 0,
) -> TrajectoryCheck:
    """Check the one-step value inequalities along trajectories.

    Upper check: ``w(x0) <= cost(signal) + w(end)`` for the given signal.
    Lower check: ``w(x0) >= min over a family`` of the same expression, the
    family being constant signals plus piecewise-constant ones with up to
    ``n_switch_times`` equispaced switches over the enumerated controls
    (capped at ``family_cap`` sequences, seeded).  Raises
    :class:`~exitgrid.grids.OutOfGridError` if a trajectory leaves the hull.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if dt is None:
        dt = horizon / 256.0
    w0 = float(interpolate(w, x0))

    traj = integrate(problem, x0, signal, dt, horizon)
    upper_rhs = traj.final_cost + float(interpolate(w, traj.final_state))
    upper_slack = upper_rhs - w0

    controls = problem.controls.enumerate()
    rng = np.random.default_rng(seed)
    family: list[ControlSignal] = [constant_signal(a) for a in controls]
    for k in range(1, n_switch_times + 1):
        times = horizon * np.arange(1, k + 1) / (k + 1)
        n_seq = len(controls) ** (k + 1)
        if n_seq <= family_cap:
            seqs = _all_sequences(len(controls), k + 1)
        else:
            seqs = [tuple(rng.integers(0, len(controls), size=k + 1)) for _ in range(family_cap)]
        for seq in seqs:
            family.append(piecewise_signal(times, [controls[j] for j in seq]))

    best = np.inf
    best_desc = ""
    for sig in family:
        t = integrate(problem, x0, sig, dt, horizon)
        val = t.final_cost + float(interpolate(w, t.final_state))
        if val < best:
            best = val
            best_desc = sig.describe()
    lower_slack = w0 - best

    return TrajectoryCheck(
        upper_ok=bool(w0 <= upper_rhs + tol),
        upper_slack=float(upper_slack),
        lower_ok=bool(w0 >= best - tol),
        lower_slack=float(lower_slack),
        horizon_used=float(traj.times[-1]),
        best_signal=best_desc,
    )


def _all_sequences(n: int, length: int):
    if length == 0:
        return [()]
    rest = _all_sequences(n, length - 1)
    return [(j,) + r for j in range(n) for r in rest]
