"""Sampled evidence for the positivity and affordability hypotheses.

The positivity hypothesis asks that any positive-duration run starting off
the target accrue strictly positive cost; the affordability hypothesis asks
that finite-total-cost controls keep the state bounded.  Both are
semi-decidable by sampling, so these probes report evidence, never proofs:
verdicts are VIOLATION_FOUND / NO_VIOLATION_FOUND for the first and
DIVERGENT / FINITE_LIMIT for the second.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .dynamics import BLOWUP_GUARD, BlowupError, ControlSignal, Trajectory, _rk4_step, integrate_batch
from .problems import ControlProblem

__all__ = [
    "H5Violation",
    "H5Report",
    "EscapeResult",
    "H6Report",
    "NotMKError",
    "BarbalatReport",
    "check_h5_sampled",
    "replay_violation",
    "check_h6_escape",
    "barbalat_diagnostic",
]

ZERO_COST = 1e-12


class NotMKError(ValueError):
    """Comparison function fails the even/increasing/zero-at-zero shape."""


@dataclass
class H5Violation:
    x0: np.ndarray
    signal_desc: str
    piece_indices: np.ndarray
    horizon: float
    cost: float


@dataclass
class H5Report:
    samples: int
    n_states: int
    n_signals: int
    horizon: float
    min_positive_cost: float
    violations: list[H5Violation] = dataclass_field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "VIOLATION_FOUND" if self.violations else "NO_VIOLATION_FOUND"


def check_h5_sampled(
    problem: ControlProblem,
    n_states: int,
    n_signals: int,
    horizon: float,
    box=None,
    seed: int = 0,
    n_steps: int = 128,
    n_pieces: int = 4,
    probe_states=None,
) -> H5Report:
    """Probe for zero-cost positive-duration runs starting off the target.

    States are drawn uniformly from ``box`` (instance default) and filtered
    off the target; instance-registered probe states (e.g. roots of a
    degenerate cost rate) are appended deterministically, since random draws
    almost surely miss measure-zero stall sets.  Signals are the constant
    enumerated controls first, then seeded piecewise-constant draws.  A
    violation is a run with cost below 1e-12 that never entered the target.
    """
    rng = np.random.default_rng(seed)
    if box is None:
        box = problem.metadata.get("box")
        if box is None:
            raise ValueError("no sampling box given and none registered on the instance")
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if probe_states is None:
        probe_states = problem.metadata.get("h5_probe_states", [])

    states: list[np.ndarray] = []
    while len(states) < n_states:
        draw = rng.uniform(lo, hi, size=(max(16, n_states), problem.state_dim))
        outside = ~np.asarray(problem.target.contains(draw), dtype=bool)
        for row in draw[outside]:
            states.append(row)
            if len(states) == n_states:
                break
    for p in probe_states:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if not bool(problem.target.contains(p)):
            states.append(p)
    x_states = np.array(states)

    controls = problem.controls.enumerate()
    m = len(controls)
    sig_idx = np.empty((n_signals, n_pieces), dtype=np.int64)
    n_const = min(n_signals, m)
    for j in range(n_const):
        sig_idx[j, :] = j
    if n_signals > n_const:
        sig_idx[n_const:] = rng.integers(0, m, size=(n_signals - n_const, n_pieces))

    n_total_states = len(x_states)
    x0 = np.repeat(x_states, n_signals, axis=0)
    piece_idx = np.tile(sig_idx, (n_total_states, 1))

    costs, entered, _ = integrate_batch(problem, x0, piece_idx, controls, horizon, n_steps)

    violations = []
    bad = (costs < ZERO_COST) & ~entered
    for i in np.flatnonzero(bad):
        pieces = piece_idx[i]
        desc = "constant {}".format(controls[pieces[0]]) if np.all(pieces == pieces[0]) else \
            "piecewise idx {}".format(list(pieces))
        violations.append(
            H5Violation(
                x0=x0[i].copy(),
                signal_desc=desc,
                piece_indices=pieces.copy(),
                horizon=horizon,
                cost=float(costs[i]),
            )
        )
    positive = costs[~bad & ~entered]
    min_positive = float(np.min(positive)) if positive.size else np.inf
    return H5Report(
        samples=len(x0),
        n_states=n_total_states,
        n_signals=n_signals,
        horizon=horizon,
        min_positive_cost=min_positive,
        violations=violations,
    )


def replay_violation(
    problem: ControlProblem, violation: H5Violation, n_steps: int = 128
) -> float:
    """Re-simulate a recorded violation; returns the replayed cost."""
    controls = problem.controls.enumerate()
    costs, entered, _ = integrate_batch(
        problem,
        violation.x0[None, :],
        violation.piece_indices[None, :],
        controls,
        violation.horizon,
        n_steps,
    )
    return float(costs[0])


# ---------------------------------------------------------------------------
# escape families and the affordability probe


@dataclass
class EscapeResult:
    name: str
    horizons: np.ndarray
    costs: np.ndarray
    exponent: float
    verdict: str
    limit_estimate: float | None
    tail_bound: float | None
    blowup: bool
    samples_t: np.ndarray
    samples_x: np.ndarray


@dataclass
class H6Report:
    families: list[EscapeResult]


def _integrate_window(problem, x, cost, t0, t1, signal, n_steps, keep_every):
    dt = (t1 - t0) / n_steps
    ts, xs = [], []
    t = t0
    for k in range(n_steps):
        x, cost = _rk4_step(problem, signal, t, x, cost, dt)
        t = t0 + (k + 1) * dt
        if np.linalg.norm(x) > BLOWUP_GUARD:
            raise BlowupError(t)
        if (k + 1) % keep_every == 0:
            ts.append(t)
            xs.append(x.copy())
    return x, cost, t, ts, xs


def check_h6_escape(
    problem: ControlProblem,
    families=None,
    horizons=None,
    steps_per_segment: int = 4096,
    keep_every: int = 256,
    slope_threshold: float = 0.05,
) -> H6Report:
    """Tabulate escape-run cost against horizon for each registered family.

    Horizons must increase; integration continues across segments so early
    segments resolve the short-time behavior.  The growth exponent is the
    log-log slope over the top horizons.  A family is DIVERGENT when that
    slope stays positive, FINITE_LIMIT when the slope collapses and the
    family's monotone majorant gives a finite tail (the limit estimate is
    the last cost plus half the tail bound; truncation alone cannot separate
    slow divergence from convergence).
    """
    if families is None:
        families = problem.metadata.get("escape_families", [])
    if horizons is None:
        horizons = [10.0**k for k in range(0, 7)]
    horizons = np.asarray(sorted(horizons), dtype=float)
    if np.any(np.diff(horizons) <= 0):
        raise ValueError("horizons must be strictly increasing")

    results = []
    for fam in families:
        x = np.atleast_1d(np.asarray(fam["x0"], dtype=float)).copy()
        signal: ControlSignal = fam["signal"]
        tail_fn = fam.get("majorant_tail")
        cost = 0.0
        t = 0.0
        costs = []
        all_t, all_x = [0.0], [x.copy()]
        blowup = False
        for T in horizons:
            try:
                x, cost, t, ts, xs = _integrate_window(
                    problem, x, cost, t, T, signal, steps_per_segment, keep_every
                )
            except BlowupError:
                blowup = True
                break
            all_t.extend(ts)
            all_x.extend(xs)
            costs.append(cost)
        costs = np.asarray(costs)
        hs = horizons[: len(costs)]

        if len(costs) >= 3 and np.all(costs[-3:] > 0):
            k = min(4, len(costs))
            exponent = float(np.polyfit(np.log(hs[-k:]), np.log(costs[-k:]), 1)[0])
        else:
            exponent = np.nan

        tail = float(tail_fn(hs[-1])) if (tail_fn is not None and len(hs)) else None
        if blowup:
            verdict = "DIVERGENT"
            limit = None
        elif tail is not None and np.isfinite(tail) and exponent < slope_threshold:
            verdict = "FINITE_LIMIT"
            limit = float(costs[-1] + tail / 2)
        elif exponent >= slope_threshold:
            verdict = "DIVERGENT"
            limit = None
        else:
            verdict = "FINITE_LIMIT" if exponent < slope_threshold else "DIVERGENT"
            limit = float(costs[-1]) if verdict == "FINITE_LIMIT" else None
        results.append(
            EscapeResult(
                name=fam.get("name", "family"),
                horizons=hs,
                costs=costs,
                exponent=exponent,
                verdict=verdict,
                limit_estimate=limit,
                tail_bound=tail,
                blowup=blowup,
                samples_t=np.asarray(all_t),
                samples_x=np.asarray(all_x),
            )
        )
    return H6Report(families=results)


# ---------------------------------------------------------------------------
# integral-vs-terminal consistency diagnostic


@dataclass
class BarbalatReport:
    integral: float
    terminal_abs: float
    consistent: bool
    diverged: bool


def barbalat_diagnostic(
    traj: Trajectory,
    g,
    coord: int = 0,
    integral_threshold: float = 1e3,
    terminal_tol: float = 1e-2,
    min_horizon: float = 100.0,
    validate: bool = True,
) -> BarbalatReport:
    """Check that a finite integral of g(coordinate) comes with a vanishing
    terminal coordinate (report-only).

    ``g`` must vanish at zero, be even, and be strictly increasing on the
    positive axis; this is validated by sampling and violations raise
    :class:`NotMKError`.  When the integral exceeds ``integral_threshold``
    the run is reported as diverged and no consistency claim is made.
    """
    T = float(traj.times[-1])
    if T < min_horizon:
        raise ValueError(f"trajectory horizon {T:g} below required {min_horizon:g}")
    phi = traj.states[:, coord]
    if validate:
        s_max = float(np.max(np.abs(phi))) + 1.0
        s = np.linspace(0.0, s_max, 33)
        gs = np.asarray([float(g(v)) for v in s])
        gneg = np.asarray([float(g(-v)) for v in s])
        if abs(gs[0]) > 1e-12:
            raise NotMKError("g(0) != 0")
        if np.max(np.abs(gs - gneg)) > 1e-9 * (1 + np.max(np.abs(gs))):
            raise NotMKError("g is not even")
        if np.any(np.diff(gs) <= 0):
            raise NotMKError("g is not strictly increasing on [0, inf)")
    vals = np.asarray([float(g(v)) for v in phi])
    integral = float(np.trapezoid(vals, traj.times))
    terminal = float(abs(phi[-1]))
    diverged = integral >= integral_threshold
    consistent = diverged or terminal < terminal_tol
    return BarbalatReport(
        integral=integral, terminal_abs=terminal, consistent=consistent, diverged=diverged
    )
