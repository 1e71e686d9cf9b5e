"""Exit-time control problem data: dynamics, running cost, target, control set.

A problem is pure evaluatable data.  Evaluators are numpy-vectorized over
states: ``dynamics(x, a)`` and ``lagrangian(x, a)`` accept a state array of
shape ``(state_dim,)`` or ``(n, state_dim)`` together with a single control
vector ``a`` of shape ``(control_dim,)``, and broadcast accordingly.  All
types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "ControlProblem",
    "ControlSet",
    "TargetSet",
    "MalformedProblemError",
    "InvariantViolation",
    "eval_dynamics",
    "eval_lagrangian",
    "enumerate_controls",
    "sample_problem_invariants",
]


class MalformedProblemError(ValueError):
    """An evaluator produced non-finite or mis-shaped output."""


class InvariantViolation(ValueError):
    """Problem data violates a structural invariant (e.g. negative running cost)."""


# ---------------------------------------------------------------------------
# control sets


@dataclass(frozen=True)
class ControlSet:
    """Compact control set, either an explicit list or a sampled box.

    ``kind`` is ``"finite"`` or ``"box"``.  For a box, ``lower``/``upper``
    are the corners and ``samples_per_axis`` the tensor sampling counts
    (both endpoints included).  A ``ball_radius`` turns the box samples
    into a surrogate for a norm ball: samples outside the ball are clipped
    radially onto the sphere and exact duplicates dropped, so boundary
    directions stay represented.
    """

    kind: str
    control_dim: int
    values: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    samples_per_axis: tuple[int, ...] | None = None
    ball_radius: float | None = None

    @staticmethod
    def finite(values) -> "ControlSet":
        arr = np.atleast_2d(np.asarray(values, dtype=float))
        if arr.size == 0:
            raise InvariantViolation("control set must be nonempty")
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation("finite control set has non-finite entries")
        arr = arr.copy()
        arr.setflags(write=False)
        return ControlSet(kind="finite", control_dim=arr.shape[1], values=arr)

    @staticmethod
    def box(lower, upper, samples_per_axis, ball_radius: float | None = None) -> "ControlSet":
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.shape != hi.shape:
            raise InvariantViolation("box corners must share a shape")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvariantViolation("box control set must be bounded")
        if np.any(hi < lo):
            raise InvariantViolation("box upper corner below lower corner")
        if np.isscalar(samples_per_axis) or np.ndim(samples_per_axis) == 0:
            samples = (int(samples_per_axis),) * lo.size
        else:
            samples = tuple(int(s) for s in samples_per_axis)
        if len(samples) != lo.size or any(s < 1 for s in samples):
            raise InvariantViolation("bad samples_per_axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        return ControlSet(
            kind="box",
            control_dim=lo.size,
            lower=lo,
            upper=hi,
            samples_per_axis=samples,
            ball_radius=None if ball_radius is None else float(ball_radius),
        )

    def enumerate(self) -> np.ndarray:
        """Deterministic ``(n_controls, control_dim)`` array of control vectors."""
        if self.kind == "finite":
            return np.asarray(self.values)
        axes = [
            np.linspace(self.lower[d], self.upper[d], self.samples_per_axis[d])
            for d in range(self.control_dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        if self.ball_radius is not None:
            norms = np.linalg.norm(grid, axis=1)
            outside = norms > self.ball_radius
            scale = np.ones_like(norms)
            scale[outside] = self.ball_radius / norms[outside]
            grid = grid * scale[:, None]
            grid = np.unique(grid, axis=0)
        return grid


def enumerate_controls(control_set: ControlSet) -> np.ndarray:
    return control_set.enumerate()


# ---------------------------------------------------------------------------
# target sets


@dataclass(frozen=True)
class TargetSet:
    """Closed nonempty target, addressed through a distance function.

    ``contains(x)`` holds exactly when ``distance(x) <= tolerance``.
    Shapes:

    * ``points``: finite union of points (distance = nearest Euclidean).
    * ``half_line``: ray ``anchor + t * direction``, ``t >= 0``.
    * ``complement_ball``: everything at least ``radius`` away from
      ``center`` (distance = ``max(0, radius - |x - center|)``).
    * ``implicit``: caller-supplied distance evaluator (must be >= 0).
    """

    shape: str
    dim: int
    tolerance: float = 0.0
    points: np.ndarray | None = None
    anchor: np.ndarray | None = None
    direction: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    distance_fn: Callable[[np.ndarray], np.ndarray] | None = None

    @staticmethod
    def from_points(points, tolerance: float = 0.0) -> "TargetSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        pts.setflags(write=False)
        return TargetSet(shape="points", dim=pts.shape[1], tolerance=float(tolerance), points=pts)

    @staticmethod
    def half_line(anchor, direction, tolerance: float = 0.0) -> "TargetSet":
        a = np.atleast_1d(np.asarray(anchor, dtype=float))
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        n = np.linalg.norm(d)
        if n == 0:
            raise InvariantViolation("half-line direction must be nonzero")
        d = d / n
        a.setflags(write=False)
        d.setflags(write=False)
        return TargetSet(shape="half_line", dim=a.size, tolerance=float(tolerance), anchor=a, direction=d)

    @staticmethod
    def complement_ball(center, radius: float, tolerance: float = 0.0) -> "TargetSet":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        c.setflags(write=False)
        return TargetSet(
            shape="complement_ball", dim=c.size, tolerance=float(tolerance), center=c, radius=float(radius)
        )

    @staticmethod
    def implicit(dim: int, distance_fn, tolerance: float = 0.0) -> "TargetSet":
        return TargetSet(shape="implicit", dim=int(dim), tolerance=float(tolerance), distance_fn=distance_fn)

    def distance(self, x) -> np.ndarray | float:
        """Nonnegative distance to the target; vectorized over leading axes."""
        pts = np.asarray(x, dtype=float)
        scalar = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if self.shape == "points":
            diffs = pts[:, None, :] - self.points[None, :, :]
            d = np.linalg.norm(diffs, axis=2).min(axis=1)
        elif self.shape == "half_line":
            rel = pts - self.anchor
            t = np.clip(rel @ self.direction, 0.0, None)
            foot = self.anchor + t[:, None] * self.direction
            d = np.linalg.norm(pts - foot, axis=1)
        elif self.shape == "complement_ball":
            d = np.clip(self.radius - np.linalg.norm(pts - self.center, axis=1), 0.0, None)
        else:
            d = np.asarray(self.distance_fn(pts), dtype=float).reshape(pts.shape[0])
        return float(d[0]) if scalar else d

    def contains(self, x) -> np.ndarray | bool:
        d = self.distance(x)
        return d <= self.tolerance

    def with_tolerance(self, tolerance: float) -> "TargetSet":
        from dataclasses import replace

        return replace(self, tolerance=float(tolerance))


# ---------------------------------------------------------------------------
# the problem itself


@dataclass(frozen=True)
class ControlProblem:
    """Data of an exit-time problem: minimize integrated running cost until
    the state first enters the target, plus an optional exit cost there.

    ``lipschitz_hint`` is a declared bound on the state-Lipschitz constant of
    the dynamics, used only for step-size heuristics; it is sanity-checked by
    sampling, never verified globally.
    """

    state_dim: int
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lagrangian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    target: TargetSet
    controls: ControlSet
    exit_cost: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz_hint: float = 1.0
    metadata: Mapping = field(default_factory=dict)

    def eval_exit_cost(self, x) -> np.ndarray | float:
        if self.exit_cost is None:
            pts = np.asarray(x, dtype=float)
            return 0.0 if pts.ndim == 1 else np.zeros(pts.shape[0])
        return self.exit_cost(np.asarray(x, dtype=float))


def eval_dynamics(problem: ControlProblem, x, a) -> np.ndarray:
    """Evaluate the state velocity f(x, a), rejecting non-finite output."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    out = np.asarray(problem.dynamics(x, a), dtype=float)
    if out.shape[-1] != problem.state_dim:
        raise MalformedProblemError(
            f"dynamics returned shape {out.shape}, expected trailing dim {problem.state_dim}"
        )
    if not np.all(np.isfinite(out)):
        raise MalformedProblemError("dynamics produced non-finite values")
    return out


def eval_lagrangian(problem: ControlProblem, x, a) -> np.ndarray | float:
    """Evaluate the running cost rate, aborting on a negative value."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    out = np.asarray(problem.lagrangian(x, a), dtype=float)
    if not np.all(np.isfinite(out)):
        raise MalformedProblemError("lagrangian produced non-finite values")
    if np.any(out < 0):
        worst = float(np.min(out))
        raise InvariantViolation(f"running cost is negative (min sampled value {worst:g})")
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# sampling-based validity checks


def sample_problem_invariants(
    problem: ControlProblem,
    box_lower,
    box_upper,
    n_samples: int = 100_000,
    n_target_probes: int = 10_000,
    seed: int = 0,
) -> dict:
    """Spot-check a problem instance by sampling.

    Checks running-cost nonnegativity and evaluator determinism on random
    (state, control) pairs, target distance/contains consistency on random
    probes, and that the target is nonempty.  A sampled dynamics difference
    quotient exceeding ``lipschitz_hint`` by more than 10% triggers a
    warning, not an error.
    """
    rng = np.random.default_rng(seed)
    lo = np.atleast_1d(np.asarray(box_lower, dtype=float))
    hi = np.atleast_1d(np.asarray(box_upper, dtype=float))
    controls = problem.controls.enumerate()

    states = rng.uniform(lo, hi, size=(n_samples, problem.state_dim))
    picks = rng.integers(0, len(controls), size=n_samples)
    min_cost = np.inf
    for ci in range(len(controls)):
        mask = picks == ci
        if not np.any(mask):
            continue
        cost = eval_lagrangian(problem, states[mask], controls[ci])
        min_cost = min(min_cost, float(np.min(cost)))

    # determinism: re-evaluation at identical inputs must be bit-identical
    probe_x = states[: min(64, n_samples)]
    a0 = controls[0]
    f1 = eval_dynamics(problem, probe_x, a0)
    f2 = eval_dynamics(problem, probe_x, a0)
    l1 = np.asarray(eval_lagrangian(problem, probe_x, a0))
    l2 = np.asarray(eval_lagrangian(problem, probe_x, a0))
    deterministic = np.array_equal(f1, f2) and np.array_equal(l1, l2)
    if not deterministic:
        raise InvariantViolation("evaluators are not deterministic")

    probes = rng.uniform(lo, hi, size=(n_target_probes, problem.state_dim))
    dist = problem.target.distance(probes)
    if np.any(dist < 0):
        raise InvariantViolation("target distance is negative somewhere")
    contains = problem.target.contains(probes)
    if not np.array_equal(contains, dist <= problem.target.tolerance):
        raise InvariantViolation("contains() disagrees with distance() <= tolerance")

    # target nonempty: some probe (or a shape-derived witness) at distance 0
    nonempty = bool(np.any(dist <= problem.target.tolerance))
    if not nonempty:
        witness = None
        if problem.target.shape == "points":
            witness = problem.target.points[0]
        elif problem.target.shape == "half_line":
            witness = problem.target.anchor
        elif problem.target.shape == "complement_ball":
            witness = problem.target.center + np.eye(problem.state_dim)[0] * (
                problem.target.radius + 1.0
            )
        if witness is not None:
            nonempty = float(problem.target.distance(witness)) <= problem.target.tolerance
        else:
            warnings.warn(
                "no sampled probe landed in the implicit target; cannot certify it nonempty",
                stacklevel=2,
            )
            nonempty = True
    if not nonempty:
        raise InvariantViolation("target appears empty: no probe point at distance 0")

    # Lipschitz hint sanity: sampled difference quotients of f
    m = min(4096, n_samples - 1)
    xa = states[:m]
    xb = xa + rng.normal(scale=1e-3, size=xa.shape)
    worst_ratio = 0.0
    for ci in range(min(len(controls), 8)):
        fa = eval_dynamics(problem, xa, controls[ci])
        fb = eval_dynamics(problem, xb, controls[ci])
        num = np.linalg.norm(fa - fb, axis=1)
        den = np.linalg.norm(xa - xb, axis=1)
        ok = den > 0
        if np.any(ok):
            worst_ratio = max(worst_ratio, float(np.max(num[ok] / den[ok])))
    if worst_ratio > 1.1 * problem.lipschitz_hint:
        warnings.warn(
            f"sampled dynamics difference quotient {worst_ratio:.3g} exceeds "
            f"lipschitz_hint {problem.lipschitz_hint:g} by more than 10%",
            stacklevel=2,
        )

    return {
        "min_sampled_cost": min_cost,
        "deterministic": deterministic,
        "target_nonempty": nonempty,
        "max_sampled_lipschitz": worst_ratio,
    }
