"""Canonical exit-time problem instances with reference data.

Each constructor returns a :class:`~exitgrid.problems.ControlProblem` whose
``metadata`` carries reference closed forms, suggested solve boxes, escape
families for the affordability probes, and states worth probing for
zero-cost stalls.  :func:`build_instance` resolves instances by name for the
CLI and tests.
"""

from __future__ import annotations

import numpy as np

from .dynamics import constant_signal, time_signal
from .problems import ControlProblem, ControlSet, TargetSet

__all__ = [
    "example1",
    "fuller",
    "eikonal",
    "sfs",
    "scalar_halfline",
    "build_instance",
    "INSTANCE_NAMES",
    "TargetContainsOriginError",
]


class TargetContainsOriginError(ValueError):
    """The chosen intensity vanishes at the origin, so the target must
    exclude it."""


# ---------------------------------------------------------------------------
# 1-D degenerate-cost instance with two certified fields

# running cost (x+2)^2 (x-2)^2 x^2 (x+1)^2 (x-1)^2, descending coefficients
COST_POLY = np.array([1.0, 0.0, -10.0, 0.0, 33.0, 0.0, -40.0, 0.0, 16.0, 0.0, 0.0])
COST_POLY_ANTIDERIVATIVE = np.polyint(COST_POLY)
ROOTS_OFF_ORIGIN = (-2.0, -1.0, 1.0, 2.0)


def cost_poly(x):
    return np.polyval(COST_POLY, np.asarray(x, dtype=float))


def cost_poly_integral(a, b):
    """Exact integral of the cost polynomial over [a, b]."""
    F = COST_POLY_ANTIDERIVATIVE
    return np.polyval(F, b) - np.polyval(F, a)


def path_cost_to_targets(x, targets):
    """Least absolute cost-polynomial integral from x to any of the targets
    (1-D motion at unit speed can follow either direction, cost is the
    straight-run integral since the integrand is nonnegative)."""
    x = np.asarray(x, dtype=float)
    best = np.full(x.shape, np.inf)
    for t in targets:
        best = np.minimum(best, np.abs(cost_poly_integral(t, x)))
    return best


def example1(target_choice: str = "T1", control_samples: int | None = None) -> ControlProblem:
    """Unit-speed 1-D motion with the degree-10 polynomial running cost.

    ``target_choice`` picks the target: "T1" = {0}, "T2" = {0, 2, -2}.  The
    cost vanishes at +-1 and +-2 as well, which is what lets two distinct
    bounded-from-below fields certify against the same equation off {0}.
    """
    if target_choice == "T1":
        targets = (0.0,)
    elif target_choice == "T2":
        targets = (0.0, 2.0, -2.0)
    else:
        raise ValueError(f"target_choice must be T1 or T2, got {target_choice!r}")

    if control_samples is None:
        controls = ControlSet.finite([[-1.0], [0.0], [1.0]])
    else:
        controls = ControlSet.box([-1.0], [1.0], control_samples)

    def dynamics(x, a):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(a, dtype=float), x.shape).copy()

    def lagrangian(x, a):
        x = np.asarray(x, dtype=float)
        return cost_poly(x[..., 0])

    tset = tuple(targets)
    return ControlProblem(
        state_dim=1,
        dynamics=dynamics,
        lagrangian=lagrangian,
        target=TargetSet.from_points([[t] for t in targets]),
        controls=controls,
        lipschitz_hint=1e-9,
        metadata={
            "name": "example1",
            "target_choice": target_choice,
            "box": ([-3.0], [3.0]),
            "reference_value": lambda x: path_cost_to_targets(np.asarray(x)[..., 0], tset),
            "h5_probe_states": [[r] for r in ROOTS_OFF_ORIGIN if r not in tset],
        },
    )


# ---------------------------------------------------------------------------
# double-integrator family with bang-bang penalty


def _bump(points, center, inner, outer):
    """Radial C^1 plateau bump: 1 inside radius ``inner``, 0 outside
    ``outer``, cubic smoothstep between."""
    r = np.linalg.norm(points - center, axis=-1)
    t = np.clip((r - inner) / max(outer - inner, 1e-300), 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def _check_even_increasing(g):
    s = np.linspace(0.0, 3.0, 25)
    vals = np.array([float(g(v)) for v in s])
    neg = np.array([float(g(-v)) for v in s])
    if abs(vals[0]) > 1e-12:
        raise ValueError("state cost shape must vanish at zero")
    if np.max(np.abs(vals - neg)) > 1e-9 * (1.0 + np.max(np.abs(vals))):
        raise ValueError("state cost shape must be even")
    if np.any(np.diff(vals) <= 0):
        raise ValueError("state cost shape must be strictly increasing on [0, inf)")


def fuller(
    k: float = 0.0,
    control_samples: int = 3,
    target_shift: float | None = None,
    state_cost=None,
) -> ControlProblem:
    """Double integrator ``(x1', x2') = (x2 - k*bump, a)`` with running cost
    ``g(x1) + k (1 - |a|)^2`` (``g`` squares by default) and target
    ``{(k, m)}`` with ``m = target_shift`` defaulting to ``k``.

    ``k = 0`` is the classical chattering problem.  For ``k > 0`` the bump
    (equal to 1 within k/4 of the target, 0 beyond k/2, hence zero on a
    neighborhood of the vertical axis) restores small-time controllability at
    the shifted target while the cost keeps penalizing controls that are not
    bang-bang.  A shifted target needs ``k != 0``; a custom ``g`` must vanish
    at zero, be even, and increase strictly on the positive axis (validated
    by sampling).
    """
    k = float(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if target_shift is not None and k == 0:
        raise ValueError("a shifted target needs k != 0")
    m = k if target_shift is None else float(target_shift)
    center = np.array([k, m])
    if state_cost is not None:
        _check_even_increasing(state_cost)

    def dynamics(x, a):
        x = np.asarray(x, dtype=float)
        a0 = float(np.atleast_1d(a)[0])
        drift = x[..., 1] - (k * _bump(x, center, k / 4, k / 2) if k > 0 else 0.0)
        out = np.empty(x.shape)
        out[..., 0] = drift
        out[..., 1] = a0
        return out

    def lagrangian(x, a):
        x = np.asarray(x, dtype=float)
        a0 = float(np.atleast_1d(a)[0])
        g1 = x[..., 0] ** 2 if state_cost is None else state_cost(x[..., 0])
        return g1 + k * (1.0 - abs(a0)) ** 2

    return ControlProblem(
        state_dim=2,
        dynamics=dynamics,
        lagrangian=lagrangian,
        target=TargetSet.from_points([center]),
        controls=ControlSet.box([-1.0], [1.0], control_samples),
        lipschitz_hint=1.0 if k == 0 else 1.0 + 8.0 / max(k, 1e-9),
        metadata={
            "name": "fuller",
            "k": k,
            "target_center": (k, m),
            "box": ([-1.0, -1.0], [1.0, 1.0]),
        },
    )


# ---------------------------------------------------------------------------
# degenerate gradient-norm (optics) family


def eikonal(p: float, target: TargetSet | None = None, ball_samples: int = 13) -> ControlProblem:
    """Unit-ball velocity controls with cost rate ``(1 + sqrt(|x|))^(-p)``.

    The associated gradient-norm equation is ``|Dv| = (1 + sqrt(|x|))^(-p)``.
    For ``p > 2`` straight-line escapes have finite total cost, so the
    instance is flagged ``h6_suspect``.
    """
    p = float(p)
    if p < 0:
        raise ValueError("p must be nonnegative")
    if target is None:
        target = TargetSet.from_points([[0.0, 0.0]])

    def dynamics(x, a):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(a, dtype=float), x.shape).copy()

    def rate(x):
        x = np.asarray(x, dtype=float)
        return (1.0 + np.sqrt(np.linalg.norm(x, axis=-1))) ** (-p)

    def lagrangian(x, a):
        return rate(x)

    def escape_cost_exact(T):
        # straight run at unit speed from the origin: integral of (1+sqrt(s))^(-p)
        if p == 0:
            return float(T)
        u = np.sqrt(T)
        if p == 1:
            return 2 * u - 2 * np.log1p(u)
        if p == 2:
            return 2 * np.log1p(u) + 2 / (1 + u) - 2
        if p == 4:
            return 1 / 3 - (1 + 3 * u) / (3 * (1 + u) ** 3)
        raise NotImplementedError(f"no closed form stored for p={p}")

    flags = {"h6_suspect"} if p > 2 else set()
    return ControlProblem(
        state_dim=2,
        dynamics=dynamics,
        lagrangian=lagrangian,
        target=target,
        controls=ControlSet.box([-1.0, -1.0], [1.0, 1.0], ball_samples, ball_radius=1.0),
        lipschitz_hint=1e-9,
        metadata={
            "name": "eikonal",
            "p": p,
            "flags": flags,
            "box": ([-1.0, -1.0], [1.0, 1.0]),
            "gradient_rhs": rate,
            "escape_families": [radial_escape_family(p)],
            "escape_cost_exact": escape_cost_exact,
        },
    )


def radial_escape_family(p: float) -> dict:
    """Straight-line escape along +x from the origin, with a monotone
    majorant tail for the finite-limit verdict when p > 2."""

    def tail(T):
        if p <= 2:
            return np.inf
        # (1+sqrt(s))^(-p) <= s^(-p/2), integrable tail for p > 2
        return T ** (1 - p / 2) / (p / 2 - 1)

    return {
        "name": f"radial_p{p:g}",
        "x0": np.array([0.0, 0.0]),
        "signal": constant_signal([1.0, 0.0]),
        "majorant_tail": tail,
    }


def escape_probe_target() -> TargetSet:
    """Left half-line {(x, 0): x <= -1}, the target under which the straight
    +x escape stays admissible."""
    return TargetSet.half_line([-1.0, 0.0], [-1.0, 0.0])


# ---------------------------------------------------------------------------
# shape-from-shading family


def sfs(intensity: str = "pound0", target: TargetSet | None = None, ball_samples: int = 13) -> ControlProblem:
    """Surface-slope reconstruction dynamics ``f(x, u) = -I(x) u`` over the
    closed unit ball with cost rate ``1 - I(x) sqrt(1 - |u|^2)``.

    ``intensity`` is ``"pound0"`` (``I = |x| / (1 + |x|)``, vanishing at the
    origin, so the target must exclude it) or ``"bright"``
    (``I = 3 e^{2|x|} / (1 + 3 e^{2|x|}) in [3/4, 1)``, flagged
    ``h6_suspect``: a slow vertical drift escapes at finite total cost).
    """
    if intensity == "pound0":

        def I(x):  # noqa: E741 - conventional symbol for light intensity
            r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
            return r / (1.0 + r)

    elif intensity == "bright":

        def I(x):  # noqa: E741
            r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
            return 3.0 / (np.exp(-2.0 * r) + 3.0)

    else:
        raise ValueError(f"intensity must be 'pound0' or 'bright', got {intensity!r}")

    if target is None:
        target = TargetSet.from_points([[1.0, 0.0]])
    if intensity == "pound0" and float(target.distance([0.0, 0.0])) <= target.tolerance:
        raise TargetContainsOriginError("target must exclude the origin for the vanishing intensity")

    def dynamics(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return -I(x)[..., None] * u

    def lagrangian(x, u):
        u = np.asarray(u, dtype=float)
        slack = max(0.0, 1.0 - float(u @ u))
        return 1.0 - I(x) * np.sqrt(slack)

    flags = {"h6_suspect"} if intensity == "bright" else set()
    meta = {
        "name": "sfs",
        "intensity": intensity,
        "flags": flags,
        "box": ([-2.0, -2.0], [2.0, 2.0]),
        "intensity_fn": I,
    }
    if intensity == "bright":
        meta["escape_families"] = [slow_drift_family()]
    return ControlProblem(
        state_dim=2,
        dynamics=dynamics,
        lagrangian=lagrangian,
        target=target,
        controls=ControlSet.box([-1.0, -1.0], [1.0, 1.0], ball_samples, ball_radius=1.0),
        lipschitz_hint=2.0,
        metadata=meta,
    )


def slow_drift_family() -> dict:
    """Upward drift ``u(t) = (0, -1/(t+1))`` from (0, 1) under the bright
    intensity: the second coordinate grows at least logarithmically while the
    total cost stays finite."""

    def signal_fn(t):
        return np.array([0.0, -1.0 / (t + 1.0)])

    def tail(T):
        # cost rate <= (1 + 3 e^2) / (3 e^2) * (t+1)^(-3/2) along this run
        c = (1.0 + 3.0 * np.e**2) / (3.0 * np.e**2)
        return 2.0 * c / np.sqrt(T + 1.0)

    return {
        "name": "slow_drift",
        "x0": np.array([0.0, 1.0]),
        "signal": time_signal(signal_fn, label="slow-drift"),
        "majorant_tail": tail,
    }


def sfs_drift_target() -> TargetSet:
    """Lower half-line {(0, r): r <= -1} used with the slow-drift escape."""
    return TargetSet.half_line([0.0, -1.0], [0.0, -1.0])


def mirror_ambiguity_surface():
    """Bowl surface (and its negation) that satisfies the reconstruction
    equation under intensity ``(1 + 4|x|^2)^(-1/2)`` with the complement of
    the unit disk as target; kept as a verifier fixture since zero-cost
    stalls at the origin rule it out of the solvable class."""

    def I(x):  # noqa: E741
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        return 1.0 / np.sqrt(1.0 + 4.0 * r2)

    def surface(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x**2, axis=-1)
        return np.where(r2 <= 1.0, 1.0 - r2, 0.0)

    return I, surface, TargetSet.complement_ball([0.0, 0.0], 1.0)


# ---------------------------------------------------------------------------
# scalar half-line instance


def scalar_halfline() -> ControlProblem:
    """1-D instance: target [1, +inf), single control +1, ``f = |x| a``,
    cost rate ``|x|``.  On (0, 1] the value is exactly ``1 - x`` even though
    the reachable set's boundary touches 0."""

    def dynamics(x, a):
        x = np.asarray(x, dtype=float)
        return np.abs(x) * float(np.atleast_1d(a)[0])

    def lagrangian(x, a):
        x = np.asarray(x, dtype=float)
        return np.abs(x[..., 0])

    return ControlProblem(
        state_dim=1,
        dynamics=dynamics,
        lagrangian=lagrangian,
        target=TargetSet.half_line([1.0], [1.0]),
        controls=ControlSet.finite([[1.0]]),
        lipschitz_hint=1.0,
        metadata={
            "name": "scalar_halfline",
            "box": ([-0.25], [2.0]),
            "reference_value": lambda x: 1.0 - np.asarray(x, dtype=float)[..., 0],
            "h5_probe_states": [],
        },
    )


# ---------------------------------------------------------------------------
# registry

INSTANCE_NAMES = ("example1", "fuller", "eikonal", "sfs", "scalar_halfline")


def build_instance(name: str, **params) -> ControlProblem:
    """Construct a catalog instance by name with keyword parameters."""
    if name == "example1":
        return example1(**params)
    if name == "fuller":
        return fuller(**params)
    if name == "eikonal":
        return eikonal(**params)
    if name == "sfs":
        return sfs(**params)
    if name == "scalar_halfline":
        return scalar_halfline()
    raise ValueError(f"unknown instance {name!r}; known: {', '.join(INSTANCE_NAMES)}")
