"""Acceptance suite: every criterion runs at its stated tolerance and prints
one CRITERION line.  Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import time

import numpy as np

import exitgrid as eg
from exitgrid.dynamics import (
    fuller_closed_loop,
    fuller_steering_times,
    fuller_switch_constant,
)
from exitgrid.hypotheses import check_h5_sampled, check_h6_escape
from exitgrid.verify import check_side_condition, hjb_residual


def report(name, ok, detail):
    print(f"CRITERION {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# -- 1. scalar closed form ---------------------------------------------------


def test_criterion_1_scalar_closed_form():
    problem = eg.catalog.scalar_halfline()
    grid = eg.Grid.regular([-0.25], [2.0], 2251)  # h = 1e-3
    t0 = time.perf_counter()
    field = eg.solve_value_iteration(problem, grid)
    elapsed = time.perf_counter() - t0
    probes = np.linspace(0.05, 1.0, 20)[:, None]
    err = float(np.abs(eg.interpolate(field, probes) - (1.0 - probes[:, 0])).max())
    report(
        "1 scalar-closed-form",
        err <= 5e-3 and elapsed < 10.0,
        f"max probe error {err:.2e} (<= 5e-3), runtime {elapsed:.2f}s (< 10s)",
    )


# -- 2. unit-speed distance field --------------------------------------------


def test_criterion_2_distance_field(eikonal_p0_201, fmm_p0_201):
    problem, sl_field, sl_time = eikonal_p0_201
    _, fm_field, fm_time = fmm_p0_201
    grid = sl_field.grid
    h = float(grid.spacing[0])
    dist = np.linalg.norm(grid.points(), axis=1).reshape(grid.shape)
    live = sl_field.roles != eg.OUTFLOW

    sl_err = float(np.abs(sl_field.values - dist)[live].max())
    fm_err = float(np.abs(fm_field.values - dist).max())
    cross = float(np.abs(sl_field.values - fm_field.values)[live].max())
    report(
        "2 distance-field",
        sl_err <= 2 * h and fm_err <= 2 * h and cross <= 3 * h
        and sl_time < 60.0 and fm_time < 60.0,
        f"sweep err {sl_err / h:.2f}h, marching err {fm_err / h:.2f}h, "
        f"cross {cross / h:.2f}h, runtimes {sl_time:.1f}s / {fm_time:.1f}s",
    )


# -- 3. two certified fields -------------------------------------------------


def cumulative_upwind_field(grid, target_indices):
    """Grid-consistent quadrature of the cost polynomial: march outward from
    each target node accumulating h * L(current node), then take the minimum
    over targets.  This is the discrete fixed point, so its upwind residual
    vanishes identically; the exact polynomial antiderivative cross-checks
    the values below."""
    x = grid.points()[:, 0]
    L = eg.catalog.cost_poly(x)
    h = float(grid.spacing[0])
    n = grid.n_nodes
    best = np.full(n, np.inf)
    for it in target_indices:
        v = np.empty(n)
        v[it] = 0.0
        for i in range(it + 1, n):
            v[i] = v[i - 1] + h * L[i]
        for i in range(it - 1, -1, -1):
            v[i] = v[i + 1] + h * L[i]
        best = np.minimum(best, v)
    return best


def test_criterion_3_two_certified_fields():
    problem = eg.catalog.example1("T1")
    grid = eg.Grid.regular([-3.0], [3.0], 6001)  # h = 1e-3
    n = grid.n_nodes
    roles = np.full(n, eg.INTERIOR, dtype=np.int8)
    roles[[0, -1]] = eg.OUTFLOW
    roles[3000] = eg.TARGET  # node at 0, the target both fields vanish on

    v1 = cumulative_upwind_field(grid, [3000])
    v2 = cumulative_upwind_field(grid, [3000, 5000, 1000])

    # cross-check against the exact antiderivative where the telescoped
    # rectangle error vanishes (the cost roots)
    x = grid.points()[:, 0]
    exact_at_2 = eg.catalog.cost_poly_integral(0.0, 2.0)
    i2 = 5000
    assert abs(v1[i2] - exact_at_2) <= 1e-6

    f1 = eg.ValueField(grid, v1, roles)
    f2 = eg.ValueField(grid, v2, roles)
    r1 = hjb_residual(f1, problem)
    r2 = hjb_residual(f2, problem)
    s1 = check_side_condition(f1, -1e-9)
    s2 = check_side_condition(f2, -1e-9)
    sep = float(np.abs(v1 - v2).max())
    ok = (
        r1.max_abs_residual <= 1e-3
        and r2.max_abs_residual <= 1e-3
        and s1.bounded_below_pass and s1.target_pass
        and s2.bounded_below_pass and s2.target_pass
        and sep > 0.1
    )
    report(
        "3 two-certified-fields",
        ok,
        f"residuals {r1.max_abs_residual:.1e} / {r2.max_abs_residual:.1e} (<= 1e-3), "
        f"side conditions pass, separation {sep:.3f} (> 0.1), "
        f"|v1(2) - exact| = {abs(v1[i2] - exact_at_2):.1e}",
    )


# -- 4. positivity probe -----------------------------------------------------


def test_criterion_4_positivity_probe():
    p_ex = eg.catalog.example1("T1")
    rep_ex = check_h5_sampled(p_ex, n_states=1000, n_signals=100, horizon=1.0, seed=0)
    stall = [v for v in rep_ex.violations if abs(v.x0[0] + 1.0) < 1e-12
             and "constant" in v.signal_desc]

    p_fu = eg.catalog.fuller(1.0)
    rep_fu = check_h5_sampled(p_fu, n_states=1000, n_signals=100, horizon=1.0, seed=2)

    p_sc = eg.catalog.scalar_halfline()
    rep_sc = check_h5_sampled(p_sc, n_states=1000, n_signals=100, horizon=1.0, seed=1)

    ok = (
        rep_ex.verdict == "VIOLATION_FOUND" and len(stall) > 0 and stall[0].cost < 1e-12
        and rep_fu.verdict == "NO_VIOLATION_FOUND" and rep_fu.samples >= 100_000
        and rep_sc.verdict == "NO_VIOLATION_FOUND" and rep_sc.samples >= 100_000
    )
    report(
        "4 positivity-probe",
        ok,
        f"stationary stall at -1 found (cost {stall[0].cost if stall else 'n/a'}); "
        f"clean verdicts over {rep_fu.samples} + {rep_sc.samples} samples",
    )


# -- 5. escape-cost dichotomy ------------------------------------------------


def test_criterion_5_escape_dichotomy():
    target = eg.catalog.escape_probe_target()
    p1 = eg.catalog.eikonal(1.0, target=target)
    fam1 = check_h6_escape(p1).families[0]
    p4 = eg.catalog.eikonal(4.0, target=target)
    fam4 = check_h6_escape(p4).families[0]
    ok = (
        fam1.verdict == "DIVERGENT" and abs(fam1.exponent - 0.5) <= 0.05
        and fam4.verdict == "FINITE_LIMIT"
        and abs(fam4.limit_estimate - 1.0 / 3.0) <= 1e-4
    )
    report(
        "5 escape-dichotomy",
        ok,
        f"p=1 exponent {fam1.exponent:.4f} (0.5 +- 0.05); "
        f"p=4 limit {fam4.limit_estimate:.8f} (1/3 +- 1e-4)",
    )


# -- 6. slow bright-intensity drift ------------------------------------------


def test_criterion_6_slow_drift_bounds():
    problem = eg.catalog.sfs("bright", target=eg.catalog.sfs_drift_target())
    rep = check_h6_escape(problem, horizons=[10.0**k for k in range(0, 7)],
                          keep_every=64)
    fam = rep.families[0]
    m = (fam.samples_t > 0) & (fam.samples_t <= 1e4)
    x2 = fam.samples_x[m][:, 1]
    bound = 1.0 + 0.75 * np.log1p(fam.samples_t[m])
    cost_at_1e6 = float(fam.costs[-1])
    ok = bool(np.all(x2 >= bound)) and cost_at_1e6 <= 2.2
    report(
        "6 slow-drift-bounds",
        ok,
        f"x2 >= 1 + (3/4)ln(1+t) at {int(m.sum())} samples to 1e4 "
        f"(min slack {float((x2 - bound).min()):.4f}); "
        f"cost(1e6) = {cost_at_1e6:.4f} (<= 2.2)",
    )


# -- 7. chattering scaling law -----------------------------------------------


def test_criterion_7_chattering_scaling(fuller_window_201):
    problem, field = fuller_window_201
    C = fuller_switch_constant()
    lam = 0.5
    states = [(0.5, 1.0), (0.3, -0.7), (-0.4, 0.2), (0.1, 0.9), (-0.25, -0.55)]
    worst_rel = 0.0
    for z in states:
        J, _, _ = fuller_closed_loop(z, C, stop_radius=1e-3)
        Js, _, _ = fuller_closed_loop((lam**2 * z[0], lam * z[1]), C, stop_radius=1e-3)
        worst_rel = max(worst_rel, abs(Js - lam**5 * J) / (lam**5 * J))

    M = max(fuller_steering_times(5))
    h = float(field.grid.spacing[0])
    fm = field.finite_mask()
    vals = np.where(fm, field.values, np.nan)
    lip = max(
        float(np.nanmax(np.abs(np.diff(vals, axis=0)))) / h,
        float(np.nanmax(np.abs(np.diff(vals, axis=1)))) / h,
    )
    v_at = [float(eg.interpolate(field, np.array([0.5 / n**2, 1.0 / n]))) for n in (2, 3, 4)]
    bounds = [M / n**4 + 3 * h * lip for n in (2, 3, 4)]
    monotone = v_at[0] > v_at[1] > v_at[2]
    bounded = all(v <= b for v, b in zip(v_at, bounds))
    ok = worst_rel <= 0.02 and monotone and bounded
    report(
        "7 chattering-scaling",
        ok,
        f"scaling deviation {worst_rel:.2e} (<= 2e-2); values {v_at[0]:.4f} > "
        f"{v_at[1]:.4f} > {v_at[2]:.4f}, bounds {[f'{b:.3f}' for b in bounds]} (M={M:.3f})",
    )


# -- 8. side-condition discrimination ----------------------------------------


def test_criterion_8_side_condition_discrimination(fuller_window_201):
    problem, field = fuller_window_201
    grid = field.grid
    h = float(grid.spacing[0])
    fm = field.finite_mask()
    vals = np.where(fm, field.values, np.nan)
    lip = max(
        float(np.nanmax(np.abs(np.diff(vals, axis=0)))) / h,
        float(np.nanmax(np.abs(np.diff(vals, axis=1)))) / h,
    )
    threshold = 10.0 * h * lip

    w = eg.ValueField(grid, -field.values[::-1, :].copy(), field.roles[::-1, :].copy())
    rep = hjb_residual(w, problem, target_margin=0.05)
    sc = check_side_condition(w, -1e-3)
    ok = (
        rep.max_abs_residual <= threshold
        and sc.target_pass
        and not sc.bounded_below_pass
        and sc.min_value < -1e-3
    )
    report(
        "8 side-condition-discrimination",
        ok,
        f"reflected field residual {rep.max_abs_residual:.4f} (<= {threshold:.3f}); "
        f"vanishes on target; min value {sc.min_value:.3f} < -1e-3 so bounded-below fails",
    )


# -- 9. refinement suite -----------------------------------------------------


def test_criterion_9_refinement(eikonal_p0_201, fmm_p0_201):
    # scalar error: grids keep the target boundary a quarter cell off the
    # nodes; aligned grids reproduce this instance exactly at any h and give
    # no refinement signal
    p_sc = eg.catalog.scalar_halfline()

    def scalar_err(n):
        h = 2.25 / (n - 1)
        lo = -0.25 - h / 4
        g = eg.Grid.regular([lo], [lo + (n - 1) * h], n)
        f = eg.solve_value_iteration(p_sc, g)
        probes = np.linspace(0.05, 0.95, 19)[:, None]
        return float(np.abs(eg.interpolate(f, probes) - (1.0 - probes[:, 0])).max())

    r_scalar = scalar_err(1126) / scalar_err(2251)

    p_eik = eg.catalog.eikonal(0.0)
    _, sl_fine, _ = eikonal_p0_201
    _, fm_fine, _ = fmm_p0_201

    def sl_err(field):
        g = field.grid
        dist = np.linalg.norm(g.points(), axis=1).reshape(g.shape)
        live = field.roles != eg.OUTFLOW
        return float(np.abs(field.values - dist)[live].max())

    g101 = eg.Grid.regular([-1, -1], [1, 1], 101)
    sl_coarse = eg.solve_value_iteration(p_eik, g101)
    fm_coarse = eg.solve_fast_marching(p_eik.metadata["gradient_rhs"], p_eik.target, g101)
    r_sl = sl_err(sl_coarse) / sl_err(sl_fine)
    dist_f = np.linalg.norm(fm_fine.grid.points(), axis=1).reshape(fm_fine.grid.shape)
    dist_c = np.linalg.norm(g101.points(), axis=1).reshape(g101.shape)
    r_fm = float(np.abs(fm_coarse.values - dist_c).max() / np.abs(fm_fine.values - dist_f).max())

    # verifier residual on the p=1 field
    p1 = eg.catalog.eikonal(1.0)
    res = {}
    for n in (101, 201):
        f = eg.solve_value_iteration(p1, eg.Grid.regular([-1, -1], [1, 1], n))
        res[n] = hjb_residual(f, p1, target_margin=0.1).max_abs_residual
    r_res = res[101] / res[201]

    ratios = {"scalar": r_scalar, "sweep": r_sl, "marching": r_fm, "residual": r_res}
    ok = all(1.5 <= r <= 3.0 for r in ratios.values())
    report(
        "9 refinement",
        ok,
        "halving ratios " + ", ".join(f"{k}={v:.2f}" for k, v in ratios.items())
        + " all within [1.5, 3]",
    )
