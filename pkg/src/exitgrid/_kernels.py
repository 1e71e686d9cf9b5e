"""Numba kernels for the Gauss-Seidel value sweeps.

The sweep kernel walks nodes in a mixed-radix order with per-axis direction
flags (2^dim orderings), updating interior nodes in place:

    v(x) <- min(cap, min_a { step_cost(x,a) + Interp(v)(foot(x,a)) })

Feet leaving the hull read ``offgrid`` (the boundary sentinel; +inf in the
local-solution mode).  Interpolation corners with zero weight are skipped so
an infinite read never poisons a finite value through 0 * inf.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INTERIOR_CODE = 1


@njit(cache=True, fastmath=False)
def _update_node(values, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap, node, base, frac):
    ndim = shape.shape[0]
    n_controls = step_cost.shape[1]
    best = cap
    for c in range(n_controls):
        # locate the foot point cell; leaving the hull reads the sentinel
        val = 0.0
        ok = True
        for d in range(ndim):
            rel = (feet[node, c, d] - lower[d]) * inv_h[d]
            if rel < -1e-9 or rel > shape[d] - 1 + 1e-9:
                ok = False
                break
            b = int(rel)
            if rel < 0.0:
                b = 0
            elif b > shape[d] - 2:
                b = shape[d] - 2
            base[d] = b
            frac[d] = rel - b
        if not ok:
            val = offgrid
        else:
            acc = 0.0
            for corner in range(1 << ndim):
                w = 1.0
                flat = 0
                for d in range(ndim):
                    if (corner >> d) & 1:
                        w *= frac[d]
                        flat += (base[d] + 1) * strides[d]
                    else:
                        w *= 1.0 - frac[d]
                        flat += base[d] * strides[d]
                if w > 0.0:
                    acc += w * values[flat]
            val = acc
        cand = step_cost[node, c] + val
        if cand < best:
            best = cand
    if best > cap:
        best = cap
    return best


@njit(cache=True)
def gauss_seidel_sweep(
    values, roles, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap, reverse_bits
):
    """One in-place sweep; returns (max_abs_update, max_increase)."""
    ndim = shape.shape[0]
    n_nodes = values.shape[0]
    base = np.empty(ndim, dtype=np.int64)
    frac = np.empty(ndim, dtype=np.float64)
    max_update = 0.0
    max_increase = 0.0
    for k in range(n_nodes):
        # decode k into a node id honoring the per-axis reversal flags
        rem = k
        node = 0
        for d in range(ndim):
            idx = rem // strides[d]
            rem -= idx * strides[d]
            if (reverse_bits >> d) & 1:
                idx = shape[d] - 1 - idx
            node += idx * strides[d]
        if roles[node] != INTERIOR_CODE:
            continue
        best = _update_node(
            values, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap, node, base, frac
        )
        old = values[node]
        values[node] = best
        if np.isfinite(old) and np.isfinite(best):
            diff = old - best
            if diff < 0.0:
                if -diff > max_increase:
                    max_increase = -diff
                if -diff > max_update:
                    max_update = -diff
            else:
                if diff > max_update:
                    max_update = diff
        elif np.isfinite(old) != np.isfinite(best):
            max_update = np.inf
    return max_update, max_increase


@njit(cache=True)
def jacobi_sweep(values, roles, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap):
    """Parallel-order update pass; returns (new_values, max_abs_update)."""
    ndim = shape.shape[0]
    n_nodes = values.shape[0]
    base = np.empty(ndim, dtype=np.int64)
    frac = np.empty(ndim, dtype=np.float64)
    out = values.copy()
    max_update = 0.0
    for node in range(n_nodes):
        if roles[node] != INTERIOR_CODE:
            continue
        best = _update_node(
            values, feet, step_cost, shape, strides, lower, inv_h, offgrid, cap, node, base, frac
        )
        out[node] = best
        old = values[node]
        if np.isfinite(old) and np.isfinite(best):
            diff = abs(old - best)
            if diff > max_update:
                max_update = diff
        elif np.isfinite(old) != np.isfinite(best):
            max_update = np.inf
    return out, max_update
