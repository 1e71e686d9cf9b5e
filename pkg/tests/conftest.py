import numpy as np
import pytest

import exitgrid as eg


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba sweep kernels once so timed tests measure solves."""
    problem = eg.catalog.scalar_halfline()
    grid = eg.Grid.regular([-0.25], [2.0], 51)
    eg.solve_value_iteration(problem, grid)
    eg.solve_value_iteration(problem, grid, eg.SolverParams(jacobi=True))


@pytest.fixture(scope="session")
def eikonal_p0_201():
    problem = eg.catalog.eikonal(0.0)
    grid = eg.Grid.regular([-1, -1], [1, 1], 201)
    import time

    t0 = time.perf_counter()
    field = eg.solve_value_iteration(problem, grid)
    elapsed = time.perf_counter() - t0
    return problem, field, elapsed


@pytest.fixture(scope="session")
def fmm_p0_201():
    problem = eg.catalog.eikonal(0.0)
    grid = eg.Grid.regular([-1, -1], [1, 1], 201)
    import time

    t0 = time.perf_counter()
    field = eg.solve_fast_marching(problem.metadata["gradient_rhs"], problem.target, grid)
    elapsed = time.perf_counter() - t0
    return problem, field, elapsed


@pytest.fixture(scope="session")
def fuller_window_201():
    """True (unconstrained) double-integrator field on [-1,1]^2.

    Solved on an enlarged box so optimal runs from the window never hit the
    boundary, then restricted to the aligned window grid.
    """
    problem = eg.catalog.fuller(0.0)
    big = eg.Grid.regular([-2.2, -2.2], [2.2, 2.2], 441)
    fbig = eg.solve_value_iteration(problem, big)
    sub = eg.Grid.regular([-1, -1], [1, 1], 201)
    vals = fbig.values[120:321, 120:321].copy()
    roles = np.full((201, 201), eg.INTERIOR, dtype=np.int8)
    roles[[0, -1], :] = eg.OUTFLOW
    roles[:, [0, -1]] = eg.OUTFLOW
    roles[100, 100] = eg.TARGET
    return problem, eg.ValueField(sub, vals, roles)
