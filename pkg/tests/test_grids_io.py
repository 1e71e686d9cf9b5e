import numpy as np
import pytest

import exitgrid as eg
from exitgrid.grids import Grid, OutOfGridError, ValueField, interpolate
from exitgrid.io import field_from_csv, field_to_csv, trajectory_to_csv


class TestGrid:
    def test_spacing_and_points_order(self):
        g = Grid.regular([0.0, 0.0], [1.0, 2.0], (3, 5))
        assert np.allclose(g.spacing, [0.5, 0.5])
        pts = g.points()
        # row-major, last axis fastest
        assert pts[0].tolist() == [0.0, 0.0]
        assert pts[1].tolist() == [0.0, 0.5]
        assert pts[5].tolist() == [0.5, 0.0]

    def test_degenerate_grid_rejected(self):
        with pytest.raises(ValueError):
            Grid.regular([0.0], [0.0], 5)
        with pytest.raises(ValueError):
            Grid.regular([0.0], [1.0], 1)


class TestInterpolate:
    def grid2(self):
        return Grid.regular([0.0, 0.0], [1.0, 1.0], 11)

    def test_constant_field(self):
        g = self.grid2()
        f = ValueField(g, np.full(g.shape, 3.25), np.ones(g.shape, dtype=np.int8))
        assert interpolate(f, np.array([0.37, 0.81])) == pytest.approx(3.25)

    def test_node_exactness(self):
        g = self.grid2()
        rng = np.random.default_rng(0)
        vals = rng.normal(size=g.shape)
        f = ValueField(g, vals, np.ones(g.shape, dtype=np.int8))
        assert interpolate(f, np.array([0.3, 0.7])) == pytest.approx(vals[3, 7], abs=1e-14)

    def test_midpoint_linearity_1d(self):
        g = Grid.regular([0.0], [1.0], 2)
        f = ValueField(g, np.array([0.0, 1.0]), np.ones(2, dtype=np.int8))
        assert interpolate(f, np.array([0.5])) == pytest.approx(0.5)

    def test_affine_exactness(self):
        g = self.grid2()
        pts = g.points()
        vals = (2.0 * pts[:, 0] - 0.5 * pts[:, 1] + 1.0).reshape(g.shape)
        f = ValueField(g, vals, np.ones(g.shape, dtype=np.int8))
        q = np.array([[0.123, 0.457], [0.98, 0.01]])
        assert np.allclose(interpolate(f, q), 2.0 * q[:, 0] - 0.5 * q[:, 1] + 1.0)

    def test_out_of_grid(self):
        g = self.grid2()
        f = ValueField(g, np.zeros(g.shape), np.ones(g.shape, dtype=np.int8))
        with pytest.raises(OutOfGridError):
            interpolate(f, np.array([1.5, 0.5]))


class TestFieldCSV:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        g = Grid.regular([-1.0, 0.25], [1.0, 0.75], (7, 5))
        vals = rng.normal(size=g.shape) * 1e3
        roles = rng.integers(0, 3, size=g.shape).astype(np.int8)
        f = ValueField(g, vals, roles)
        path = tmp_path / "field.csv"
        field_to_csv(f, path)
        f2 = field_from_csv(path)
        assert np.array_equal(f.values, f2.values)
        assert np.array_equal(f.roles, f2.roles)
        assert np.array_equal(f.grid.lower, f2.grid.lower)
        assert np.array_equal(f.grid.upper, f2.grid.upper)
        assert f.grid.nodes_per_axis == f2.grid.nodes_per_axis
        path2 = tmp_path / "field2.csv"
        field_to_csv(f2, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_sentinel_values_round_trip(self, tmp_path):
        g = Grid.regular([0.0], [1.0], 3)
        f = ValueField(g, np.array([eg.LARGE, 0.5, np.inf]), np.array([2, 1, 0], dtype=np.int8))
        path = tmp_path / "f.csv"
        field_to_csv(f, path)
        f2 = field_from_csv(path)
        assert np.array_equal(f.values, f2.values)

    def test_malformed_csv_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not a field\n")
        with pytest.raises(ValueError):
            field_from_csv(path)

    def test_truncated_csv_rejected(self, tmp_path):
        g = Grid.regular([0.0], [1.0], 3)
        f = ValueField(g, np.zeros(3), np.ones(3, dtype=np.int8))
        path = tmp_path / "t.csv"
        field_to_csv(f, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError):
            field_from_csv(path)


def test_trajectory_csv_header(tmp_path):
    p = eg.catalog.scalar_halfline()
    traj = eg.integrate(p, [0.5], eg.constant_signal([1.0]), dt=0.1, t_max=0.3,
                        stop_at_target=False)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# t, x1, cost"
    assert len(lines) == 1 + len(traj.times)
