import numpy as np
import pytest

import exitgrid as eg
from exitgrid.catalog import (
    TargetContainsOriginError,
    build_instance,
    cost_poly,
    cost_poly_integral,
    eikonal,
    example1,
    fuller,
    mirror_ambiguity_surface,
    scalar_halfline,
    sfs,
)


class TestExample1:
    def test_cost_roots(self):
        assert cost_poly(0.0) == 0.0
        for r in (-2.0, -1.0, 1.0, 2.0):
            assert cost_poly(r) == pytest.approx(0.0, abs=1e-12)

    def test_t2_membership(self):
        p = example1("T2")
        assert bool(p.target.contains([2.0]))
        assert bool(p.target.contains([-2.0]))
        assert not bool(example1("T1").target.contains([2.0]))

    def test_reference_values_separate(self):
        v1 = example1("T1").metadata["reference_value"]
        v2 = example1("T2").metadata["reference_value"]
        x = np.array([[2.0]])
        assert v2(x)[0] == 0.0
        assert v1(x)[0] == pytest.approx(5120.0 / 693.0)
        assert v1(x)[0] > 0.1

    def test_exact_integral_value(self):
        assert cost_poly_integral(0.0, 2.0) == pytest.approx(5120.0 / 693.0, rel=1e-12)

    def test_bad_target_choice(self):
        with pytest.raises(ValueError):
            example1("T3")


class TestFuller:
    def test_k0_matches_literal_formulas(self):
        p = fuller(0.0)
        rng = np.random.default_rng(9)
        x = rng.uniform(-2, 2, size=(1000, 2))
        for a in (-1.0, 0.0, 1.0):
            f = p.dynamics(x, [a])
            assert np.array_equal(f[:, 0], x[:, 1])
            assert np.all(f[:, 1] == a)
            l = p.lagrangian(x, [a])
            assert np.allclose(l, x[:, 0] ** 2)

    def test_k1_bump_plateau(self):
        p = fuller(1.0)
        f = p.dynamics(np.array([[1.0, 1.0]]), [0.5])
        assert f[0, 0] == pytest.approx(0.0)  # drift cancels at the target center
        assert f[0, 1] == 0.5

    def test_k1_penalty_alone(self):
        p = fuller(1.0)
        assert p.lagrangian(np.array([[0.0, 0.0]]), [0.0])[0] == pytest.approx(1.0)

    def test_bump_is_c1_between_plateaus(self):
        p = fuller(1.0)
        # drift transitions smoothly between 1 - k (inner) and x2 (outer)
        rs = np.linspace(0.0, 0.8, 200)
        pts = np.stack([1.0 - rs, np.ones_like(rs)], axis=1)
        drift = p.dynamics(pts, [0.0])[:, 0]
        assert np.all(np.abs(np.diff(drift)) < 0.05)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            fuller(-0.5)

    def test_shifted_target(self):
        p = fuller(1.0, target_shift=-0.5)
        assert bool(p.target.contains([1.0, -0.5]))
        # the bump still vanishes on a neighborhood of the vertical axis
        f = p.dynamics(np.array([[0.0, 2.0]]), [0.0])
        assert f[0, 0] == pytest.approx(2.0)

    def test_shifted_target_needs_nonzero_k(self):
        with pytest.raises(ValueError):
            fuller(0.0, target_shift=1.0)

    def test_custom_state_cost_shape(self):
        p = fuller(1.0, state_cost=lambda s: np.abs(s) ** 1.5)
        l = p.lagrangian(np.array([[4.0, 0.0]]), [1.0])
        assert l[0] == pytest.approx(8.0)

    def test_bad_state_cost_shapes_rejected(self):
        with pytest.raises(ValueError):
            fuller(1.0, state_cost=lambda s: s)  # odd
        with pytest.raises(ValueError):
            fuller(1.0, state_cost=lambda s: 1.0 + s * s)  # nonzero at 0


class TestEikonal:
    def test_unit_cost_p0(self):
        p = eikonal(0.0)
        x = np.random.default_rng(1).uniform(-3, 3, size=(64, 2))
        assert np.allclose(p.lagrangian(x, [0.3, 0.4]), 1.0)

    def test_p2_at_unit_radius(self):
        p = eikonal(2.0)
        assert p.lagrangian(np.array([[0.6, 0.8]]), [0.0, 0.0])[0] == pytest.approx(0.25)

    def test_p4_flagged_with_finite_limit_family(self):
        p = eikonal(4.0)
        assert "h6_suspect" in p.metadata["flags"]
        fam = p.metadata["escape_families"][0]
        assert np.isfinite(fam["majorant_tail"](1e6))
        assert p.metadata["escape_cost_exact"](1e12) == pytest.approx(1.0 / 3.0, abs=1e-6)

    def test_p_in_range_not_flagged(self):
        assert "h6_suspect" not in eikonal(2.0).metadata["flags"]

    def test_negative_p_rejected(self):
        with pytest.raises(ValueError):
            eikonal(-1.0)


class TestSfs:
    def test_intensity_pound0_at_unit_radius(self):
        p = sfs("pound0")
        I = p.metadata["intensity_fn"]
        assert I(np.array([[0.6, 0.8]]))[0] == pytest.approx(0.5)

    def test_bright_intensity_at_origin(self):
        p = sfs("bright")
        I = p.metadata["intensity_fn"]
        assert I(np.array([[0.0, 0.0]]))[0] == pytest.approx(0.75)
        r = np.linspace(0, 50, 100)
        vals = I(np.stack([r, np.zeros_like(r)], axis=1))
        assert np.all((vals >= 0.75) & (vals <= 1.0))
        # strictly below 1 wherever that is representable in float
        r = np.linspace(0, 12, 50)
        vals = I(np.stack([r, np.zeros_like(r)], axis=1))
        assert np.all(vals < 1.0)

    def test_unit_norm_control_costs_one(self):
        p = sfs("pound0")
        x = np.random.default_rng(2).uniform(-3, 3, size=(32, 2))
        assert np.allclose(p.lagrangian(x, [1.0, 0.0]), 1.0)
        assert np.allclose(p.lagrangian(x, [0.6, 0.8]), 1.0)

    def test_speed_bound(self):
        p = sfs("pound0")
        rng = np.random.default_rng(3)
        x = rng.uniform(-5, 5, size=(500, 2))
        for a in p.controls.enumerate()[::17]:
            speeds = np.linalg.norm(p.dynamics(x, a), axis=1)
            assert np.all(speeds <= 1.0 + 1e-12)

    def test_origin_in_target_rejected(self):
        with pytest.raises(TargetContainsOriginError):
            sfs("pound0", target=eg.TargetSet.from_points([[0.0, 0.0]]))

    def test_bright_intensity_allows_origin_target(self):
        p = sfs("bright", target=eg.TargetSet.from_points([[0.0, 0.0]]))
        assert "h6_suspect" in p.metadata["flags"]

    def test_unknown_intensity(self):
        with pytest.raises(ValueError):
            sfs("dark")


class TestMirrorAmbiguity:
    def test_surface_pair_fixture(self):
        I, surface, target = mirror_ambiguity_surface()
        assert I(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0)
        # the peak-intensity point sits where the surface gradient vanishes;
        # runs parked there accrue no cost and never exit, which is why the
        # fixture is not in the solvable catalog
        assert surface(np.array([[0.0, 0.0]]))[0] == 1.0
        assert float(target.distance([0.0, 0.0])) == 1.0
        # check the reconstruction identity I * sqrt(1 + |Du|^2) = 1 sampled
        rng = np.random.default_rng(4)
        pts = rng.uniform(-0.9, 0.9, size=(200, 2))
        pts = pts[np.linalg.norm(pts, axis=1) < 0.95]
        eps = 1e-6
        gx = (surface(pts + [eps, 0]) - surface(pts - [eps, 0])) / (2 * eps)
        gy = (surface(pts + [0, eps]) - surface(pts - [0, eps])) / (2 * eps)
        lhs = I(pts) * np.sqrt(1.0 + gx**2 + gy**2)
        assert np.allclose(lhs, 1.0, atol=1e-8)


def test_scalar_halfline_reference():
    p = scalar_halfline()
    ref = p.metadata["reference_value"]
    assert ref(np.array([[0.5]]))[0] == pytest.approx(0.5)
    # the reference tends to 1 approaching the reachable-set edge
    assert ref(np.array([[1e-9]]))[0] == pytest.approx(1.0, abs=1e-8)
    assert p.dynamics(np.array([[-0.5]]), [1.0])[0, 0] == pytest.approx(0.5)


def test_build_instance_registry():
    assert build_instance("eikonal", p=1.0).metadata["name"] == "eikonal"
    with pytest.raises(ValueError):
        build_instance("nonexistent")
