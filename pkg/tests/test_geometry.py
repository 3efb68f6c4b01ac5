import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradproj.errors import (
    DegenerateNormal,
    NoSignChange,
    OffSurface,
    StepExceedsReach,
    ZeroDirection,
    ZeroVector,
)
from gradproj.geometry import (
    BallBoundarySurface,
    LevelSetSurface,
    SphereSurface,
    membership_residual,
    project_sphere,
    reach_offset,
    segment_surface_intersect,
    support_point,
    tangent_project,
    unit_normal,
)
from gradproj.objectives import lpl2d_circle

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vectors(n_min=2, n_max=6):
    return st.integers(n_min, n_max).flatmap(lambda n: arrays(float, n, elements=finite))


def circle_level_set():
    # g(x, y) = x^2 + (y - 1/2)^2 - 1/4, the circle through the origin
    return lpl2d_circle()


class TestProjectSphere:
    def test_normalizes(self):
        np.testing.assert_allclose(project_sphere([3.0, 4.0]), [0.6, 0.8], rtol=0, atol=1e-15)

    def test_fixed_point(self):
        assert np.array_equal(project_sphere([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_center_rejected(self):
        with pytest.raises(ZeroVector):
            project_sphere([0.0, 0.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            project_sphere([np.nan, 1.0])

    @given(vectors(), st.floats(1e-3, 1e3))
    def test_norm_equals_radius(self, x, radius):
        assume(np.linalg.norm(x) > 1e-6)
        y = project_sphere(x, radius)
        assert abs(np.linalg.norm(y) - radius) <= 1e-12 * radius


class TestUnitNormal:
    def test_sphere(self):
        np.testing.assert_array_equal(unit_normal(SphereSurface(2), [0.0, 1.0]), [0.0, 1.0])

    def test_level_set(self):
        np.testing.assert_allclose(unit_normal(circle_level_set(), [0.0, 0.0]), [0.0, -1.0])

    def test_off_surface(self):
        with pytest.raises(OffSurface):
            unit_normal(SphereSurface(2), [0.5, 0.0])

    def test_ball_boundary_outward(self):
        ball = BallBoundarySurface([0.0, -2.0], 2.0)
        np.testing.assert_allclose(unit_normal(ball, [0.0, 0.0]), [0.0, 1.0])

    def test_degenerate(self):
        # g = (x^2 - 1)^2 vanishes with its gradient on the unit circle's x = 1
        ls = LevelSetSurface(g=lambda x: (x[0] ** 2 - 1.0) ** 2, grad_g=lambda x: np.zeros(2), R=1.0)
        with pytest.raises(DegenerateNormal):
            unit_normal(ls, [1.0, 0.0])


class TestTangentProject:
    def test_sphere_drops_normal_component(self):
        v = tangent_project(SphereSurface(3), [1.0, 0.0, 0.0], [2.0, -3.0, 5.0])
        np.testing.assert_array_equal(v, [0.0, -3.0, 5.0])

    def test_level_set(self):
        np.testing.assert_allclose(tangent_project(circle_level_set(), [0.0, 0.0], [1.0, 1.0]), [1.0, 0.0])

    def test_normal_maps_to_zero(self):
        s = SphereSurface(3)
        x = np.array([0.0, 0.6, 0.8])
        np.testing.assert_allclose(tangent_project(s, x, -3.5 * x), 0.0, atol=1e-15)

    @given(vectors(3, 3), vectors(3, 3))
    def test_idempotent_and_orthogonal(self, x, v):
        assume(np.linalg.norm(x) > 1e-6)
        s = SphereSurface(3)
        x = s.project(x)
        pv = tangent_project(s, x, v)
        scale = max(1.0, np.linalg.norm(v))
        np.testing.assert_allclose(tangent_project(s, x, pv), pv, atol=1e-12 * scale)
        assert abs(np.dot(pv, unit_normal(s, x))) <= 1e-12 * scale

    @given(st.floats(0.0, 2 * math.pi), arrays(float, 2, elements=finite))
    def test_orthogonal_on_level_set(self, theta, v):
        ls = circle_level_set()
        x = np.array([0.5 * math.sin(theta), 0.5 - 0.5 * math.cos(theta)])
        pv = tangent_project(ls, x, v)
        assert abs(np.dot(pv, unit_normal(ls, x))) <= 1e-12 * max(1.0, np.linalg.norm(v))


class TestSegmentIntersect:
    def test_root_on_axis(self, unit_circle_ls):
        x = segment_surface_intersect(unit_circle_ls, [0.5, 0.0], [2.0, 0.0])
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)

    def test_endpoint_on_surface(self, unit_circle_ls):
        A = np.array([0.0, 1.0])
        assert np.array_equal(segment_surface_intersect(unit_circle_ls, A, [0.0, 3.0]), A)

    def test_no_sign_change(self, unit_circle_ls):
        with pytest.raises(NoSignChange):
            segment_surface_intersect(unit_circle_ls, [2.0, 0.0], [3.0, 0.0])

    @pytest.mark.parametrize("surface", ["unit", "lpl2d"])
    @given(st.floats(0, 2 * math.pi), st.floats(0.05, 0.95), st.floats(1.05, 3.0))
    def test_random_chords(self, surface, phi, inner, outer):
        if surface == "unit":
            ls, c, rad = SphereSurface(2).as_level_set(), np.zeros(2), 1.0
        else:
            ls, c, rad = circle_level_set(), np.array([0.0, 0.5]), 0.5
        u = np.array([math.cos(phi), math.sin(phi)])
        A, B = c + inner * rad * u, c + outer * rad * u
        x = segment_surface_intersect(ls, A, B)
        scale = max(1.0, abs(ls.g(A)), abs(ls.g(B)))
        assert membership_residual(ls, x) <= 1e-12 * scale
        assert abs(np.linalg.norm(x - c) - rad) <= 1e-11

    def test_reversed_orientation(self, unit_circle_ls):
        a = segment_surface_intersect(unit_circle_ls, [2.0, 0.0], [0.5, 0.0])
        np.testing.assert_allclose(a, [1.0, 0.0], atol=1e-12)


class TestSupportPoint:
    def test_unit_ball(self):
        assert np.array_equal(support_point(BallBoundarySurface([0.0, 0.0], 1.0), [1.0, 0.0]), [1.0, 0.0])

    def test_shifted_ball_reaches_origin(self):
        ball = BallBoundarySurface([0.0, -2.0], 2.0)
        np.testing.assert_array_equal(support_point(ball, [0.0, 1.0]), [0.0, 0.0])

    def test_zero_direction(self):
        with pytest.raises(ZeroDirection):
            support_point(BallBoundarySurface([0.0, 0.0], 1.0), [0.0, 0.0])

    @given(arrays(float, 2, elements=finite))
    def test_optimal_against_boundary_samples(self, d):
        assume(np.linalg.norm(d) > 1e-6)
        ball = BallBoundarySurface([0.3, -0.7], 1.3)
        s = support_point(ball, d)
        ys = ball.sample(1000, seed=1)
        assert ball.membership_residual(s) <= 1e-12
        assert np.all(ys @ d <= np.dot(d, s) + 1e-12 * max(1.0, np.linalg.norm(d)))


class TestMembershipResidual:
    def test_on_sphere(self):
        assert membership_residual(SphereSurface(2), [0.6, 0.8]) == 0.0

    def test_off_sphere(self):
        assert membership_residual(SphereSurface(2), [2.0, 0.0]) == 1.0

    def test_level_set_reports_g(self, unit_circle_ls):
        assert membership_residual(unit_circle_ls, [2.0, 0.0]) == 1.5

    def test_ball(self):
        assert membership_residual(BallBoundarySurface([1.0, 1.0], 2.0), [1.0, 4.0]) == 1.0


class TestSurfaces:
    def test_sphere_constants(self):
        s = SphereSurface(3, 2.5)
        assert s.R == s.r == 2.5

    def test_level_set_reach_default(self):
        ls = LevelSetSurface(g=lambda x: 0.0, grad_g=lambda x: x, m_lower=1.0, L1g=4.0)
        assert ls.R == 0.25

    def test_level_set_needs_reach_data(self):
        with pytest.raises(ValueError):
            LevelSetSurface(g=lambda x: 0.0, grad_g=lambda x: x)

    def test_level_set_samples_on_surface(self):
        ls = circle_level_set()
        pts = ls.sample(200, seed=3)
        assert max(ls.membership_residual(x) for x in pts) <= 1e-12

    def test_sampling_is_seeded(self):
        a = SphereSurface(4).sample(50, seed=7)
        b = SphereSurface(4).sample(50, seed=7)
        c = SphereSurface(4).sample(50, seed=8)
        assert np.array_equal(a, b) and not np.array_equal(a, c)
        np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, rtol=1e-14)


class TestReachOffset:
    def test_matches_direct_formula(self):
        R, d = 2.0, 0.5
        assert reach_offset(R, d) == pytest.approx(R - math.sqrt(R * R - d * d), rel=1e-14)

    def test_short_steps_keep_precision(self):
        # R - sqrt(R^2 - d^2) ~ d^2 / (2R); the direct form would cancel to 0
        assert reach_offset(1.0, 1e-9) == pytest.approx(5e-19, rel=1e-12)

    def test_beyond_reach(self):
        with pytest.raises(StepExceedsReach):
            reach_offset(1.0, 1.0)
