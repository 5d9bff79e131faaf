import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nodalkit import covariance as cv
from nodalkit.errors import DegenerateVarianceError, DomainError
from nodalkit.oracles import legendre_series_oracle, mp_conditional_moments

points = st.tuples(st.floats(0.0, math.pi / 2), st.floats(0.0, 2 * math.pi))
interior_theta = st.floats(0.02, math.pi / 2 - 0.02)


class TestMirror:
    @pytest.mark.parametrize("point, image", [
        ((math.pi / 2, 1.0), (math.pi / 2, 1.0)),
        ((0.0, 0.0), (math.pi, 0.0)),
        ((math.pi / 3, 2.5), (2 * math.pi / 3, 2.5)),
    ])
    def test_examples(self, point, image):
        assert cv.mirror(point) == pytest.approx(image, abs=1e-15)

    def test_hemisphere_point(self):
        p = cv.HemispherePoint(math.pi / 4, 0.3)
        assert p.psi(10) == pytest.approx(10 * math.pi / 2)
        assert cv.HemispherePoint.from_psi(10, p.psi(10), 0.3).theta == pytest.approx(p.theta)
        with pytest.raises(DomainError):
            cv.HemispherePoint(2.0)

    @given(st.floats(0.0, math.pi / 2), st.integers(0, 500))
    def test_psi_nonnegative(self, theta, degree):
        assert cv.HemispherePoint(theta).psi(degree) >= 0.0


class TestCovariance:
    def test_variance_at_45_degrees(self):
        x = (math.pi / 4, 0.0)
        assert cv.covariance(2, x, x) == pytest.approx(1.0 - legendre_series_oracle(2, 0.0), abs=1e-15)
        assert cv.covariance(2, x, x) == pytest.approx(1.5, abs=1e-15)

    @pytest.mark.parametrize("degree", [1, 2, 7, 10])
    def test_pole(self, degree):
        pole = (0.0, 0.0)
        assert cv.covariance(degree, pole, pole) == pytest.approx(1 - (-1) ** degree, abs=1e-15)

    @given(st.integers(1, 120), points, st.floats(0, 2 * math.pi))
    def test_dirichlet(self, degree, x, phi):
        assert abs(cv.covariance(degree, x, (math.pi / 2, phi))) <= 1e-12

    @given(st.integers(1, 120), points, points)
    def test_symmetric(self, degree, x, y):
        assert cv.covariance(degree, x, y) == pytest.approx(cv.covariance(degree, y, x), abs=1e-12)

    @given(st.integers(1, 100), interior_theta)
    def test_diagonal_is_block_variance(self, degree, theta):
        if degree % 2 == 0 or theta > 0.0:
            blocks = cv.covariance_blocks(degree, theta)
            x = (theta, 0.4)
            assert cv.covariance(degree, x, x) == pytest.approx(blocks.a, abs=1e-12)

    def test_mirror_antisymmetry(self):
        x, y = (0.7, 0.2), (1.1, 2.0)
        assert cv.covariance(9, cv.mirror(x), y) == pytest.approx(-cv.covariance(9, x, y), abs=1e-14)


class TestBlocks:
    def test_degree_two_at_45_degrees(self):
        b = cv.covariance_blocks(2, math.pi / 4)
        assert b.a == pytest.approx(1.5, abs=1e-15)
        assert b.b[0] == pytest.approx(0.0, abs=1e-15)
        assert b.c[1, 1] == pytest.approx(3.0, abs=1e-15)

    @given(st.integers(1, 200), interior_theta)
    def test_structure(self, degree, theta):
        b = cv.covariance_blocks(degree, theta)
        assert b.b[1] == 0.0 and b.c[0, 1] == 0.0 and b.c[1, 0] == 0.0
        assert -1e-12 <= b.a <= 2.0 + 1e-12
        assert b.c[0, 0] >= -1e-9 and b.c[1, 1] >= -1e-9

    def test_equator_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            cv.covariance_blocks(2, math.pi / 2)
        with pytest.raises(DegenerateVarianceError):
            cv.covariance_blocks(4, 0.0)
        cv.covariance_blocks(3, 0.0)    # odd degree: the pole is an ordinary point

    def test_variance_vanishes_towards_equator(self):
        assert cv.covariance_blocks(2, math.pi / 2 - 1e-6).a < 1e-10


class TestConditional:
    def test_degree_two(self):
        cc = cv.conditional_covariance(2, math.pi / 4)
        assert cc.omega[1, 1] == pytest.approx(3.0, abs=1e-14)
        assert cc.s22 == pytest.approx(0.0, abs=1e-15)

    def test_diagonal_at_45_degrees(self):
        degree = 40
        cc = cv.conditional_covariance(degree, math.pi / 4)
        half = degree * (degree + 1) / 2
        assert cc.omega[0, 1] == 0.0
        assert cc.omega[0, 0] <= half * (1 + abs(cc.s11)) + 1e-9
        assert cc.omega[1, 1] <= half * (1 + abs(cc.s22)) + 1e-9

    @given(st.integers(2, 300), st.floats(0.1, math.pi / 2 - 0.1))
    def test_two_routes_agree(self, degree, theta):
        cc = cv.conditional_covariance(degree, theta)
        half = degree * (degree + 1) / 2
        rebuilt = half * (np.eye(2) + np.diag([cc.s11, cc.s22]))
        assert np.allclose(cc.omega, rebuilt, rtol=1e-9, atol=1e-9 * half)

    @given(st.integers(2, 300), interior_theta)
    def test_psd_and_reduced(self, degree, theta):
        cc = cv.conditional_covariance(degree, theta)
        blocks = cv.covariance_blocks(degree, theta)
        scale = degree * (degree + 1)
        assert np.all(np.linalg.eigvalsh(cc.omega) >= -1e-9 * scale)
        assert np.all(np.diag(cc.omega) <= np.diag(blocks.c) + 1e-9 * scale)

    def test_decay_at_fixed_angle(self):
        # |S| ~ psi^(-1/2) = (l pi / 3)^(-1/2) at theta = pi/3
        for degree in (100, 400, 1600):
            cc = cv.conditional_covariance(degree, math.pi / 3)
            envelope = 2 * math.sqrt(2 / math.pi) / math.sqrt(degree * math.pi / 3)
            assert abs(cc.s11) <= 1.05 * envelope + 2.0 / degree
            assert abs(cc.s22) <= 1.05 * envelope

    def test_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            cv.conditional_covariance(10, math.pi / 2)
        with pytest.raises(DegenerateVarianceError):
            cv.conditional_covariance(10, math.pi / 2 - 1e-9)


class TestSeries:
    @pytest.mark.parametrize("degree", [2, 3, 10, 100, 800])
    def test_against_high_precision(self, degree):
        for psi in (1e-4, 0.01, 0.2, 0.5):
            var, o11, o22 = cv.near_boundary_series(degree, psi)
            ref = mp_conditional_moments(degree, psi)
            assert var == pytest.approx(ref[0], rel=1e-13)
            assert o22 == pytest.approx(ref[2], rel=1e-13)
            assert o11 == pytest.approx(ref[1], rel=1e-12, abs=1e-13 * degree**2)

    def test_degree_two_is_exactly_degenerate(self):
        # T_2 is linear along meridians: nothing left of d/dtheta after conditioning
        assert cv.near_boundary_series(2, 0.3)[1] == 0.0

    def test_vectorised(self):
        psi = np.array([0.01, 0.1, 0.4])
        var, o11, o22 = cv.near_boundary_series(50, psi)
        for i, p in enumerate(psi):
            assert cv.near_boundary_series(50, p) == (var[i], o11[i], o22[i])


def test_degree_two_conditional_variance_is_clamped():
    # omega11 vanishes identically for l = 2; rounding must not make it negative
    for theta in np.linspace(0.05, 1.5, 30):
        assert cv.conditional_covariance(2, float(theta)).omega[0, 0] >= 0.0
