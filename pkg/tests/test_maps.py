import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearparabolic.errors import OutOfDomain
from nearparabolic.maps import (CanonicalISMap, DomainU, DomainV, ModelCubic, QuadraticMap,
                                critical_orbit, derivative, evaluate, newton_fixed_point,
                                sigma_fixed_point)

alphas = st.floats(0.001, 0.05)
discs = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


@given(alphas, discs)
def test_quadratic_factorisation(a, z):
    h = QuadraticMap(a)
    assert abs(h(z) - z - z * (z - h.sigma)) < 1e-12


@given(alphas)
def test_quadratic_fixed_points_and_critical_data(a):
    h = QuadraticMap(a)
    assert abs(h(h.sigma) - h.sigma) < 1e-14
    assert abs(h.deriv(0) - cmath.exp(2j * math.pi * a)) < 1e-15
    assert abs(h.deriv(h.critical_point)) < 1e-15
    assert abs(h(h.critical_point) - h.critical_value) < 1e-15
    assert sigma_fixed_point(h) == h.sigma


@given(alphas, discs)
def test_quadratic_preimages(a, y):
    h = QuadraticMap(a)
    big, small = h.preimages(y)
    assert abs(h(big) - y) < 1e-12 and abs(h(small) - y) < 1e-12
    assert abs(big) >= abs(small) - 1e-12


def test_quadratic_rejects_bad_alpha():
    with pytest.raises(ValueError):
        QuadraticMap(0.0)


def test_model_cubic():
    P = ModelCubic()
    assert P.deriv(P.critical_point) == pytest.approx(0)
    assert P(P.critical_point) == pytest.approx(P.critical_value)
    assert P.critical_value == pytest.approx(-4 / 27)


def test_domain_u_shape():
    U = DomainU()
    assert U.contains(0.0)
    assert U.contains(-1 / 3)  # the critical point lies in U
    assert not U.contains(-1.0)  # g(w) = -1 forces w = 1, inside the ellipse
    assert not U.contains(1000.0)  # near infinity: preimages close to -1
    b = U.boundary(256)
    assert np.all(np.abs(U.margin(b)) < 1e-9)


@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_domain_u_preimages_are_inverse(z):
    if abs(z) < 1e-6 or abs(z + 1) < 1e-6:
        return
    U = DomainU()
    outer, inner = U.g_preimages(z)
    assert abs(U.g(outer) - z) < 1e-8 * max(1, abs(z))
    assert abs(outer * inner - 1) < 1e-12


def test_domain_v():
    V = DomainV()
    P = ModelCubic()
    assert V.contains(0.0)
    assert not V.contains(-1.0) and not V.contains(-2.0)
    assert not V.contains(1e4)
    # the excised disk really contains the small component at -1
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    z = -1 + V.b_radius * np.exp(1j * th)
    assert np.all(np.abs(P(z)) >= V.inner_radius * (1 - 1e-9))


def test_canonical_map():
    a = 0.02
    h = CanonicalISMap(a)
    s = h.sigma
    assert abs(h(s) - s) < 1e-12
    assert abs(s) < 0.2
    assert abs(h.deriv(0) - h.multiplier) < 1e-15
    z = np.array([0.05 + 0.02j, -0.1j])
    u, du, _ = h.u_factor(z)
    assert np.allclose(h(z) - z, z * (z - s) * u)
    assert np.isnan(h(-1.0))
    with pytest.raises(OutOfDomain):
        evaluate(h, -1.0)
    with pytest.raises(OutOfDomain):
        derivative(h, -1.0)


def test_critical_orbit_and_newton():
    pts, esc = critical_orbit(QuadraticMap(0.02), 100)
    assert not esc and pts.size == 100
    pts, esc = critical_orbit(QuadraticMap(0.5), 5)
    assert pts.size == 5
    h = QuadraticMap(0.02)
    assert abs(newton_fixed_point(h, h.sigma + 0.02) - h.sigma) < 1e-12
