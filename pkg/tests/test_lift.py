import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearparabolic.errors import BranchError, OutOfDomain, PoleError
from nearparabolic.lift import (Covering, LiftedMap, ThetaRegion, c1_probe, cylcond_check,
                                exp_projection, log_branch, refine_c1, tau, tau_inverse,
                                theta_samples)
from nearparabolic.maps import CanonicalISMap, QuadraticMap

alphas = st.sampled_from([0.01, 0.02, 0.04])


@given(alphas, st.floats(0, 1), st.floats(-3, 3))
def test_covering_inverse_round_trip(a, x, y):
    cov = Covering(QuadraticMap(a))
    w = (x + 1j * y) / a
    if abs(w - round(w.real * a) / a) < 1.0:  # tau is ill-conditioned at the poles
        return
    z = cov.value(w)
    back = cov.inverse(z, 0.0)
    # near Im(alpha w) = -3 the value sits ~1e-9 from sigma, so compare images
    assert 0.0 <= back.real < 1.0 / a
    assert abs(cov.value(back) - z) < 1e-12 * max(1.0, abs(z))
    if abs(y) <= 1.5:
        assert abs(back - w) < 1e-9 / a or abs(abs(back - w) * a - 1) < 1e-9


@given(alphas, st.floats(-50, 50), st.floats(-3, 3))
def test_covering_periodic_and_derivative(a, x, y):
    cov = Covering(QuadraticMap(a))
    w = complex(x, y / a)
    if abs(w - round(w.real * a) / a) < 1.0:
        return
    assert abs(cov.value(w + 1 / a) - cov.value(w)) < 1e-9 * max(1.0, abs(cov.value(w)))
    h = 1e-5
    fd = (cov.value(w + h) - cov.value(w - h)) / (2 * h)
    assert abs(fd - cov.deriv(w)) < 1e-6 * max(1.0, abs(cov.deriv(w)))


def test_tau_limits_and_errors():
    a = 0.02
    cov = Covering(QuadraticMap(a))
    # tau tends to 0 as Im w -> +inf and to sigma as Im w -> -inf
    assert abs(tau(cov, 10j / a)) < 1e-20
    assert abs(tau(cov, -10j / a) - cov.sigma) < 1e-20
    with pytest.raises(PoleError):
        tau(cov, 0.0)
    with pytest.raises(PoleError):
        tau_inverse(cov, 0.0, (0, 50))
    with pytest.raises(BranchError):
        tau_inverse(cov, 0.1 + 0.1j, (0.0, 0.5))


@pytest.mark.parametrize("a", [0.02, 0.01])
def test_semi_conjugacy(a):
    h = QuadraticMap(a)
    F = LiftedMap(h)
    w = theta_samples(a, 1000, np.random.default_rng(0), c1=3.0)
    lhs = h(F.cov.value(w))
    rhs = F.cov.value(F.value(w))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_lift_of_cubic_family():
    h = CanonicalISMap(0.02)
    F = LiftedMap(h)
    w = theta_samples(0.02, 200, np.random.default_rng(1), c1=5.0, im_range=(5.0, 100.0))
    d = F.defect(w)
    ok = np.isfinite(d)
    assert ok.mean() > 0.9
    assert np.max(np.abs(h(F.cov.value(w[ok])) - F.cov.value(F.value(w[ok])))) < 1e-10


def test_defect_derivatives_by_differences():
    F = LiftedMap(QuadraticMap(0.02))
    w = 12.3 + 7.1j
    h = 1e-5
    fd = (F.value(w + h) - F.value(w - h)) / (2 * h)
    assert abs(fd - F.deriv(w)) < 1e-8
    fd2 = (F.deriv(w + h) - F.deriv(w - h)) / (2 * h)
    assert abs(fd2 - F.second(w)) < 1e-7
    v = F.inverse(F.value(w))
    assert abs(v - w) < 1e-12


def test_defect_decays_at_expected_rate():
    a = 0.02
    F = LiftedMap(QuadraticMap(a))
    s = theta_samples(a, 2000, np.random.default_rng(2), c1=3.0, r=0.5, im_range=(0, 3 / a))
    rep = cylcond_check(F, s, 0.5, 3.0)
    assert rep.slope_rel_error < 0.1
    assert rep.max_defect < 0.25
    assert math.isfinite(rep.c2) and math.isfinite(rep.c3)


@pytest.mark.parametrize("a", [0.02, 0.01])
def test_refined_c1_satisfies_quarter_bounds(a):
    F = LiftedMap(QuadraticMap(a))
    c1 = refine_c1(F, start=3.0, seed=0)
    probe = c1_probe(a, c1, 10_000, np.random.default_rng(1))
    assert np.max(np.abs(F.defect(probe))) < 0.25
    assert np.max(np.abs(F.deriv_defect(probe))) < 0.25


def test_defect_scalar_errors():
    F = LiftedMap(CanonicalISMap(0.02))
    # near a pole tau(w) is huge, far outside U
    with pytest.raises(OutOfDomain):
        F.defect(0.01 + 0.01j)

def test_theta_region():
    t = ThetaRegion(0.02, 3.0)
    assert not t.contains(50.0 + 1j)
    assert t.contains(25.0)
    ts = ThetaRegion(0.02, 0.5, scaled=True)
    assert ts.radius == pytest.approx(25.0)
    assert not ts.contains(10.0 - 200j)


@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=10, allow_nan=False,
                          allow_infinity=False))
def test_exp_log_inverse(z):
    zeta = log_branch(z, (0.3, 1.3))
    assert 0.3 <= zeta.real < 1.3
    assert abs(exp_projection(zeta) - z) < 1e-12 * max(1, abs(z))


def test_exp_normalisation():
    assert exp_projection(0) == pytest.approx(-4 / 27)
    with pytest.raises(OutOfDomain):
        log_branch(0j, (0, 1))
    assert cmath.isclose(exp_projection(1 + 0.25j), exp_projection(0.25j))
