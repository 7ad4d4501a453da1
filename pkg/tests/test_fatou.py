import math

import numpy as np
import pytest

from nearparabolic.errors import AnchorError, ExtensionDomainError, InversionError
from nearparabolic.fatou import (ChartOptions, abel_residuals, build_chart, chart_from_json,
                                 chart_points, chart_to_json, chi_value, default_anchor,
                                 fatou_inverse, fit_chi_decay, fit_linearizer_decay,
                                 in_sector, injectivity_check, inverse_derivative_bound,
                                 linearizer_equivariance, linearizer_value, model_build,
                                 model_checks, phi_dagger, phi_left_extension, ray_check)
from nearparabolic.lift import LiftedMap, refine_c1, theta_samples
from nearparabolic.maps import QuadraticMap


def test_normalisation(chart02):
    h = chart02.map
    cp = complex(h.critical_point)
    assert abs(chart02.value(cp)) < 1e-6
    assert abs(chart02.value(h(cp)) - 1) < 1e-6


def test_abel_equation(chart02):
    r = abel_residuals(chart02, 1200, 2.5, np.random.default_rng(99))
    assert r.size >= 1000
    assert r.max() < 1e-6


def test_abel_equation_along_orbit(chart02):
    # an orbit crossing the chart advances by exactly one each step
    h = chart02.map
    z = complex(h.critical_point)
    vals = []
    for _ in range(40):
        vals.append(complex(chart02.value(z)))
        z = complex(h(z))
    assert np.allclose(np.diff(vals), 1.0, atol=1e-6)


def test_inverse_round_trip(chart02):
    z = chart_points(chart02, 300, np.random.default_rng(4))
    back, res = chart02.inverse(chart02.value(z))
    assert np.max(np.abs(back - z)) < 1e-7
    assert np.max(res) <= chart02.inv_tol


def test_strict_inverse_raises_far_away(chart02):
    with pytest.raises(InversionError):
        fatou_inverse(chart02, 5.0 + 1e6j)


def test_linearizer(chart02):
    a = chart02.alpha
    F = LiftedMap(chart02.map)
    c1 = refine_c1(F)
    w = theta_samples(a, 400, np.random.default_rng(5), c1=c1, im_range=(-1 / a, 2 / a))
    eq = linearizer_equivariance(chart02, F, w)
    assert np.nanmax(eq) < 1e-6
    # L is close to a translation high up
    w = np.array([10.0 + 2.0j / a, 20.0 + 2.5j / a])
    L = linearizer_value(chart02, w)
    assert np.ptp((L - w).real) < 0.5


def test_injectivity_and_ray(chart02):
    assert injectivity_check(chart02, 1000) == 0
    v, increasing = ray_check(chart02)
    assert increasing and np.all(np.isfinite(v))


def test_left_extension_and_dagger(chart02):
    h = chart02.map
    z = complex(chart02.inverse(0.3 + 0.2j)[0])
    assert abs(phi_left_extension(chart02, z) - (0.3 + 0.2j)) < 1e-6
    # a preimage of a chart point is handled through one forward step
    pre = complex(h.preimage_near(z, z))
    assert abs(phi_left_extension(chart02, pre) - (-0.7 + 0.2j)) < 1e-6
    # past the strip the dagger map is the orbit continuation of the inverse
    zeta = chart02.strip_width + 3.2 + 0.4j
    zd = phi_dagger(chart02, zeta)
    assert abs(h(phi_dagger(chart02, zeta - 1)) - zd) < 1e-8
    with pytest.raises(ExtensionDomainError):
        phi_dagger(chart02, 0.5 + 0j)


def test_chi_window(chart02):
    k = chart02.constants.k_prime
    v = chi_value(chart02, np.array([k + 2.0 + 1j, k + 3.0 + 5j]), (0.0, 1.0))
    assert np.all((v.real >= 0) & (v.real < 1))


def test_sectors(chart02):
    z = chart02.inverse(np.array([1.0 + 0.0j, 1.0 + 3.0j, 3.0 + 0.0j]))[0]
    assert list(in_sector(chart02, z, "C")) == [True, False, False]
    assert list(in_sector(chart02, z, "C#")) == [False, True, False]
    with pytest.raises(ValueError):
        in_sector(chart02, z, "D")


def test_decay_fits(chart02):
    m = fit_linearizer_decay(chart02, 0.5)
    c = fit_chi_decay(chart02, 0.5)
    assert m.slope_rel_error < 0.1 and c.slope_rel_error < 0.1
    assert m.constant > 0 and c.constant > 0
    assert 1.0 <= inverse_derivative_bound(chart02) < 10.0


def test_json_round_trip(chart02):
    copy = chart_from_json(chart_to_json(chart02))
    z = chart_points(chart02, 50, np.random.default_rng(6))
    assert np.allclose(copy.value(z), chart02.value(z), atol=1e-12, equal_nan=True)
    with pytest.raises(ValueError):
        chart_from_json('{"format": "other"}')


def test_build_rejects_large_alpha():
    with pytest.raises(ValueError):
        build_chart(QuadraticMap(0.2))


def test_build_is_deterministic():
    opts = ChartOptions(n_validation=1000)
    a = build_chart(QuadraticMap(0.03), opts)
    b = build_chart(QuadraticMap(0.03), opts)
    assert np.array_equal(a.coeffs, b.coeffs)


@pytest.mark.parametrize("a", [0.02, 0.01])
def test_model_map(a):
    F = LiftedMap(QuadraticMap(a))
    c1 = refine_c1(F)
    H = model_build(F, default_anchor(a, c1), c1=c1)
    rep = model_checks(H)
    flags = rep.passes()
    assert flags["anchor"] and flags["closure"]
    assert flags["seam_c1"] and flags["seam_c2"]
    assert flags["slope_ds"] and flags["slope_dt"]
    # the model starts on the vertical line through the anchor
    assert abs(H.value(0.0, 7.0) - (H.A + 7j)) < 1e-12
    assert abs(H.value(1.0, 7.0) - F.value(H.A + 7j)) < 1e-12


def test_model_rejects_anchor_near_pole():
    F = LiftedMap(QuadraticMap(0.02))
    with pytest.raises(AnchorError):
        model_build(F, 0.5 + 0j)
    assert math.isfinite(default_anchor(0.02, 3.0).real)
