import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearparabolic import arith
from nearparabolic.errors import ConfigError
from nearparabolic.lift import exp_projection
from nearparabolic.renorm import (build_tower, compute_k, descend_pairs, eta_window,
                                  psi_map, renorm_correspondence, renormalize, return_map,
                                  return_map_deriv, rotation_number_at_zero, sector_boundaries)

ANGLE = arith.cf_from_digits((50,) * 30)


@pytest.fixture(scope="module")
def level0():
    return build_tower(ANGLE, 0)[0]


@pytest.fixture(scope="module")
def f1(level0):
    return renormalize(level0.chart, level0.sectors, ANGLE.tower[1])


def test_k_and_stability(level0):
    assert level0.k == 5
    assert compute_k(level0.chart, refine=2).k == level0.k


def test_sectors_in_admissible_strip(level0):
    s = level0.sectors
    bound = int(1 / level0.alpha) - level0.chart.constants.k_bold - 1
    for poly in (s.csharp_phi, s.c_phi):
        assert np.all((poly.real > 0) & (poly.real < bound))
    h = level0.chart.map
    z = s.cp_pullback
    for _ in range(s.k - 1):
        z = h(z)
    assert abs(z - h.critical_point) < 1e-8


def test_sector_boundaries_shape():
    cs, c = sector_boundaries(1, 30.0)
    assert cs[0].real == 0.5 and cs[-1].real == 1.5
    assert np.min(cs.imag) == pytest.approx(2.0)
    assert np.all(np.abs(c.real - 1.0) <= 0.5 + 1e-12)
    assert np.all(np.abs(c.imag) <= 2.0 + 1e-12)


@given(x=st.floats(0.6, 1.4), y=st.floats(-1.5, 1.5))
def test_return_map_equivariance(level0, x, y):
    # ret(zeta + 1) = ret(zeta) + 1 while both stay in the chart
    zeta = complex(x, y) + 2.0
    r0 = return_map(level0.chart, 5, zeta)
    r1 = return_map(level0.chart, 5, zeta + 1.0)
    assert abs(r1 - r0 - 1.0) < 1e-6


def test_return_map_derivative(level0):
    ch = level0.chart
    zeta = 1.1 + 0.3j
    v, d = return_map_deriv(ch, 5, np.array([zeta]))
    h = 1e-6
    fd = (return_map(ch, 5, zeta + h) - return_map(ch, 5, zeta - h)) / (2 * h)
    assert abs(fd - d[0]) < 1e-5 * abs(d[0])


def test_renormalized_map_normalisation(f1):
    assert f1(0j) == 0
    assert abs(rotation_number_at_zero(f1) - ANGLE.tower[1]) < 1e-3
    assert abs(f1.deriv(f1.critical_point)) < 1e-8
    assert abs(f1(f1.critical_point) - (-4 / 27)) < 1e-8


def test_renorm_two_paths(level0, f1):
    err, ls = renorm_correspondence(level0, f1, n_samples=10, seed=3)
    assert err < 1e-5
    assert len(ls) == 10


def test_eta_window(level0):
    lo, hi = eta_window(level0.chart)
    assert hi - lo == pytest.approx(1.0)
    assert 0 <= lo < 1


def test_descent_depth0(level0):
    z = complex(level0.chart.inverse(10.25 + 0.5j)[0])
    steps = descend_pairs(z, [level0], 0)
    assert steps[0].branch == "A"
    assert abs(steps[0].zeta - (10.25 + 0.5j)) < 1e-6
    with pytest.raises(ValueError):
        descend_pairs(z, [level0], 1)


def test_psi_needs_levels(level0):
    with pytest.raises(ValueError):
        psi_map([level0], 1, 0.1 + 0j)


def test_tower_config_errors():
    with pytest.raises(ConfigError):
        build_tower(ANGLE, 3)
    with pytest.raises(ConfigError):
        build_tower(arith.cf_from_digits((5, 50)), 1)
    with pytest.raises(ConfigError):
        build_tower(arith.cf_from_digits((50,)), 1)


def test_exp_of_translates_agree(f1):
    zeta = 2.2 + 0.7j
    assert abs(exp_projection(zeta) - exp_projection(zeta + 3)) < 1e-15
