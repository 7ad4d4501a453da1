import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearparabolic import arith
from nearparabolic.errors import ConfigError, OutOfDomain
from nearparabolic.measure import (OrbitCloud, box_area, box_grid, containment_fraction,
                                   eccentricity, forward_tail, julia_sample,
                                   limit_set_distance, mask_to_pgm_bytes, omega_shadow,
                                   porosity_experiment, porosity_probe, postcritical_cloud,
                                   q_region, read_pgm, siegel_stand_in, write_pgm,
                                   write_points_csv, write_report_json)
from nearparabolic.renorm import build_tower

ANGLE = arith.cf_from_digits((50,) * 30)


@pytest.fixture(scope="module")
def pc():
    return postcritical_cloud(ANGLE, 20_000)


@pytest.fixture(scope="module")
def level0_tower():
    return build_tower(ANGLE, 0)


def test_pc_cloud_recurrence(pc):
    assert len(pc) == 20_000 and not pc.escaped
    assert pc.recurrence_residual() < 1e-12
    assert abs(pc.points[0] - (-np.exp(4j * np.pi * ANGLE.value) / 4)) < 1e-15


def test_pc_cloud_escape_flag():
    c = postcritical_cloud(0.5, 100)  # parabolic-free, still bounded
    assert not c.escaped
    with pytest.raises(ConfigError):
        postcritical_cloud(0.3, 0)


@given(st.integers(2, 14))
def test_single_point_covers_one_box(m):
    assert box_grid(np.array([0.1 + 0.2j]), 2.0 ** -m).count == 1


def test_box_area_oracles():
    # a dense grid over the whole square fills every box
    t = np.linspace(-1.999, 1.999, 400)
    square = (t[:, None] + 1j * t[None, :]).ravel()
    assert box_area(square, 2.0 ** -4) == pytest.approx(16.0)
    # a horizontal segment of length 2 needs about 2/eps boxes
    seg = np.linspace(-1.0, 1.0 - 1e-9, 100_000) + 0.01j
    eps = 2.0 ** -8
    assert box_grid(seg, eps).count == pytest.approx(2.0 / eps, abs=1)
    g = box_grid(seg, eps)
    assert g.contains(np.array([0.3 + 0.01j, 0.3 + 0.5j])).tolist() == [True, False]
    assert np.all(np.abs(g.centers().imag - 0.01) <= eps / 2)


@pytest.mark.parametrize("eps", [0.3, 2.0 ** -1, 2.0 ** -15])
def test_box_rejects_bad_scale(eps):
    with pytest.raises(ConfigError):
        box_area(np.array([0j]), eps)


def test_box_area_decreases_for_pc(pc):
    assert box_area(pc, 2.0 ** -8) <= 0.5 * box_area(pc, 2.0 ** -4)


def test_porosity_oracles():
    far = np.array([1.5 + 1.5j])
    rep = porosity_probe(0j, far, [0.25, 0.125], resolution=1e-6)
    assert rep.ratios == [pytest.approx(1.0), pytest.approx(1.0)]
    # a point at the probe centre leaves a hole of half the radius
    rep = porosity_probe(0j, np.array([0j]), [0.25], resolution=0.0, n_radii=8)
    assert rep.ratios[0] == pytest.approx(0.5)
    assert rep.witness_scales(0.4) == 1 and rep.witness_scales(0.6) == 0
    # a dense disk leaves no hole
    t = np.linspace(-0.5, 0.5, 300)
    disk = (t[:, None] + 1j * t[None, :]).ravel()
    rep = porosity_probe(0j, disk, [0.25], resolution=2.0 ** -8)
    assert rep.ratios[0] == 0.0


def test_siegel_stand_in_golden_mean():
    g = arith.periodic_value(1)
    s = siegel_stand_in(g, n_rays=16, n_radii=40, n_iter=4000)
    assert np.all(s.radii > 0.1)
    assert np.all(s.radii < 1.0)
    assert s.distance(np.array([0j]))[0] == 0.0
    assert s.distance(np.array([3 + 0j]))[0] > 1.0


def test_porosity_experiment(pc):
    s = siegel_stand_in(ANGLE, n_rays=32, n_radii=40, n_iter=4000)
    reps = porosity_experiment(pc, s, 5, seed=1)
    assert len(reps) == 5
    assert all(r.witness_scales(0.05) >= 3 for r in reps)
    with pytest.raises(ConfigError):
        porosity_experiment(pc, s, 10 ** 6)


def test_julia_sample_is_deterministic_and_on_j():
    a = julia_sample(ANGLE, 20, seed=4)
    b = julia_sample(ANGLE, 20, seed=4)
    assert np.array_equal(a.points, b.points)
    assert np.all(np.abs(a.points) < 2)
    # backward images stay out of the Siegel disk interior near 0
    assert np.all(np.abs(a.points) > 0.05)
    assert not np.array_equal(a.points, julia_sample(ANGLE, 20, seed=5).points)


def test_forward_tail_shapes():
    tail, esc = forward_tail(0.3, np.array([0.01 + 0j, 5 + 0j]), 10)
    assert tail.shape == (5, 2)
    assert not esc[0] and esc[1]
    assert np.all(np.isnan(tail[:, 1]))


def test_limit_set_distance_oracles(pc):
    eps = 2.0 ** -6
    d1, d2 = limit_set_distance(pc.points, pc, eps)
    assert d1 <= eps / math.sqrt(2) + 1e-12 and d2 <= eps / math.sqrt(2) + 1e-12
    d1, d2 = limit_set_distance(np.array([0.0, np.nan]), pc, eps)
    assert d1 == math.inf
    with pytest.raises(ConfigError):
        limit_set_distance(np.array([]), pc, eps)


def test_eccentricity():
    circle = 0.5 * np.exp(2j * np.pi * np.arange(2000) / 2000)
    assert eccentricity(circle, 0j) == pytest.approx(1.0, rel=1e-5)
    square = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    assert eccentricity(square, 0j) == pytest.approx(math.sqrt(2))
    with pytest.raises(OutOfDomain):
        eccentricity(square, 3j)


def test_omega_shadow_level0(level0_tower, pc):
    s = omega_shadow(level0_tower, 0, refine=2)
    assert s.filled.any() and np.all(s.filled >= s.hits)
    # finer seeding only adds boxes and raises the captured share of the PC orbit
    fine = omega_shadow(level0_tower, 0, refine=6)
    coarse_frac = containment_fraction(s, pc.points[:500])
    fine_frac = containment_fraction(fine, pc.points[:500])
    assert 0.9 < coarse_frac <= fine_frac
    assert fine.filled.sum() >= s.filled.sum()
    assert not s.contains(np.array([1.9 + 1.9j]))[0]
    with pytest.raises(ConfigError):
        omega_shadow(level0_tower, 1)
    with pytest.raises(ConfigError):
        omega_shadow(level0_tower, 0, eps=0.1)


def test_q_region_level0(level0_tower):
    q = q_region(level0_tower, 0)
    assert q.tau >= 1
    assert 1.0 <= q.eccentricity < 10.0


def test_writers_round_trip(tmp_path):
    mask = np.zeros((8, 4), dtype=bool)
    mask[1, 3] = True
    p = tmp_path / "m.pgm"
    write_pgm(p, mask)
    back = read_pgm(p)
    assert back.shape == (8, 4) and back[1, 3] == 255 and back.sum() == 255
    data = mask_to_pgm_bytes(mask)
    assert data.startswith(b"P5\n8 4\n255\n")
    # top row is the largest imaginary index
    assert data[len(b"P5\n8 4\n255\n") + 1] == 255
    field = np.array([[0.0, np.nan], [1.0, 2.0]])
    assert read_pgm_bytes(mask_to_pgm_bytes(field)).max() == 255

    cloud = OrbitCloud(np.array([1 + 2j, 0.1 - 0.3j]), "t")
    write_points_csv(tmp_path / "c.csv", cloud)
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "index,re,im" and rows[2] == "1,0.1,-0.3"

    text = write_report_json(tmp_path / "r.json", {"b": np.float64(np.inf), "a": 1 + 2j,
                                                   "c": np.bool_(True)})
    assert text.index('"a"') < text.index('"b"')
    assert '"inf"' in text and "true" in text


def read_pgm_bytes(data):
    head = data.split(b"\n", 3)
    w, h = (int(v) for v in head[1].split())
    return np.frombuffer(head[3], dtype=np.uint8).reshape(h, w)
