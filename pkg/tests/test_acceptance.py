"""Acceptance criteria 1-8 at their pinned tolerances.

One ``verify-all`` run (default configuration, seed 0) feeds criteria 1-7;
criterion 8 runs it a second time and compares the reports byte for byte.
Each test prints a single PASS/FAIL line.
"""

import json
import math

import pytest

from nearparabolic import cli

# achieved value -> pass? for every check of every criterion
PINNED = {
    1: {
        "cf_round_trip_failures": lambda v: v == 0,
        "determinant_identity_failures": lambda v: v == 0,
        "periodic_brjuno_closed_form_error": lambda v: v < 1e-9,
    },
    2: {
        "semi_conjugacy[0.02]": lambda v: v < 1e-10,
        "semi_conjugacy[0.01]": lambda v: v < 1e-10,
        "max_defect_on_c1_probe[0.02]": lambda v: v < 0.25,
        "max_defect_on_c1_probe[0.01]": lambda v: v < 0.25,
        "defect_slope_rel_error[0.02]": lambda v: v < 0.1,
        "defect_slope_rel_error[0.01]": lambda v: v < 0.1,
    },
    3: {
        **{f"abel_residual[{a}]": (lambda v: v < 1e-6) for a in (0.02, 0.01)},
        **{f"abel_grid_size[{a}]": (lambda v: v >= 1000) for a in (0.02, 0.01)},
        **{f"phi_cp[{a}]": (lambda v: v < 1e-6) for a in (0.02, 0.01)},
        **{f"phi_cv_minus_one[{a}]": (lambda v: v < 1e-6) for a in (0.02, 0.01)},
        **{f"inverse_round_trip[{a}]": (lambda v: v < 1e-7) for a in (0.02, 0.01)},
        **{f"linearizer_equivariance[{a}]": (lambda v: v < 1e-6) for a in (0.02, 0.01)},
    },
    4: {
        **{f"model_anchor_edge[{a}]": (lambda v: v < 1e-12) for a in (0.02, 0.01)},
        **{f"model_closing_edge[{a}]": (lambda v: v < 1e-12) for a in (0.02, 0.01)},
        **{f"seam_c1_ratio[{a}]": (lambda v: 5 <= v <= 20) for a in (0.02, 0.01)},
        **{f"seam_c2_ratio[{a}]": (lambda v: 5 <= v <= 20) for a in (0.02, 0.01)},
        **{f"ds_slope_rel_error[{a}]": (lambda v: v < 0.1) for a in (0.02, 0.01)},
        **{f"dt_slope_rel_error[{a}]": (lambda v: v < 0.1) for a in (0.02, 0.01)},
    },
    5: {
        "constant_M_transfer_ratio": lambda v: 1 / 3 <= v <= 3,
        "constant_C_transfer_ratio": lambda v: 1 / 3 <= v <= 3,
        **{f"linearizer_slope_rel_error[{a}]": (lambda v: v < 0.1) for a in (0.02, 0.01)},
        **{f"chi_slope_rel_error[{a}]": (lambda v: v < 0.1) for a in (0.02, 0.01)},
    },
    6: {
        "rotation_transport": lambda v: v < 1e-3,
        "renorm_two_path": lambda v: v < 1e-5,
        "conjugacy_first_identity": lambda v: v < 1e-4,
        "conjugacy_second_identity": lambda v: v < 1e-4,
        "k_refinement_change": lambda v: v == 0,
    },
    7: {
        "nesting_margin": lambda v: v > 0,
        "pc_containment_fraction": lambda v: v == 1.0,
        "box_area_ratio_fine_over_coarse": lambda v: v <= 0.5,
        "porosity_probes_below_three_scales": lambda v: v == 0,
        "typical_orbit_median_d1": lambda v: v <= 2 * 2 ** -6 * math.sqrt(2),
        "typical_orbit_median_d2": lambda v: v <= 2 * 2 ** -6 * math.sqrt(2),
    },
}


def _value(v):
    return float(v)  # non-finite values arrive as the strings "inf"/"nan"


def _announce(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify1")
    code = cli.main(["verify-all", "--out", str(out)])
    raw = (out / "report.json").read_bytes()
    return code, raw, json.loads(raw)


def _checks(report, n):
    prefix = f"criterion_{n}."
    return {c["name"][len(prefix):]: c for c in report["checks"] if c["name"].startswith(prefix)}


@pytest.mark.parametrize("n", sorted(PINNED))
def test_criterion(first_run, capsys, n):
    _, _, report = first_run
    checks = _checks(report, n)
    failed = []
    for name, rule in PINNED[n].items():
        assert name in checks, f"check {name} missing from the report"
        v = _value(checks[name]["achieved"])
        if not rule(v):
            failed.append(f"{name}={v:.3g}")
    if n == 1:
        # the functional-equation bound depends on the run's tail bound
        c = checks["brjuno_functional_equation_residual"]
        bound = 10 * report["result"]["1"]["info"]["tail_bound"]
        if not _value(c["achieved"]) < bound:
            failed.append(f"brjuno_functional_equation_residual={_value(c['achieved']):.3g}")
    detail = "; ".join(failed) if failed else f"({len(checks)} checks)"
    _announce(capsys, n, not failed, detail)
    assert not failed, detail


def test_criterion_8_determinism(first_run, capsys, tmp_path):
    code1, raw1, _ = first_run
    code2 = cli.main(["verify-all", "--out", str(tmp_path)])
    raw2 = (tmp_path / "report.json").read_bytes()
    identical = raw1 == raw2
    ok = identical and code1 == code2 == 0
    _announce(capsys, 8, ok, f"(byte-identical={identical}, exit codes {code1}/{code2})")
    assert identical
    assert code1 == 0 and code2 == 0
