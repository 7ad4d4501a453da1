"""Acceptance checks grouped by criterion.

Each ``criterion_*`` function returns a dict with a title, a list of checks
(name, achieved value, target, pass flag) and free-form ``info``. Heavy
objects (charts, the renormalization tower) are shared through a
:class:`SuiteContext` so that one run builds each of them once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import arith
from .fatou import (ChartOptions, FittedConstants, abel_residuals, build_chart, chart_points,
                    default_anchor, fit_chi_decay, fit_linearizer_decay, linearizer_equivariance,
                    model_build, model_checks)
from .lift import LiftedMap, c1_probe, cylcond_check, refine_c1, theta_samples
from .maps import QuadraticMap
from .measure import (box_area, containment_fraction, nesting_check, omega_shadow,
                      porosity_experiment, postcritical_cloud, q_region, siegel_stand_in,
                      typical_orbit_statistic)
from .renorm import (build_tower, compute_k, conjugacy_residual, renorm_correspondence)

CHART_ALPHAS = (0.02, 0.01)


@dataclass
class Check:
    name: str
    achieved: float
    target: str
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "achieved": self.achieved, "target": self.target,
                "passed": bool(self.passed)}


def _lt(name, value, bound):
    value = float(value)
    return Check(name, value, f"< {bound:g}", bool(value < bound))


def _le(name, value, bound):
    value = float(value)
    return Check(name, value, f"<= {bound:g}", bool(value <= bound))


def _gt(name, value, bound):
    value = float(value)
    return Check(name, value, f"> {bound:g}", bool(value > bound))


def _eq(name, value, target):
    return Check(name, value, f"== {target}", bool(value == target))


def _result(title, checks, info=None):
    return {
        "title": title,
        "checks": [c.as_dict() for c in checks],
        "passed": all(c.passed for c in checks),
        "info": info or {},
    }


@dataclass
class SuiteContext:
    """Shared state of one suite run."""

    digits: tuple
    type_floor: int = 50
    depth: int = 1
    seed: int = 0
    options: ChartOptions = field(default_factory=ChartOptions)
    pc_iter: int = 100_000
    julia_samples: int = 100
    orbit_iter: int = 100_000
    porosity_probes: int = 20
    _charts: dict = field(default_factory=dict, repr=False)
    _tower: list | None = field(default=None, repr=False)

    @property
    def angle(self):
        return arith.cf_from_digits(self.digits, type_floor=self.type_floor)

    @property
    def constants(self) -> FittedConstants:
        return self.options.constants

    def chart(self, alpha: float):
        if alpha not in self._charts:
            self._charts[alpha] = build_chart(QuadraticMap(alpha), self.options)
        return self._charts[alpha]

    def tower(self):
        if self._tower is None:
            self._tower = build_tower(self.angle, self.depth, self.options)
        return self._tower


# ------------------------------------------------------------- criterion 1
def criterion_arithmetic(ctx: SuiteContext, n_sets: int = 200) -> dict:
    rng = np.random.default_rng(ctx.seed)
    round_trip_bad = 0
    det_bad = 0
    for _ in range(n_sets):
        depth = int(rng.integers(1, 26))
        digits = tuple(int(d) for d in rng.integers(2, 101, depth))
        ang = arith.cf_from_digits(digits)
        if arith.cf_expand(ang.exact, max_depth=64) != digits:
            round_trip_bad += 1
        cv = ang.convergents
        for k in range(1, len(cv)):
            (p0, q0), (p1, q1) = cv[k - 1], cv[k]
            if p1 * q0 - p0 * q1 != (-1) ** (k - 1):
                det_bad += 1

    ang = ctx.angle
    # equal truncation depths leave one unmatched term, bounded by the tail
    d = min(ang.depth - 2, 5)
    b0 = arith.brjuno_sum(ang, d)
    b1 = arith.brjuno_sum(ang.shifted(), d)
    a0 = ang.tower[0]
    fe_res = abs(b0.value - math.log(1.0 / a0) - a0 * b1.value)
    fe_bound = 10.0 * b0.tail_bound

    a = 50
    x = arith.periodic_value(a)
    per = arith.cf_from_digits((a,) * 40)
    bp = arith.brjuno_sum(per, 38)
    closed = math.log(1.0 / x) / (1.0 - x)
    checks = [
        _eq("cf_round_trip_failures", round_trip_bad, 0),
        _eq("determinant_identity_failures", det_bad, 0),
        _lt("brjuno_functional_equation_residual", fe_res, fe_bound),
        _lt("periodic_brjuno_closed_form_error", abs(bp.value - closed), 1e-9),
    ]
    info = {"digit_sets": n_sets, "brjuno_value": b0.value, "tail_bound": b0.tail_bound}
    return _result("continued fractions and Brjuno sums", checks, info)


# ------------------------------------------------------------- criterion 2
def criterion_lift(ctx: SuiteContext) -> dict:
    checks = []
    info = {}
    for a in CHART_ALPHAS:
        h = QuadraticMap(a)
        F = LiftedMap(h)
        rng = np.random.default_rng(ctx.seed)
        c1 = refine_c1(F, start=ctx.constants.c1, seed=ctx.seed)
        w = theta_samples(a, 1000, rng, c1=c1)
        semi = float(np.max(np.abs(h(F.cov.value(w)) - F.cov.value(F.value(w)))))
        probe = c1_probe(a, c1, 10_000, np.random.default_rng(ctx.seed + 1))
        defect = float(np.max(np.abs(F.defect(probe))))
        s = theta_samples(a, 2000, rng, c1=c1, r=0.5, im_range=(0.0, 3.0 / a))
        rep = cylcond_check(F, s, 0.5, c1)
        checks += [
            _lt(f"semi_conjugacy[{a}]", semi, 1e-10),
            _lt(f"max_defect_on_c1_probe[{a}]", defect, 0.25),
            _lt(f"defect_slope_rel_error[{a}]", rep.slope_rel_error, 0.1),
        ]
        info[str(a)] = {"c1": c1, "slope": rep.slope, "expected_slope": rep.expected_slope,
                        "c2": rep.c2, "c3": rep.c3}
    return _result("lifted map near translation", checks, info)


# ------------------------------------------------------------- criterion 3
def criterion_chart(ctx: SuiteContext) -> dict:
    checks = []
    info = {}
    for a in CHART_ALPHAS:
        ch = ctx.chart(a)
        h = ch.map
        res = abel_residuals(ch, 1200, ctx.options.validation_shift,
                             np.random.default_rng(ctx.seed + 7))
        cp = complex(h.critical_point)
        cv = complex(h(cp))
        z = chart_points(ch, 500, np.random.default_rng(ctx.seed + 3))
        v = ch.value(z)
        back, _ = ch.inverse(v)
        trip = np.abs(back - z)
        F = LiftedMap(h)
        c1 = refine_c1(F, start=ctx.constants.c1, seed=ctx.seed)
        w = theta_samples(a, 1000, np.random.default_rng(ctx.seed + 5), c1=c1,
                          im_range=(-1.0 / a, 2.0 / a))
        eq = linearizer_equivariance(ch, F, w)
        checks += [
            _lt(f"abel_residual[{a}]", res.max() if res.size else math.inf, ctx.options.abel_tol),
            Check(f"abel_grid_size[{a}]", int(res.size), ">= 1000", bool(res.size >= 1000)),
            _lt(f"phi_cp[{a}]", abs(ch.value(cp)), 1e-6),
            _lt(f"phi_cv_minus_one[{a}]", abs(ch.value(cv) - 1.0), 1e-6),
            _lt(f"inverse_round_trip[{a}]", _finite_max(trip), 1e-7),
            _lt(f"linearizer_equivariance[{a}]", _finite_max(eq), 1e-6),
        ]
        info[str(a)] = {"coefficients": int(ch.coeffs.size),
                        "equivariance_defined": int(np.isfinite(eq).sum()),
                        "round_trip_defined": int(np.isfinite(trip).sum())}
    return _result("Fatou coordinate", checks, info)


def _finite_max(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        return math.inf
    return float(x.max())


# ------------------------------------------------------------- criterion 4
def criterion_model(ctx: SuiteContext) -> dict:
    checks = []
    info = {}
    for a in CHART_ALPHAS:
        F = LiftedMap(QuadraticMap(a))
        c1 = refine_c1(F, start=ctx.constants.c1, seed=ctx.seed)
        H = model_build(F, default_anchor(a, c1), "corrected", c1=c1)
        rep = model_checks(H)
        e = rep.expected_slope
        checks += [
            _lt(f"model_anchor_edge[{a}]", rep.anchor_error, 1e-12),
            _lt(f"model_closing_edge[{a}]", rep.closure_error, 1e-12),
            Check(f"seam_c1_ratio[{a}]", rep.seam_c1_ratio, "in [5, 20]",
                  bool(5.0 <= rep.seam_c1_ratio <= 20.0)),
            Check(f"seam_c2_ratio[{a}]", rep.seam_c2_ratio, "in [5, 20]",
                  bool(5.0 <= rep.seam_c2_ratio <= 20.0)),
            _lt(f"ds_slope_rel_error[{a}]", abs(rep.slope_ds - e) / abs(e), 0.1),
            _lt(f"dt_slope_rel_error[{a}]", abs(rep.slope_dt - e) / abs(e), 0.1),
        ]
        info[str(a)] = {"anchor": rep.anchor, "c1": c1}
    return _result("model map", checks, info)


# ------------------------------------------------------------- criterion 5
def criterion_estimates(ctx: SuiteContext) -> dict:
    fits = {}
    for a in CHART_ALPHAS:
        ch = ctx.chart(a)
        fits[a] = (fit_linearizer_decay(ch, 0.5, seed=ctx.seed),
                   fit_chi_decay(ch, 0.5, seed=ctx.seed))
    hi, lo = CHART_ALPHAS
    checks = []
    for idx, label in ((0, "M"), (1, "C")):
        ratio = fits[lo][idx].constant / fits[hi][idx].constant
        checks.append(Check(f"constant_{label}_transfer_ratio", ratio, "in [1/3, 3]",
                            bool(1.0 / 3.0 <= ratio <= 3.0)))
    for a in CHART_ALPHAS:
        checks.append(_lt(f"linearizer_slope_rel_error[{a}]", fits[a][0].slope_rel_error, 0.1))
        checks.append(_lt(f"chi_slope_rel_error[{a}]", fits[a][1].slope_rel_error, 0.1))
    info = {str(a): {"M": f[0].constant, "C": f[1].constant} for a, f in fits.items()}
    return _result("decay estimates", checks, info)


# ------------------------------------------------------------- criterion 6
def criterion_renorm(ctx: SuiteContext) -> dict:
    levels = ctx.tower()
    angle = ctx.angle
    rot = levels[1].rotation_measured
    corr, ls = renorm_correspondence(levels[0], levels[1].map, n_samples=20, seed=ctx.seed)
    conj = conjugacy_residual(levels, angle, 1, 50, seed=ctx.seed)
    k_refined = compute_k(levels[0].chart, refine=2).k
    checks = [
        _lt("rotation_transport", abs(rot - angle.tower[1]), 1e-3),
        _lt("renorm_two_path", corr, 1e-5),
        _lt("conjugacy_first_identity", conj.max_residual_i, 1e-4),
        _lt("conjugacy_second_identity", conj.max_residual_ii, 1e-4),
        _eq("k_refinement_change", abs(k_refined - levels[0].k), 0),
    ]
    info = {"levels": [lv.summary() for lv in levels], "l_values": ls,
            "conjugacy_samples": [conj.n_i, conj.n_ii], "k_refined": k_refined}
    return _result("renormalization tower", checks, info)


# ------------------------------------------------------------- criterion 7
def criterion_measure(ctx: SuiteContext) -> dict:
    levels = ctx.tower()
    angle = ctx.angle
    s0 = omega_shadow(levels, 0, refine=20)
    s1 = omega_shadow(levels, 1, refine=5)
    margin = nesting_check(s0, s1)
    pc_small = postcritical_cloud(angle, 500)
    frac = containment_fraction(s1, pc_small.points)

    pc = postcritical_cloud(angle, ctx.pc_iter)
    coarse, fine = box_area(pc, 2.0 ** -4), box_area(pc, 2.0 ** -8)

    stand_in = siegel_stand_in(angle)
    reports = porosity_experiment(pc, stand_in, ctx.porosity_probes, seed=ctx.seed)
    witnesses = [r.witness_scales(0.05) for r in reports]

    stats = typical_orbit_statistic(angle, pc, ctx.julia_samples, ctx.orbit_iter,
                                    2.0 ** -6, seed=ctx.seed)
    bound = 2 * 2.0 ** -6 * math.sqrt(2.0)
    q_ecc = {}
    for n in range(len(levels)):
        if levels[n].sectors is not None:
            q = q_region(levels, n)
            q_ecc[str(n)] = {"tau": q.tau, "eccentricity": q.eccentricity}
    checks = [
        _gt("nesting_margin", margin, 0.0),
        _eq("pc_containment_fraction", frac, 1.0),
        _le("box_area_ratio_fine_over_coarse", fine / coarse, 0.5),
        _eq("porosity_probes_below_three_scales", sum(w < 3 for w in witnesses), 0),
        _le("typical_orbit_median_d1", stats["median_d1"], bound),
        _le("typical_orbit_median_d2", stats["median_d2"], bound),
    ]
    info = {
        "box_area": {"2^-4": coarse, "2^-8": fine},
        "shadow_boxes": [int(s0.filled.sum()), int(s1.filled.sum())],
        "shadow_iterates": [s0.n_iterates, s1.n_iterates],
        "porosity_witness_scales": witnesses,
        "typical_orbit": stats,
        "q_regions": q_ecc,
        "pc_escaped": pc.escaped,
    }
    return _result("measure experiments", checks, info)


CRITERIA = {
    1: criterion_arithmetic,
    2: criterion_lift,
    3: criterion_chart,
    4: criterion_model,
    5: criterion_estimates,
    6: criterion_renorm,
    7: criterion_measure,
}


def run_suite(ctx: SuiteContext, which=None) -> dict:
    """Run the selected criteria (all by default); keys are criterion numbers."""
    which = sorted(CRITERIA) if which is None else sorted(which)
    return {str(n): CRITERIA[n](ctx) for n in which}


__all__ = ["Check", "SuiteContext", "CRITERIA", "run_suite"] + [f.__name__ for f in CRITERIA.values()]
