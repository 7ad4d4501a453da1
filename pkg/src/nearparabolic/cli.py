"""Command-line drivers.

``nearparabolic <command> [--config path] [--seed n] [--out dir]
[--alpha-digits 50,50,...] [--depth n]``

Every command writes ``report.json`` (sorted keys, no timings) into the
output directory, plus the CSV and PGM files listed in its help. PGM
images map the square ``[-2, 2]^2`` onto the pixel grid with the top row
at the largest imaginary part. Exit codes: 0 when all checks pass, 1 when
a check fails or a computation breaks, 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import arith
from .errors import ConfigError, NearParabolicError
from .fatou import (ChartOptions, FittedConstants, abel_residuals, build_chart, default_anchor,
                    model_build, model_checks)
from .lift import LiftedMap, c1_probe, cylcond_check, refine_c1, theta_samples
from .maps import QuadraticMap
from .measure import (box_area, box_grid, forward_tail, julia_sample, limit_set_distance,
                      mask_to_pgm_bytes, porosity_experiment, postcritical_cloud,
                      siegel_stand_in, write_points_csv, write_report_json)
from .suite import SuiteContext, criterion_renorm, run_suite

# hard caps on budgets
MAX_PC_ITER = 1_000_000
MAX_ORBIT_ITER = 1_000_000
MAX_JULIA_SAMPLES = 1000
MAX_POROSITY_PROBES = 200
MAX_DIGITS = 60
PGM_SIDE = 512


@dataclass
class RunConfig:
    """Everything a command needs; defaults reproduce the acceptance suite."""

    alpha_digits: tuple = (50,) * 30
    alpha: float | None = None  # when set, replaces alpha_digits by its expansion
    alpha_depth: int = 30
    type_floor: int = 50
    abel_tol: float = 1e-6
    inv_tol: float = 1e-8
    depth: int = 1
    pc_iter: int = 100_000
    orbit_iter: int = 100_000
    julia_samples: int = 100
    porosity_probes: int = 20
    seed: int = 0
    out: str = "out"
    constants: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.abel_tol <= 0 or self.inv_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if not 0 <= self.depth <= 2:
            raise ConfigError(f"depth {self.depth} outside 0..2")
        caps = {"pc_iter": MAX_PC_ITER, "orbit_iter": MAX_ORBIT_ITER,
                "julia_samples": MAX_JULIA_SAMPLES, "porosity_probes": MAX_POROSITY_PROBES}
        for name, cap in caps.items():
            v = getattr(self, name)
            if not 1 <= v <= cap:
                raise ConfigError(f"{name}={v} outside 1..{cap}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        known = {f.name for f in fields(FittedConstants)}
        extra = set(self.constants) - known
        if extra:
            raise ConfigError(f"unknown fitted constants: {sorted(extra)}")
        if self.alpha is not None:
            if not 0 < self.alpha < 1:
                raise ConfigError(f"alpha={self.alpha} not in (0, 1)")
            if not 1 <= self.alpha_depth <= MAX_DIGITS:
                raise ConfigError(f"alpha_depth outside 1..{MAX_DIGITS}")
            self.alpha_digits = arith.cf_expand(float(self.alpha), max_depth=self.alpha_depth)
        if not 1 <= len(self.alpha_digits) <= MAX_DIGITS:
            raise ConfigError(f"between 1 and {MAX_DIGITS} digits required")
        if len(self.alpha_digits) <= self.depth + 1:
            raise ConfigError("not enough digits for the tower depth")
        try:
            arith.cf_from_digits(self.alpha_digits, type_floor=self.type_floor)
        except (ValueError, NearParabolicError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def angle(self):
        return arith.cf_from_digits(self.alpha_digits, type_floor=self.type_floor)

    def fitted_constants(self) -> FittedConstants:
        return replace(FittedConstants(), **self.constants)

    def chart_options(self) -> ChartOptions:
        return ChartOptions(abel_tol=self.abel_tol, inv_tol=self.inv_tol, seed=self.seed,
                            constants=self.fitted_constants())

    def canonical(self) -> dict:
        """Fields that affect results (the output directory does not)."""
        d = asdict(self)
        d.pop("out")
        d["alpha_digits"] = list(self.alpha_digits)
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def context(self) -> SuiteContext:
        return SuiteContext(tuple(self.alpha_digits), self.type_floor, self.depth, self.seed,
                            self.chart_options(), self.pc_iter, self.julia_samples,
                            self.orbit_iter, self.porosity_probes)


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Config from a JSON file (optional) with ``overrides`` applied on top."""
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    names = {f.name for f in fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "alpha_digits" in data:
        data["alpha_digits"] = tuple(int(d) for d in data["alpha_digits"])
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


# ---------------------------------------------------------------- reports
def _check(name, achieved, target, passed):
    return {"name": name, "achieved": achieved, "target": target, "passed": bool(passed)}


def _envelope(cfg: RunConfig, command: str, body: dict, checks: list) -> dict:
    return {
        "command": command,
        "config": cfg.canonical(),
        "config_hash": cfg.digest(),
        "fitted_constants": cfg.fitted_constants().as_dict(),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        "result": body,
    }


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _write_bytes(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


# --------------------------------------------------------------- commands
def cmd_brjuno(cfg: RunConfig) -> dict:
    ang = cfg.angle
    b = arith.brjuno_sum(ang, ang.depth - 1)
    checks = []
    if ang.depth >= 3:
        d = min(ang.depth - 2, 5)
        b_d = arith.brjuno_sum(ang, d)
        b_shift = arith.brjuno_sum(ang.shifted(), d)
        a0 = ang.tower[0]
        fe = abs(b_d.value - math.log(1.0 / a0) - a0 * b_shift.value)
        checks.append(_check("functional_equation_residual", fe,
                             f"< {10 * b_d.tail_bound:g}", fe < 10 * b_d.tail_bound))
    if len(set(ang.digits)) == 1 and ang.depth >= 20:
        x = arith.periodic_value(ang.digits[0])
        closed = math.log(1.0 / x) / (1.0 - x)
        err = abs(b.value - closed)
        tol = max(1e-9, 10 * b.tail_bound)
        checks.append(_check("periodic_closed_form", err, f"< {tol:g}", err < tol))
    body = {
        "digits": list(ang.digits),
        "value": ang.value,
        "tower": list(ang.tower),
        "convergents": [list(c) for c in ang.convergents],
        "brjuno": {"value": b.value, "depth": b.truncation_depth, "tail_bound": b.tail_bound},
    }
    return _envelope(cfg, "brjuno", body, checks)


def _band_field(chart, side: int = PGM_SIDE, n_escape: int = 500):
    """``floor(Re Phi)`` parity (1 or 2) on the pixel grid; 0 where the
    orbit leaves the disk of radius 2 within ``n_escape`` steps or the
    chart is undefined."""
    t = -2.0 + (np.arange(side) + 0.5) * (4.0 / side)
    z = (t[:, None] + 1j * t[None, :]).ravel()
    bounded = np.ones(z.size, dtype=bool)
    w = z.copy()
    with np.errstate(all="ignore"):
        for _ in range(n_escape):
            w = chart.map(w)
            bounded &= np.abs(w) <= 2.0
            w[~bounded] = 0.0
    v = np.full(z.size, np.nan + 0j)
    v[bounded] = chart.value(z[bounded])
    band = np.where(np.isfinite(v), np.mod(np.floor(v.real), 2.0) + 1.0, 0.0)
    return band.reshape(side, side)


def cmd_fatou(cfg: RunConfig) -> dict:
    opts = cfg.chart_options()
    h = QuadraticMap(cfg.angle.value)
    chart = build_chart(h, opts)
    res = abel_residuals(chart, 1200, opts.validation_shift, np.random.default_rng(cfg.seed + 7))
    edges = np.logspace(-16, 0, 17)
    counts, _ = np.histogram(np.clip(res, 1e-16, 1.0), bins=edges)
    with open(_out_path(cfg, "abel_residuals.csv"), "w") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{lo:.0e},{hi:.0e},{int(c)}\n")
    _write_bytes(_out_path(cfg, "phi_bands.pgm"), mask_to_pgm_bytes(_band_field(chart)))
    cp = complex(h.critical_point)
    checks = [
        _check("abel_residual", float(res.max()), f"< {cfg.abel_tol:g}", res.max() < cfg.abel_tol),
        _check("phi_cp", abs(chart.value(cp)), "< 1e-06", abs(chart.value(cp)) < 1e-6),
        _check("phi_cv", abs(chart.value(h(cp)) - 1.0), "< 1e-06",
               abs(chart.value(h(cp)) - 1.0) < 1e-6),
    ]
    body = {"alpha": h.alpha, "coefficients": int(chart.coeffs.size),
            "validated_points": int(res.size), "sigma": complex(chart.sigma)}
    return _envelope(cfg, "fatou", body, checks)


def cmd_lift_verify(cfg: RunConfig) -> dict:
    a = cfg.angle.value
    h = QuadraticMap(a)
    F = LiftedMap(h)
    c1 = refine_c1(F, start=cfg.fitted_constants().c1, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    w = theta_samples(a, 1000, rng, c1=c1)
    semi = float(np.max(np.abs(h(F.cov.value(w)) - F.cov.value(F.value(w)))))
    s = theta_samples(a, 2000, rng, c1=c1, r=0.5, im_range=(0.0, 3.0 / a))
    rep = cylcond_check(F, s, 0.5, c1)
    probe = c1_probe(a, c1, 10_000, np.random.default_rng(cfg.seed + 1))
    defect = float(np.max(np.abs(F.defect(probe))))
    checks = [
        _check("semi_conjugacy", semi, "< 1e-10", semi < 1e-10),
        _check("max_defect_on_c1_probe", defect, "< 0.25", defect < 0.25),
        _check("slope_rel_error", rep.slope_rel_error, "< 0.1", rep.slope_rel_error < 0.1),
    ]
    return _envelope(cfg, "lift-verify", {"c1": c1, "cylinder": asdict(rep)}, checks)


def cmd_model(cfg: RunConfig) -> dict:
    a = cfg.angle.value
    F = LiftedMap(QuadraticMap(a))
    c1 = refine_c1(F, start=cfg.fitted_constants().c1, seed=cfg.seed)
    H = model_build(F, default_anchor(a, c1), "corrected", c1=c1)
    rep = model_checks(H)
    flags = rep.passes()
    checks = [_check(k, None, "holds", v) for k, v in sorted(flags.items())]
    body = asdict(rep)
    body["seam_c1"] = {str(k): v for k, v in rep.seam_c1.items()}
    body["seam_c2"] = {str(k): v for k, v in rep.seam_c2.items()}
    return _envelope(cfg, "model", body, checks)


def _suite_checks(result: dict, prefix: str = "") -> list:
    return [dict(c, name=prefix + c["name"]) for c in result["checks"]]


def cmd_renorm(cfg: RunConfig) -> dict:
    if cfg.depth < 1:
        raise ConfigError("renorm needs depth >= 1")
    res = criterion_renorm(cfg.context())
    return _envelope(cfg, "renorm", res["info"], _suite_checks(res))


def cmd_pc(cfg: RunConfig) -> dict:
    pc = postcritical_cloud(cfg.angle, cfg.pc_iter)
    write_points_csv(_out_path(cfg, "pc_cloud.csv"), pc)
    scales = [2.0 ** -m for m in range(2, 11)]
    with open(_out_path(cfg, "box_area.csv"), "w") as fh:
        fh.write("eps,count,area\n")
        table = []
        for eps in scales:
            g = box_grid(pc, eps)
            table.append({"eps": eps, "count": g.count, "area": g.count * eps * eps})
            fh.write(f"{eps!r},{g.count},{g.count * eps * eps!r}\n")
    g = box_grid(pc, 2.0 ** -7)
    mask = np.zeros((g.side, g.side), dtype=bool)
    ix, iy = np.divmod(g.keys, g.side)
    mask[ix, iy] = True
    _write_bytes(_out_path(cfg, "pc_mask.pgm"), mask_to_pgm_bytes(mask))
    ratio = box_area(pc, 2.0 ** -8) / box_area(pc, 2.0 ** -4)
    checks = [
        _check("recurrence_residual", pc.recurrence_residual(), "< 1e-12",
               pc.recurrence_residual() < 1e-12),
        _check("area_ratio_2^-8_over_2^-4", ratio, "<= 0.5", ratio <= 0.5),
    ]
    body = {"n_points": len(pc), "escaped": pc.escaped, "box_area": table}
    return _envelope(cfg, "pc", body, checks)


def cmd_porosity(cfg: RunConfig) -> dict:
    pc = postcritical_cloud(cfg.angle, cfg.pc_iter)
    stand_in = siegel_stand_in(cfg.angle)
    reports = porosity_experiment(pc, stand_in, cfg.porosity_probes, seed=cfg.seed)
    witnesses = [r.witness_scales(0.05) for r in reports]
    checks = [_check("probes_below_three_scales", sum(w < 3 for w in witnesses), "== 0",
                     all(w >= 3 for w in witnesses))]
    body = {"probes": [asdict(r) for r in reports],
            "stand_in_radii": stand_in.radii.tolist()}
    return _envelope(cfg, "porosity", body, checks)


def cmd_orbits(cfg: RunConfig) -> dict:
    pc = postcritical_cloud(cfg.angle, cfg.pc_iter)
    starts = julia_sample(cfg.angle, cfg.julia_samples, cfg.seed)
    write_points_csv(_out_path(cfg, "julia_sample.csv"), starts)
    tail, escaped = forward_tail(cfg.angle, starts.points, cfg.orbit_iter)
    eps = 2.0 ** -6
    d = np.array([limit_set_distance(tail[:, i], pc, eps) for i in range(tail.shape[1])])
    with open(_out_path(cfg, "limit_set_distances.csv"), "w") as fh:
        fh.write("sample,d1,d2,escaped\n")
        for i, (d1, d2) in enumerate(d):
            fh.write(f"{i},{d1!r},{d2!r},{int(escaped[i])}\n")
    bound = 2 * eps * math.sqrt(2.0)
    m1, m2 = float(np.median(d[:, 0])), float(np.median(d[:, 1]))
    checks = [
        _check("median_d1", m1, f"<= {bound:g}", m1 <= bound),
        _check("median_d2", m2, f"<= {bound:g}", m2 <= bound),
    ]
    body = {"escaped": int(escaped.sum()), "jitter_count": starts.jitter_count,
            "n_samples": int(d.shape[0])}
    return _envelope(cfg, "orbits", body, checks)


def cmd_verify_all(cfg: RunConfig) -> dict:
    if cfg.depth < 1:
        raise ConfigError("verify-all needs depth >= 1")
    results = run_suite(cfg.context())
    checks = []
    for n, res in results.items():
        checks += _suite_checks(res, prefix=f"criterion_{n}.")
    body = {n: {"title": r["title"], "passed": r["passed"], "info": r["info"]}
            for n, r in results.items()}
    return _envelope(cfg, "verify-all", body, checks)


COMMANDS = {
    "brjuno": cmd_brjuno,
    "fatou": cmd_fatou,
    "lift-verify": cmd_lift_verify,
    "model": cmd_model,
    "renorm": cmd_renorm,
    "pc": cmd_pc,
    "porosity": cmd_porosity,
    "orbits": cmd_orbits,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nearparabolic",
                                     description="Near-parabolic renormalization experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--alpha-digits", help="comma-separated continued-fraction digits")
    parser.add_argument("--depth", type=int)
    parser.add_argument("--abel-tol", type=float)
    parser.add_argument("--inv-tol", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = {"seed": args.seed, "out": args.out, "depth": args.depth,
                 "abel_tol": args.abel_tol, "inv_tol": args.inv_tol}
    try:
        if args.alpha_digits:
            overrides["alpha_digits"] = [int(x) for x in args.alpha_digits.split(",") if x]
        cfg = load_config(args.config, overrides)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NearParabolicError, ValueError, ArithmeticError) as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    write_report_json(_out_path(cfg, "report.json"), report)
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    for name in failed:
        print(f"check failed: {name}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
