"""Perturbed Fatou coordinates, their extensions, and the model map ``H``.

The chart is computed in two stages.

Gate. Near the middle of the petal, on the line ``Re w = 1/(2 alpha)`` of
the covering coordinate, the coordinate is represented as

    Phi_g(z) = w(z) + B log(z - sigma) + sum_k c_k t^k,   t = (z - z_c) / rho,

where ``w(z)`` is the lift of ``z`` under ``tau``, ``B = A0 + A_sigma`` with
``A0 = 1/(2 pi i alpha)`` and ``A_sigma = 1/log h'(sigma)``, and the
coefficients ``c_k`` are fitted by least squares so that the Abel equation
``Phi_g(h(z)) = Phi_g(z) + 1`` holds on samples of the gate. The two
logarithmic terms absorb the behaviour at the fixed points 0 and sigma, so
the remaining correction is analytic on a disk around the gate.

Transport. Any other point is moved into the gate by forward or backward
iteration, ``Phi(z) = Phi_g(h^n(z)) - n``, with backward branches chosen by
following the lift ``w -> w - 1``. The result is normalized so that the
critical point goes to 0. Consistency is certified by evaluating the Abel
residual with two different landing windows, which routes ``z`` and
``h(z)`` through different gate points.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (AnchorError, ChartQualityError, ExtensionDomainError,
                     InversionError)
from .lift import Covering, LiftedMap, ThetaRegion, log_branch
from .maps import CanonicalISMap, QuadraticMap

__all__ = [
    "FittedConstants",
    "ChartOptions",
    "FatouChart",
    "build_chart",
    "abel_residuals",
    "fatou_value",
    "fatou_inverse",
    "phi_left_extension",
    "phi_dagger",
    "chi_value",
    "linearizer_value",
    "in_sector",
    "ModelH",
    "ModelReport",
    "model_build",
    "model_value",
    "default_anchor",
    "model_checks",
    "DecayFit",
    "chart_points",
    "ray_check",
    "injectivity_check",
    "linearizer_equivariance",
    "fit_linearizer_decay",
    "fit_chi_decay",
    "inverse_derivative_bound",
    "chart_to_json",
    "chart_from_json",
]

TWO_PI = 2.0 * math.pi
CHART_FORMAT_VERSION = 1


@dataclass
class FittedConstants:
    """Constants the construction only asserts to exist, with working defaults."""

    k_bold: int = 2
    k_hat: int = 2
    k_prime: int = 3
    delta1: float = 0.125
    c1: float = 3.0
    k_max: int = 20

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChartOptions:
    abel_tol: float = 1e-6
    inv_tol: float = 1e-8
    alpha_max: float = 0.05
    n_coeffs: int = 24
    max_coeffs: int = 40
    n_fit: int = 3000
    n_validation: int = 1200
    validation_shift: float = 2.5
    newton_cap: int = 50
    seed: int = 0
    constants: FittedConstants = field(default_factory=FittedConstants)


def _arr(z):
    return np.asarray(z, dtype=complex)


class FatouChart:
    """Numerical Fatou coordinate of ``h``; see the module docstring."""

    def __init__(self, h, coeffs, *, zc, rho, lo, offset=0j, center=None,
                 constants=None, inv_tol=1e-8, newton_cap=50):
        self.map = h
        self.alpha = float(h.alpha)
        self.cov = Covering(h)
        self.sigma = self.cov.sigma
        self.A0 = 1.0 / (2j * math.pi * self.alpha)
        self.As = 1.0 / np.log(complex(h.deriv(self.sigma)))
        self.B = self.A0 + self.As
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.zc = complex(zc)
        self.rho = float(rho)
        self.lo = float(lo)
        self.center = 0.5 / self.alpha if center is None else float(center)
        self.offset = complex(offset)
        self.constants = constants or FittedConstants()
        self.inv_tol = inv_tol
        self.newton_cap = newton_cap
        self.max_steps = int(3.0 / self.alpha) + 10
        self.residual = math.nan
        self.n_validated = 0
        self._sig_dir = self.sigma / abs(self.sigma)
        self._gate_re_cache = None

    # ------------------------------------------------------------------ gate
    def _poly(self, z):
        t = (z - self.zc) / self.rho
        p = np.zeros_like(t)
        dp = np.zeros_like(t)
        for c in self.coeffs[::-1]:
            dp = dp * t + p
            p = p * t + c
        # coefficients start at t^1
        return p * t, (p + t * dp) / self.rho

    def gate_value(self, z, w):
        """``Phi_g`` before normalization, with the lift ``w`` of ``z``."""
        z = _arr(z)
        p, _ = self._poly(z)
        return w + self.B * np.log((z - self.sigma) / (-self._sig_dir)) + p

    def gate_deriv(self, z):
        z = _arr(z)
        _, dp = self._poly(z)
        return self.A0 / z + self.As / (z - self.sigma) + dp

    @property
    def strip_width(self) -> int:
        return math.floor(1.0 / self.alpha) - self.constants.k_bold

    # ------------------------------------------------------------- transport
    def _lift_update(self, zn, pred):
        return self.cov.lift_near(zn, pred)

    def _transport(self, z, land=0.0, window_lo=None, want_deriv=False,
                   direction=None):
        """Move points into the landing window; returns ``(z, w, n, dprod)``.

        ``direction`` may force ``"forward"`` or ``"backward"`` steps only;
        points that would need the other direction are marked invalid.
        A step of the lift can exceed one unit and jump over the window, so
        points that fail to land are retried with nearby windows.
        """
        z = _arr(z).ravel()
        lo = self.lo if window_lo is None else np.broadcast_to(
            np.asarray(window_lo, dtype=float), np.shape(z))
        out = self._transport_once(z, land, lo, want_deriv, direction)
        for extra in (0.5, -0.5, 1.5, -1.5):
            miss = ~np.isfinite(out[0])
            if not miss.any():
                break
            lo_m = lo if np.ndim(lo) == 0 else lo[miss]
            retry = self._transport_once(z[miss], land + extra, lo_m, want_deriv, direction)
            for arr, part in zip(out, retry):
                arr[miss] = part
        return out

    def _transport_once(self, z, land, lo, want_deriv, direction):
        z = z.copy()
        with np.errstate(all="ignore"):
            w = self.cov.inverse(z, lo, np.asarray(lo) + 1.0 / self.alpha)
        n = np.zeros(z.shape)
        dprod = np.ones_like(z)
        tgt_lo = self.center + land - 0.5
        tgt_hi = self.center + land + 0.5
        valid = np.isfinite(w)
        if direction == "forward":
            valid &= w.real < tgt_hi
        elif direction == "backward":
            valid &= w.real >= tgt_lo
        for _ in range(self.max_steps):
            fw = valid & (w.real < tgt_lo)
            bw = valid & (w.real >= tgt_hi)
            if not (fw.any() or bw.any()):
                break
            with np.errstate(all="ignore"):
                if fw.any():
                    zf = z[fw]
                    if want_deriv:
                        dprod[fw] *= self.map.deriv(zf)
                    zn = _arr(self.map(zf))
                    wn = self._lift_update(zn, w[fw] + 1.0)
                    z[fw], w[fw], n[fw] = zn, wn, n[fw] + 1
                if bw.any():
                    zb = z[bw]
                    guess = self.cov.value(w[bw] - 1.0)
                    zn = _arr(self.map.preimage_near(zb, guess))
                    if want_deriv:
                        dprod[bw] /= self.map.deriv(zn)
                    wn = self._lift_update(zn, w[bw] - 1.0)
                    z[bw], w[bw], n[bw] = zn, wn, n[bw] - 1
            valid &= np.isfinite(z) & np.isfinite(w)
        landed = valid & (w.real >= tgt_lo) & (w.real < tgt_hi)
        z[~landed] = np.nan
        return z, w, n, dprod

    def raw_value(self, z, land=0.0, window_lo=None, direction=None):
        shape = np.shape(z)
        zg, wg, n, _ = self._transport(z, land, window_lo, direction=direction)
        with np.errstate(all="ignore"):
            v = self.gate_value(zg, wg) - n
        return v.reshape(shape)

    def value(self, z, land=0.0, window_lo=None, direction=None):
        """``Phi(z)``; NaN where the orbit never reaches the gate."""
        v = self.raw_value(z, land, window_lo, direction) - self.offset
        return complex(v) if np.ndim(z) == 0 else v

    __call__ = value

    def value_deriv(self, z, land=0.0, window_lo=None, direction=None):
        shape = np.shape(z)
        zg, wg, n, dprod = self._transport(z, land, window_lo, True, direction)
        with np.errstate(all="ignore"):
            v = self.gate_value(zg, wg) - n - self.offset
            d = self.gate_deriv(zg) * dprod
        v, d = v.reshape(shape), d.reshape(shape)
        if np.ndim(z) == 0:
            return complex(v), complex(d)
        return v, d

    # --------------------------------------------------------------- inverse
    def _gate_re(self):
        if self._gate_re_cache is None:
            zc = self.cov.value(self.center)
            self._gate_re_cache = float((self.gate_value(zc, self.center) - self.offset).real)
        return self._gate_re_cache

    def _gate_solve(self, zeta_g):
        """Solve ``Phi_g(tau(w)) - offset = zeta_g`` for ``w`` near the gate."""
        w = zeta_g + (self.center - self._gate_re())
        for _ in range(30):
            z = self.cov.value(w)
            with np.errstate(all="ignore"):
                f = self.gate_value(z, w) - self.offset - zeta_g
                d = self.gate_deriv(z) * self.cov.deriv(w)
                step = f / d
                step = np.where(np.isfinite(step), step, 0)
                step = np.where(np.abs(step) > 5.0, 5.0 * step / np.abs(step), step)
            w = w - step
            if np.all(np.abs(step) < 1e-14 * (1 + np.abs(w))):
                break
        return w

    def inverse(self, zeta, tol=None, maxit=None):
        """``Phi^{-1}(zeta)`` and the achieved residual ``|Phi(z) - zeta|``."""
        tol = self.inv_tol if tol is None else tol
        maxit = self.newton_cap if maxit is None else maxit
        shape = np.shape(zeta)
        zeta = _arr(zeta).ravel()
        n = np.round(self._gate_re() - zeta.real)
        wg = self._gate_solve(zeta + n)
        z = self.cov.value(wg)
        w = wg.copy()
        # transport from the gate back to the requested level
        steps = int(np.max(np.abs(n))) if n.size else 0
        for k in range(steps):
            back = n > k
            fwd = -n > k
            with np.errstate(all="ignore"):
                if back.any():
                    zn = _arr(self.map.preimage_near(z[back], self.cov.value(w[back] - 1.0)))
                    w[back] = self.cov.lift_near(zn, w[back] - 1.0)
                    z[back] = zn
                if fwd.any():
                    zn = _arr(self.map(z[fwd]))
                    w[fwd] = self.cov.lift_near(zn, w[fwd] + 1.0)
                    z[fwd] = zn
        lo = w.real - 0.5 / self.alpha
        res = np.full(zeta.shape, np.inf)
        for _ in range(maxit):
            v, d = self.value_deriv(z, window_lo=lo)
            err = v - zeta
            res = np.abs(err)
            act = res > 0.01 * tol
            if not act.any():
                break
            with np.errstate(all="ignore"):
                step = np.where(act & (np.abs(d) > 1e-300), err / d, 0)
            step = np.where(np.isfinite(step), step, 0)
            if not np.any(step):
                break
            z = z - step
        v = self.value(z, window_lo=lo)
        res = np.abs(v - zeta)
        z = z.reshape(shape)
        res = res.reshape(shape)
        if len(shape) == 0:
            return complex(z), float(res)
        return z, res

    # ------------------------------------------------------------- sectors
    def sector_membership(self, z, kind: str):
        v = _arr(self.value(z))
        re_ok = (v.real >= 0.5) & (v.real <= 1.5)
        if kind == "C":
            return re_ok & (v.imag > -2.0) & (v.imag <= 2.0)
        if kind in ("C#", "Csharp", "C-sharp"):
            return re_ok & (v.imag >= 2.0)
        raise ValueError(f"unknown sector kind {kind!r}")


# ---------------------------------------------------------------- building
def _fit_gate(h, cov, alpha, n_coeffs, n_fit, rng, zc, rho, As):
    A0 = 1.0 / (2j * math.pi * alpha)
    c = 0.5 / alpha
    x = rng.uniform(-0.3 / alpha, 0.3 / alpha, n_fit)
    y = rng.uniform(-1.6 / alpha, 1.6 / alpha, n_fit)
    z = cov.value(c + x + 1j * y)
    with np.errstate(all="ignore"):
        hz = _arr(h(z))
    ok = np.isfinite(z) & np.isfinite(hz) & (z != 0) & (z != cov.sigma)
    z, hz = z[ok], hz[ok]
    sig = cov.sigma
    t = (z - zc) / rho
    ht = (hz - zc) / rho
    M = np.stack([ht ** k - t ** k for k in range(1, n_coeffs + 1)], axis=1)
    rhs = 1.0 - A0 * np.log(hz / z) - As * np.log((hz - sig) / (z - sig))
    coeffs, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return coeffs


def abel_residuals(chart: FatouChart, n: int, shift: float = 2.5, rng=None) -> np.ndarray:
    """``|Phi(h(z)) - Phi(z) - 1|`` at up to ``n`` random chart points.

    The two evaluations land in windows ``2 * shift`` apart, so each point
    is checked against a different stretch of the same orbit.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    a = chart.alpha
    W = chart.strip_width
    w = (rng.uniform(chart.lo + 1.5, chart.lo + W - 0.5, 3 * n)
         + 1j * rng.uniform(-1.0 / a, 1.0 / a, 3 * n))
    z = chart.cov.value(w)
    with np.errstate(all="ignore"):
        hz = _arr(chart.map(z))
    r = np.abs(chart.value(hz, land=shift) - chart.value(z, land=-shift) - 1.0)
    return r[np.isfinite(r)][:n]


def _validate(chart, n, shift, rng):
    r = abel_residuals(chart, n, shift, rng)
    return (float(r.max()) if r.size else math.inf), int(r.size)


def build_chart(h, options: ChartOptions | None = None) -> FatouChart:
    """Construct and certify the Fatou chart of ``h``.

    Raises
    ------
    ValueError
        If ``h.alpha`` exceeds ``options.alpha_max``.
    ChartQualityError
        If no coefficient count up to ``max_coeffs`` brings the validation
        residual below ``abel_tol``.
    """
    opts = options or ChartOptions()
    a = float(h.alpha)
    if not 0 < a <= opts.alpha_max:
        raise ValueError(f"alpha={a} outside (0, {opts.alpha_max}]")
    cov = Covering(h)
    sig = cov.sigma
    As = 1.0 / np.log(complex(h.deriv(sig)))
    zc, rho = sig / 2.0, 0.75 * abs(sig)
    half = 0.5 / a
    wcp = complex(cov.inverse(complex(h.critical_point), -half, half))
    lo = wcp.real - 1.0

    best = None
    K = opts.n_coeffs
    while K <= opts.max_coeffs:
        rng = np.random.default_rng(opts.seed)
        coeffs = _fit_gate(h, cov, a, K, opts.n_fit, rng, zc, rho, As)
        chart = FatouChart(h, coeffs, zc=zc, rho=rho, lo=lo, constants=opts.constants,
                           inv_tol=opts.inv_tol, newton_cap=opts.newton_cap)
        chart.offset = complex(chart.raw_value(complex(h.critical_point)))
        res, count = _validate(chart, opts.n_validation, opts.validation_shift,
                               np.random.default_rng(opts.seed + 1))
        chart.residual, chart.n_validated = res, count
        if best is None or res < best.residual:
            best = chart
        if res < opts.abel_tol and count >= min(1000, opts.n_validation):
            return chart
        K += 8
    raise ChartQualityError(best.residual, opts.abel_tol)


# ------------------------------------------------------------ operations
def fatou_value(chart: FatouChart, z):
    return chart.value(z)


def fatou_inverse(chart: FatouChart, zeta):
    """Strict inverse: raises :class:`InversionError` above ``inv_tol``."""
    z, res = chart.inverse(zeta)
    worst = float(np.max(res)) if np.size(res) else 0.0
    if not worst <= chart.inv_tol:
        raise InversionError(f"inverse residual {worst:.3e} above {chart.inv_tol:.1e}", best=z)
    return z


def phi_left_extension(chart: FatouChart, z, j_max: int = 20):
    """``Phi(h^j(z)) - j`` for the least ``j <= j_max`` with ``Re Phi(h^j z) >= 0``."""
    z = _arr(z)
    flat = z.ravel().copy()
    out = np.full(flat.shape, np.nan + 0j)
    todo = np.isfinite(flat)
    for j in range(j_max + 1):
        if not todo.any():
            break
        v = _arr(chart.value(flat[todo], direction=None))
        good = np.isfinite(v) & (v.real >= 0)
        idx = np.flatnonzero(todo)
        out[idx[good]] = v[good] - j
        todo[idx[good]] = False
        with np.errstate(all="ignore"):
            flat[todo] = _arr(chart.map(flat[todo]))
    if np.ndim(z) == 0:
        if not np.isfinite(out[0]):
            raise ExtensionDomainError(f"no iterate of {complex(z)!r} lands in the chart")
        return complex(out[0])
    return out.reshape(z.shape)


def phi_dagger(chart: FatouChart, zeta, j_max: int | None = None):
    """``h^j(Phi^{-1}(zeta - j))`` with the least admissible ``j >= 0``.

    ``zeta`` must satisfy ``Re zeta > k'``; ``j`` is the least shift bringing
    ``Re(zeta - j)`` below ``W - 1/2`` with ``W`` the strip width.
    """
    k_prime = chart.constants.k_prime
    if j_max is None:
        j_max = chart.constants.k_max + k_prime
    zeta = _arr(zeta)
    flat = zeta.ravel()
    W = chart.strip_width
    j = np.maximum(0, np.ceil(flat.real - (W - 0.5))).astype(int)
    ok = (flat.real > k_prime) & (j <= j_max)
    z, _ = chart.inverse(np.where(ok, flat - j, 1.0))
    z = np.where(ok, z, np.nan)
    for k in range(int(j.max()) if j.size else 0):
        m = ok & (j > k)
        with np.errstate(all="ignore"):
            z[m] = _arr(chart.map(z[m]))
    if np.ndim(zeta) == 0:
        if not ok[0]:
            raise ExtensionDomainError(f"{complex(zeta)!r} outside the dagger domain")
        return complex(z[0])
    return z.reshape(zeta.shape)


def chi_value(chart: FatouChart, w, re_window):
    return log_branch(phi_dagger(chart, w), re_window)


def chi_derivative(chart: FatouChart, w):
    """``-d chi / d conj(w)``, which is close to ``alpha`` high in the strip.

    ``chi`` is anti-holomorphic because ``Exp`` involves complex
    conjugation; with ``g = log(Phi^{-1})`` one has
    ``d chi / d conj(w) = conj(g'(w)) / (2 pi i)``. Only the strip part
    ``Re w < W`` (no dagger iterates) is handled.
    """
    z, _ = chart.inverse(w)
    _, d = chart.value_deriv(z)
    g1 = 1.0 / (z * d)
    v = -np.conj(g1) / (2j * math.pi)
    return v


def linearizer_value(chart: FatouChart, w):
    """``L(w) = Phi(tau(w))``."""
    return chart.value(chart.cov.value(w))


def linearizer_deriv(chart: FatouChart, w):
    z = chart.cov.value(w)
    _, d = chart.value_deriv(z)
    return d * chart.cov.deriv(w)


def in_sector(chart: FatouChart, z, kind: str):
    return chart.sector_membership(z, kind)


# ------------------------------------------------------------ spot checks
def chart_points(chart: FatouChart, n: int, rng: np.random.Generator, im_scale: float = 1.0):
    """Points ``tau(w)`` of the chart region, ``w`` uniform in the strip."""
    a = chart.alpha
    W = chart.strip_width
    w = (rng.uniform(chart.lo + 1.5, chart.lo + W - 0.5, n)
         + 1j * rng.uniform(-im_scale / a, im_scale / a, n))
    return chart.cov.value(w)


def ray_check(chart: FatouChart, n: int = 20):
    """``Im Phi`` along ``t sigma/2`` as ``t`` decreases to 0 (should increase)."""
    t = np.geomspace(0.5, 1e-6, n)
    v = _arr(chart.value(t * chart.sigma / 2.0))
    return v, bool(np.all(np.diff(v.imag) > 0))


def injectivity_check(chart: FatouChart, n_pairs: int = 1000, seed: int = 0,
                      sep: float = 1e-9) -> int:
    """Number of violating pairs among ``n_pairs`` random pairs of chart points."""
    rng = np.random.default_rng(seed)
    z1 = chart_points(chart, n_pairs, rng)
    z2 = chart_points(chart, n_pairs, rng)
    d = np.abs(_arr(chart.value(z1)) - _arr(chart.value(z2)))
    ok = np.isfinite(d)
    return int(np.sum(ok & (d <= sep) & (np.abs(z1 - z2) >= sep)))


def linearizer_equivariance(chart: FatouChart, F: LiftedMap, w) -> np.ndarray:
    """``|L(F(w)) - L(w) - 1|``, NaN where either side is undefined."""
    w = _arr(w)
    with np.errstate(all="ignore"):
        fw = F.value(w)
    # route w and F(w) through different gate points
    z, zf = chart.cov.value(w), chart.cov.value(fw)
    lo = w.real - 0.5 / chart.alpha
    return np.abs(chart.value(zf, land=1.5, window_lo=lo)
                  - chart.value(z, land=-1.5, window_lo=lo) - 1.0)


# -------------------------------------------------------------- decay fits
@dataclass
class DecayFit:
    alpha: float
    r: float
    slope: float
    expected_slope: float
    constant: float
    n_samples: int

    @property
    def slope_rel_error(self) -> float:
        return abs(self.slope - self.expected_slope) / abs(self.expected_slope)


def _strip_samples(chart, n, r, rng, im_lo=None, im_hi=None):
    a = chart.alpha
    k_prime = chart.constants.k_prime
    W = chart.strip_width
    im_lo = 0.5 / a if im_lo is None else im_lo
    im_hi = 2.5 / a if im_hi is None else im_hi
    th = ThetaRegion(a, r, scaled=True)
    pts = []
    total = 0
    while total < n:
        x = rng.uniform(k_prime + 1.0, W - 1.0, 2 * n)
        y = rng.uniform(im_lo, im_hi, 2 * n)
        zeta = x + 1j * y
        zeta = zeta[th.contains(zeta)]
        pts.append(zeta)
        total += zeta.size
    return np.concatenate(pts)[:n]


def fit_linearizer_decay(chart: FatouChart, r: float = 0.5, n: int = 400, seed: int = 0):
    """Regress ``log|L'(w) - 1|`` on ``Im w``; constant ``M`` with
    ``|L' - 1| <= (M/r) e^{-2 pi alpha Im w}``."""
    rng = np.random.default_rng(seed)
    a = chart.alpha
    w = _strip_samples(chart, n, r, rng) + (chart.lo + 1.0)
    dev = np.abs(linearizer_deriv(chart, w) - 1.0)
    ok = np.isfinite(dev) & (dev > 0)
    w, dev = w[ok], dev[ok]
    slope = float(np.polyfit(w.imag, np.log(dev), 1)[0])
    const = float(np.max(dev * r * np.exp(TWO_PI * a * w.imag)))
    return DecayFit(a, r, slope, -TWO_PI * a, const, int(w.size))


def fit_chi_decay(chart: FatouChart, r: float = 0.5, n: int = 400, seed: int = 0):
    """Regress ``log|chi' - alpha|`` on ``Im w``; constant ``C`` with
    ``|chi' - alpha| <= C (alpha/r) e^{-2 pi alpha Im w}``."""
    rng = np.random.default_rng(seed)
    a = chart.alpha
    w = _strip_samples(chart, n, r, rng)
    dev = np.abs(chi_derivative(chart, w) - a)
    ok = np.isfinite(dev) & (dev > 0)
    w, dev = w[ok], dev[ok]
    slope = float(np.polyfit(w.imag, np.log(dev), 1)[0])
    const = float(np.max(dev * (r / a) * np.exp(TWO_PI * a * w.imag)))
    return DecayFit(a, r, slope, -TWO_PI * a, const, int(w.size))


def inverse_derivative_bound(chart: FatouChart, n: int = 400, seed: int = 0,
                             im_max: float | None = None) -> float:
    """Smallest ``C4`` with ``1/C4 <= |(L^{-1})'| <= C4`` on strip samples
    away from ``B(0, 1/2)``."""
    rng = np.random.default_rng(seed)
    a = chart.alpha
    im_max = 1.0 / a if im_max is None else im_max
    W = chart.strip_width
    zeta = rng.uniform(0.05, W - 0.5, 3 * n) + 1j * rng.uniform(-im_max, im_max, 3 * n)
    zeta = zeta[np.abs(zeta) > 0.5][:n]
    z, res = chart.inverse(zeta)
    _, d = chart.value_deriv(z)
    ok = np.isfinite(d) & (res < 1e-6)
    # (L^{-1})' = 1/L' = 1/(Phi'(z) tau'(w))
    w = chart.cov.lift_near(z[ok], zeta[ok] + chart.lo + 1.0)
    inv = np.abs(1.0 / (d[ok] * chart.cov.deriv(w)))
    return float(max(inv.max(), 1.0 / inv.min()))


# --------------------------------------------------------------- model H
_PI = math.pi


def _coefficients(d, g1, g2, mode, with_constants=True):
    """Coefficient vectors ``(a, b)`` from the defect ``d = F - w - 1``,
    ``g1 = F' - 1`` and ``g2 = F''`` at ``A + it``. ``a[0]`` is returned as
    ``a_0 - 1`` so that ``X - 1`` can be formed without cancellation."""
    one = 1.0 if with_constants else 0.0
    if mode == "corrected":
        a0m1 = d.real + g2.real / _PI ** 2
        a1 = -g2.real / (2 * _PI)
        a3 = g2.real / (4 * _PI)
        b0 = d.imag + g2.imag / _PI ** 2
        b1 = -g2.imag / (2 * _PI)
        b3 = g2.imag / (4 * _PI)
    elif mode == "literal":
        a0m1 = d.real + g2.real / _PI
        a1 = -g2.real / 2
        a3 = g2.real / 4
        b0 = d.imag + g2.imag / _PI
        b1 = -g2.imag / 2
        b3 = g2.imag / 4
    else:
        raise ValueError(f"unknown coefficient mode {mode!r}")
    a2 = -g1.real / 2
    b2 = -g1.imag / 2
    a4 = -a0m1 - a2  # a_4 = 1 - a_0 - a_2
    if mode == "corrected":
        b4 = -b0 - b2
    else:
        b4 = -(a0m1 + one) - a2
    return (a0m1, a1, a2, a3, a4), (b0, b1, b2, b3, b4)


def _trig(s):
    ps, p2 = _PI * s, 2 * _PI * s
    return np.sin(ps), np.cos(ps), np.sin(p2), np.cos(p2)


def _series(c, s, c0_extra=0.0):
    sn, cs, sn2, cs2 = _trig(s)
    return c[0] + c0_extra + c[1] * sn + c[2] * cs + c[3] * sn2 + c[4] * cs2


def _series_ds(c, s):
    sn, cs, sn2, cs2 = _trig(s)
    return _PI * (c[1] * cs - c[2] * sn) + 2 * _PI * (c[3] * cs2 - c[4] * sn2)


def _integral(c, s, c0_extra=0.0):
    sn, cs, sn2, cs2 = _trig(s)
    return ((c[0] + c0_extra) * s + c[1] * (1 - cs) / _PI + c[2] * sn / _PI
            + c[3] * (1 - cs2) / (2 * _PI) + c[4] * sn2 / (2 * _PI))


def _cauchy_derivs(f, w, radius=0.25, n=32):
    """Third and fourth derivatives of ``F`` from ``f = F''`` on a circle."""
    w = _arr(w)[..., None]
    th = np.arange(n) * (TWO_PI / n)
    e = np.exp(1j * th)
    vals = _arr(f(w + radius * e))
    f3 = np.mean(vals * np.conj(e), axis=-1) / radius
    f4 = 2.0 * np.mean(vals * np.conj(e) ** 2, axis=-1) / radius ** 2
    return f3, f4


class ModelH:
    """The ``C^2`` interpolating map between ``A + it`` and ``F(A + it)``.

    ``mode="corrected"`` (default) uses coefficients that satisfy the seam
    conditions ``X + iY = 1`` at ``s = 0``, ``= F'`` at ``s = 1``, vanishing
    ``s``-derivative at ``s = 0`` and ``F''`` at ``s = 1``.
    ``mode="literal"`` keeps the historical variant with ``b_4 = -a_0 - a_2``
    and without the ``1/pi`` factors on the ``F''`` terms, which is not
    ``C^1`` across the seam.
    """

    def __init__(self, F: LiftedMap, A: complex, mode: str = "corrected"):
        self.F = F
        self.A = complex(A)
        self.mode = mode
        self.alpha = F.alpha

    def _raw(self, t):
        w = self.A + 1j * _arr(t)
        return w, self.F.defect(w), self.F.deriv_defect(w), self.F.second(w)

    def coefficients(self, t):
        _, d, g1, g2 = self._raw(t)
        a, b = _coefficients(d, g1, g2, self.mode)
        return (a[0] + 1.0,) + a[1:], b

    def _coeff_t(self, t, order):
        w, d, g1, g2 = self._raw(t)
        f3, f4 = _cauchy_derivs(self.F.second, w)
        if order == 1:
            return _coefficients(1j * g1, 1j * g2, 1j * f3, self.mode, False)
        return _coefficients(-g2, -f3, -f4, self.mode, False)

    def displacement(self, s, t):
        """``H(s, t) - (A + it)`` for ``s`` in ``[0, 1]``."""
        _, d, g1, g2 = self._raw(t)
        a, b = _coefficients(d, g1, g2, self.mode)
        s = np.asarray(s, dtype=float)
        return _integral(a, s, 1.0) + 1j * _integral(b, s)

    def value(self, s, t):
        return self.A + 1j * _arr(t) + self.displacement(s, t)

    def extended_displacement(self, s, t):
        """Displacement on ``[-1, 2]`` using ``H(s+1, t) = F(H(s, t))``."""
        s = float(s)
        base = self.A + 1j * complex(t).real if np.ndim(t) == 0 else self.A + 1j * _arr(t)
        if 0.0 <= s <= 1.0:
            return self.displacement(s, t)
        if s > 1.0:
            prev = self.displacement(s - 1.0, t)
            return prev + 1.0 + self.F.defect(base + prev)
        nxt = self.displacement(s + 1.0, t)
        D = nxt - 1.0
        for _ in range(100):
            Dn = nxt - 1.0 - self.F.defect(base + D)
            if np.all(np.abs(Dn - D) <= 1e-17 + 1e-16 * np.abs(D)):
                D = Dn
                break
            D = Dn
        return D

    def ds(self, s, t):
        """``(d_s H - 1, d_t H - i)``."""
        _, d, g1, g2 = self._raw(t)
        a, b = _coefficients(d, g1, g2, self.mode)
        at, bt = self._coeff_t(t, 1)
        s = np.asarray(s, dtype=float)
        hs = _series(a, s) + 1j * _series(b, s)
        ht = _integral(at, s) + 1j * _integral(bt, s)
        return hs, ht

    def second_partials(self, s, t):
        _, d, g1, g2 = self._raw(t)
        a, b = _coefficients(d, g1, g2, self.mode)
        at, bt = self._coeff_t(t, 1)
        att, btt = self._coeff_t(t, 2)
        s = np.asarray(s, dtype=float)
        hss = _series_ds(a, s) + 1j * _series_ds(b, s)
        hst = _series(at, s) + 1j * _series(bt, s)
        htt = _integral(att, s) + 1j * _integral(btt, s)
        return hss, hst, htt


def model_build(F: LiftedMap, A: complex, mode: str = "corrected", *, c1: float = 3.0,
                r: float = 0.125, t_max: float | None = None) -> ModelH:
    """Build ``H`` anchored at ``A`` after probing the cylinder condition.

    The strip is probed on an ``(s, t)`` grid; every probe point must lie at
    distance at least ``C1 + 1`` and ``r/alpha`` from the poles ``n/alpha``.
    """
    H = ModelH(F, A, mode)
    a = F.alpha
    t_max = 3.0 / a if t_max is None else t_max
    s = np.linspace(0, 1, 11)[:, None]
    t = np.linspace(0, t_max, 61)[None, :]
    pts = _arr(H.value(s, t))
    ok = ThetaRegion(a, c1 + 1.0).contains(pts) & ThetaRegion(a, r / a).contains(pts)
    if not np.all(ok & np.isfinite(pts)):
        raise AnchorError(f"model strip at A={A!r} leaves Theta(C1+1) or Theta(r/alpha)")
    return H


def default_anchor(alpha: float, c1: float, r: float = 0.125) -> complex:
    """Real anchor one unit outside both excluded disks around the pole at 0."""
    return complex(max(c1 + 1.0, r / alpha) + 1.0)


def model_value(H: ModelH, s, t):
    return H.value(s, t)


@dataclass
class ModelReport:
    mode: str
    anchor: complex
    anchor_error: float
    closure_error: float
    seam_c1: dict
    seam_c2: dict
    seam_c1_ratio: float
    seam_c2_ratio: float
    slope_ds: float
    slope_dt: float
    slope_second: tuple
    expected_slope: float
    dt_at_top: float

    def passes(self, slope_tol: float = 0.1) -> dict:
        e = self.expected_slope
        return {
            "anchor": self.anchor_error < 1e-12,
            "closure": self.closure_error < 1e-12,
            "seam_c1": 5.0 <= self.seam_c1_ratio <= 20.0,
            "seam_c2": 5.0 <= self.seam_c2_ratio <= 20.0,
            "slope_ds": abs(self.slope_ds - e) <= slope_tol * abs(e),
            "slope_dt": abs(self.slope_dt - e) <= slope_tol * abs(e),
            "dt_top": self.dt_at_top < 1e-8,
        }


def _seam_mismatch(H, t, step):
    """One-sided first and second differences across ``s = 0`` and ``s = 1``."""
    D = lambda s: H.extended_displacement(s, t)
    m1, m2 = 0.0, 0.0
    for s0 in (0.0, 1.0):
        c = D(s0)
        r1, r2 = D(s0 + step), D(s0 + 2 * step)
        l1, l2 = D(s0 - step), D(s0 - 2 * step)
        first = abs((r1 - c) / step - (c - l1) / step)
        second = abs((r2 - 2 * r1 + c) - (c - 2 * l1 + l2)) / step ** 2
        m1, m2 = max(m1, first), max(m2, second)
    return m1, m2


def model_checks(H: ModelH, steps=(1e-3, 1e-4), seam_ts=None, t_range=None) -> ModelReport:
    """Seam smoothness and decay-rate checks for the model map."""
    a = H.alpha
    t_line = np.linspace(0.0, 3.0 / a, 25)
    anchor_err = float(np.max(np.abs(H.value(0.0, t_line) - (H.A + 1j * t_line))))
    closure = float(np.max(np.abs(H.value(1.0, t_line) - H.F.value(H.A + 1j * t_line))))
    seam_ts = (0.5, 1.0, 2.0) if seam_ts is None else seam_ts
    c1 = {}
    c2 = {}
    for st in steps:
        vals = [_seam_mismatch(H, t, st) for t in seam_ts]
        c1[st] = max(v[0] for v in vals)
        c2[st] = max(v[1] for v in vals)
    big, small = max(steps), min(steps)
    r1 = c1[big] / c1[small] if c1[small] > 0 else math.inf
    r2 = c2[big] / c2[small] if c2[small] > 0 else math.inf

    lo, hi = (1.0 / a, 3.0 / a) if t_range is None else t_range
    ts = np.linspace(lo, hi, 40)
    ss = np.linspace(0.0, 1.0, 9)
    ds_max, dt_max, sec_max = [], [], [[], [], []]
    for t in ts:
        hs, ht = H.ds(ss, t)
        ds_max.append(np.max(np.abs(hs)))
        dt_max.append(np.max(np.abs(ht)))
        for k, v in enumerate(H.second_partials(ss, t)):
            sec_max[k].append(np.max(np.abs(v)))
    slope = lambda y: float(np.polyfit(ts, np.log(np.asarray(y)), 1)[0])
    _, top = H.ds(ss, 3.0 / a)
    return ModelReport(H.mode, H.A, anchor_err, closure, c1, c2, r1, r2,
                       slope(ds_max), slope(dt_max), tuple(slope(v) for v in sec_max),
                       -TWO_PI * a, float(np.max(np.abs(top))))


# ---------------------------------------------------------------- export
def _c2l(z):
    return [float(np.real(z)), float(np.imag(z))]


def chart_to_json(chart: FatouChart) -> str:
    """Serialize everything needed to evaluate the chart without refitting."""
    kind = getattr(chart.map, "kind", None)
    if kind not in ("quadratic", "cubic"):
        raise ValueError("only charts of closed-form maps can be exported")
    doc = {
        "format": "nearparabolic-fatou-chart",
        "version": CHART_FORMAT_VERSION,
        "map": kind,
        "alpha": chart.alpha,
        "sigma": _c2l(chart.sigma),
        "offset": _c2l(chart.offset),
        "gate": {
            "center": chart.center,
            "zc": _c2l(chart.zc),
            "rho": chart.rho,
            "coefficients": [_c2l(c) for c in chart.coeffs],
        },
        "window_lo": chart.lo,
        "validation_residual": chart.residual,
        "n_validated": chart.n_validated,
        "inv_tol": chart.inv_tol,
        "constants": chart.constants.as_dict(),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def chart_from_json(text: str) -> FatouChart:
    doc = json.loads(text)
    if doc.get("format") != "nearparabolic-fatou-chart" or doc.get("version") != CHART_FORMAT_VERSION:
        raise ValueError("unrecognized chart document")
    cls = {"quadratic": QuadraticMap, "cubic": CanonicalISMap}[doc["map"]]
    h = cls(doc["alpha"])
    g = doc["gate"]
    chart = FatouChart(
        h, [complex(*c) for c in g["coefficients"]], zc=complex(*g["zc"]), rho=g["rho"],
        lo=doc["window_lo"], offset=complex(*doc["offset"]), center=g["center"],
        constants=FittedConstants(**doc["constants"]), inv_tol=doc["inv_tol"])
    chart.residual = doc["validation_residual"]
    chart.n_validated = doc["n_validated"]
    return chart
