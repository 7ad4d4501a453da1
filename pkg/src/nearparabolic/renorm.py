"""Near-parabolic renormalization: sectors, return map, and the tower.

The renormalized map is never written in closed form. A query
``f_{n+1}(xi)`` is traced: pick the logarithm ``zeta`` of ``xi`` under
``Exp`` lying in ``Phi_n(S_n)``, apply ``Phi_n o f_n^{k_n} o Phi_n^{-1}``,
project back with ``Exp``. Since ``Exp`` is anti-holomorphic the result is
holomorphic, with derivative

    f_{n+1}'(xi) = f_{n+1}(xi) / xi * conj(ret'(zeta)).

Sector pullbacks are traced along sampled boundary curves by Newton
continuation, choosing the preimage branch by continuity.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .arith import HighTypeAngle
from .errors import (ConfigError, DescentStuckError, EscapeError, RepresentativeError,
                     RunawayError)
from .fatou import ChartOptions, FatouChart, FittedConstants, build_chart, phi_dagger
from .geometry import points_in_polygon
from .lift import exp_projection, log_branch
from .maps import QuadraticMap, sigma_fixed_point

__all__ = [
    "SectorSample",
    "RenormalizedMap",
    "RenormLevel",
    "sector_boundaries",
    "compute_k",
    "return_map",
    "return_map_deriv",
    "renormalize",
    "build_tower",
    "rotation_number_at_zero",
    "psi_map",
    "eta_window",
    "ConjugacyReport",
    "conjugacy_residual",
    "renorm_correspondence",
    "DescentStep",
    "descend_pairs",
]

CV_NORMAL = -4.0 / 27.0


def _arr(z):
    return np.asarray(z, dtype=complex)


# ------------------------------------------------------------ continuation
def _preimage(h, y, guess):
    return complex(h.preimage_near(complex(y), complex(guess)))


def _pull_back_path(h, ys, x0, max_depth: int = 12):
    """Preimages of the polyline ``ys`` continued from ``x0`` (over ``ys[0]``).

    A step is accepted when the new preimage lies within a fraction of the
    distance to the critical point, where the two local branches separate;
    otherwise the segment is halved.
    """
    cp = complex(h.critical_point)
    out = [complex(x0)]
    x = complex(x0)
    for y0, y1 in zip(ys[:-1], ys[1:]):
        stack = [(complex(y0), complex(y1), 0)]
        while stack:
            a, b, depth = stack.pop()
            cand = _preimage(h, b, x)
            lim = 0.3 * abs(x - cp) + 1e-12
            ok = cmath.isfinite(cand) and abs(cand - x) <= lim
            if ok or depth >= max_depth:
                if not cmath.isfinite(cand):
                    raise EscapeError("sector pullback left the domain", index=len(out))
                x = cand
                continue
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
        out.append(x)
    return np.array(out)


# ----------------------------------------------------------------- sectors
@dataclass
class SectorSample:
    """Boundary polylines (in the dynamical plane) of the ``k``-fold pullbacks.

    ``csharp`` runs down the left side, along the bottom edge, and up the
    right side; ``c`` is closed and starts at the corner shared with
    ``csharp``. ``cp_pullback`` is the point of ``c`` mapped to the critical
    point by ``h^{k-1}``.
    """

    k: int
    csharp: np.ndarray
    c: np.ndarray
    cp_pullback: complex
    csharp_phi: np.ndarray = field(default=None, repr=False)
    c_phi: np.ndarray = field(default=None, repr=False)

    def points(self):
        return np.concatenate([self.csharp, self.c])

    def hull_contains(self, zeta):
        """Membership in the sampled ``Phi(S)`` with ``C#`` extended vertically."""
        zeta = _arr(zeta)
        top = self.csharp_phi
        left, right = top[0], top[-1]
        h_top = min(left.imag, right.imag)
        cap = np.concatenate([top, [right.real + 1j * (h_top + 1e6), left.real + 1j * (h_top + 1e6)]])
        inside = points_in_polygon(zeta, cap) | points_in_polygon(zeta, self.c_phi)
        return inside


def sector_boundaries(refine: int = 1, im_top: float = 60.0):
    """``(csharp, c)`` boundary polylines in Fatou coordinates."""
    m = 60 * refine
    u = np.linspace(0.0, 1.0, m)
    heights = 2.0 + (im_top - 2.0) * u ** 2
    left = 0.5 + 1j * heights[::-1]
    bottom = np.linspace(0.5, 1.5, 20 * refine)[1:] + 2j
    right = 1.5 + 1j * heights[1:]
    csharp = np.concatenate([left, bottom, right])
    e = 40 * refine
    c_left = 0.5 + 1j * np.linspace(2.0, -2.0, e)
    c_bottom = np.linspace(0.5, 1.5, e // 2)[1:] - 2j
    c_right = 1.5 + 1j * np.linspace(-2.0, 2.0, e)[1:]
    c_top = np.linspace(1.5, 0.5, e // 2)[1:] + 2j
    c = np.concatenate([c_left, c_bottom, c_right, c_top])
    return csharp, c


def _top_anchor(chart: FatouChart, y):
    """Preimage of a point near 0 predicted by the lift ``w -> w - 1``."""
    cov = chart.cov
    w = complex(cov.inverse(complex(y), chart.lo, chart.lo + 1.0 / chart.alpha))
    return _preimage(chart.map, y, cov.value(w - 1.0))


def compute_k(chart: FatouChart, refine: int = 1, k_max: int | None = None,
              im_top: float | None = None) -> SectorSample:
    """Smallest ``k`` whose pulled-back sectors lie in the admissible strip.

    The strip is ``0 < Re Phi < floor(1/alpha) - k_bold - 1``.

    Raises
    ------
    RunawayError
        If no ``k <= k_max`` qualifies.
    """
    h = chart.map
    a = chart.alpha
    consts = chart.constants
    k_max = consts.k_max if k_max is None else k_max
    bound = math.floor(1.0 / a) - consts.k_bold - 1
    im_top = min(60.0, 1.5 / a) if im_top is None else im_top
    cs_phi, c_phi = sector_boundaries(refine, im_top)
    cs_z = fatou_inverse_strict(chart, cs_phi)
    c_z = fatou_inverse_strict(chart, c_phi)
    cp = complex(h.critical_point)

    # k = 1
    x0 = _top_anchor(chart, cs_z[0])
    cs = _pull_back_path(h, cs_z, x0)
    corner_idx = int(np.argmin(np.abs(cs_phi - (0.5 + 2j))))
    corner = cs[corner_idx]
    loop2 = np.concatenate([c_z, c_z[1:]])
    cc2 = _pull_back_path(h, loop2, corner)
    c_cur = cc2
    z_star = cp
    k = 1
    while True:
        re_cs = _arr(chart.value(cs)).real
        re_c = _arr(chart.value(c_cur)).real
        ok = (np.all(np.isfinite(re_cs)) and np.all(np.isfinite(re_c))
              and np.all((re_cs > 0) & (re_cs < bound)) and np.all((re_c > 0) & (re_c < bound)))
        if ok:
            s = SectorSample(k, cs, c_cur, z_star)
            s.csharp_phi = _arr(chart.value(cs))
            s.c_phi = _arr(chart.value(c_cur))
            return s
        if k >= k_max:
            raise RunawayError(f"no admissible k up to k_max={k_max}")
        # next pullback
        x0 = _top_anchor(chart, cs[0])
        cs_new = _pull_back_path(h, cs, x0)
        corner = cs_new[corner_idx]
        c_new = _pull_back_path(h, c_cur, corner)
        # follow the critical point along a segment from the corner
        seg = np.linspace(c_cur[0], z_star, 64)
        z_star = complex(_pull_back_path(h, seg, corner)[-1])
        cs, c_cur = cs_new, c_new
        k += 1


def fatou_inverse_strict(chart: FatouChart, zeta):
    z, res = chart.inverse(zeta)
    if not np.all(res <= chart.inv_tol):
        bad = np.flatnonzero(~(res <= chart.inv_tol))
        raise EscapeError(f"chart inversion failed at {bad.size} boundary samples",
                          index=int(bad[0]))
    return z


# -------------------------------------------------------------- return map
def _iterate(h, z, n: int, want_deriv: bool = False):
    z = _arr(z).copy()
    d = np.ones_like(z)
    for _ in range(n):
        if want_deriv:
            d = d * h.deriv(z)
        with np.errstate(all="ignore"):
            z = _arr(h(z))
    return (z, d) if want_deriv else z


def return_map(chart: FatouChart, k: int, zeta, strict: bool = True):
    """``Phi(h^k(Phi^{-1}(zeta)))``."""
    z, res = chart.inverse(zeta)
    zk = _iterate(chart.map, z, k)
    if strict and np.ndim(zeta) == 0 and not np.isfinite(zk):
        # locate the exit
        x = complex(z)
        for j in range(k):
            x = complex(chart.map(x))
            if not cmath.isfinite(x):
                raise EscapeError(f"orbit left the domain after {j + 1} steps", index=j + 1)
    v = chart.value(zk)
    bad = ~(_arr(res) <= chart.inv_tol)
    v = np.where(bad, np.nan, v)
    return complex(v) if np.ndim(zeta) == 0 else v


def return_map_deriv(chart: FatouChart, k: int, zeta):
    """``(ret(zeta), ret'(zeta))``."""
    z, res = chart.inverse(zeta)
    _, d0 = chart.value_deriv(z)
    zk, dk = _iterate(chart.map, z, k, want_deriv=True)
    v, d1 = chart.value_deriv(zk)
    ok = _arr(res) <= chart.inv_tol
    v = np.where(ok, v, np.nan)
    with np.errstate(all="ignore"):
        dr = np.where(ok, d1 * dk / d0, np.nan)
    return v, dr


# ------------------------------------------------------- renormalized map
class RenormalizedMap:
    """``f_{n+1} = R(f_n)`` evaluated by tracing through level ``n``."""

    kind = "renormalized"

    def __init__(self, chart: FatouChart, sectors: SectorSample, alpha: float):
        self.chart = chart
        self.sectors = sectors
        self.k = sectors.k
        self.alpha = float(alpha)
        self.multiplier = cmath.exp(2j * math.pi * self.alpha)
        zstar_phi = complex(chart.value(sectors.cp_pullback))
        self.critical_point = exp_projection(zstar_phi)
        self.critical_value = CV_NORMAL
        re_all = np.concatenate([sectors.csharp_phi.real, sectors.c_phi.real])
        self._shifts = np.arange(math.floor(re_all.min()) - 1, math.ceil(re_all.max()) + 2)
        self._center = 0.5 * (re_all.min() + re_all.max())
        self._sigma = None
        self._d0 = None
        self._d2 = None

    def __repr__(self):
        return f"RenormalizedMap(alpha={self.alpha!r}, k={self.k})"

    def representative(self, xi):
        """``zeta`` in the sampled ``Phi(S)`` with ``Exp(zeta) = xi``; NaN if none."""
        xi = _arr(xi)
        flat = xi.ravel()
        base = _arr(log_branch(np.where(flat == 0, 1.0, flat), (0.0, 1.0)))
        out = np.full(flat.shape, np.nan + 0j)
        order = sorted(self._shifts, key=lambda j: (abs(j - self._center), j))
        todo = np.isfinite(base) & (flat != 0)
        for j in order:
            if not todo.any():
                break
            cand = base[todo] + j
            hit = self.sectors.hull_contains(cand)
            idx = np.flatnonzero(todo)[hit]
            out[idx] = cand[hit]
            todo[idx] = False
        return out.reshape(xi.shape)

    def _trace(self, xi, want_deriv):
        xi = _arr(xi)
        flat = xi.ravel()
        zeta = self.representative(flat)
        ok = np.isfinite(zeta)
        val = np.full(flat.shape, np.nan + 0j)
        der = np.full(flat.shape, np.nan + 0j)
        if ok.any():
            if want_deriv:
                r, dr = return_map_deriv(self.chart, self.k, zeta[ok])
            else:
                r = return_map(self.chart, self.k, zeta[ok], strict=False)
            v = exp_projection(_arr(r))
            val[ok] = v
            if want_deriv:
                der[ok] = v / flat[ok] * np.conj(dr)
        zero = flat == 0
        val[zero] = 0.0
        if want_deriv and zero.any():
            der[zero] = self.derivative_at_zero()
        return val.reshape(xi.shape), der.reshape(xi.shape)

    def __call__(self, xi):
        v, _ = self._trace(xi, False)
        return complex(v) if np.ndim(xi) == 0 else v

    def value_deriv(self, xi):
        v, d = self._trace(xi, True)
        if np.ndim(xi) == 0:
            return complex(v), complex(d)
        return v, d

    def deriv(self, xi):
        _, d = self._trace(xi, True)
        return complex(d) if np.ndim(xi) == 0 else d

    def in_domain(self, xi):
        return np.isfinite(self.representative(xi))

    def _circle(self, radius, n=8):
        e = np.exp(2j * math.pi * np.arange(n) / n)
        return radius * e, self(radius * e)

    def derivative_at_zero(self, radius: float = 1e-4, n: int = 8) -> complex:
        """Circle average of ``f(xi)/xi``, exact for polynomials of degree < n."""
        if self._d0 is None:
            pts, vals = self._circle(radius, n)
            self._d0 = complex(np.mean(vals / pts))
        return self._d0

    def second_derivative_at_zero(self, radius: float = 1e-3, n: int = 16) -> complex:
        if self._d2 is None:
            pts, vals = self._circle(radius, n)
            self._d2 = complex(2.0 * np.mean(vals / pts ** 2))
        return self._d2

    @property
    def sigma(self) -> complex:
        if self._sigma is None:
            self._sigma = sigma_fixed_point(self)
        return self._sigma

    def preimage_near(self, y, guess, maxit: int = 40):
        y = _arr(y)
        x = np.broadcast_to(_arr(guess), np.broadcast_shapes(y.shape, np.shape(guess))).astype(complex).ravel().copy()
        yb = np.broadcast_to(y, x.shape if y.ndim else ()).ravel() if y.ndim else np.full(x.shape, complex(y))
        active = np.isfinite(x)
        for _ in range(maxit):
            if not active.any():
                break
            v, d = self.value_deriv(x[active])
            step = (v - yb[active]) / d
            cap = 0.5 * (np.abs(x[active]) + 0.01)
            big = np.abs(step) > cap
            step[big] *= cap[big] / np.abs(step[big])
            xn = x[active] - step
            x[active] = xn
            done = ~np.isfinite(step) | (np.abs(step) <= 1e-14 * (1 + np.abs(xn)))
            idx = np.flatnonzero(active)
            active[idx[done]] = False
        out = x.reshape(np.broadcast_shapes(y.shape, np.shape(guess)))
        return complex(out) if out.ndim == 0 else out


def renormalize(chart: FatouChart, sectors: SectorSample, alpha_next: float | None = None):
    """The callable ``R(h)``; ``alpha_next`` defaults to ``frac(1/alpha)``."""
    if alpha_next is None:
        alpha_next = (1.0 / chart.alpha) % 1.0
    return RenormalizedMap(chart, sectors, alpha_next)


def rotation_number_at_zero(f) -> float:
    """``frac(arg f'(0) / 2 pi)`` from an 8-point circle of radius 1e-4."""
    d = f.derivative_at_zero() if hasattr(f, "derivative_at_zero") else complex(f.deriv(0j))
    return (cmath.phase(d) / (2 * math.pi)) % 1.0


# ------------------------------------------------------------------ tower
@dataclass
class RenormLevel:
    level: int
    map: object
    alpha: float
    chart: FatouChart
    sectors: SectorSample | None
    rotation_measured: float | None = None

    @property
    def k(self):
        return None if self.sectors is None else self.sectors.k

    def summary(self) -> dict:
        return {
            "level": self.level,
            "alpha": self.alpha,
            "k": self.k,
            "chart_residual": self.chart.residual,
            "chart_points": self.chart.n_validated,
            "rotation_measured": self.rotation_measured,
        }


def build_tower(angle: HighTypeAngle, depth: int, options: ChartOptions | None = None,
                refine: int = 1, with_last_sectors: bool = True):
    """Levels ``0..depth`` with ``f_0 = P_alpha``.

    Each level carries its chart and (except possibly the last) its sector
    data; level ``n+1`` records the measured rotation number of ``f_{n+1}``.
    """
    if depth < 0 or depth > 2:
        raise ConfigError(f"tower depth {depth} outside 0..2")
    if depth >= angle.depth:
        raise ConfigError("not enough digits for the requested depth")
    opts = options or ChartOptions()
    consts = opts.constants
    N = min(angle.digits[: depth + 1]) if angle.digits else 0
    if N < 2 * consts.k_prime + consts.k_bold + 1:
        raise ConfigError(f"digits below 2k'+k+1={2 * consts.k_prime + consts.k_bold + 1}")
    tower = angle.tower
    f = QuadraticMap(tower[0])
    levels = []
    for n in range(depth + 1):
        try:
            chart = build_chart(f, opts)
        except Exception as exc:  # annotate with the level
            exc.args = (f"level {n}: {exc}",) + exc.args[1:]
            raise
        need_sectors = n < depth or with_last_sectors
        sectors = compute_k(chart, refine) if need_sectors else None
        rot = rotation_number_at_zero(f) if n > 0 else None
        levels.append(RenormLevel(n, f, tower[n], chart, sectors, rot))
        if n < depth:
            f = renormalize(chart, sectors, tower[n + 1])
    return levels


# ------------------------------------------------------- coordinate chain
def eta_window(chart: FatouChart, n_rows: int = 6, n_pts: int = 200):
    """Real window ``[lo, lo + 1)`` of a log branch continuous on the chart strip.

    The logarithm is unwrapped along sampled rows and the left edge of the
    strip ``0 < Re Phi < floor(1/alpha) - k_bold - 1``; the cut is placed
    in the middle of the gap left by its real range, then shifted by an
    integer so that the window starts in ``[0, 1)``.
    """
    cached = getattr(chart, "_eta_window", None)
    if cached is not None:
        return cached
    width = chart.strip_width - 1
    left = 0.01 + 1j * np.linspace(-3.0, 8.0, n_pts)
    rows = [left] + [np.linspace(0.01, width - 0.01, n_pts) + 1j * im
                     for im in np.linspace(-3.0, 8.0, n_rows)]
    z, res = chart.inverse(np.concatenate(rows))
    if not np.all(res <= chart.inv_tol):
        raise RepresentativeError("strip samples failed to invert for the log branch")
    with np.errstate(divide="ignore", invalid="ignore"):
        turns = np.log(np.conj(-6.75 * z)).imag / (2.0 * math.pi)
    parts = np.split(turns, len(rows))
    base = parts[0]
    unwrapped = [np.unwrap(2 * math.pi * base) / (2 * math.pi)]
    for part, im_idx in zip(parts[1:], np.linspace(0, n_pts - 1, n_rows).astype(int)):
        seg = np.unwrap(2 * math.pi * part) / (2 * math.pi)
        seg += np.round(unwrapped[0][im_idx] - seg[0])
        unwrapped.append(seg)
    allv = np.concatenate(unwrapped)
    lo_v, hi_v = float(allv.min()), float(allv.max())
    if hi_v - lo_v >= 1.0:
        raise RepresentativeError("logarithm winds a full turn over the strip")
    lo = lo_v - 0.5 * (1.0 - (hi_v - lo_v))
    lo -= math.floor(lo)
    chart._eta_window = (lo, lo + 1.0)
    return chart._eta_window


def psi_map(levels, n: int, w):
    """``Psi_n(w) = psi_1 o ... o psi_n (w)`` with ``psi_j = Phi_{j-1}^{-1} o eta_j``.

    ``eta_j`` is the branch of the inverse of ``Exp`` that is continuous on
    the level-``j`` strip, see :func:`eta_window`.
    """
    if n < 1 or n >= len(levels):
        raise ValueError(f"psi index {n} outside 1..{len(levels) - 1}")
    z = _arr(w)
    for j in range(n, 0, -1):
        eta = _arr(log_branch(z, eta_window(levels[j].chart)))
        z, _ = levels[j - 1].chart.inverse(eta)
    return complex(z) if np.ndim(w) == 0 else z


@dataclass
class ConjugacyReport:
    level: int
    q: int
    exponent_ii: int
    max_residual_i: float
    max_residual_ii: float
    n_i: int
    n_ii: int

    def passes(self, tol: float = 1e-4) -> bool:
        return self.max_residual_i < tol and self.max_residual_ii < tol


def _strip_samples(chart, n, rng, im=(-1.0, 4.0)):
    consts = chart.constants
    hi = math.floor(1.0 / chart.alpha) - consts.k_bold - 1
    zeta = rng.uniform(0.3, hi - 0.3, n) + 1j * rng.uniform(im[0], im[1], n)
    z, res = chart.inverse(zeta)
    return z[res <= chart.inv_tol]


def _sector_interior_samples(chart, sectors, n, rng):
    pts = np.concatenate([sectors.csharp_phi, sectors.c_phi])
    lo_r, hi_r = pts.real.min(), pts.real.max()
    lo_i = pts.imag.min()
    hi_i = min(pts.imag.max(), lo_i + 8.0)
    out = []
    while sum(x.size for x in out) < n:
        cand = rng.uniform(lo_r, hi_r, 4 * n) + 1j * rng.uniform(lo_i, hi_i, 4 * n)
        out.append(cand[sectors.hull_contains(cand)])
    zeta = np.concatenate(out)[:n]
    z, res = chart.inverse(zeta)
    return z[res <= chart.inv_tol]


def conjugacy_residual(levels, angle: HighTypeAngle, level: int = 1, n_samples: int = 50,
                       seed: int = 0) -> ConjugacyReport:
    """Both conjugacy identities between ``f_0`` and ``f_level`` through ``Psi``."""
    rng = np.random.default_rng(seed)
    f0 = levels[0].map
    fn = levels[level].map
    q = angle.q(level)
    q_prev = angle.q(level - 1)
    chart_n = levels[level].chart
    w = _strip_samples(chart_n, n_samples, rng)
    lhs = _iterate(f0, psi_map(levels, level, w), q)
    rhs = psi_map(levels, level, fn(w))
    r1 = np.abs(lhs - rhs)

    sectors = levels[level].sectors
    k_n = sectors.k
    expo = k_n * q + q_prev
    w2 = _sector_interior_samples(chart_n, sectors, n_samples, rng)
    lhs2 = _iterate(f0, psi_map(levels, level, w2), expo)
    rhs2 = psi_map(levels, level, _iterate(fn, w2, k_n))
    r2 = np.abs(lhs2 - rhs2)
    mx = lambda r: float(np.max(r)) if r.size and np.all(np.isfinite(r)) else math.inf
    return ConjugacyReport(level, q, expo, mx(r1), mx(r2), int(r1.size), int(r2.size))


def renorm_correspondence(level: RenormLevel, f_next, n_samples: int = 20, seed: int = 0):
    """Two-path check: ``Exp Phi(f^l(z)) = f_{n+1}(Exp Phi(z))`` for some admissible ``l``.

    Returns ``(max residual, list of l_z)`` over sampled ``z`` whose
    projection lies in the domain of ``f_{n+1}``.
    """
    rng = np.random.default_rng(seed)
    chart = level.chart
    consts = chart.constants
    k = level.sectors.k
    l_max = math.floor(1.0 / level.alpha) - consts.k_bold + k - 1
    W = chart.strip_width
    z = []
    while len(z) < n_samples:
        zeta = rng.uniform(0.2, W - 0.5, 4 * n_samples) + 1j * rng.uniform(-1.0, 6.0, 4 * n_samples)
        xi = exp_projection(zeta)
        keep = np.isfinite(f_next.representative(xi))
        zz, res = chart.inverse(zeta[keep])
        z.extend(zz[res <= chart.inv_tol].tolist())
    z = np.array(z[:n_samples])
    xi = exp_projection(_arr(chart.value(z)))
    target = f_next(xi)
    best = np.full(z.shape, np.inf)
    best_l = np.zeros(z.shape, dtype=int)
    orbit = z.copy()
    for l in range(1, l_max + 1):
        with np.errstate(all="ignore"):
            orbit = _arr(level.map(orbit))
        v = _arr(chart.value(orbit))
        inside = np.isfinite(v) & (v.real > 0) & (v.real < W)
        r = np.where(inside, np.abs(exp_projection(v) - target), np.inf)
        better = r < best
        best[better] = r[better]
        best_l[better] = l
    return float(np.max(best)), best_l.tolist()


# ----------------------------------------------------------------- descent
@dataclass
class DescentStep:
    level: int
    z: complex
    zeta: complex
    branch: str  # "A" (Phi^l) or "B" (dagger preimage)
    placement_ok: bool


def _in_A(chart: FatouChart, v: complex, consts: FittedConstants) -> bool:
    if not cmath.isfinite(v):
        return False
    balls = any(abs(v - j) < consts.delta1 for j in range(1, consts.k_prime + 1))
    strip = consts.k_prime + 0.5 < v.real < 1.0 / chart.alpha - consts.k_bold
    return balls or strip


def _placement(zeta: complex, alpha: float, k: int, consts: FittedConstants) -> bool:
    balls = any(abs(zeta - j) < consts.delta1 for j in range(1, consts.k_prime + 1))
    lo = consts.k_prime + 0.5
    hi = 1.0 / alpha - consts.k_bold + k + consts.k_prime
    return balls or (lo <= zeta.real <= hi)


def _both_preimages(h, y):
    if hasattr(h, "preimages"):
        return [complex(v) for v in h.preimages(complex(y))]
    cp = complex(h.critical_point)
    x1 = _preimage(h, y, cp + 0.5 * (y - complex(h.critical_value)) ** 0.5)
    x2 = _preimage(h, y, 2 * cp - x1)
    return [x1, x2]


def _dagger_preimage(level: RenormLevel, z: complex, consts: FittedConstants, max_pull: int):
    chart = level.chart
    W = chart.strip_width
    frontier = [complex(z)]
    for m in range(1, max_pull + 1):
        nxt = []
        for y in frontier:
            nxt.extend(x for x in _both_preimages(level.map, y) if cmath.isfinite(x))
        cands = []
        for x in nxt:
            v = complex(chart.value(x))
            if cmath.isfinite(v) and consts.k_prime < v.real < W:
                zeta = v + m
                if _placement(zeta, level.alpha, level.k, consts):
                    back = complex(phi_dagger(chart, zeta)) if zeta.real > consts.k_prime else None
                    if back is not None and abs(back - z) < 1e-6:
                        cands.append(zeta)
        if cands:
            return min(cands, key=lambda c: c.real)
        frontier = nxt
    return None


def descend_pairs(z0: complex, levels, depth: int):
    """The pairs ``(z_i, zeta_i)`` for ``i = 0..depth`` with ``z_{i+1} = Exp(zeta_i)``.

    At each level ``zeta`` is ``Phi(z)`` when ``z`` is in the set A (near
    the first ``k'`` integers or in the main strip) and otherwise a
    ``Phi^dagger``-preimage found by pulling ``z`` back.
    """
    if depth >= len(levels):
        raise ValueError(f"depth {depth} needs {depth + 1} levels")
    steps = []
    z = complex(z0)
    for n in range(depth + 1):
        lev = levels[n]
        consts = lev.chart.constants
        v = complex(lev.chart.value(z))
        if _in_A(lev.chart, v, consts):
            zeta, branch = v, "A"
        else:
            zeta = _dagger_preimage(lev, z, consts, (lev.k or 1) + consts.k_prime + 1)
            branch = "B"
            if zeta is None:
                raise DescentStuckError(f"no admissible pair at level {n}", level=n)
        ok = _placement(zeta, lev.alpha, lev.k or 0, consts)
        if not ok:
            raise DescentStuckError(f"zeta={zeta!r} violates the placement bound", level=n)
        steps.append(DescentStep(n, z, zeta, branch, ok))
        z = exp_projection(zeta)
    return steps
