"""Coverings and the lifted near-translation.

``tau(w) = sigma / (1 - exp(-2 pi i alpha w))`` is a ``1/alpha``-periodic
covering of the punctured sphere minus ``{0, sigma}``; it sends the upper
end of every vertical line to 0 and the lower end to ``sigma``. The map
``h`` lifts through it to ``F(w) = w + log(G(tau(w))) / (2 pi i alpha)``
with

    G(z) = (1 + (z - sigma) u(z)) / (1 + z u(z)),
    h(z) - z = z (z - sigma) u(z).

The renormalization projection is ``Exp(zeta) = -(4/27) conj(e^{2 pi i zeta})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchError, OutOfDomain, PoleError

__all__ = [
    "Covering",
    "ThetaRegion",
    "LiftedMap",
    "CylCondReport",
    "tau",
    "tau_inverse",
    "lifted_value",
    "exp_projection",
    "log_branch",
    "cylcond_check",
    "refine_c1",
    "c1_probe",
    "theta_samples",
]

TWO_PI = 2.0 * math.pi
CV = -4.0 / 27.0


def _arr(z):
    return np.asarray(z, dtype=complex)


def _is_scalar(*xs):
    return all(np.ndim(x) == 0 for x in xs)


class Covering:
    """The covering ``tau`` attached to a map ``h`` (uses ``h.alpha``, ``h.sigma``)."""

    def __init__(self, h):
        self.map = h
        self.alpha = float(h.alpha)
        self.sigma = complex(h.sigma)
        self.kappa = -2j * math.pi * self.alpha

    def _e_parts(self, w):
        """Return ``(E, flip)`` where ``E = exp(-2 pi i alpha w)`` or its
        reciprocal, whichever has modulus at most one (``flip`` marks the
        reciprocal), so nothing overflows."""
        a = self.kappa * _arr(w)
        flip = a.real > 0
        e = np.exp(np.where(flip, -a, a))
        return e, flip

    def value(self, w):
        e, flip = self._e_parts(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            # for |E| > 1 write sigma/(1 - E) = -sigma t / (1 - t), t = 1/E
            v = np.where(flip, -self.sigma * e / (1.0 - e), self.sigma / (1.0 - e))
            v = np.where(np.abs(1.0 - e) < 1e-300, np.nan, v)
        return v

    def deriv(self, w):
        e, flip = self._e_parts(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = e / (1.0 - e) ** 2  # invariant under e -> 1/e
        return self.kappa * self.sigma * q

    def second(self, w):
        e, flip = self._e_parts(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = e * (1.0 + e) / (1.0 - e) ** 3
            q = np.where(flip, -q, q)
        return self.kappa ** 2 * self.sigma * q

    def inverse(self, z, lo: float, hi: float | None = None):
        """Branch of ``tau^{-1}`` with ``Re w`` in ``[lo, hi)``; NaN if none."""
        z = _arr(z)
        if hi is None:
            hi = lo + 1.0 / self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            w0 = np.log(z / (z - self.sigma)) / (2j * math.pi * self.alpha)
            k = np.ceil((lo - w0.real) * self.alpha)
            w = w0 + k / self.alpha
            edge = (w.real >= hi) & (w.real - 1.0 / self.alpha >= lo)
            w = np.where(edge, w - 1.0 / self.alpha, w)
        ok = (w.real < hi) & (z != 0) & (z != self.sigma) & np.isfinite(w)
        return np.where(ok, w, np.nan)

    def lift_near(self, z, guess):
        """Branch of ``tau^{-1}(z)`` closest to ``guess``."""
        z = _arr(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            w0 = np.log(z / (z - self.sigma)) / (2j * math.pi * self.alpha)
            k = np.round((_arr(guess).real - w0.real) * self.alpha)
        return w0 + k / self.alpha


def tau(cov: Covering, w):
    """``sigma / (1 - e^{-2 pi i alpha w})``; scalar poles raise :class:`PoleError`."""
    v = cov.value(w)
    if _is_scalar(w):
        if not np.isfinite(v):
            raise PoleError(f"alpha*w = {cov.alpha * complex(w)} is an integer")
        return complex(v)
    return v


def tau_inverse(cov: Covering, z, window):
    """The preimage ``w`` of ``z`` with ``Re w`` in ``window = (lo, hi)``."""
    lo, hi = window
    if _is_scalar(z) and (z == 0 or z == cov.sigma):
        raise PoleError("tau does not take the values 0 and sigma")
    w = cov.inverse(z, lo, hi)
    if _is_scalar(z):
        if not np.isfinite(w):
            raise BranchError(f"no preimage of {z!r} with real part in {window}")
        return complex(w)
    return w


class ThetaRegion:
    """``Theta(R)``: the plane minus the balls ``B(n/alpha, R)``.

    With ``scaled=True`` this is ``Theta(r, alpha)``: radius ``r/alpha`` and
    only points with ``Im w >= -2/alpha``.
    """

    def __init__(self, alpha: float, radius: float, scaled: bool = False):
        self.alpha = float(alpha)
        self.scaled = scaled
        self.radius = radius / alpha if scaled else float(radius)

    def contains(self, w):
        w = _arr(w)
        n = np.round(w.real * self.alpha)
        dist = np.abs(w - n / self.alpha)
        ok = dist >= self.radius
        if self.scaled:
            ok &= w.imag >= -2.0 / self.alpha
        return ok


def theta_samples(alpha: float, count: int, rng: np.random.Generator, *,
                  c1: float, r: float = 0.0, im_range=None):
    """Uniform points of one period strip lying in ``Theta(C1)`` and ``Theta(r/alpha)``.

    ``im_range`` defaults to ``|Im(alpha w)| < 5``.
    """
    lo_im, hi_im = im_range if im_range is not None else (-5.0 / alpha, 5.0 / alpha)
    keep = []
    total = 0
    t1 = ThetaRegion(alpha, c1)
    t2 = ThetaRegion(alpha, r / alpha) if r > 0 else None
    while total < count:
        m = 2 * (count - total) + 16
        w = rng.uniform(0.0, 1.0 / alpha, m) + 1j * rng.uniform(lo_im, hi_im, m)
        ok = t1.contains(w)
        if t2 is not None:
            ok &= t2.contains(w)
        w = w[ok]
        keep.append(w)
        total += w.size
    return np.concatenate(keep)[:count]


class LiftedMap:
    """The lift ``F`` of ``h`` under ``tau`` with the principal logarithm."""

    def __init__(self, h, covering: Covering | None = None):
        self.map = h
        self.cov = covering if covering is not None else Covering(h)
        self.alpha = self.cov.alpha
        self.sigma = self.cov.sigma
        self.lam = np.exp(2j * math.pi * self.alpha)
        self._u0 = complex(np.asarray(h.u_factor(np.zeros(1))[0])[0])

    def _g_terms(self, z):
        """``G/lambda - 1`` and the first two z-derivatives of ``log G``."""
        sig = self.sigma
        u, du, ddu = self.map.u_factor(z)
        n1 = 1.0 + (z - sig) * u
        d1 = 1.0 + z * u
        if np.all(ddu == 0):
            drop = -z * du  # u(0) - u(z) for linear u
        else:
            drop = self._u0 - u
        # 1 - lambda = sigma u(0), hence G - lambda = sigma (u(0) - u + z u u(0)) / (1 + z u)
        g_minus = sig * (drop + z * u * self._u0) / d1
        rel = g_minus / self.lam
        n1p = u + (z - sig) * du
        d1p = u + z * du
        n1pp = 2.0 * du + (z - sig) * ddu
        d1pp = 2.0 * du + z * ddu
        lg1 = n1p / n1 - d1p / d1
        lg2 = n1pp / n1 - (n1p / n1) ** 2 - d1pp / d1 + (d1p / d1) ** 2
        return rel, lg1, lg2, n1 / d1

    def _prepare(self, w):
        w = _arr(w)
        z = self.cov.value(w)
        bad = ~np.isfinite(z) | ~np.asarray(self.map.in_domain(z))
        z = np.where(bad, np.nan, z)
        return w, z, bad

    def defect(self, w):
        """``F(w) - w - 1`` computed without cancellation."""
        w, z, bad = self._prepare(w)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel, _, _, g = self._g_terms(z)
            d = np.log1p(rel) / (2j * math.pi * self.alpha)
            cut = (g.real <= 0) & (np.abs(g.imag) < 1e-300)
            # principal Log G equals 2 pi i alpha + log(G/lambda) unless the
            # argument wrapped past the cut
            wrap = np.abs(np.angle(g) - (2 * math.pi * self.alpha + np.angle(1.0 + rel))) > 1e-9
        d = np.where(bad | cut | wrap, np.nan, d)
        if _is_scalar(w):
            if bad:
                raise OutOfDomain(complex(w), "tau(w) outside the domain of h")
            if not np.isfinite(d):
                raise BranchError(f"log argument on the cut at w={complex(w)!r}")
            return complex(d)
        return d

    def value(self, w):
        d = self.defect(w)
        return _arr(w) + 1.0 + d if not _is_scalar(w) else complex(w) + 1.0 + d

    __call__ = value

    def deriv_defect(self, w):
        """``F'(w) - 1``."""
        w, z, bad = self._prepare(w)
        with np.errstate(invalid="ignore", divide="ignore"):
            _, lg1, _, _ = self._g_terms(z)
            v = lg1 * self.cov.deriv(w) / (2j * math.pi * self.alpha)
        v = np.where(bad, np.nan, v)
        return complex(v) if _is_scalar(w) else v

    def deriv(self, w):
        return 1.0 + self.deriv_defect(w)

    def second(self, w):
        """``F''(w)`` by differentiating the closed form twice."""
        w, z, bad = self._prepare(w)
        with np.errstate(invalid="ignore", divide="ignore"):
            _, lg1, lg2, _ = self._g_terms(z)
            t1 = self.cov.deriv(w)
            t2 = self.cov.second(w)
            v = (lg2 * t1 ** 2 + lg1 * t2) / (2j * math.pi * self.alpha)
        v = np.where(bad, np.nan, v)
        return complex(v) if _is_scalar(w) else v

    def inverse(self, target, guess=None, maxit: int = 60):
        """Solve ``F(v) = target`` by Newton iteration on the defect."""
        target = _arr(target)
        v = target - 1.0 if guess is None else _arr(guess).copy()
        for _ in range(maxit):
            step = (v + 1.0 + self.defect(v) - target) / self.deriv(v)
            v = v - step
            if np.all(~np.isfinite(step) | (np.abs(step) <= 1e-15 * (1 + np.abs(v)))):
                break
        return v

    def critical_lift(self) -> complex:
        """The lift of the critical point of ``h`` nearest 0."""
        half = 0.5 / self.alpha
        return complex(self.cov.inverse(complex(self.map.critical_point), -half, half))


def lifted_value(F: LiftedMap, w):
    return F.value(w)


def exp_projection(zeta):
    """``Exp(zeta) = -(4/27) conj(e^{2 pi i zeta})``."""
    zeta = _arr(zeta)
    v = CV * np.conj(np.exp(2j * math.pi * zeta))
    return complex(v) if np.ndim(zeta) == 0 else v


def log_branch(z, re_window):
    """The preimage of ``z`` under ``Exp`` with real part in ``re_window``."""
    lo, hi = re_window
    z = _arr(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta0 = np.log(np.conj(-6.75 * z)) / (2j * math.pi)
        zeta = zeta0 + np.ceil(lo - zeta0.real)
        # rounding can put the shifted value on the upper edge
        edge = (zeta.real >= hi) & (zeta.real - 1.0 >= lo)
        zeta = np.where(edge, zeta - 1.0, zeta)
    ok = (zeta.real < hi) & (z != 0) & np.isfinite(zeta)
    if np.ndim(z) == 0:
        if z == 0:
            raise OutOfDomain(0j, "Exp never vanishes")
        if not ok:
            raise BranchError(f"no log branch of {complex(z)!r} in {re_window}")
        return complex(zeta)
    return np.where(ok, zeta, np.nan)


@dataclass
class CylCondReport:
    alpha: float
    r: float
    c1: float
    n_samples: int
    max_defect: float
    max_deriv_defect: float
    slope: float
    expected_slope: float
    slope_rel_error: float
    c2: float
    c3: float
    first_exit_index: int
    inconclusive: bool

    @property
    def bounds_hold(self) -> bool:
        return self.max_defect < 0.25 and self.max_deriv_defect < 0.25


def cylcond_check(F: LiftedMap, samples, r: float, c1: float = 3.0,
                  drift_steps: int | None = None) -> CylCondReport:
    """Fit the cylinder-condition quantities of ``F`` on ``samples``.

    Reports the worst values of ``|F(w) - w - 1|`` and ``|F'(w) - 1|``, the
    least-squares slope of ``log|F(w) - w - 1|`` against ``Im w``, the
    constant ``C2`` with ``|F(w) - w - 1| <= C2 (alpha/r) e^{-2 pi alpha Im w}``
    on the samples, and the critical-orbit drift constant ``C3``.
    """
    a = F.alpha
    w = _arr(samples).ravel()
    d = np.abs(F.defect(w))
    dd = np.abs(F.deriv_defect(w))
    ok = np.isfinite(d) & np.isfinite(dd)
    w, d, dd = w[ok], d[ok], dd[ok]
    pos = d > 1e-300
    y = w.imag[pos]
    logd = np.log(d[pos])
    inconclusive = bool(np.all(d < 1e-14)) or y.size < 3 or np.ptp(y) == 0
    slope = math.nan if inconclusive else float(np.polyfit(y, logd, 1)[0])
    c2 = float(np.max(d * (r / a) * np.exp(TWO_PI * a * w.imag))) if d.size else math.nan

    # critical-orbit drift
    wc = F.critical_lift()
    steps = drift_steps
    theta = ThetaRegion(a, c1)
    first_exit = 0
    orbit = [wc]
    v = wc
    if steps is None:
        steps = int(round(2.0 / (3.0 * a)))
    j = 0
    while j < steps + first_exit:
        v = complex(F.value(v))
        j += 1
        orbit.append(v)
        if first_exit == 0 and theta.contains(v):
            first_exit = j
        if j > 10 * steps:
            break
    orbit = np.array(orbit)
    js = np.arange(1, orbit.size)
    drift = np.abs(orbit[1:] - wc - js)
    c3 = float(np.max(drift / (1.0 + np.log(js))))
    expected = -TWO_PI * a
    rel = abs(slope - expected) / abs(expected) if not inconclusive else math.nan
    return CylCondReport(a, r, c1, int(w.size), float(d.max()), float(dd.max()), slope,
                         expected, rel, c2, c3, first_exit, inconclusive)


def c1_probe(alpha: float, c1: float, n_probe: int, rng: np.random.Generator) -> np.ndarray:
    """Probe set for the quarter bounds at a given ``C1``.

    Half of the probe is uniform over ``|Im(alpha w)| < 5`` and half is
    concentrated in the annulus ``C1 <= |w| <= C1 + 5`` about the pole, where
    the bounds are tightest.
    """
    half = n_probe // 2
    w1 = theta_samples(alpha, half, rng, c1=c1)
    rad = rng.uniform(c1, c1 + 5.0, n_probe - half)
    ang = rng.uniform(0, TWO_PI, n_probe - half)
    return np.concatenate([w1, rad * np.exp(1j * ang)])


def refine_c1(F: LiftedMap, start: float = 3.0, n_probe: int = 10_000, seed: int = 0,
              step: float = 0.5, max_c1: float = 40.0) -> float:
    """Smallest ``C1`` on the grid ``start + k*step`` for which both quarter
    bounds hold on :func:`c1_probe`; one generator seeded with ``seed``
    feeds the successive probes.
    """
    rng = np.random.default_rng(seed)
    a = F.alpha
    c1 = start
    while c1 <= max_c1:
        w = c1_probe(a, c1, n_probe, rng)
        d = np.abs(F.defect(w))
        dd = np.abs(F.deriv_defect(w))
        if np.all(np.isfinite(d)) and d.max() < 0.25 and dd.max() < 0.25:
            return c1
        c1 += step
    raise ValueError(f"no C1 up to {max_c1} satisfies the quarter bounds")
