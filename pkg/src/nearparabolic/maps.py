"""Quadratic and cubic maps, the domains U and V, and their fixed-point data.

Every map object is callable on scalars or numpy arrays and returns NaN at
points outside its domain; the module-level :func:`evaluate` and
:func:`derivative` are the strict scalar entry points that raise
:class:`OutOfDomain` instead.

Besides value and derivative, maps expose the factor ``u`` of
``h(z) - z = z (z - sigma) u(z)`` together with its first two derivatives,
because the lifted map is written in terms of it.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import NoSigmaError, OutOfDomain

__all__ = [
    "QuadraticMap",
    "ModelCubic",
    "CanonicalISMap",
    "DomainU",
    "DomainV",
    "evaluate",
    "derivative",
    "sigma_fixed_point",
    "critical_orbit",
    "in_domain",
    "newton_fixed_point",
    "newton_preimage",
    "ESCAPE_RADIUS",
]

ESCAPE_RADIUS = 10.0
CV_CUBIC = -4.0 / 27.0


def _arr(z):
    return np.asarray(z, dtype=complex)


def _out(x, like):
    return complex(x) if np.ndim(like) == 0 else x


def newton_preimage(h, dh, target, guess, maxit: int = 60, tol: float = 1e-15):
    """Vectorized Newton solve of ``h(x) = target`` started at ``guess``.

    Steps are capped so that a single iteration never moves farther than
    the distance between the guess and the target scale; this keeps the
    iteration on the branch suggested by ``guess``.
    """
    target = _arr(target)
    guess = _arr(guess)
    shape = np.broadcast_shapes(guess.shape, target.shape)
    x = np.broadcast_to(guess, shape).reshape(-1).copy()
    target = np.broadcast_to(target, shape).reshape(-1)
    active = np.isfinite(x) & np.isfinite(target)
    for _ in range(maxit):
        if not active.any():
            break
        xa = x[active]
        f = h(xa) - target[active]
        d = dh(xa)
        step = f / d
        big = np.abs(step) > 0.5 * (np.abs(xa) + 0.1)
        step[big] *= 0.5 * (np.abs(xa[big]) + 0.1) / np.abs(step[big])
        xn = xa - step
        x[active] = xn
        done = np.abs(step) <= tol * (1.0 + np.abs(xn))
        idx = np.flatnonzero(active)
        active[idx[done | ~np.isfinite(xn)]] = False
    return x.reshape(shape)


class QuadraticMap:
    """``P_alpha(z) = e^{2 pi i alpha} z + z^2``."""

    kind = "quadratic"

    def __init__(self, alpha: float):
        if not 0 < alpha < 1:
            raise ValueError(f"alpha={alpha} not in (0, 1)")
        self.alpha = float(alpha)
        self.multiplier = cmath.exp(2j * math.pi * self.alpha)

    def __repr__(self):
        return f"QuadraticMap(alpha={self.alpha!r})"

    def __call__(self, z):
        z = _arr(z)
        return _out(z * (self.multiplier + z), z)

    def deriv(self, z):
        z = _arr(z)
        return _out(self.multiplier + 2.0 * z, z)

    def second_derivative_at_zero(self) -> complex:
        return 2.0 + 0j

    def in_domain(self, z):
        return np.isfinite(_arr(z))

    @property
    def critical_point(self) -> complex:
        return -self.multiplier / 2.0

    @property
    def critical_value(self) -> complex:
        return -self.multiplier ** 2 / 4.0

    @property
    def sigma(self) -> complex:
        return 1.0 - self.multiplier

    def u_factor(self, z):
        """``u`` with derivatives; identically 1 for this family."""
        z = _arr(z)
        one = np.ones_like(z)
        return one, 0.0 * one, 0.0 * one

    def preimages(self, y):
        """Both roots of ``x^2 + lambda x = y``, larger one first."""
        y = _arr(y)
        lam = self.multiplier
        s = np.sqrt(lam * lam + 4.0 * y)
        s = np.where(np.real(np.conj(lam) * s) >= 0, s, -s)
        big = (-lam - s) / 2.0
        small = np.where(big != 0, -y / np.where(big != 0, big, 1.0), -lam / 2.0)
        return big, small

    def preimage_near(self, y, guess):
        big, small = self.preimages(y)
        g = _arr(guess)
        pick = np.abs(big - g) < np.abs(small - g)
        v = np.where(pick, big, small)
        return complex(v) if np.ndim(y) == 0 and np.ndim(guess) == 0 else v


class ModelCubic:
    """The fixed cubic ``P(z) = z (1 + z)^2``."""

    critical_point = -1.0 / 3.0
    critical_value = CV_CUBIC

    def __call__(self, z):
        z = _arr(z)
        return _out(z * (1.0 + z) ** 2, z)

    def deriv(self, z):
        z = _arr(z)
        return _out((1.0 + z) * (1.0 + 3.0 * z), z)


class DomainU:
    """``U = g(C-hat minus E)`` with ``g(z) = -4z / (1+z)^2``.

    ``E`` is the closed ellipse ``((x + 0.18)/1.24)^2 + (y/1.04)^2 <= 1``.
    """

    center = -0.18
    semi_x = 1.24
    semi_y = 1.04
    ambiguity_band = 1e-9

    @staticmethod
    def g(w):
        w = _arr(w)
        return _out(-4.0 * w / (1.0 + w) ** 2, w)

    def ellipse_value(self, w):
        w = _arr(w)
        return ((w.real - self.center) / self.semi_x) ** 2 + (w.imag / self.semi_y) ** 2

    def g_preimages(self, z):
        """The two ``g``-preimages ``w`` and ``1/w`` of ``z``, outer one first."""
        z = _arr(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sqrt(1.0 + z)
            a = -(z + 2.0) - 2.0 * s
            b = -(z + 2.0) + 2.0 * s
            num = np.where(np.abs(a) >= np.abs(b), a, b)
            outer = num / z
            inner = 1.0 / outer
        return outer, inner

    def margin(self, z):
        """Signed membership margin: positive inside ``U``, negative outside.

        It is the largest ellipse value minus one over the two preimages;
        ``z = 0`` has the preimage at infinity and gets ``+inf``.
        """
        z = _arr(z)
        outer, inner = self.g_preimages(z)
        with np.errstate(invalid="ignore", over="ignore"):
            m = np.maximum(self.ellipse_value(outer), self.ellipse_value(inner)) - 1.0
        m = np.where(z == 0, np.inf, m)
        m = np.where(np.isfinite(z), m, np.nan)
        return m if np.ndim(z) else float(m)

    def contains(self, z):
        with np.errstate(invalid="ignore"):
            return np.asarray(self.margin(z)) > 0

    def is_ambiguous(self, z):
        return np.abs(np.asarray(self.margin(z))) < self.ambiguity_band

    def boundary(self, n: int = 512):
        """Sample of ``g(boundary of E)``, which contains the boundary of ``U``."""
        th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        w = self.center + self.semi_x * np.cos(th) + 1j * self.semi_y * np.sin(th)
        return self.g(w)


class DomainV:
    """``V = P^{-1}(B(0, R)) minus ((-inf, -1] union B)``, ``R = (4/27) e^{4 pi}``.

    The component ``B`` of ``P^{-1}(B(0, r))`` at ``-1`` (``r = (4/27) e^{-4 pi}``)
    is replaced by the smallest disk about ``-1`` containing it, found by
    solving ``|P(-1 + rho e^{i theta})| = r`` along 64 rays.
    """

    def __init__(self):
        self.outer_radius = (4.0 / 27.0) * math.exp(4 * math.pi)
        self.inner_radius = (4.0 / 27.0) * math.exp(-4 * math.pi)
        self.b_radius = self._b_disk_radius()

    def _b_disk_radius(self) -> float:
        P = ModelCubic()
        best = 0.0
        for th in np.linspace(0, 2 * np.pi, 64, endpoint=False):
            e = cmath.exp(1j * th)
            rho = math.sqrt(self.inner_radius)
            for _ in range(60):
                z = -1.0 + rho * e
                f = abs(P(z)) - self.inner_radius
                # d|P|/drho by the chain rule along the ray
                d = (np.conj(P(z)) * P.deriv(z) * e).real / max(abs(P(z)), 1e-300)
                step = f / d
                rho -= step
                if abs(step) < 1e-16 * rho:
                    break
            best = max(best, rho)
        return best

    def contains(self, z):
        z = _arr(z)
        P = ModelCubic()
        with np.errstate(over="ignore", invalid="ignore"):
            ok = np.abs(P(z)) < self.outer_radius
        on_ray = (z.imag == 0) & (z.real <= -1.0)
        return ok & ~on_ray & (np.abs(z + 1.0) > self.b_radius)


_U = DomainU()


class CanonicalISMap:
    """``h(z) = e^{2 pi i alpha} P(z)`` restricted to ``U``."""

    kind = "cubic"

    def __init__(self, alpha: float):
        if not 0 < alpha < 1:
            raise ValueError(f"alpha={alpha} not in (0, 1)")
        self.alpha = float(alpha)
        self.multiplier = cmath.exp(2j * math.pi * self.alpha)
        self.domain = _U
        self._sigma = None

    def __repr__(self):
        return f"CanonicalISMap(alpha={self.alpha!r})"

    def _raw(self, z):
        return self.multiplier * z * (1.0 + z) ** 2

    def __call__(self, z):
        z = _arr(z)
        v = np.where(self.domain.contains(z), self._raw(z), np.nan)
        return _out(v, z)

    def deriv(self, z):
        z = _arr(z)
        v = self.multiplier * (1.0 + z) * (1.0 + 3.0 * z)
        return _out(np.where(self.domain.contains(z), v, np.nan), z)

    def second_derivative_at_zero(self) -> complex:
        return 4.0 * self.multiplier

    def in_domain(self, z):
        return self.domain.contains(z)

    critical_point = -1.0 / 3.0

    @property
    def critical_value(self) -> complex:
        return CV_CUBIC * self.multiplier

    @property
    def sigma(self) -> complex:
        if self._sigma is None:
            self._sigma = sigma_fixed_point(self)
        return self._sigma

    def u_factor(self, z):
        # h(z) - z = z (z - sigma) u(z) with u(z) = lambda (z + 2 + sigma),
        # since the two non-zero fixed points sum to -2.
        z = _arr(z)
        lam = self.multiplier
        return lam * (z + 2.0 + self.sigma), lam * np.ones_like(z), 0.0 * z

    def preimage_near(self, y, guess):
        g = _arr(guess)
        x = newton_preimage(self._raw, lambda t: self.multiplier * (1 + t) * (1 + 3 * t), y, g)
        x = np.where(self.domain.contains(x), x, np.nan)
        return complex(x) if np.ndim(y) == 0 and np.ndim(guess) == 0 else x


def evaluate(h, z):
    """Strict scalar evaluation raising :class:`OutOfDomain`."""
    v = h(z)
    if not np.all(np.isfinite(v)):
        raise OutOfDomain(z)
    return v


def derivative(h, z):
    v = h.deriv(z)
    if not np.all(np.isfinite(v)):
        raise OutOfDomain(z)
    return v


def newton_fixed_point(h, seed: complex, tol: float = 1e-12, maxit: int = 50) -> complex:
    """Newton iteration for ``h(z) = z`` from ``seed``."""
    z = complex(seed)
    for _ in range(maxit):
        f = complex(h(z)) - z
        d = complex(h.deriv(z)) - 1.0
        if not (cmath.isfinite(f) and cmath.isfinite(d)) or d == 0:
            break
        step = f / d
        z -= step
        if abs(step) <= 1e-15 * max(abs(z), 1e-300):
            break
    res = abs(complex(h(z)) - z) if cmath.isfinite(z) else math.inf
    if not res < tol:
        raise NoSigmaError(f"fixed-point residual {res:.3e} after {maxit} Newton steps")
    return z


def sigma_fixed_point(h) -> complex:
    """The non-zero fixed point of ``h`` nearest 0.

    Closed form ``1 - e^{2 pi i alpha}`` for the quadratic family; Newton
    iteration from the asymptotic seed ``-4 pi alpha i / h''(0)`` otherwise.
    """
    if isinstance(h, QuadraticMap):
        return h.sigma
    seed = -4j * math.pi * h.alpha / h.second_derivative_at_zero()
    return newton_fixed_point(h, seed)


def critical_orbit(h, n: int):
    """First ``n`` iterates ``h(cp), h^2(cp), ...`` of the critical point.

    Returns
    -------
    points : ndarray of complex
        The orbit, truncated at the first point with ``|z| > 10`` or outside
        the domain.
    escaped : bool
        Whether truncation happened.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    pts = np.empty(n, dtype=complex)
    z = complex(h.critical_point)
    for j in range(n):
        z = complex(h(z))
        if not cmath.isfinite(z) or abs(z) > ESCAPE_RADIUS:
            return pts[:j], True
        pts[j] = z
    return pts, False


def in_domain(domain, z):
    return domain.contains(z)
