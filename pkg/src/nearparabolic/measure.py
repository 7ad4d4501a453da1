"""Orbit clouds, box covers, porosity probes and region shadows.

All planar grids live on the fixed square ``[-2, 2]^2``. A box of scale
``eps`` is indexed by ``(floor((x + 2) / eps), floor((y + 2) / eps))``;
pixel masks use the same indexing with row 0 at the top (largest imaginary
part) when written to disk.
"""

from __future__ import annotations

import cmath
import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from .errors import ConfigError, OutOfDomain
from .geometry import close_polyline, distance_to_polyline, points_in_polygon
from .maps import ESCAPE_RADIUS, QuadraticMap
from .renorm import psi_map

__all__ = [
    "OrbitCloud",
    "BoxGrid",
    "PorosityReport",
    "SiegelStandIn",
    "OmegaShadow",
    "QRegion",
    "postcritical_cloud",
    "box_grid",
    "box_area",
    "porosity_probe",
    "siegel_stand_in",
    "porosity_experiment",
    "julia_sample",
    "forward_tail",
    "limit_set_distance",
    "typical_orbit_statistic",
    "omega_shadow",
    "nesting_check",
    "containment_fraction",
    "q_region",
    "eccentricity",
    "write_points_csv",
    "write_report_json",
    "write_pgm",
    "read_pgm",
    "mask_to_pgm_bytes",
]

BOX_LO = -2.0
BOX_SIDE = 4.0


def _arr(z):
    return np.asarray(z, dtype=complex)


def _angle_value(alpha) -> float:
    return float(getattr(alpha, "value", alpha))


def _check_dyadic(eps, lo_exp=2, hi_exp=14):
    m = -math.log2(eps)
    if abs(m - round(m)) > 1e-12 or not lo_exp <= round(m) <= hi_exp:
        raise ConfigError(f"eps={eps} is not 2^-m with {lo_exp} <= m <= {hi_exp}")
    return int(round(m))


# ------------------------------------------------------------------ clouds
@dataclass
class OrbitCloud:
    points: np.ndarray
    source: str
    params: dict = field(default_factory=dict)
    escaped: bool = False
    jitter_count: int = 0

    def __len__(self):
        return int(self.points.size)

    def recurrence_residual(self, alpha=None) -> float:
        """``max |P(p_j) - p_{j+1}|`` over consecutive points."""
        a = _angle_value(self.params["alpha"] if alpha is None else alpha)
        p = self.points
        if p.size < 2:
            return 0.0
        return float(np.max(np.abs(QuadraticMap(a)(p[:-1]) - p[1:])))


def postcritical_cloud(alpha, n_iter: int) -> OrbitCloud:
    """The first ``n_iter`` points of the critical-value orbit of ``P_alpha``.

    An orbit leaving the disk of radius 10 is truncated and flagged.
    """
    if n_iter < 1:
        raise ConfigError("n_iter must be at least 1")
    a = _angle_value(alpha)
    lam = cmath.exp(2j * math.pi * a)
    z = -lam * lam / 4.0
    pts = np.empty(n_iter, dtype=complex)
    escaped = False
    count = n_iter
    for j in range(n_iter):
        if not cmath.isfinite(z) or abs(z) > ESCAPE_RADIUS:
            escaped, count = True, j
            break
        pts[j] = z
        z = z * (lam + z)
    return OrbitCloud(pts[:count], "post-critical", {"alpha": a, "n_iter": n_iter}, escaped)


# -------------------------------------------------------------- box covers
@dataclass
class BoxGrid:
    eps: float
    keys: np.ndarray  # sorted unique linear indices of occupied boxes

    @property
    def count(self) -> int:
        return int(self.keys.size)

    @property
    def side(self) -> int:
        return int(round(BOX_SIDE / self.eps))

    def centers(self) -> np.ndarray:
        ix, iy = np.divmod(self.keys, self.side)
        return (BOX_LO + (ix + 0.5) * self.eps) + 1j * (BOX_LO + (iy + 0.5) * self.eps)

    def contains(self, z) -> np.ndarray:
        k = _box_keys(_arr(z).ravel(), self.eps)
        hit = np.isin(k, self.keys)
        return hit.reshape(np.shape(z))


def _box_index(z, eps):
    z = _arr(z)
    n = int(round(BOX_SIDE / eps))
    ix = np.clip(np.floor((z.real - BOX_LO) / eps), 0, n - 1).astype(np.int64)
    iy = np.clip(np.floor((z.imag - BOX_LO) / eps), 0, n - 1).astype(np.int64)
    return ix, iy


def _box_keys(z, eps):
    n = int(round(BOX_SIDE / eps))
    ix, iy = _box_index(z, eps)
    return ix * n + iy


def box_grid(cloud, eps: float) -> BoxGrid:
    _check_dyadic(eps)
    pts = cloud.points if isinstance(cloud, OrbitCloud) else _arr(cloud).ravel()
    pts = pts[np.isfinite(pts)]
    return BoxGrid(eps, np.unique(_box_keys(pts, eps)))


def box_area(cloud, eps: float) -> float:
    """Area ``N_eps * eps^2`` of the ``eps``-box cover of the cloud."""
    return box_grid(cloud, eps).count * eps * eps


# ---------------------------------------------------------------- porosity
@dataclass
class PorosityReport:
    z: complex
    scales: list
    centers: list
    ratios: list
    resolution: float

    def witness_scales(self, lam: float = 0.05) -> int:
        return int(sum(r >= lam for r in self.ratios))


def _cloud_tree(cloud):
    pts = cloud.points if isinstance(cloud, OrbitCloud) else _arr(cloud).ravel()
    pts = pts[np.isfinite(pts)]
    return cKDTree(np.column_stack([pts.real, pts.imag]))


def porosity_probe(z, cloud, scales, resolution: float | None = None,
                   n_angles: int = 16, n_radii: int = 8, tree=None) -> PorosityReport:
    """Largest hole ratio inside ``B(z, r)`` for each ``r`` in ``scales``.

    Candidate centers sit on a polar grid around ``z``; the hole at a center
    is the largest ball inside ``B(z, r)`` avoiding the cloud fattened by
    ``resolution`` (default: ``2^-12``).
    """
    z = complex(z)
    res = 2.0 ** -12 if resolution is None else resolution
    tree = _cloud_tree(cloud) if tree is None else tree
    theta = 2 * math.pi * np.arange(n_angles) / n_angles
    out_c, out_l = [], []
    for r in scales:
        rad = r * np.arange(n_radii) / n_radii
        cand = z + (rad[:, None] * np.exp(1j * theta)[None, :]).ravel()
        cand = np.unique(cand)
        dist, _ = tree.query(np.column_stack([cand.real, cand.imag]))
        hole = np.minimum(dist - res, r - np.abs(cand - z))
        i = int(np.argmax(hole))
        lam = max(float(hole[i]) / r, 0.0)
        out_c.append(complex(cand[i]) if lam > 0 else None)
        out_l.append(lam)
    return PorosityReport(z, list(scales), out_c, out_l, res)


@dataclass
class SiegelStandIn:
    """Star-shaped region about 0 swept by nearly round orbits.

    ``radii[j]`` is the largest tested radius on ray ``j`` before the
    first start point whose orbit fails the averaging test.
    """

    angles: np.ndarray
    radii: np.ndarray
    tol: float
    n_iter: int

    def boundary(self) -> np.ndarray:
        return close_polyline(self.radii * np.exp(1j * self.angles))

    def distance(self, z) -> np.ndarray:
        """Distance to the region; zero inside."""
        z = _arr(z)
        poly = self.boundary()
        d = distance_to_polyline(z, poly)
        return np.where(points_in_polygon(z, poly), 0.0, d)


def siegel_stand_in(alpha, n_rays: int = 64, n_radii: int = 80, r_max: float = 1.0,
                    tol: float = 1e-3, n_iter: int = 10_000) -> SiegelStandIn:
    """Heuristic delimitation of the Siegel disk of ``P_alpha``.

    A start point passes when its orbit stays bounded and the running
    average of its modulus over the two halves of the orbit agrees to
    ``tol``. On each ray the region extends to the last radius of the
    initial run of passes.
    """
    P = QuadraticMap(_angle_value(alpha))
    ang = 2 * math.pi * np.arange(n_rays) / n_rays
    rad = r_max * np.arange(1, n_radii + 1) / n_radii
    z = (rad[:, None] * np.exp(1j * ang)[None, :]).ravel()
    half = n_iter // 2
    first = np.zeros(z.size)
    second = np.zeros(z.size)
    with np.errstate(all="ignore"):
        for j in range(2 * half):
            m = np.abs(z)
            if j < half:
                first += m
            else:
                second += m
            z = P(z)
            z[~np.isfinite(z) | (np.abs(z) > ESCAPE_RADIUS)] = np.nan
    ok = np.isfinite(second) & (np.abs(first - second) / half <= tol)
    ok = ok.reshape(n_radii, n_rays)
    first_bad = np.where(ok.all(axis=0), n_radii, np.argmin(ok, axis=0))
    radii = np.where(first_bad > 0, rad[np.maximum(first_bad - 1, 0)], 0.0)
    return SiegelStandIn(ang, radii, tol, n_iter)


def porosity_experiment(cloud: OrbitCloud, stand_in: SiegelStandIn, n_probes: int = 20,
                        scales=None, min_distance: float = 0.05, seed: int = 0,
                        resolution: float | None = None):
    """Probe cloud points at least ``min_distance`` from the stand-in region."""
    scales = [2.0 ** -m for m in range(3, 9)] if scales is None else list(scales)
    pts = cloud.points
    far = pts[stand_in.distance(pts) > min_distance]
    if far.size < n_probes:
        raise ConfigError(f"only {far.size} cloud points lie off the Siegel stand-in")
    rng = np.random.default_rng(seed)
    probes = far[np.sort(rng.choice(far.size, n_probes, replace=False))]
    tree = _cloud_tree(cloud)
    return [porosity_probe(p, cloud, scales, resolution, tree=tree) for p in probes]


# ---------------------------------------------------------- julia samples
def julia_sample(alpha, count: int, seed: int, burn_in: int = 50) -> OrbitCloud:
    """Backward-iteration sample of the Julia set with random branches.

    Chains start on the circle of radius 2 at seeded random angles.
    Preimages of the critical value are jittered by ``1e-15`` to keep the
    square root off its branch point.
    """
    if count < 1:
        raise ConfigError("count must be at least 1")
    a = _angle_value(alpha)
    P = QuadraticMap(a)
    rng = np.random.default_rng(seed)
    z = 2.0 * np.exp(2j * math.pi * rng.random(count))
    cv = P.critical_value
    jitter = 0
    for _ in range(burn_in):
        at_cv = z == cv
        if at_cv.any():
            jitter += int(at_cv.sum())
            z = np.where(at_cv, z + 1e-15, z)
        big, small = P.preimages(z)
        z = np.where(rng.random(count) < 0.5, big, small)
    return OrbitCloud(z, "julia-sample", {"alpha": a, "count": count, "seed": seed,
                                          "burn_in": burn_in}, False, jitter)


def forward_tail(alpha, starts, n_iter: int):
    """Last half of the forward orbits of ``starts``; rows are time steps.

    Returns ``(tail, escaped)``. Escaped orbits are NaN from the escape on.
    """
    P = QuadraticMap(_angle_value(alpha))
    z = _arr(starts).ravel().copy()
    keep_from = n_iter - n_iter // 2
    tail = np.empty((n_iter // 2, z.size), dtype=complex)
    escaped = np.zeros(z.size, dtype=bool)
    with np.errstate(all="ignore"):
        for j in range(n_iter):
            z = P(z)
            out = ~np.isfinite(z) | (np.abs(z) > ESCAPE_RADIUS)
            escaped |= out
            z[escaped] = np.nan
            if j >= keep_from:
                tail[j - keep_from] = z
    return tail, escaped


def limit_set_distance(orbit_tail, target, eps: float):
    """``(d1, d2)`` between an orbit tail and the box cover of ``target``.

    ``d1`` is the largest distance from a target box center to the tail;
    ``d2`` the largest distance from a tail point to a target box center.
    A tail containing non-finite points gives ``inf`` for both.
    """
    tail = orbit_tail.points if isinstance(orbit_tail, OrbitCloud) else _arr(orbit_tail).ravel()
    if tail.size == 0:
        raise ConfigError("empty orbit tail")
    if not np.all(np.isfinite(tail)):
        return math.inf, math.inf
    centers = box_grid(target, eps).centers()
    c_xy = np.column_stack([centers.real, centers.imag])
    t_xy = np.column_stack([tail.real, tail.imag])
    d1 = float(np.max(cKDTree(t_xy).query(c_xy)[0]))
    d2 = float(np.max(cKDTree(c_xy).query(t_xy)[0]))
    return d1, d2


def typical_orbit_statistic(alpha, target: OrbitCloud, n_samples: int = 100,
                            n_iter: int = 100_000, eps: float = 2.0 ** -6, seed: int = 0):
    """Median ``(d1, d2)`` over forward tails of Julia samples."""
    starts = julia_sample(alpha, n_samples, seed)
    tail, escaped = forward_tail(alpha, starts.points, n_iter)
    d = np.array([limit_set_distance(tail[:, i], target, eps) for i in range(n_samples)])
    return {
        "median_d1": float(np.median(d[:, 0])),
        "median_d2": float(np.median(d[:, 1])),
        "escaped": int(escaped.sum()),
        "n_samples": n_samples,
        "eps": eps,
    }


# ---------------------------------------------------------- region shadows
@dataclass
class OmegaShadow:
    """Box mask (scale ``eps`` on ``[-2, 2]^2``) of a union of forward images."""

    level: int
    eps: float
    hits: np.ndarray  # boolean, indexed [ix, iy]
    filled: np.ndarray
    n_iterates: int
    n_seeds: int
    escaped: int

    def contains(self, z) -> np.ndarray:
        z = _arr(z)
        ix, iy = _box_index(z, self.eps)
        inside = (np.abs(z.real) < 2) & (np.abs(z.imag) < 2)
        return inside & self.filled[ix, iy]

    def boundary_distance(self) -> np.ndarray:
        """Signed distance of every box center to the region's edge."""
        inner = ndimage.distance_transform_edt(self.filled)
        outer = ndimage.distance_transform_edt(~self.filled)
        return (inner - outer) * self.eps


def _sector_seeds(level, spacing: float, refine: int, im_cap: float | None):
    """Dynamical-plane seeds filling the sampled sector of ``level``.

    The chart inverse is evaluated on a rectangle of the given ``spacing``
    covering the sector hull, then interpolated onto a grid ``refine``
    times finer; only fine points inside the hull are kept.
    """
    sectors = level.sectors
    pts = np.concatenate([sectors.csharp_phi, sectors.c_phi])
    lo_r, hi_r = pts.real.min(), pts.real.max()
    lo_i, hi_i = pts.imag.min(), pts.imag.max()
    if im_cap is not None:
        hi_i = min(hi_i, im_cap)
    re = np.arange(lo_r - spacing, hi_r + 2 * spacing, spacing)
    im = np.arange(lo_i - spacing, hi_i + 2 * spacing, spacing)
    grid = re[None, :] + 1j * im[:, None]
    w, res = level.chart.inverse(grid.ravel())
    w = np.where(res <= level.chart.inv_tol, w, np.nan).reshape(grid.shape)
    fine_re = np.arange(re[0], re[-1], spacing / refine)
    fine_im = np.arange(im[0], im[-1], spacing / refine)
    interp = [RegularGridInterpolator((im, re), part, method="cubic")
              for part in (w.real, w.imag)]
    fim, fre = np.meshgrid(fine_im, fine_re, indexing="ij")
    xy = np.column_stack([fim.ravel(), fre.ravel()])
    fine_w = interp[0](xy) + 1j * interp[1](xy)
    zeta = fre.ravel() + 1j * fim.ravel()
    keep = sectors.hull_contains(zeta) & (zeta.imag <= hi_i) & np.isfinite(fine_w)
    return fine_w[keep]


def omega_shadow(levels, n: int, eps: float = 2.0 ** -8, spacing: float = 0.05,
                 refine: int = 5, im_cap: float | None = 20.0) -> OmegaShadow:
    """Forward images of the level-``n`` sector seen in the level-0 plane.

    The sector is seeded through its Fatou coordinate (see
    :func:`_sector_seeds`), carried to the level-0 plane (through ``Psi_n``
    when ``n > 0``) and iterated
    ``q_n (k_n + floor(1/alpha_n) - k_bold - 1) + q_{n-1}`` times under
    ``f_0``; every iterate marks its box.
    """
    _check_dyadic(eps)
    if n < 0 or n >= len(levels):
        raise ConfigError(f"level {n} not in the tower")
    lev = levels[n]
    if lev.sectors is None:
        raise ConfigError(f"level {n} carries no sector sample")
    w = _sector_seeds(lev, spacing, refine, im_cap)
    if w.size == 0:
        raise ConfigError(f"empty sector sample at level {n}")
    z = w if n == 0 else psi_map(levels, n, w)
    z = z[np.isfinite(z)]
    q_n, q_prev = _denominators(levels, n)
    consts = lev.chart.constants
    count = q_n * (lev.k + math.floor(1.0 / lev.alpha) - consts.k_bold - 1) + q_prev
    side = int(round(BOX_SIDE / eps))
    hits = np.zeros((side, side), dtype=bool)
    f0 = levels[0].map
    escaped = np.zeros(z.size, dtype=bool)
    with np.errstate(all="ignore"):
        for j in range(count + 1):
            live = ~escaped
            ix, iy = _box_index(z[live], eps)
            hits[ix, iy] = True
            if j < count:
                z = f0(z)
                escaped |= ~np.isfinite(z) | (np.abs(z) >= 2.0)
    filled = ndimage.binary_fill_holes(hits)
    return OmegaShadow(n, eps, hits, filled, count, int(z.size), int(escaped.sum()))


def _denominators(levels, n):
    """``(q_n, q_{n-1})`` of the level-0 rotation number."""
    if n == 0:
        return 1, 0
    qs = [0, 1]
    x = levels[0].alpha
    for _ in range(n):
        a = math.floor(1.0 / x)
        qs.append(a * qs[-1] + qs[-2])
        x = 1.0 / x - a
    return qs[-1], qs[-2]


def nesting_check(outer: OmegaShadow, inner: OmegaShadow) -> float:
    """Smallest signed distance from ``inner`` boxes to the edge of ``outer``.

    Positive when every box of ``inner`` lies inside ``outer`` at least one
    box away from its edge; measured in the plane's units.
    """
    if outer.eps != inner.eps:
        raise ConfigError("shadows must share the box scale")
    if not inner.filled.any():
        raise ConfigError("empty inner shadow")
    d = outer.boundary_distance()
    return float(d[inner.filled].min() - outer.eps)


def containment_fraction(shadow: OmegaShadow, points) -> float:
    pts = _arr(points).ravel()
    return float(np.mean(shadow.contains(pts)))


# ------------------------------------------------------------- eccentricity
def eccentricity(region_sample, q) -> float:
    """Circumradius over inradius of a sampled closed boundary seen from ``q``.

    Raises
    ------
    OutOfDomain
        If ``q`` is not inside the sampled boundary.
    """
    poly = close_polyline(region_sample)
    q = complex(q)
    if not bool(points_in_polygon(np.array([q]), poly)[0]):
        raise OutOfDomain(q, "center outside the sampled region")
    outer = float(np.max(np.abs(poly - q)))
    inner = float(distance_to_polyline(np.array([q]), poly)[0])
    return outer / inner


@dataclass
class QRegion:
    level: int
    boundary: np.ndarray
    tau: int
    eccentricity: float


def _densify(poly, factor: int):
    poly = close_polyline(poly)
    t = np.arange(factor) / factor
    seg = poly[:-1, None] + (poly[1:] - poly[:-1])[:, None] * t[None, :]
    return np.append(seg.ravel(), poly[-1])


def q_region(levels, n: int, tau_max: int = 10_000, densify: int = 4,
             margin: float = 1e-6) -> QRegion:
    """Forward image of the pulled-back ``C`` piece that first surrounds cp
    with clearance ``margin``.

    The boundary of ``C^{-k_n}`` at level ``n`` is carried to the level-0
    plane (through ``Psi_n`` when ``n > 0``) and iterated under ``f_0``
    until the critical point falls inside it.
    """
    lev = levels[n]
    if lev.sectors is None:
        raise ConfigError(f"level {n} carries no sector sample")
    w = _densify(lev.sectors.c, densify)
    z = w if n == 0 else psi_map(levels, n, w)
    if not np.all(np.isfinite(z)):
        raise ConfigError(f"boundary of the level-{n} piece left the chart")
    f0 = levels[0].map
    cp = complex(f0.critical_point)
    for tau in range(1, tau_max + 1):
        z = f0(z)
        if (bool(points_in_polygon(np.array([cp]), z)[0])
                and distance_to_polyline(np.array([cp]), close_polyline(z))[0] > margin):
            return QRegion(n, z, tau, eccentricity(z, cp))
    raise ConfigError(f"critical point not surrounded within {tau_max} iterates")


# --------------------------------------------------------------- exporters
def write_points_csv(path, cloud) -> None:
    pts = cloud.points if isinstance(cloud, OrbitCloud) else _arr(cloud).ravel()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "re", "im"])
        for i, p in enumerate(pts):
            wr.writerow([i, repr(float(p.real)), repr(float(p.imag))])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def write_report_json(path, report: dict) -> str:
    """Write ``report`` with sorted keys; returns the text written."""
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def mask_to_pgm_bytes(field_or_mask) -> bytes:
    """Binary 8-bit PGM of an ``[ix, iy]``-indexed array, top row = max Im."""
    a = np.asarray(field_or_mask)
    if a.dtype == bool:
        img = np.where(a, 255, 0).astype(np.uint8)
    else:
        a = a.astype(float)
        fin = np.isfinite(a)
        lo = float(a[fin].min()) if fin.any() else 0.0
        hi = float(a[fin].max()) if fin.any() else 1.0
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        img = np.where(fin, np.round((a - lo) * scale), 0).astype(np.uint8)
    rows = img.T[::-1]  # rows run over iy from the top
    h, w = rows.shape
    return f"P5\n{w} {h}\n255\n".encode() + rows.tobytes()


def write_pgm(path, field_or_mask) -> None:
    with open(path, "wb") as fh:
        fh.write(mask_to_pgm_bytes(field_or_mask))


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm` returning the ``[ix, iy]``-indexed bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, size, maxval, body = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit binary PGM")
    w, h = (int(v) for v in size.split())
    rows = np.frombuffer(body[: w * h], dtype=np.uint8).reshape(h, w)
    return rows[::-1].T.copy()


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
