"""Planar polygon utilities on complex coordinates."""

from __future__ import annotations

import numpy as np

__all__ = ["points_in_polygon", "distance_to_polyline", "close_polyline"]


def close_polyline(poly):
    poly = np.asarray(poly, dtype=complex)
    if poly.size and poly[0] != poly[-1]:
        poly = np.append(poly, poly[0])
    return poly


def points_in_polygon(points, poly, chunk: int = 4096) -> np.ndarray:
    """Even-odd rule membership of ``points`` in the closed polygon ``poly``."""
    pts = np.asarray(points, dtype=complex).ravel()
    poly = close_polyline(poly)
    inside = np.zeros(pts.shape, dtype=bool)
    if poly.size < 4:
        return inside.reshape(np.shape(points))
    a, b = poly[:-1][None, :], poly[1:][None, :]
    ay, by = a.imag, b.imag
    for s in range(0, pts.size, chunk):
        x, y = pts.real[s:s + chunk, None], pts.imag[s:s + chunk, None]
        crosses = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a.real + (y - ay) * (b.real - a.real) / (by - ay)
        hit = crosses & (x < xint)
        inside[s:s + chunk] = (np.count_nonzero(hit, axis=1) % 2) == 1
    return inside.reshape(np.shape(points))


def distance_to_polyline(points, poly, chunk: int = 2048) -> np.ndarray:
    """Euclidean distance from each point to the segments of ``poly``."""
    pts = np.asarray(points, dtype=complex).ravel()
    poly = np.asarray(poly, dtype=complex)
    a, b = poly[:-1], poly[1:]
    d = b - a
    dd = np.abs(d) ** 2
    dd = np.where(dd == 0, 1.0, dd)
    out = np.empty(pts.shape)
    for s in range(0, pts.size, chunk):
        p = pts[s:s + chunk, None]
        t = np.clip(((p - a) * np.conj(d)).real / dd, 0.0, 1.0)
        out[s:s + chunk] = np.min(np.abs(p - (a + t * d)), axis=1)
    return out.reshape(np.shape(points))
