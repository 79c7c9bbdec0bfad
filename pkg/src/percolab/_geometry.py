"""Convex-polygon predicates used to map continuum sets onto tiles.

Polygons are stored padded: ``polys[t, :nverts[t]]`` are the vertices of
tile ``t`` in counter-clockwise order.  All tests are separating-axis tests
with an absolute tolerance ``eps`` so that touching along an edge or at a
vertex counts as intersecting (closed sets) regardless of rounding.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _project(polys, t, n, ax, ay):
    lo = math.inf
    hi = -math.inf
    for k in range(n):
        v = polys[t, k, 0] * ax + polys[t, k, 1] * ay
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


@njit(cache=True)
def polys_intersect_rect(polys, nverts, x0, y0, x1, y1, eps, strict):
    """Mask of tiles meeting the rectangle [x0,x1]x[y0,y1].

    With ``strict`` the overlap must have positive area (margin ``eps``);
    otherwise closed sets are intersected with tolerance ``eps``.  A
    degenerate rectangle (a horizontal or vertical segment) is allowed.
    """
    n_tiles = polys.shape[0]
    out = np.zeros(n_tiles, dtype=np.bool_)
    sgn = 1.0 if strict else -1.0
    cx = np.array([x0, x1, x1, x0])
    cy = np.array([y0, y0, y1, y1])
    for t in range(n_tiles):
        n = nverts[t]
        lo, hi = _project(polys, t, n, 1.0, 0.0)
        if not (hi > x0 + sgn * eps and x1 > lo + sgn * eps):
            continue
        lo, hi = _project(polys, t, n, 0.0, 1.0)
        if not (hi > y0 + sgn * eps and y1 > lo + sgn * eps):
            continue
        ok = True
        for k in range(n):
            k2 = (k + 1) % n
            ex = polys[t, k2, 0] - polys[t, k, 0]
            ey = polys[t, k2, 1] - polys[t, k, 1]
            norm = math.sqrt(ex * ex + ey * ey)
            ax = ey / norm
            ay = -ex / norm
            plo, phi = _project(polys, t, n, ax, ay)
            rlo = math.inf
            rhi = -math.inf
            for c in range(4):
                v = cx[c] * ax + cy[c] * ay
                rlo = min(rlo, v)
                rhi = max(rhi, v)
            if not (phi > rlo + sgn * eps and rhi > plo + sgn * eps):
                ok = False
                break
        out[t] = ok
    return out


@njit(cache=True)
def _point_segment_dist(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    ll = dx * dx + dy * dy
    if ll == 0.0:
        return math.hypot(px - ax, py - ay)
    u = ((px - ax) * dx + (py - ay) * dy) / ll
    u = min(1.0, max(0.0, u))
    return math.hypot(px - ax - u * dx, py - ay - u * dy)


@njit(cache=True)
def _inside_convex(polys, t, n, px, py):
    for k in range(n):
        k2 = (k + 1) % n
        ex = polys[t, k2, 0] - polys[t, k, 0]
        ey = polys[t, k2, 1] - polys[t, k, 1]
        if ex * (py - polys[t, k, 1]) - ey * (px - polys[t, k, 0]) < 0.0:
            return False
    return True


@njit(cache=True)
def _segments_cross(ax, ay, bx, by, cx, cy, dx, dy):
    d1 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    d2 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
    d3 = (dx - cx) * (ay - cy) - (dy - cy) * (ax - cx)
    d4 = (dx - cx) * (by - cy) - (dy - cy) * (bx - cx)
    return d1 * d2 < 0.0 and d3 * d4 < 0.0


@njit(cache=True)
def polys_segment_distance(polys, nverts, ax, ay, bx, by):
    """Euclidean distance from each convex tile to the segment [a, b]."""
    n_tiles = polys.shape[0]
    out = np.empty(n_tiles)
    for t in range(n_tiles):
        n = nverts[t]
        if _inside_convex(polys, t, n, ax, ay) or _inside_convex(polys, t, n, bx, by):
            out[t] = 0.0
            continue
        best = math.inf
        hit = False
        for k in range(n):
            k2 = (k + 1) % n
            px, py = polys[t, k, 0], polys[t, k, 1]
            qx, qy = polys[t, k2, 0], polys[t, k2, 1]
            if _segments_cross(ax, ay, bx, by, px, py, qx, qy):
                hit = True
                break
            best = min(best, _point_segment_dist(px, py, ax, ay, bx, by))
            best = min(best, _point_segment_dist(ax, ay, px, py, qx, qy))
            best = min(best, _point_segment_dist(bx, by, px, py, qx, qy))
        out[t] = 0.0 if hit else best
    return out


def rect_contains(outer, inner):
    return (outer[0] <= inner[0] and outer[1] <= inner[1]
            and inner[2] <= outer[2] and inner[3] <= outer[3])
