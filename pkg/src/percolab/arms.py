"""Arm events in square annuli, arm-probability tables and exponent fits.

An annulus around ``z`` splits the tiles by the L-infinity distance ``d`` of
their centres: hole ``d < r``, annulus ``r <= d <= R`` and outside ``d > R``.
Arms run inside the annulus from its inner boundary (annulus tiles touching
the hole) to its outer boundary (annulus tiles touching the outside).

Four alternating arms exist iff at least two distinct open clusters of the
annulus cross it: between two such clusters no open path can pass, so by
duality a closed arm separates them on each side.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import _kernels as K
from . import rng
from .connectivity import CLOSED, OPEN, Quad, quad_tiles
from .parallel import map_replicates
from .stats import Estimate, estimate, exact, fit_power_law
from .tiling import build_lattice

ONE_ARM = (OPEN,)
CLOSED_ONE_ARM = (CLOSED,)
FOUR_ARM = (OPEN, CLOSED, OPEN, CLOSED)
_COLOR_NAMES = {OPEN: "open", CLOSED: "closed"}


@dataclass(frozen=True)
class AnnulusSpec:
    center: tuple
    r: float
    R: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.r > 0:
            raise ValueError(f"inner radius must be positive, got {self.r}")

    @property
    def empty(self):
        return self.r >= self.R


@dataclass(frozen=True)
class ArmPattern:
    colors: tuple

    def __post_init__(self):
        c = tuple(int(v) for v in self.colors)
        object.__setattr__(self, "colors", c)
        if len(c) not in (1, 4) or any(v not in (OPEN, CLOSED) for v in c):
            raise ValueError(f"arm pattern must have 1 or 4 open/closed entries, got {c}")
        if len(c) == 4 and any(c[i] == c[(i + 1) % 4] for i in range(4)):
            raise ValueError("four-arm patterns must alternate")

    @property
    def name(self):
        return "-".join(_COLOR_NAMES[c] for c in self.colors)


def _pattern(p):
    return p if isinstance(p, ArmPattern) else ArmPattern(tuple(p))


@dataclass(frozen=True, eq=False)
class AnnulusTiles:
    region: np.ndarray
    inner: np.ndarray
    outer: np.ndarray
    inner_ring: np.ndarray     # inner boundary tiles in cyclic order (possibly repeated)
    touches_rim: bool
    is_ring: bool              # region is connected and encloses the hole


def _hole_ring(lattice, hole, region, z):
    """Annulus tiles around the hole in the cyclic order of its boundary walk."""
    e = lattice.edges
    vx = lattice.vertices
    succ = {}
    for a, b, v0, v1 in e:
        if hole[a] == hole[b]:
            continue
        h, o = (a, b) if hole[a] else (b, a)
        # orient the edge counter-clockwise around the hole tile
        cx, cy = lattice.centers[h]
        cross = (vx[v0, 0] - cx) * (vx[v1, 1] - cy) - (vx[v0, 1] - cy) * (vx[v1, 0] - cx)
        s, t = (v0, v1) if cross > 0 else (v1, v0)
        succ[int(s)] = (int(t), int(o))
    if not succ:
        return np.empty(0, dtype=np.int64)
    start = min(succ)
    ring, v = [], start
    for _ in range(len(succ)):
        v, o = succ[v]
        if region[o]:
            ring.append(o)
        if v == start:
            break
    return np.array(ring, dtype=np.int64)


@lru_cache(maxsize=64)
def annulus_tiles(lattice, annulus: AnnulusSpec) -> AnnulusTiles:
    zx, zy = annulus.center
    c = lattice.centers
    d = np.maximum(np.abs(c[:, 0] - zx), np.abs(c[:, 1] - zy))
    tol = lattice.eps
    hole = d < annulus.r - tol
    region = (d >= annulus.r - tol) & (d <= annulus.R + tol)
    outside = d > annulus.R + tol
    src = np.repeat(np.arange(lattice.n_tiles), np.diff(lattice.indptr))
    dst = lattice.indices
    inner = np.zeros(lattice.n_tiles, dtype=np.bool_)
    outer = np.zeros(lattice.n_tiles, dtype=np.bool_)
    inner[dst[hole[src]]] = True
    outer[dst[outside[src]]] = True
    if hole.any():
        ring = _hole_ring(lattice, hole, region, (zx, zy))
    else:
        r = annulus.r
        inner[lattice.tiles_meeting_rect((zx - r, zy - r, zx + r, zy + r))] = True
        ids = np.flatnonzero(inner & region)
        ang = np.arctan2(c[ids, 1] - zy, c[ids, 0] - zx)
        ring = ids[np.argsort(ang, kind="stable")]
    inner &= region
    outer &= region
    rim = np.zeros(lattice.n_tiles, dtype=np.bool_)
    rim[lattice.rim_edges[:, 0]] = True
    touches = bool((rim & region).any()) or not outside.any()
    ones = np.ones(lattice.n_tiles, dtype=np.int8)
    labels = K.union_find_labels(lattice.indptr, lattice.indices, ones, region, 1)
    is_ring = bool(region.any()) and int(labels.max()) == 0 and bool(inner.any()) and bool(outer.any())
    for m in (region, inner, outer, ring):
        m.flags.writeable = False
    return AnnulusTiles(region, inner, outer, ring, touches, is_ring)


def annulus_lattice(kind, mesh, annulus: AnnulusSpec, margin=3):
    """Smallest lattice holding the annulus plus ``margin`` tiles of slack."""
    zx, zy = annulus.center
    h = max(annulus.R, annulus.r) + margin * mesh
    return _cached_lattice(kind, float(mesh), (zx - h, zy - h, zx + h, zy + h))


@lru_cache(maxsize=8)
def _cached_lattice(kind, mesh, bbox):
    return build_lattice(kind, mesh, bbox)


def snap_to_vertex(lattice, point):
    """Nearest tiling vertex (annuli are centred on vertices)."""
    v = lattice.vertices
    i = int(np.argmin(np.hypot(v[:, 0] - point[0], v[:, 1] - point[1])))
    return float(v[i, 0]), float(v[i, 1])


# ---------------------------------------------------------------------------
# single-configuration queries

def _crossing_clusters(config, at, color):
    labels = K.union_find_labels(config.lattice.indptr, config.lattice.indices,
                                 config.states, at.region, int(color))
    lin = np.unique(labels[at.inner & (labels >= 0)])
    lout = np.unique(labels[at.outer & (labels >= 0)])
    return labels, np.intersect1d(lin, lout)


def interface_strands(config, annulus: AnnulusSpec):
    """Interface strands crossing the annulus.

    Returns ``(count, strands)``.  Walking once around the hole, each crossing
    cluster of either colour occupies one block of the inner boundary; a
    strand starts wherever the colour of consecutive blocks changes, and is
    reported as the pair of inner-boundary tiles ``(last tile of a block,
    first tile of the next block)`` in cyclic order.
    """
    if annulus.empty:
        return 0, []
    at = annulus_tiles(config.lattice, annulus)
    if not at.is_ring:
        raise ValueError(f"annulus {annulus.r}..{annulus.R} is not a connected ring on this lattice")
    lab_o, cross_o = _crossing_clusters(config, at, OPEN)
    lab_c, cross_c = _crossing_clusters(config, at, CLOSED)
    if cross_o.size == 0 or cross_c.size == 0:
        return 0, []
    st = config.states
    seq = []
    for t in at.inner_ring:
        if st[t] == OPEN and np.isin(lab_o[t], cross_o):
            key = (OPEN, int(lab_o[t]))
        elif st[t] == CLOSED and np.isin(lab_c[t], cross_c):
            key = (CLOSED, int(lab_c[t]))
        else:
            continue
        seq.append((key, int(t)))
    strands = []
    m = len(seq)
    for i in range(m):
        (k1, t1), (k2, t2) = seq[i], seq[(i + 1) % m]
        if k1[0] != k2[0]:
            strands.append((t1, t2))
    return len(strands), strands


def has_arm_event(config, annulus: AnnulusSpec, pattern):
    pattern = _pattern(pattern)
    if annulus.empty:
        return True
    at = annulus_tiles(config.lattice, annulus)
    if len(pattern.colors) == 1:
        lat = config.lattice
        return bool(K.bfs_reaches(lat.indptr, lat.indices, config.states, at.region, at.inner,
                                  at.outer, pattern.colors[0], np.zeros(lat.n_tiles, np.int64), 1,
                                  np.empty(lat.n_tiles, np.int64)))
    _, cross_o = _crossing_clusters(config, at, OPEN)
    if cross_o.size < 2:
        return False
    _, cross_c = _crossing_clusters(config, at, CLOSED)
    return cross_c.size >= 2


# ---------------------------------------------------------------------------
# Monte Carlo kernels

@njit(cache=True, nogil=True)
def _state(forced, key, t, p):
    f = forced[t]
    if f == 1:
        return 1
    if f == -1:
        return 0
    return 1 if rng.uniform(key, t) < p else 0


@njit(cache=True, nogil=True)
def _count_crossing(indptr, indices, forced, region, outer, inner_list, key, p, color, limit, mark, queue,
                    tag):
    """Number of `color` clusters joining inner to outer, counted up to `limit`."""
    found = 0
    for s in range(inner_list.shape[0]):
        t0 = inner_list[s]
        if mark[t0] == tag or _state(forced, key, t0, p) != color:
            continue
        mark[t0] = tag
        head = 0
        tail = 1
        queue[0] = t0
        crosses = outer[t0]
        while head < tail:
            t = queue[head]
            head += 1
            for k in range(indptr[t], indptr[t + 1]):
                u = indices[k]
                if mark[u] != tag and region[u] and _state(forced, key, u, p) == color:
                    mark[u] = tag
                    if outer[u]:
                        crosses = True
                        if limit == 1:
                            head = tail
                            break
                    queue[tail] = u
                    tail += 1
        if crosses:
            found += 1
            if found >= limit:
                break
    return found


@njit(cache=True, nogil=True)
def _arm_chunk(indptr, indices, forced, region, inner, outer, inner_list, master, p,
               start, stop, four, color):
    n = forced.shape[0]
    mark = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    out = np.zeros(stop - start, dtype=np.bool_)
    tag = 0
    for rep in range(start, stop):
        key = rng.derive_key(master, rep, 0, 0)
        tag += 1
        if not four:
            out[rep - start] = _count_crossing(indptr, indices, forced, region, outer, inner_list, key, p,
                                               color, 1, mark, queue, tag) >= 1
            continue
        ok = _count_crossing(indptr, indices, forced, region, outer, inner_list, key, p, 1, 2, mark,
                             queue, tag) >= 2
        if ok:
            tag += 1
            ok = _count_crossing(indptr, indices, forced, region, outer, inner_list, key, p, 0, 2, mark,
                                 queue, tag) >= 2
        out[rep - start] = ok
    return out


def row_seed(master, row):
    """Master seed of table row ``row`` (rows draw unrelated streams)."""
    return int(rng.derive_key(rng.check_seed(master), row, 0, 0x5EED) >> np.uint64(1))


def arm_indicators(lattice, annulus, pattern, p, master, n, threads=1, chunk=2048):
    """Arm-event indicator for replicates 0..n-1 of ``sample_configuration(lattice, p, master, i)``."""
    pattern = _pattern(pattern)
    if annulus.empty:
        return np.ones(n, dtype=np.bool_)
    at = annulus_tiles(lattice, annulus)
    inner_list = np.flatnonzero(at.inner)
    four = len(pattern.colors) == 4
    color = OPEN if four else pattern.colors[0]
    master = np.uint64(rng.check_seed(master))

    def run(a, b):
        return _arm_chunk(lattice.indptr, lattice.indices, lattice.forced, at.region, at.inner,
                          at.outer, inner_list, master, float(p), a, b, four, color)
    return map_replicates(run, n, threads, chunk).astype(np.bool_)


# ---------------------------------------------------------------------------
# tables

@dataclass(frozen=True)
class ArmRow:
    pattern: str
    center: tuple
    r: float
    R: float
    estimate: Estimate
    flags: str = ""


@dataclass
class ArmProbabilityTable:
    rows: list = field(default_factory=list)

    HEADER = ("pattern", "z_x", "z_y", "r", "R", "n", "p_hat", "ci_lo", "ci_hi", "flags")

    def lookup(self, r, R, pattern=None):
        for row in self.rows:
            if math.isclose(row.r, r) and math.isclose(row.R, R) and (pattern is None or row.pattern == pattern):
                return row
        raise KeyError((r, R, pattern))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for row in self.rows:
                e = row.estimate
                w.writerow((row.pattern, repr(row.center[0]), repr(row.center[1]), repr(row.r), repr(row.R),
                            e.n, repr(e.p_hat), repr(e.ci_lo), repr(e.ci_hi), row.flags))


def estimate_arm_probability(kind, mesh, p, annuli, pattern, n, seed, threads=1):
    """Wilson estimates of the arm event for each annulus (one independent stream per row)."""
    pattern = _pattern(pattern)
    if n < 100:
        raise ValueError(f"n must be at least 100, got {n}")
    table = ArmProbabilityTable()
    for row, ann in enumerate(annuli):
        if ann.empty:
            table.rows.append(ArmRow(pattern.name, ann.center, ann.r, ann.R, exact(1.0), "empty"))
            continue
        lat = annulus_lattice(kind, mesh, ann)
        at = annulus_tiles(lat, ann)
        hits = arm_indicators(lat, ann, pattern, p, row_seed(seed, row), n, threads)
        flags = "boundary" if at.touches_rim else ""
        table.rows.append(ArmRow(pattern.name, ann.center, ann.r, ann.R,
                                 estimate(int(hits.sum()), n), flags))
    return table


def fit_exponent(table, r, R_list, n_boot=1000, seed=0):
    """Slope of log p_hat against log(r/R) with a bootstrap CI."""
    rows = [table.lookup(r, R) for R in R_list]
    if len(rows) < 3:
        raise ValueError("need at least three rows")
    return fit_power_law([r / row.R for row in rows], [row.estimate.p_hat for row in rows],
                         hits=[row.estimate.hits for row in rows],
                         ns=[row.estimate.n for row in rows], n_boot=n_boot, seed=seed)


# ---------------------------------------------------------------------------
# boundary three-arm event

@njit(cache=True, nogil=True)
def _three_arm_chunk(indptr, indices, forced, region, top, bottom_sorted, bottom_x, master, p, start, stop):
    n = forced.shape[0]
    mark = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    state = np.empty(n, dtype=np.int8)
    out = np.empty(stop - start)
    tag = 0
    for rep in range(start, stop):
        key = rng.derive_key(master, rep, 0, 0)
        tag += 1
        tail = 0
        for t in range(n):
            if region[t]:
                state[t] = _state(forced, key, t, p)
                if top[t]:
                    mark[t] = tag
                    queue[tail] = t
                    tail += 1
        head = 0
        while head < tail:
            t = queue[head]
            head += 1
            for k in range(indptr[t], indptr[t + 1]):
                u = indices[k]
                if mark[u] != tag and region[u] and state[u] == state[t]:
                    mark[u] = tag
                    queue[tail] = u
                    tail += 1
        # smallest window closed < open < closed among capable bottom tiles
        best = np.inf
        m = bottom_sorted.shape[0]
        last_closed = -np.inf
        pending = np.inf     # left end of the best open-after-closed seen so far
        for i in range(m):
            t = bottom_sorted[i]
            if mark[t] != tag:
                continue
            if state[t] == 1:
                if last_closed > -np.inf:
                    pending = last_closed
            else:
                if pending < np.inf:
                    w = bottom_x[i] - pending
                    if w < best:
                        best = w
                    pending = np.inf
                last_closed = bottom_x[i]
        out[rep - start] = best
    return out


def three_arm_spans(lattice, quad, p, master, n, threads=1, chunk=1024):
    """Per replicate, the narrowest closed/open/closed window on the bottom side
    whose three tiles are joined to the top side by their own colour."""
    qt = quad_tiles(lattice, quad if quad.orientation == "vertical" else quad.rotated())
    bottom, top = qt.sides[0], qt.sides[2]
    ids = np.flatnonzero(bottom)
    xs = lattice.centers[ids, 0]
    order = np.argsort(xs, kind="stable")
    ids, xs = ids[order], xs[order]
    master = np.uint64(rng.check_seed(master))

    def run(a, b):
        return _three_arm_chunk(lattice.indptr, lattice.indices, lattice.forced, qt.region, top,
                                ids, xs, master, float(p), a, b)
    return map_replicates(run, n, threads, chunk)


def boundary_three_arm(kind, mesh, p, quad: Quad, deltas, n, seed, threads=1, lattice=None):
    """Estimate P(closed/open/closed arms from a bottom arc of width < delta to the top)."""
    lat = lattice or _cached_lattice(kind, float(mesh), tuple(quad.rect))
    side = quad.width
    rows = []
    spans = three_arm_spans(lat, quad, p, row_seed(seed, 0), n, threads)
    for d in deltas:
        if not d < side:
            raise ValueError(f"delta {d} must be smaller than the side length {side}")
        flag = "unresolved" if d < lat.mesh else ""
        rows.append((float(d), estimate(int((spans < d).sum()), n), flag))
    return rows
