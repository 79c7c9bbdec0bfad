"""Gluing, the resampling coupling, the finite crossing predictor and the
multi-scale four-arm bound (circuits, interface and pivotal squares)."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from . import rng
from .arms import FOUR_ARM, AnnulusSpec, annulus_lattice, annulus_tiles, arm_indicators, row_seed, snap_to_vertex
from .connectivity import HORIZONTAL, Quad, crossing_matrix, quad_tiles, snap_quad
from .explore import ring_sides
from .parallel import map_replicates
from .stats import Estimate, estimate
from .tiling import SQUARE_BOND, CurveSpec, build_lattice, tiles_near_curve


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _quad_lattice(kind, mesh, rect, pad_tiles=3):
    pad = pad_tiles * mesh
    return build_lattice(kind, mesh, (rect[0] - pad, rect[1] - pad, rect[2] + pad, rect[3] + pad))


# ---------------------------------------------------------------------------
# gluing

@njit(cache=True, nogil=True)
def _gluing_chunk(indptr, indices, forced, region, src, dst, resampled, master, p, n_inner, start, stop):
    n = forced.shape[0]
    state = np.zeros(n, dtype=np.int8)
    mark = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    ids = np.flatnonzero(region)
    out = np.zeros(stop - start, dtype=np.int64)
    tag = 0
    for rep in range(start, stop):
        key = rng.derive_key(master, rep, 0, 0)
        for i in range(ids.shape[0]):
            state[ids[i]] = K.tile_state(forced, key, ids[i], p)
        hits = 0
        for j in range(n_inner):
            k2 = rng.derive_key(master, rep, 1, j + 1)
            for i in range(resampled.shape[0]):
                t = resampled[i]
                state[t] = 1 if rng.uniform(k2, t) < p else 0
            tag += 1
            if K.bfs_reaches(indptr, indices, state, region, src, dst, 1, mark, tag, queue):
                hits += 1
        out[rep - start] = hits
    return out


def conditional_crossing_counts(lattice, quad, tiles, p, master, n_outer, n_inner, threads=1):
    """For each outer sample, how many of ``n_inner`` resamplings of ``tiles`` cross ``quad``.

    Resample ``j`` of outer sample ``i`` is ``resample_region(sample_configuration(
    lattice, p, master, i), tiles, j + 1)``.
    """
    qt = quad_tiles(lattice, quad)
    tiles = np.asarray(tiles, dtype=np.int64)
    tiles = np.unique(tiles[lattice.forced[tiles] == 0])
    master = np.uint64(rng.check_seed(master))

    def run(a, b):
        return _gluing_chunk(lattice.indptr, lattice.indices, lattice.forced, qt.region, qt.sides[0],
                             qt.sides[2], tiles, master, float(p), int(n_inner), a, b)
    return map_replicates(run, n_outer, threads, chunk=64)


@dataclass(frozen=True)
class GluingRow:
    mesh: float
    s: float
    eps: float
    n_outer: int
    n_inner: int
    estimate: Estimate
    mean_y: float
    flags: str = ""


@dataclass
class GluingResult:
    rows: list = field(default_factory=list)

    HEADER = ("mesh", "s", "eps", "n_outer", "n_inner", "p_hat", "ci_lo", "ci_hi", "mean_y", "flags")

    def to_csv(self, path):
        _write_csv(path, self.HEADER, [(r.mesh, r.s, r.eps, r.n_outer, r.n_inner, r.estimate.p_hat,
                                        r.estimate.ci_lo, r.estimate.ci_hi, r.mean_y, r.flags)
                                       for r in self.rows])


def gluing_experiment(kind, q0_rect, curve: CurveSpec, s_list, mesh_list, eps, n_outer, n_inner, seed,
                      p=0.5, threads=1):
    """P(eps < Y_s < 1 - eps), Y_s the crossing probability of Q0 given the
    configuration outside the s-neighbourhood of the curve (nested Monte Carlo)."""
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    if n_inner < 50:
        raise ValueError(f"n_inner must be at least 50, got {n_inner}")
    result = GluingResult()
    row = 0
    for mesh in mesh_list:
        lat = _quad_lattice(kind, mesh, q0_rect)
        q0 = snap_quad(lat, q0_rect)
        region = quad_tiles(lat, q0).region
        for s in s_list:
            near = tiles_near_curve(lat, curve, s)
            near = near[region[near]]
            counts = conditional_crossing_counts(lat, q0, near, p, row_seed(seed, row), n_outer,
                                                 n_inner, threads)
            y = counts / n_inner
            mid = (y > eps) & (y < 1 - eps)
            flag = "unresolved" if s <= mesh else ""
            result.rows.append(GluingRow(float(mesh), float(s), float(eps), int(n_outer), int(n_inner),
                                         estimate(int(mid.sum()), n_outer), float(y.mean()), flag))
            row += 1
    return result


# ---------------------------------------------------------------------------
# resampling coupling

def _segment_rect_hits(a, b, rect):
    """Points where segment ab meets the boundary of rect."""
    x0, y0, x1, y1 = rect
    pts = []
    (ax, ay), (bx, by) = a, b
    dx, dy = bx - ax, by - ay
    for fixed, axis, lo, hi in ((x0, 0, y0, y1), (x1, 0, y0, y1), (y0, 1, x0, x1), (y1, 1, x0, x1)):
        d = dx if axis == 0 else dy
        base = ax if axis == 0 else ay
        if abs(d) < 1e-15:
            continue
        u = (fixed - base) / d
        if -1e-12 <= u <= 1 + 1e-12:
            px, py = ax + u * dx, ay + u * dy
            other = py if axis == 0 else px
            if lo - 1e-12 <= other <= hi + 1e-12:
                pts.append((px, py))
    return pts


def _clip_outside_discs(a, b, centers, r):
    """Sub-segments of ab outside the union of discs B(c, r)."""
    (ax, ay), (bx, by) = a, b
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    cuts = []
    for cx, cy in centers:
        # |a + u (b - a) - c|^2 < r^2
        fx, fy = ax - cx, ay - cy
        qa, qb, qc = ll, 2 * (fx * dx + fy * dy), fx * fx + fy * fy - r * r
        disc = qb * qb - 4 * qa * qc
        if qa == 0 or disc <= 0:
            continue
        s = math.sqrt(disc)
        cuts.append(((-qb - s) / (2 * qa), (-qb + s) / (2 * qa)))
    keep = [(0.0, 1.0)]
    for lo, hi in cuts:
        nxt = []
        for u0, u1 in keep:
            if hi <= u0 or lo >= u1:
                nxt.append((u0, u1))
                continue
            if lo > u0:
                nxt.append((u0, lo))
            if hi < u1:
                nxt.append((hi, u1))
        keep = nxt
    return [((ax + u0 * dx, ay + u0 * dy), (ax + u1 * dx, ay + u1 * dy)) for u0, u1 in keep if u1 - u0 > 1e-12]


def _dist_to_rect_boundary(x, y, rect):
    x0, y0, x1, y1 = rect
    if x0 <= x <= x1 and y0 <= y <= y1:
        return min(x - x0, x1 - x, y - y0, y1 - y)
    ddx = max(x0 - x, 0.0, x - x1)
    ddy = max(y0 - y, 0.0, y - y1)
    return math.hypot(ddx, ddy)


@dataclass(frozen=True)
class CouplingGeometry:
    hits: list            # alpha meets the boundary of Q0 at these points
    pieces: list          # alpha' = alpha minus the discs B(x_i, r)
    d: float              # distance from alpha' to the boundary of Q0
    centers: np.ndarray   # ball centres w_j, spacing 2s along alpha'


def coupling_geometry(q0_rect, curve: CurveSpec, s, r):
    hits = []
    for a, b in curve.segments:
        for pt in _segment_rect_hits(a, b, q0_rect):
            if all(math.dist(pt, h) > 1e-9 for h in hits):
                hits.append(pt)
    pieces = []
    for a, b in curve.segments:
        pieces.extend(_clip_outside_discs(a, b, hits, r))
    d = math.inf
    for a, b in pieces:
        for u in np.linspace(0, 1, 513):
            d = min(d, _dist_to_rect_boundary(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), q0_rect))
    centers = CurveSpec(tuple(pieces)).cover(s) if pieces else np.empty((0, 2))
    return CouplingGeometry(hits, pieces, d, centers)


@njit(cache=True, nogil=True)
def _coupling_chunk(indptr, indices, forced, region, src, dst, ball_ptr, ball_tiles, master, p, start, stop):
    n = forced.shape[0]
    nb = ball_ptr.shape[0] - 1
    state = np.zeros(n, dtype=np.int8)
    mark = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    ids = np.flatnonzero(region)
    out = np.zeros((stop - start, nb + 1), dtype=np.bool_)
    tag = 0
    for rep in range(start, stop):
        key = rng.derive_key(master, rep, 0, 0)
        k2 = rng.derive_key(master, rep, 1, 1)
        for i in range(ids.shape[0]):
            state[ids[i]] = K.tile_state(forced, key, ids[i], p)
        tag += 1
        out[rep - start, 0] = K.bfs_reaches(indptr, indices, state, region, src, dst, 1, mark, tag, queue)
        for j in range(nb):
            for i in range(ball_ptr[j], ball_ptr[j + 1]):
                t = ball_tiles[i]
                state[t] = 1 if rng.uniform(k2, t) < p else 0
            tag += 1
            out[rep - start, j + 1] = K.bfs_reaches(indptr, indices, state, region, src, dst, 1,
                                                    mark, tag, queue)
    return out


@dataclass
class CouplingResult:
    s: float
    r: float
    d: float
    centers: np.ndarray
    radius: float
    flip_down: list          # Estimate of P[w_{j-1} crossed, w_j not crossed] per ball
    flip_up: list
    flip_sum: float
    pi4: Estimate
    comparison: float        # (2s/(d/2)) * pi4 * n_balls
    n_runs: int
    disagreement: Estimate   # P[crossing of w_0 differs from w_n]
    telescope_failures: int
    parity_failures: int

    HEADER = ("ball", "w_x", "w_y", "radius", "n", "p_down", "ci_lo", "ci_hi", "p_up", "pi4_hat", "pi4_ci_hi")

    def to_csv(self, path):
        rows = []
        for j, (c, dn, up) in enumerate(zip(self.centers, self.flip_down, self.flip_up)):
            rows.append((j + 1, float(c[0]), float(c[1]), self.radius, dn.n, dn.p_hat, dn.ci_lo, dn.ci_hi,
                         up.p_hat, self.pi4.p_hat, self.pi4.ci_hi))
        _write_csv(path, self.HEADER, rows)


def coupling_chain(lattice, q0, geometry: CouplingGeometry, s, p, master, n, threads=1):
    """Crossing bits of w_0..w_n for n runs (w_j uses the resample on balls 1..j)."""
    qt = quad_tiles(lattice, q0)
    pieces = CurveSpec(tuple(geometry.pieces)) if geometry.pieces else None
    m = np.zeros(lattice.n_tiles, dtype=np.bool_)
    if pieces is not None:
        m[tiles_near_curve(lattice, pieces, s)] = True
    m &= qt.region & (lattice.forced == 0)
    c = lattice.centers
    # each resampled tile belongs to the ball with the nearest centre
    ids = np.flatnonzero(m)
    w = np.asarray(geometry.centers, dtype=np.float64).reshape(-1, 2)
    if len(ids) and not len(w):
        raise RuntimeError("no balls cover the resampled region")
    owner = np.argmin(((c[ids, None, :] - w[None, :, :]) ** 2).sum(-1), axis=1) if len(ids) else ids
    ptr, tiles = [0], []
    for j in range(len(w)):
        tiles.extend(ids[owner == j].tolist())
        ptr.append(len(tiles))
    ptr = np.array(ptr, dtype=np.int64)
    tiles = np.array(tiles, dtype=np.int64)
    master = np.uint64(rng.check_seed(master))

    def run(a, b):
        return _coupling_chunk(lattice.indptr, lattice.indices, lattice.forced, qt.region, qt.sides[0],
                               qt.sides[2], ptr, tiles, master, float(p), a, b)
    return map_replicates(run, n, threads, chunk=64).reshape(n, len(ptr))


def coupling_sum_experiment(kind, q0_rect, curve: CurveSpec, s, mesh, n, seed, r=None, p=0.5,
                            threads=1, n_pi4=None):
    """Sequential resampling over a ball cover of alpha' with per-ball flip statistics."""
    r = 8 * s if r is None else r
    geo = coupling_geometry(q0_rect, curve, s, r)
    if geo.pieces and not s < geo.d / 4:
        raise ValueError(f"s = {s} must be below d/4 = {geo.d / 4}")
    lat = _quad_lattice(kind, mesh, q0_rect)
    q0 = snap_quad(lat, q0_rect)
    if len(geo.centers):
        cx, cy = geo.centers[:, 0], geo.centers[:, 1]
        b = lat.bbox
        if (cx - 2 * s < b[0]).any() or (cx + 2 * s > b[2]).any() or (cy - 2 * s < b[1]).any() or (cy + 2 * s > b[3]).any():
            raise ValueError("ball cover leaves the lattice; s is too large")
    bits = coupling_chain(lat, q0, geo, s, p, row_seed(seed, 0), n, threads)
    down = bits[:, :-1] & ~bits[:, 1:]
    up = ~bits[:, :-1] & bits[:, 1:]
    telescope = bits[:, 0].astype(int) - bits[:, -1].astype(int)
    tele_fail = int((telescope != down.sum(1) - up.sum(1)).sum())
    parity_fail = int(((bits[:, 0] != bits[:, -1]) != ((down.sum(1) + up.sum(1)) % 2 == 1)).sum())
    flips_dn = [estimate(int(k), n) for k in down.sum(0)]
    flips_up = [estimate(int(k), n) for k in up.sum(0)]
    if geo.pieces:
        ann = AnnulusSpec((0.0, 0.0), 2 * s, geo.d / 2)
        alat = annulus_lattice(kind, mesh, ann)
        ann = AnnulusSpec(snap_to_vertex(alat, (0.0, 0.0)), 2 * s, geo.d / 2)
        m4 = n if n_pi4 is None else n_pi4
        hits = arm_indicators(alat, ann, FOUR_ARM, p, row_seed(seed, 1), m4, threads)
        pi4 = estimate(int(hits.sum()), m4)
    else:
        pi4 = estimate(0, max(n, 1))
    nb = len(geo.centers)
    comparison = (2 * s / (geo.d / 2)) * pi4.p_hat * nb if geo.pieces else 0.0
    return CouplingResult(float(s), float(r), float(geo.d), geo.centers, 2 * float(s), flips_dn, flips_up,
                          float(sum(e.p_hat for e in flips_dn)), pi4, comparison, int(n),
                          estimate(int((bits[:, 0] != bits[:, -1]).sum()), n), tele_fail, parity_fail)


# ---------------------------------------------------------------------------
# finite crossing predictor

def _rect_meets_curve(rect, curve):
    x0, y0, x1, y1 = rect
    for (ax, ay), (bx, by) in curve.segments:
        if x0 <= ax <= x1 and y0 <= ay <= y1:
            return True
        if _segment_rect_hits((ax, ay), (bx, by), rect):
            return True
    return False


BANDS = ((0.0, 1.0), (0.0, 0.5), (0.5, 1.0), (0.25, 0.75))


def cut_family(lattice, q0: Quad, curve: CurveSpec, size):
    """Nested rectangles on both sides of a vertical cut ``x = a`` of Q0.

    Each block of eight holds the four horizontal bands ``BANDS`` of each
    half, the halves starting at ``x0`` and ``x1`` and stopping at least half
    a mesh short of the cut.  Block ``k`` moves the outer edges a fraction
    ``1 - 2**-k`` of the way towards the cut, so larger families see the
    clusters closer to ``a``.  The family of size ``m`` is a prefix of the
    family of size ``n > m``.
    """
    xs = {round(x, 12) for seg in curve.segments for x in (seg[0][0], seg[1][0])}
    if len(xs) != 1:
        raise ValueError("cut_family needs a vertical cut")
    a = xs.pop()
    x0, y0, x1, y1 = q0.rect
    half = lattice.mesh / 2
    step = lattice.mesh / 8
    left = a - half
    while snap_quad(lattice, (x0, y0, left, y1)).rect[2] > a - half:
        left -= step
    left = snap_quad(lattice, (x0, y0, left, y1)).rect[2]
    right = a + half
    while snap_quad(lattice, (right, y0, x1, y1)).rect[0] < a + half:
        right += step
    right = snap_quad(lattice, (right, y0, x1, y1)).rect[0]
    h = y1 - y0
    quads = []
    for k in range(-(-size // 8)):
        f = 1 - 2.0 ** -k
        lx = x0 + f * (left - x0)
        rx = x1 - f * (x1 - right)
        for lo, hi in BANDS:
            quads.append(snap_quad(lattice, (lx, y0 + lo * h, left, y0 + hi * h)))
            quads.append(snap_quad(lattice, (right, y0 + lo * h, rx, y0 + hi * h)))
    return quads[:size]


@dataclass(frozen=True)
class PredictorRow:
    size: int
    n_train: int
    n_test: int
    threshold: float
    error: Estimate
    fallback_rate: float
    n_patterns: int


@dataclass
class PredictorResult:
    rows: list = field(default_factory=list)
    families: dict = field(default_factory=dict)

    HEADER = ("family_size", "n_train", "n_test", "threshold", "p_hat", "ci_lo", "ci_hi",
              "fallback_rate", "n_patterns")

    def to_csv(self, path):
        _write_csv(path, self.HEADER, [(r.size, r.n_train, r.n_test, r.threshold, r.error.p_hat,
                                        r.error.ci_lo, r.error.ci_hi, r.fallback_rate, r.n_patterns)
                                       for r in self.rows])


class LookupPredictor:
    """W = {v : estimated P(crossing | v) > threshold}; unseen vectors get the majority class."""

    def __init__(self, vectors, labels, threshold=0.5):
        vectors = np.asarray(vectors, dtype=np.bool_)
        labels = np.asarray(labels, dtype=np.bool_)
        self.threshold = threshold
        self.majority = bool(labels.mean() > threshold) if labels.size else False
        table = defaultdict(lambda: [0, 0])
        for v, y in zip(map(bytes, np.packbits(vectors, axis=1)), labels):
            table[v][0] += 1
            table[v][1] += int(y)
        self.table = {k: c[1] / c[0] > threshold for k, c in table.items()}

    def predict(self, vectors):
        vectors = np.asarray(vectors, dtype=np.bool_)
        keys = list(map(bytes, np.packbits(vectors, axis=1)))
        seen = np.array([k in self.table for k in keys], dtype=bool)
        pred = np.array([self.table.get(k, self.majority) for k in keys], dtype=bool)
        return pred, ~seen


def finite_predictor_experiment(kind, q0_rect, curve: CurveSpec, family_sizes, mesh, n_train, n_test,
                                seed, p=0.5, threads=1, families=None):
    """Held-out P(W xor crossing of Q0) for a lookup predictor on family crossing vectors."""
    if n_train < 1000 or n_test < 1000:
        raise ValueError("n_train and n_test must be at least 1000")
    lat = _quad_lattice(kind, mesh, q0_rect)
    q0 = snap_quad(lat, q0_rect)
    fams = families or {size: cut_family(lat, q0, curve, size) for size in family_sizes}
    allq = []
    for size in family_sizes:
        for q in fams[size]:
            if _rect_meets_curve(q.rect, curve):
                raise ValueError(f"family quad {q.rect} meets the curve")
            if q not in allq:
                allq.append(q)
    bits = crossing_matrix(lat, [q0] + allq, p, row_seed(seed, 0), n_train + n_test, threads)
    target = bits[:, 0]
    col = {q: i + 1 for i, q in enumerate(allq)}
    result = PredictorResult(families={s: [q.rect for q in fams[s]] for s in family_sizes})
    for size in family_sizes:
        cols = [col[q] for q in fams[size]]
        x = bits[:, cols] if cols else np.zeros((bits.shape[0], 0), dtype=bool)
        if x.shape[1] == 0:
            x = np.zeros((bits.shape[0], 1), dtype=bool)
        model = LookupPredictor(x[:n_train], target[:n_train])
        pred, unseen = model.predict(x[n_train:])
        wrong = int((pred != target[n_train:]).sum())
        result.rows.append(PredictorRow(int(size), int(n_train), int(n_test), 0.5, estimate(wrong, n_test),
                                        float(unseen.mean()), len(model.table)))
    return result


# ---------------------------------------------------------------------------
# multi-scale four-arm bound

@dataclass(frozen=True, eq=False)
class AppendixBGeometry:
    lattice: object
    quad: Quad
    squares: list            # r x r squares of the middle third
    square_ptr: np.ndarray   # CSR of free tiles centred in each square
    square_tiles: np.ndarray
    vertex_squares: np.ndarray   # (n_vertices, 4) square ids containing each vertex, -1 padded
    circ: list               # (region, inner, outer) masks of S_j
    dual: list               # same for S_j*
    ring: np.ndarray
    ring_state: np.ndarray


def appendix_b_geometry(R, r, delta, mesh=1.0):
    if R % (3 * r):
        raise ValueError(f"R = {R} must be divisible by 3r = {3 * r}")
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if delta * r < 2 * mesh:
        raise ValueError(f"delta*r = {delta * r} is below two lattice steps")
    lat = build_lattice(SQUARE_BOND, mesh, (-3 * mesh, -3 * mesh, R + 3 * mesh, R + 3 * mesh))
    quad = Quad((0, 0, R, R), HORIZONTAL)
    m = R // (3 * r)
    squares = [(R / 3 + i * r, R / 3 + j * r, R / 3 + (i + 1) * r, R / 3 + (j + 1) * r)
               for j in range(m) for i in range(m)]
    ptr, tiles = [0], []
    for sq in squares:
        ids = lat.tiles_centered_in(sq)
        tiles.extend(ids[lat.forced[ids] == 0].tolist())
        ptr.append(len(tiles))
    vs = np.full((lat.vertices.shape[0], 4), -1, dtype=np.int64)
    cnt = np.zeros(lat.vertices.shape[0], dtype=np.int64)
    e = lat.eps
    for k, (x0, y0, x1, y1) in enumerate(squares):
        inside = np.flatnonzero((lat.vertices[:, 0] >= x0 - e) & (lat.vertices[:, 0] <= x1 + e)
                                & (lat.vertices[:, 1] >= y0 - e) & (lat.vertices[:, 1] <= y1 + e))
        vs[inside, cnt[inside]] = k
        cnt[inside] += 1
    circ, dual = [], []
    lo, hi = (1 - 2 * delta) * r / 2, (1 - delta) * r / 2
    for (x0, y0, x1, y1) in squares:
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        for target, shift in ((circ, 0.0), (dual, 0.5 * mesh)):
            at = annulus_tiles(lat, AnnulusSpec((cx + shift, cy + shift), lo, hi))
            target.append((at.region, at.inner, at.outer))
    ring, side = ring_sides(lat, quad)
    ring_state = np.zeros(lat.n_tiles, dtype=np.int8)
    ring_state[ring & (side == 0)] = 1
    return AppendixBGeometry(lat, quad, squares, np.array(ptr, dtype=np.int64),
                             np.array(tiles, dtype=np.int64), vs, circ, dual, ring, ring_state)


@njit(cache=True, nogil=True)
def _appendix_b_chunk(indptr, indices, forced, region, src, dst, sq_ptr, sq_tiles, edges, vertex_sq,
                      c_reg, c_in, c_out, d_reg, d_in, d_out, ring, ring_state, master, p, start, stop):
    n = forced.shape[0]
    m = sq_ptr.shape[0] - 1
    state = np.zeros(n, dtype=np.int8)
    saved = np.zeros(n, dtype=np.int8)
    mark = np.zeros(n, dtype=np.int64)
    mark2 = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    allowed = region | ring
    ids = np.flatnonzero(region)
    rids = np.flatnonzero(ring)
    ring_open = ring & (ring_state == 1)
    ring_closed = ring & (ring_state == 0)
    X = np.zeros(stop - start, dtype=np.int8)
    C = np.zeros((stop - start, m), dtype=np.int8)
    Y = np.zeros((stop - start, m), dtype=np.int8)
    P = np.zeros((stop - start, m), dtype=np.bool_)
    tag = 0
    for rep in range(start, stop):
        row = rep - start
        key = rng.derive_key(master, rep, 0, 0)
        for i in range(ids.shape[0]):
            state[ids[i]] = K.tile_state(forced, key, ids[i], p)
        tag += 1
        crossed = K.bfs_reaches(indptr, indices, state, region, src, dst, 1, mark, tag, queue)
        X[row] = 1 if crossed else -1
        # pivotal squares: only the flip towards the opposite colour can change X
        flip = 0 if crossed else 1
        for j in range(m):
            for i in range(sq_ptr[j], sq_ptr[j + 1]):
                t = sq_tiles[i]
                saved[t] = state[t]
                state[t] = flip
            tag += 1
            c2 = K.bfs_reaches(indptr, indices, state, region, src, dst, 1, mark, tag, queue)
            P[row, j] = c2 != crossed
            for i in range(sq_ptr[j], sq_ptr[j + 1]):
                t = sq_tiles[i]
                state[t] = saved[t]
        # circuits: an open circuit in S_j iff no closed path joins its two boundaries
        for j in range(m):
            tag += 1
            closed_cross = K.bfs_reaches(indptr, indices, state, c_reg[j], c_in[j], c_out[j], 0,
                                         mark, tag, queue)
            tag += 1
            open_cross = K.bfs_reaches(indptr, indices, state, d_reg[j], d_in[j], d_out[j], 1,
                                       mark, tag, queue)
            has_open = not closed_cross
            has_dual = not open_cross
            if has_open and not has_dual:
                C[row, j] = 1
            elif has_dual and not has_open:
                C[row, j] = -1
        # Dobrushin interface: edges between the open cluster of the open ring
        # arc and the closed cluster of the closed arc
        for i in range(rids.shape[0]):
            state[rids[i]] = ring_state[rids[i]]
        tag += 1
        K.bfs_component(indptr, indices, state, allowed, ring_open, 1, mark, tag, queue)
        tag2 = tag
        tag += 1
        K.bfs_component(indptr, indices, state, allowed, ring_closed, 0, mark2, tag, queue)
        for k in range(edges.shape[0]):
            a = edges[k, 0]
            b = edges[k, 1]
            if (mark[a] == tag2 and mark2[b] == tag) or (mark[b] == tag2 and mark2[a] == tag):
                for vv in range(2):
                    v = edges[k, 2 + vv]
                    for s in range(4):
                        q = vertex_sq[v, s]
                        if q >= 0:
                            Y[row, q] = 1
    return X, C, Y, P


def appendix_b_samples(geom: AppendixBGeometry, p, master, n, threads=1, chunk=256):
    lat = geom.lattice
    qt = quad_tiles(lat, geom.quad)
    c_reg = np.array([c[0] for c in geom.circ])
    c_in = np.array([c[1] for c in geom.circ])
    c_out = np.array([c[2] for c in geom.circ])
    d_reg = np.array([c[0] for c in geom.dual])
    d_in = np.array([c[1] for c in geom.dual])
    d_out = np.array([c[2] for c in geom.dual])
    master = np.uint64(rng.check_seed(master))

    def run(a, b):
        X, C, Y, P = _appendix_b_chunk(lat.indptr, lat.indices, lat.forced, qt.region, qt.sides[0],
                                       qt.sides[2], geom.square_ptr, geom.square_tiles, lat.edges,
                                       geom.vertex_squares, c_reg, c_in, c_out, d_reg, d_in, d_out,
                                       geom.ring, geom.ring_state, master, float(p), a, b)
        return np.concatenate([X[:, None], C, Y, P.astype(np.int8)], axis=1)
    out = map_replicates(run, n, threads, chunk)
    m = len(geom.squares)
    out = out.reshape(n, 1 + 3 * m)
    return out[:, 0], out[:, 1:1 + m], out[:, 1 + m:1 + 2 * m], out[:, 1 + 2 * m:].astype(bool)


@dataclass
class AppendixBResult:
    R: int
    r: int
    delta: float
    n: int
    squares: list
    stats: dict              # name -> (mean array, sem array) per square
    offdiag: np.ndarray      # E[C_i Y_i C_j Y_j]
    offdiag_sem: np.ndarray
    sum_xcy: float
    sum_c2y2: float
    x_mean: float

    HEADER = ("square", "x0", "y0", "x1", "y1", "E_C", "se_C", "E_C2", "se_C2", "E_Y", "se_Y",
              "E_XC", "se_XC", "E_XCY", "se_XCY", "E_CY", "se_CY", "P_pivotal", "se_pivotal")

    def to_csv(self, path):
        rows = []
        for j, sq in enumerate(self.squares):
            row = [j, *map(float, sq)]
            for name in ("C", "C2", "Y", "XC", "XCY", "CY", "pivotal"):
                mu, se = self.stats[name]
                row += [float(mu[j]), float(se[j])]
            rows.append(row)
        _write_csv(path, self.HEADER, rows)

    PAIR_HEADER = ("i", "j", "E_CYCY", "se_CYCY")

    def to_pairs_csv(self, path):
        """Off-diagonal products E[C_i Y_i C_j Y_j] for i < j."""
        m = len(self.squares)
        _write_csv(path, self.PAIR_HEADER, [(i, j, float(self.offdiag[i, j]), float(self.offdiag_sem[i, j]))
                                            for i in range(m) for j in range(i + 1, m)])


def _col_stats(a):
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    mu = a.mean(axis=0)
    se = a.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(a.shape[1:], np.inf)
    return mu, se


def appendixB_experiment(R, r, delta, n, seed, p=0.5, threads=1):
    """Circuit variables C_j, interface indicators Y_j and pivotal squares on an R x R square."""
    if n < 1000:
        raise ValueError(f"n must be at least 1000, got {n}")
    geom = appendix_b_geometry(R, r, delta)
    X, C, Y, P = appendix_b_samples(geom, p, row_seed(seed, 0), n, threads)
    X = X.astype(np.float64)
    C = C.astype(np.float64)
    Y = Y.astype(np.float64)
    CY = C * Y
    stats = {
        "C": _col_stats(C), "C2": _col_stats(C * C), "Y": _col_stats(Y),
        "XC": _col_stats(X[:, None] * C), "XCY": _col_stats(X[:, None] * CY),
        "CY": _col_stats(CY), "pivotal": _col_stats(P),
    }
    prod = CY.T @ CY / n
    m = C.shape[1]
    # standard errors of the pairwise products
    sem = np.zeros((m, m))
    for i in range(m):
        z = CY[:, i:i + 1] * CY
        sem[i] = z.std(axis=0, ddof=1) / math.sqrt(n)
    return AppendixBResult(int(R), int(r), float(delta), int(n), geom.squares, stats, prod, sem,
                           float(stats["XCY"][0].sum()), float((C * C * Y * Y).mean(axis=0).sum()),
                           float(X.mean()))
