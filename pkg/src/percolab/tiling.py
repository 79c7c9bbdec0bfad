"""Finite trivalent tilings, percolation configurations and resampling.

Two models are built on the same tile-graph representation:

* ``triangular-site``: pointy-top hexagons, one per site of the triangular
  lattice, all free.
* ``square-bond``: the bathroom (truncated-square) tiling.  Octagons are the
  bonds of Z^2 and are free; small squares sit on the sites (always open) and
  on the faces (always closed).

Vertex coordinates are generated from exact integer encodings and deduplicated
on those integers, so adjacency never depends on floating-point rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from . import rng
from ._geometry import polys_intersect_rect, polys_segment_distance

TRIANGULAR = "triangular-site"
SQUARE_BOND = "square-bond"
KINDS = (TRIANGULAR, SQUARE_BOND)

FREE = 0
ALWAYS_OPEN = 1
ALWAYS_CLOSED = -1
FORCED_NAMES = {FREE: "free", ALWAYS_OPEN: "always-open", ALWAYS_CLOSED: "always-closed"}

# polygon classes
HEXAGON, OCTAGON, SITE_SQUARE, FACE_SQUARE = 0, 1, 2, 3
POLYGON_NAMES = {HEXAGON: "hexagon", OCTAGON: "octagon",
                 SITE_SQUARE: "site-square", FACE_SQUARE: "face-square"}

SIDES = ("bottom", "right", "top", "left")

# square-bond: half side of the small squares, in bond lengths
_H = 1.0 / (4.0 + 2.0 * math.sqrt(2.0))

_HEX_OFFSETS = np.array([(0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1), (1, 1)], dtype=np.int64)
# (x half-units, x h-units, y half-units, y h-units), counter-clockwise
_OCT_OFFSETS = np.array([(1, -1, 0, -1), (1, -1, 0, 1), (0, 1, 1, -1), (0, -1, 1, -1),
                         (-1, 1, 0, 1), (-1, 1, 0, -1), (0, -1, -1, 1), (0, 1, -1, 1)],
                        dtype=np.int64)
_SQ_OFFSETS = np.array([(0, -1, 0, -1), (0, 1, 0, -1), (0, 1, 0, 1), (0, -1, 0, 1)],
                       dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Lattice:
    """Immutable tile graph with geometry.

    ``indptr``/``indices`` is the CSR tile adjacency (tiles sharing an edge).
    ``edges`` rows are ``(tile_a, tile_b, vertex_0, vertex_1)`` for every
    tiling edge shared by two tiles; ``rim_edges`` rows ``(tile, v0, v1)``
    are edges on the outer rim of the finite patch.
    """

    kind: str
    mesh: float
    bbox: tuple
    centers: np.ndarray
    polygons: np.ndarray
    nverts: np.ndarray
    tile_vertices: np.ndarray
    vertices: np.ndarray
    polygon_class: np.ndarray
    forced: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    edges: np.ndarray
    rim_edges: np.ndarray
    boundary_map: dict = field(repr=False)

    @property
    def n_tiles(self):
        return self.centers.shape[0]

    @cached_property
    def free_tiles(self):
        return np.flatnonzero(self.forced == FREE)

    @cached_property
    def free_index(self):
        idx = np.full(self.n_tiles, -1, dtype=np.int64)
        idx[self.free_tiles] = np.arange(self.free_tiles.size)
        return idx

    @property
    def eps(self):
        return 1e-9 * self.mesh

    @cached_property
    def tile_diameters(self):
        d = np.zeros(self.n_tiles)
        for k1 in range(self.polygons.shape[1]):
            for k2 in range(k1 + 1, self.polygons.shape[1]):
                dist = np.hypot(*(self.polygons[:, k1] - self.polygons[:, k2]).T)
                d = np.fmax(d, dist)
        return d

    def neighbors(self, t):
        return self.indices[self.indptr[t]:self.indptr[t + 1]]

    def tiles_meeting_rect(self, rect, strict=False):
        x0, y0, x1, y1 = (float(v) for v in rect)
        return np.flatnonzero(polys_intersect_rect(self.polygons, self.nverts,
                                                   x0, y0, x1, y1, self.eps, strict))

    def tiles_centered_in(self, rect):
        x0, y0, x1, y1 = rect
        e = self.eps
        c = self.centers
        m = (c[:, 0] >= x0 - e) & (c[:, 0] <= x1 + e) & (c[:, 1] >= y0 - e) & (c[:, 1] <= y1 + e)
        return np.flatnonzero(m)

    def polygon(self, t):
        return self.polygons[t, :self.nverts[t]]

    def to_json(self):
        """Debug dump: tile centers, forced states and adjacency."""
        adjacency = [self.neighbors(t).tolist() for t in range(self.n_tiles)]
        return json.dumps({
            "kind": self.kind,
            "mesh": self.mesh,
            "bbox": list(self.bbox),
            "tiles": [{"center": [round(float(x), 12), round(float(y), 12)],
                       "polygon": POLYGON_NAMES[int(pc)],
                       "forced": FORCED_NAMES[int(f)]}
                      for (x, y), pc, f in zip(self.centers, self.polygon_class, self.forced)],
            "adjacency": adjacency,
        })


def _hexagon_cells(mesh, bbox):
    rho = mesh / 2.0
    a = math.sqrt(3.0) * rho
    x0, y0, x1, y1 = bbox
    j_lo = math.floor((y0 - rho) / (1.5 * rho)) - 1
    j_hi = math.ceil((y1 + rho) / (1.5 * rho)) + 1
    js, is_ = [], []
    for j in range(j_lo, j_hi + 1):
        i_lo = math.floor((x0 - a) / a - j / 2.0) - 1
        i_hi = math.ceil((x1 + a) / a - j / 2.0) + 1
        i = np.arange(i_lo, i_hi + 1)
        is_.append(i)
        js.append(np.full(i.size, j))
    i = np.concatenate(is_).astype(np.int64)
    j = np.concatenate(js).astype(np.int64)
    # x in units of a/4, shifted by -a/4 so that vertical lines x = k*a/2
    # cross every row inside a single hexagon
    cx_int = 4 * i + 2 * j - 1
    cy_int = 3 * j              # units of rho/2
    vx = cx_int[:, None] + 2 * _HEX_OFFSETS[None, :, 0]
    vy = cy_int[:, None] + _HEX_OFFSETS[None, :, 1]
    polys = np.stack([vx * (a / 4.0), vy * (rho / 2.0)], axis=-1)
    centers = np.stack([cx_int * (a / 4.0), cy_int * (rho / 2.0)], axis=-1)
    n = i.size
    return dict(centers=centers, polys=polys, vkey=(vx, vy),
                nverts=np.full(n, 6), pclass=np.full(n, HEXAGON, dtype=np.int8),
                forced=np.zeros(n, dtype=np.int8))


def _bathroom_cells(mesh, bbox):
    ell = mesh
    x0, y0, x1, y1 = (v / ell for v in bbox)
    mx = np.arange(2 * math.floor(x0) - 2, 2 * math.ceil(x1) + 3)
    my = np.arange(2 * math.floor(y0) - 2, 2 * math.ceil(y1) + 3)
    MX, MY = np.meshgrid(mx, my, indexing="ij")
    MX = MX.ravel().astype(np.int64)
    MY = MY.ravel().astype(np.int64)
    px, py = MX % 2, MY % 2
    is_site = (px == 0) & (py == 0)
    is_face = (px == 1) & (py == 1)
    is_bond = px != py
    n = MX.size
    kmax = 8
    vxm = np.zeros((n, kmax), dtype=np.int64)
    vxs = np.zeros((n, kmax), dtype=np.int64)
    vym = np.zeros((n, kmax), dtype=np.int64)
    vys = np.zeros((n, kmax), dtype=np.int64)
    nverts = np.where(is_bond, 8, 4)
    for offsets, sel in ((_OCT_OFFSETS, is_bond), (_SQ_OFFSETS, ~is_bond)):
        k = offsets.shape[0]
        vxm[sel, :k] = MX[sel, None] + offsets[None, :, 0]
        vxs[sel, :k] = offsets[None, :, 1]
        vym[sel, :k] = MY[sel, None] + offsets[None, :, 2]
        vys[sel, :k] = offsets[None, :, 3]
    # pad squares by repeating their last vertex (ignored beyond nverts)
    for k in range(4, kmax):
        vxm[~is_bond, k] = vxm[~is_bond, 3]
        vxs[~is_bond, k] = vxs[~is_bond, 3]
        vym[~is_bond, k] = vym[~is_bond, 3]
        vys[~is_bond, k] = vys[~is_bond, 3]
    polys = np.stack([(vxm * 0.5 + vxs * _H) * ell, (vym * 0.5 + vys * _H) * ell], axis=-1)
    centers = np.stack([MX * 0.5 * ell, MY * 0.5 * ell], axis=-1)
    pclass = np.where(is_bond, OCTAGON, np.where(is_site, SITE_SQUARE, FACE_SQUARE)).astype(np.int8)
    forced = np.where(is_site, ALWAYS_OPEN, np.where(is_face, ALWAYS_CLOSED, FREE)).astype(np.int8)
    return dict(centers=centers, polys=polys, vkey=(4 * vxm + vxs, 4 * vym + vys),
                nverts=nverts, pclass=pclass, forced=forced)


def build_lattice(kind, mesh, bbox) -> Lattice:
    """Tiles of the given model meeting the interior of ``bbox`` (x0, y0, x1, y1).

    ``mesh`` bounds every tile diameter: for hexagons it is the diameter,
    for the bathroom tiling it is the bond length.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown lattice kind {kind!r}; expected one of {KINDS}")
    mesh = float(mesh)
    if not mesh > 0:
        raise ValueError(f"mesh must be positive, got {mesh}")
    bbox = tuple(float(v) for v in bbox)
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bbox {bbox}")
    if x1 - x0 < mesh - 1e-12 or y1 - y0 < mesh - 1e-12:
        raise ValueError(f"bbox {bbox} is smaller than one tile (mesh={mesh}) on a side")

    cells = _hexagon_cells(mesh, bbox) if kind == TRIANGULAR else _bathroom_cells(mesh, bbox)
    polys = np.ascontiguousarray(cells["polys"], dtype=np.float64)
    nverts = np.ascontiguousarray(cells["nverts"], dtype=np.int64)
    keep = polys_intersect_rect(polys, nverts, x0, y0, x1, y1, 1e-9 * mesh, True)
    # canonical tile order: by row then column of the center
    centers = cells["centers"][keep]
    order = np.lexsort((np.round(centers[:, 0] / mesh, 6), np.round(centers[:, 1] / mesh, 6)))
    sel = np.flatnonzero(keep)[order]
    polys = np.ascontiguousarray(polys[sel])
    nverts = nverts[sel]
    centers = np.ascontiguousarray(cells["centers"][sel])
    kx, ky = (k[sel] for k in cells["vkey"])

    kmax = polys.shape[1]
    n = sel.size
    kx0, ky0 = kx.min(), ky.min()
    span = int(ky.max() - ky0 + 1)
    flat = (kx - kx0) * span + (ky - ky0)
    valid = np.arange(kmax)[None, :] < nverts[:, None]
    uniq, inv = np.unique(flat[valid], return_inverse=True)
    tile_vertices = np.full((n, kmax), -1, dtype=np.int64)
    tile_vertices[valid] = inv
    vx_of = np.zeros(uniq.size)
    vy_of = np.zeros(uniq.size)
    vx_of[inv] = polys[..., 0][valid]
    vy_of[inv] = polys[..., 1][valid]
    vertices = np.stack([vx_of, vy_of], axis=-1)

    # edges: consecutive vertex pairs
    nxt = np.where(np.arange(kmax)[None, :] + 1 < nverts[:, None],
                   np.roll(tile_vertices, -1, axis=1), tile_vertices[:, :1])
    ea = np.minimum(tile_vertices, nxt)[valid]
    eb = np.maximum(tile_vertices, nxt)[valid]
    etile = np.broadcast_to(np.arange(n)[:, None], (n, kmax))[valid]
    ekey = ea * uniq.size + eb
    order = np.argsort(ekey, kind="stable")
    ekey, ea, eb, etile = ekey[order], ea[order], eb[order], etile[order]
    ukey, start, counts = np.unique(ekey, return_index=True, return_counts=True)
    if counts.max() > 2:
        raise RuntimeError("tiling edge shared by more than two tiles")
    two = start[counts == 2]
    one = start[counts == 1]
    ta, tb = etile[two], etile[two + 1]
    edges = np.stack([np.minimum(ta, tb), np.maximum(ta, tb), ea[two], eb[two]], axis=1)
    rim_edges = np.stack([etile[one], ea[one], eb[one]], axis=1)

    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)

    lat = Lattice(kind=kind, mesh=mesh, bbox=bbox, centers=centers, polygons=polys,
                  nverts=nverts, tile_vertices=tile_vertices, vertices=vertices,
                  polygon_class=cells["pclass"][sel], forced=cells["forced"][sel],
                  indptr=indptr, indices=dst.astype(np.int64), edges=edges,
                  rim_edges=rim_edges, boundary_map={})
    for name, seg in zip(SIDES, _bbox_sides(bbox)):
        tiles = lat.tiles_meeting_rect(seg)
        axis = 0 if seg[1] == seg[3] else 1
        lat.boundary_map[name] = tiles[np.argsort(centers[tiles, axis], kind="stable")]
    return lat


def _bbox_sides(bbox):
    x0, y0, x1, y1 = bbox
    return ((x0, y0, x1, y0), (x1, y0, x1, y1), (x0, y1, x1, y1), (x0, y0, x0, y1))


def vertex_tile_counts(lattice):
    """Number of distinct tiles at each tiling vertex."""
    tv = lattice.tile_vertices
    counts = np.zeros(lattice.vertices.shape[0], dtype=np.int64)
    for t in range(lattice.n_tiles):
        counts[np.unique(tv[t, :lattice.nverts[t]])] += 1
    return counts


# ---------------------------------------------------------------------------
# configurations

@dataclass(frozen=True)
class SeedLineage:
    master: int
    replicate: int
    generation: int = 0


@dataclass(frozen=True, eq=False)
class Configuration:
    """One sample: a bit per free tile (True = open)."""

    lattice: Lattice
    bits: np.ndarray
    p: float
    lineage: SeedLineage

    @cached_property
    def states(self):
        """Open (1) / closed (0) for every tile, forced tiles included."""
        s = (self.lattice.forced == ALWAYS_OPEN).astype(np.int8)
        s[self.lattice.free_tiles] = self.bits
        return s

    def with_states(self, states):
        states = np.asarray(states)
        return Configuration(self.lattice, states[self.lattice.free_tiles].astype(bool),
                             self.p, self.lineage)


@njit(cache=True, nogil=True)
def _draw_bits(key, tiles, p):
    out = np.empty(tiles.shape[0], dtype=np.bool_)
    for i in range(tiles.shape[0]):
        out[i] = rng.uniform(key, tiles[i]) < p
    return out


def _check_p(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


def sample_configuration(lattice, p, master_seed, replicate_index) -> Configuration:
    p = _check_p(p)
    master = rng.check_seed(master_seed, "master_seed")
    rep = rng.check_seed(replicate_index, "replicate_index")
    key = rng.stream_key(master, rep, 0, 0)
    bits = _draw_bits(key, lattice.free_tiles, p)
    return Configuration(lattice, bits, p, SeedLineage(master, rep, 0))


def constant_configuration(lattice, is_open, p=0.5) -> Configuration:
    bits = np.full(lattice.free_tiles.size, bool(is_open))
    return Configuration(lattice, bits, p, SeedLineage(0, 0, 0))


def configuration_from_states(lattice, states, p=0.5) -> Configuration:
    """Configuration whose free tiles copy ``states`` (forced tiles ignore it)."""
    states = np.asarray(states)
    return Configuration(lattice, states[lattice.free_tiles].astype(bool), p, SeedLineage(0, 0, 0))


def resample_region(config, tiles, resample_seed) -> Configuration:
    """Fresh Bernoulli(p) bits on the free tiles of ``tiles``; forced entries are ignored."""
    lat = config.lattice
    tiles = np.unique(np.asarray(tiles, dtype=np.int64))
    fidx = lat.free_index[tiles]
    tiles = tiles[fidx >= 0]
    fidx = fidx[fidx >= 0]
    lin = config.lineage
    gen = lin.generation + 1
    key = rng.stream_key(lin.master, lin.replicate, gen, rng.check_seed(resample_seed, "resample_seed"))
    bits = config.bits.copy()
    bits[fidx] = _draw_bits(key, tiles, config.p)
    return Configuration(lat, bits, config.p, SeedLineage(lin.master, lin.replicate, gen))


# ---------------------------------------------------------------------------
# curves

@dataclass(frozen=True)
class CurveSpec:
    """Polyline union alpha; ``minkowski_constant`` C(alpha) bounds the number
    of radius-s balls needed to cover alpha by C(alpha)/s for s <= total length."""

    segments: tuple
    minkowski_constant: float = None

    def __post_init__(self):
        segs = tuple(((float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
                     for a, b in self.segments)
        object.__setattr__(self, "segments", segs)
        if self.minkowski_constant is None:
            object.__setattr__(self, "minkowski_constant",
                               (0.5 + len(segs)) * self.total_length)
        if self.minkowski_constant < self.total_length / 2:
            raise ValueError("minkowski_constant must be at least total_length/2")

    @property
    def total_length(self):
        return float(sum(math.dist(a, b) for a, b in self.segments))

    @classmethod
    def segment(cls, a, b):
        return cls(((a, b),))

    def cover(self, s):
        """Centers of radius-s balls covering the curve (spacing 2s along each segment)."""
        centers = []
        for a, b in self.segments:
            length = math.dist(a, b)
            k = max(1, math.ceil(length / (2 * s)))
            for i in range(k):
                u = (i + 0.5) / k
                centers.append((a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])))
        return np.array(centers).reshape(-1, 2)

    def distance_to_point(self, x, y):
        best = math.inf
        for (ax, ay), (bx, by) in self.segments:
            dx, dy = bx - ax, by - ay
            ll = dx * dx + dy * dy
            u = 0.0 if ll == 0 else min(1.0, max(0.0, ((x - ax) * dx + (y - ay) * dy) / ll))
            best = min(best, math.hypot(x - ax - u * dx, y - ay - u * dy))
        return best


def tile_curve_distances(lattice, curve):
    d = np.full(lattice.n_tiles, np.inf)
    for (ax, ay), (bx, by) in curve.segments:
        d = np.minimum(d, polys_segment_distance(lattice.polygons, lattice.nverts, ax, ay, bx, by))
    return d


def tiles_near_curve(lattice, curve, s):
    """Tiles whose polygon lies at distance < s from the curve."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    return np.flatnonzero(tile_curve_distances(lattice, curve) < s)
