"""Clusters, quad crossings and open/closed duality on tile graphs."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import _kernels as K
from .tiling import SQUARE_BOND

OPEN = 1
CLOSED = 0
HORIZONTAL = "horizontal"
VERTICAL = "vertical"


class DegenerateQuadWarning(UserWarning):
    pass


class NonConformingQuadWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Quad:
    """Axis-aligned rectangle with marked sides.

    Sides are numbered counter-clockwise starting from the first side of the
    crossed pair: for a horizontal quad ``0=left, 1=bottom, 2=right, 3=top``;
    for a vertical quad ``0=bottom, 1=right, 2=top, 3=left``.
    """

    rect: tuple
    orientation: str = HORIZONTAL

    def __post_init__(self):
        r = tuple(float(v) for v in self.rect)
        object.__setattr__(self, "rect", r)
        if not (r[0] < r[2] and r[1] < r[3]):
            raise ValueError(f"quad needs x0<x1 and y0<y1, got {r}")
        if self.orientation not in (HORIZONTAL, VERTICAL):
            raise ValueError(f"orientation must be horizontal or vertical, got {self.orientation!r}")

    @property
    def width(self):
        return self.rect[2] - self.rect[0]

    @property
    def height(self):
        return self.rect[3] - self.rect[1]

    def side_segments(self):
        """Segments (x0, y0, x1, y1) of sides 0..3."""
        x0, y0, x1, y1 = self.rect
        left, bottom = (x0, y0, x0, y1), (x0, y0, x1, y0)
        right, top = (x1, y0, x1, y1), (x0, y1, x1, y1)
        if self.orientation == HORIZONTAL:
            return (left, bottom, right, top)
        return (bottom, right, top, left)

    def crossing_interval(self):
        x0, y0, x1, y1 = self.rect
        return (x0, x1) if self.orientation == HORIZONTAL else (y0, y1)

    def transverse_interval(self):
        x0, y0, x1, y1 = self.rect
        return (y0, y1) if self.orientation == HORIZONTAL else (x0, x1)

    def rotated(self):
        """Same rectangle with the other side pair crossed (sides shifted by one)."""
        return Quad(self.rect, VERTICAL if self.orientation == HORIZONTAL else HORIZONTAL)


@dataclass(frozen=True)
class TileCurve:
    """Ordered tile path (``kind='tiles'``) or tiling-vertex path (``kind='vertices'``)."""

    items: tuple
    kind: str = "tiles"

    def __len__(self):
        return len(self.items)

    def polyline(self, lattice):
        pts = lattice.centers if self.kind == "tiles" else lattice.vertices
        return [[float(x), float(y)] for x, y in pts[list(self.items)]]


@dataclass(frozen=True, eq=False)
class QuadTiles:
    region: np.ndarray
    sides: tuple
    conforming: bool

    @cached_property
    def degenerate(self):
        return any(not s.any() for s in self.sides)


@lru_cache(maxsize=512)
def quad_tiles(lattice, quad) -> QuadTiles:
    """Tiles meeting [Q] and each closed side segment."""
    if not (lattice.bbox[0] - lattice.eps <= quad.rect[0] and lattice.bbox[1] - lattice.eps <= quad.rect[1]
            and quad.rect[2] <= lattice.bbox[2] + lattice.eps
            and quad.rect[3] <= lattice.bbox[3] + lattice.eps):
        raise ValueError(f"quad {quad.rect} is not inside the lattice bbox {lattice.bbox}")
    n = lattice.n_tiles
    region = np.zeros(n, dtype=np.bool_)
    region[lattice.tiles_meeting_rect(quad.rect)] = True
    sides = []
    for seg in quad.side_segments():
        m = np.zeros(n, dtype=np.bool_)
        m[lattice.tiles_meeting_rect(seg)] = True
        m &= region
        m.flags.writeable = False
        sides.append(m)
    region.flags.writeable = False
    return QuadTiles(region, tuple(sides), is_conforming(lattice, quad))


def _grid_steps(lattice_kind, mesh):
    """Spacings (dx, dy) of the conforming grid lines."""
    if lattice_kind == SQUARE_BOND:
        return mesh, mesh
    # hexagon rows are 3/4 mesh apart; vertical lines k*a/2 (a = sqrt(3)/2 mesh)
    # meet exactly one hexagon per row
    return math.sqrt(3) * mesh / 4, 0.75 * mesh


def is_conforming(lattice, quad):
    """Sides on conforming grid lines: sites (square-bond) or single-hexagon lines."""
    dx, dy = _grid_steps(lattice.kind, lattice.mesh)
    tol = 1e-7
    x0, y0, x1, y1 = quad.rect
    return (all(abs(v / dx - round(v / dx)) < tol for v in (x0, x1))
            and all(abs(v / dy - round(v / dy)) < tol for v in (y0, y1)))


def snap_quad(lattice_or_kind, mesh_or_rect, rect=None, orientation=HORIZONTAL):
    """Nearest conforming quad: ``snap_quad(lattice, rect)`` or ``snap_quad(kind, mesh, rect)``."""
    bbox = None
    if rect is None:
        kind, mesh, rect = lattice_or_kind.kind, lattice_or_kind.mesh, mesh_or_rect
        bbox = lattice_or_kind.bbox
    else:
        kind, mesh = lattice_or_kind, float(mesh_or_rect)
    dx, dy = _grid_steps(kind, mesh)
    x0, y0, x1, y1 = rect
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"rect {tuple(rect)} must satisfy x0 < x1 and y0 < y1")
    sx0, sx1 = round(x0 / dx) * dx, round(x1 / dx) * dx
    sy0, sy1 = round(y0 / dy) * dy, round(y1 / dy) * dy
    if bbox is not None:
        # stay inside the lattice: step inward instead of rounding past its edge
        tol = 1e-9 * mesh
        if sx0 < bbox[0] - tol:
            sx0 += dx
        if sy0 < bbox[1] - tol:
            sy0 += dy
        if sx1 > bbox[2] + tol:
            sx1 -= dx
        if sy1 > bbox[3] + tol:
            sy1 -= dy
    if sx1 <= sx0:
        sx1 = sx0 + dx
    if sy1 <= sy0:
        sy1 = sy0 + dy
    return Quad((sx0, sy0, sx1, sy1), orientation)


def _region_mask(lattice, region):
    if region is None:
        return np.ones(lattice.n_tiles, dtype=np.bool_)
    region = np.asarray(region)
    if region.dtype == np.bool_:
        return region
    m = np.zeros(lattice.n_tiles, dtype=np.bool_)
    m[region] = True
    return m


def clusters(config, color, region=None):
    """Union-find labels of `color` tiles inside region (-1 for other tiles)."""
    lat = config.lattice
    region = _region_mask(lat, region)
    if not region.any():
        raise ValueError("region must be nonempty")
    return K.union_find_labels(lat.indptr, lat.indices, config.states, region, int(color))


def _states(config_or_states):
    return config_or_states.states if hasattr(config_or_states, "states") else config_or_states


def crossing_between(lattice, states, region, src, dst, color, scratch=None):
    scratch = scratch or K.Scratch(lattice.n_tiles)
    return bool(K.bfs_reaches(lattice.indptr, lattice.indices, states, region, src, dst,
                              int(color), scratch.mark, scratch.next_tag(), scratch.queue))


def has_crossing(config, quad, color=OPEN, scratch=None):
    """A `color` cluster of the tiles meeting [Q] joins side 0 to side 2."""
    lat = config.lattice
    qt = quad_tiles(lat, quad)
    if qt.degenerate:
        warnings.warn(f"degenerate quad {quad.rect}: a side meets no tiles", DegenerateQuadWarning)
        return False
    return crossing_between(lat, _states(config), qt.region, qt.sides[0], qt.sides[2], color, scratch)


def has_dual_crossing(config, quad, color=CLOSED, scratch=None):
    """A `color` cluster joining sides 1 and 3."""
    return has_crossing(config, quad.rotated(), color, scratch)


def crossing_witness(config, quad, color=OPEN):
    """Tile path realizing the crossing, or None."""
    lat = config.lattice
    qt = quad_tiles(lat, quad)
    if qt.degenerate:
        return None
    sc = K.Scratch(lat.n_tiles)
    path = K.bfs_path(lat.indptr, lat.indices, _states(config), qt.region, qt.sides[0],
                      qt.sides[2], int(color), sc.mark, sc.next_tag(), sc.queue, sc.parent)
    if path.size == 0:
        return None
    return TileCurve(tuple(int(t) for t in path))


def check_duality(config, quad):
    """Open 0<->2 crossing XOR closed 1<->3 crossing (always True on conforming quads)."""
    qt = quad_tiles(config.lattice, quad)
    if not qt.conforming:
        warnings.warn(f"quad {quad.rect} is not conforming; duality is only approximate",
                      NonConformingQuadWarning)
    sc = K.Scratch(config.lattice.n_tiles)
    return has_crossing(config, quad, OPEN, sc) != has_dual_crossing(config, quad, CLOSED, sc)


def crossing_matrix(lattice, quads, p, master, n, threads=1, color=OPEN, chunk=1024):
    """Crossing bits (n, len(quads)) for replicates 0..n-1 of ``sample_configuration(lattice, p, master, i)``."""
    from . import rng
    from .parallel import map_replicates

    quads = list(quads)
    n_t = lattice.n_tiles
    k = len(quads)
    regions = np.zeros((k, n_t), dtype=np.bool_)
    srcs = np.zeros((k, n_t), dtype=np.bool_)
    dsts = np.zeros((k, n_t), dtype=np.bool_)
    for i, q in enumerate(quads):
        qt = quad_tiles(lattice, q)
        if qt.degenerate:
            warnings.warn(f"degenerate quad {q.rect}: a side meets no tiles", DegenerateQuadWarning)
            continue
        regions[i], srcs[i], dsts[i] = qt.region, qt.sides[0], qt.sides[2]
    union = regions.any(axis=0) if k else np.zeros(n_t, dtype=np.bool_)
    master = np.uint64(rng.check_seed(master))
    if k == 0:
        return np.zeros((int(n), 0), dtype=np.bool_)

    def run(a, b):
        return K.crossing_chunk(lattice.indptr, lattice.indices, lattice.forced, union, regions,
                                srcs, dsts, int(color), master, float(p), a, b)
    out = map_replicates(run, n, threads, chunk)
    return out.reshape(-1, k).astype(np.bool_)
