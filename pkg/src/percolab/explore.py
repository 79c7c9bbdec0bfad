"""Interfaces with boundary conditions, lowest crossings and pivotal tiles.

Boundary conditions are imposed on a ring of tiles just outside the quad:
every tile adjacent to [Q] but not in it takes the colour of its nearest
side.  The interface is the set of tiling edges between the open cluster of
the open ring arc and the closed cluster of the closed ring arc.  Since at
most three tiles meet at a vertex, these edges form simple vertex paths.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .connectivity import CLOSED, HORIZONTAL, OPEN, TileCurve, has_crossing, quad_tiles

FORCED_OPEN = "forced-open"
FORCED_CLOSED = "forced-closed"
FREE_SIDE = "free"


@dataclass(frozen=True)
class BoundaryCondition:
    sides: tuple   # one of FORCED_OPEN / FORCED_CLOSED / FREE_SIDE per quad side 0..3

    def __post_init__(self):
        s = tuple(self.sides)
        if len(s) != 4 or any(v not in (FORCED_OPEN, FORCED_CLOSED, FREE_SIDE) for v in s):
            raise ValueError(f"need four side conditions, got {s}")
        object.__setattr__(self, "sides", s)

    @classmethod
    def dobrushin(cls):
        return cls((FORCED_OPEN, FORCED_CLOSED, FORCED_CLOSED, FORCED_CLOSED))

    def color_changes(self):
        """Indices i with side i and side i+1 of different forced colours."""
        return [i for i in range(4) if self.sides[i] != self.sides[(i + 1) % 4]]


def _ring(lattice, region):
    src = np.repeat(np.arange(lattice.n_tiles), np.diff(lattice.indptr))
    ring = np.zeros(lattice.n_tiles, dtype=np.bool_)
    ring[lattice.indices[region[src]]] = True
    ring &= ~region
    return ring


def ring_sides(lattice, quad, side_colors=(OPEN, CLOSED, CLOSED, CLOSED)):
    """Ring tiles around [Q] and the side index (0..3) each one copies; -1 off the ring.

    A ring tile copies the side whose outer half-plane holds its centre.  A
    diagonal corner tile lies beyond two sides and takes a closed one, so the
    open boundary arc never shields the corner tiles of [Q] from the interface.
    """
    qt = quad_tiles(lattice, quad)
    ring = _ring(lattice, qt.region)
    ids = np.flatnonzero(ring)
    cx, cy = lattice.centers[ids, 0], lattice.centers[ids, 1]
    x0, y0, x1, y1 = quad.rect
    e = lattice.eps
    left, bottom, right, top = cx < x0 - e, cy < y0 - e, cx > x1 + e, cy > y1 + e
    beyond = np.stack([left, bottom, right, top] if quad.orientation == HORIZONTAL
                      else [bottom, right, top, left])
    closed = np.array([col == CLOSED for col in side_colors])[:, None]
    pick = np.where((beyond & closed).any(axis=0), np.argmax(beyond & closed, axis=0),
                    np.argmax(beyond, axis=0))
    side = np.full(lattice.n_tiles, -1, dtype=np.int64)
    side[ids] = pick
    for k in range(4):
        if not (side == k).any():
            raise ValueError(f"quad {quad.rect} must lie at least one tile inside the lattice")
    return ring, side


def _augmented(config, quad, side_colors):
    lat = config.lattice
    qt = quad_tiles(lat, quad)
    ring, side = ring_sides(lat, quad, side_colors)
    st = config.states.copy()
    ids = np.flatnonzero(ring)
    st[ids] = np.asarray(side_colors, dtype=np.int8)[side[ids]]
    allowed = qt.region | ring
    return qt, ring, side, st, allowed


def _component(lat, st, allowed, src, color):
    sc = K.Scratch(lat.n_tiles)
    tag = sc.next_tag()
    K.bfs_component(lat.indptr, lat.indices, st, allowed, src, int(color), sc.mark, tag, sc.queue)
    return sc.mark == tag


def _interface_paths(lat, o_mask, c_mask):
    """Vertex paths along edges between o_mask and c_mask tiles.

    Returns a list of ``(vertices, open_tiles, closed_tiles)``; the open and
    closed tile lists give, for each edge of the path, the tile on either side.
    """
    e = lat.edges
    sel = (o_mask[e[:, 0]] & c_mask[e[:, 1]]) | (c_mask[e[:, 0]] & o_mask[e[:, 1]])
    es = e[sel]
    adj = {}
    for k, (a, b, v0, v1) in enumerate(es):
        adj.setdefault(int(v0), []).append(k)
        adj.setdefault(int(v1), []).append(k)
    used = np.zeros(len(es), dtype=bool)
    paths = []
    ends = sorted(v for v, ks in adj.items() if len(ks) == 1)
    starts = ends + sorted(adj)
    for v in starts:
        if all(used[k] for k in adj[v]):
            continue
        verts, opens, closes = [v], [], []
        cur = v
        while True:
            nxt = [k for k in adj[cur] if not used[k]]
            if not nxt:
                break
            k = nxt[0]
            used[k] = True
            a, b, v0, v1 = (int(x) for x in es[k])
            cur = v1 if v0 == cur else v0
            verts.append(cur)
            opens.append(a if o_mask[a] else b)
            closes.append(b if o_mask[a] else a)
        paths.append((verts, opens, closes))
    return paths


def _corner_point(quad, i):
    """Corner shared by side i and side i+1."""
    x0, y0, x1, y1 = quad.side_segments()[i]
    u0, v0, u1, v1 = quad.side_segments()[(i + 1) % 4]
    for p in ((x0, y0), (x1, y1)):
        if p in ((u0, v0), (u1, v1)):
            return p
    raise AssertionError("sides do not meet")


def _path_nearest(lat, paths, point):
    best, best_d, flip = None, np.inf, False
    for p in paths:
        for end, rev in ((p[0][0], False), (p[0][-1], True)):
            d = np.hypot(*(lat.vertices[end] - np.asarray(point)))
            if d < best_d:
                best, best_d, flip = p, d, rev
    if best is None:
        return None
    if flip:
        return best[0][::-1], best[1][::-1], best[2][::-1]
    return best


def interface_between(config, quad, side_colors, start_corner):
    """Interface from the ring corner ``start_corner`` for ring colours ``side_colors``."""
    lat = config.lattice
    qt, ring, side, st, allowed = _augmented(config, quad, side_colors)
    ring_open = ring & (st == OPEN)
    ring_closed = ring & (st == CLOSED)
    o_mask = _component(lat, st, allowed, ring_open, OPEN)
    c_mask = _component(lat, st, allowed, ring_closed, CLOSED)
    paths = _interface_paths(lat, o_mask, c_mask)
    return _path_nearest(lat, paths, _corner_point(quad, start_corner)), o_mask, c_mask


def trace_interface(config, quad, bc: BoundaryCondition) -> TileCurve:
    """Vertex path of the interface between the two colour-change corners."""
    if FREE_SIDE in bc.sides:
        raise ValueError("trace_interface needs every side forced open or closed")
    changes = bc.color_changes()
    if len(changes) != 2:
        raise ValueError(f"boundary condition must have exactly two colour-change corners, got {len(changes)}")
    colors = [OPEN if s == FORCED_OPEN else CLOSED for s in bc.sides]
    start = changes[0] if colors[changes[0]] == OPEN else changes[1]
    path, _, _ = interface_between(config, quad, colors, start)
    return TileCurve(tuple(path[0]), kind="vertices")


def dobrushin_interface(config, quad):
    """Interface vertices and its edges' adjacent tiles for the Dobrushin condition."""
    path, _, _ = interface_between(config, quad, [OPEN, CLOSED, CLOSED, CLOSED], 0)
    return path


# ---------------------------------------------------------------------------
# lowest crossing

def _loop_erase(tiles):
    out = []
    pos = {}
    for t in tiles:
        if t in pos:
            for u in out[pos[t] + 1:]:
                del pos[u]
            out = out[:pos[t] + 1]
        else:
            pos[t] = len(out)
            out.append(t)
    return out


def _crossing_candidates(lattice, tiles, start_mask, end_mask):
    """Loop-erased open paths ending at the first end_mask tile of ``tiles``.

    The walk jumps between non-adjacent tiles where it follows the boundary
    arc, so only the contiguous piece that reaches end_mask is used; each
    start_mask tile of that piece gives one candidate.
    """
    first_end = next((i for i, t in enumerate(tiles) if end_mask[t]), None)
    if first_end is None:
        return []
    lo = first_end
    while lo > 0 and tiles[lo - 1] in set(lattice.neighbors(tiles[lo]).tolist()) | {tiles[lo]}:
        lo -= 1
    return [_loop_erase(tiles[i:first_end + 1]) for i in range(lo, first_end + 1) if start_mask[tiles[i]]]


def below_region(lattice, region, gamma, side1):
    """gamma plus the tiles of region \\ gamma joined to side1 inside region \\ gamma."""
    g = np.zeros(lattice.n_tiles, dtype=np.bool_)
    g[list(gamma)] = True
    rest = region & ~g
    ones = np.ones(lattice.n_tiles, dtype=np.int8)
    reach = _component(lattice, ones, rest, side1 & rest, 1)
    return reach | g


def lowest_crossing(config, quad):
    """Open crossing closest to side 1, with the region M on or below it, or None."""
    if not has_crossing(config, quad, OPEN):
        return None
    lat = config.lattice
    qt = quad_tiles(lat, quad)
    path, o_mask, _ = interface_between(config, quad, [OPEN, CLOSED, OPEN, CLOSED], 0)
    opens = [t for t in path[1] if qt.region[t]]
    cands = _crossing_candidates(lat, opens, qt.sides[0], qt.sides[2])
    if not cands:
        raise RuntimeError("interface walk did not produce a crossing")
    best = None
    for gamma in cands:
        m = below_region(lat, qt.region, gamma, qt.sides[1])
        if best is None or m.sum() < best[1].sum():
            best = (gamma, m)
    return TileCurve(tuple(best[0])), best[1]


# ---------------------------------------------------------------------------
# pivotality

@dataclass(frozen=True)
class PivotalReport:
    tiles: tuple
    quad: object
    crossed_if_open: bool
    crossed_if_closed: bool
    arms: int

    @property
    def pivotal(self):
        return self.crossed_if_open != self.crossed_if_closed


def four_arm_certificate(config, quad, tiles):
    """Number of side arms (open to sides 0/2, closed to sides 1/3) reaching ``tiles``
    from outside them; pivotal iff all four exist on a conforming quad."""
    lat = config.lattice
    qt = quad_tiles(lat, quad)
    reg = np.zeros(lat.n_tiles, dtype=np.bool_)
    reg[list(tiles)] = True
    rest = qt.region & ~reg
    nbr = np.zeros(lat.n_tiles, dtype=np.bool_)
    for t in tiles:
        nbr[lat.neighbors(t)] = True
    count = 0
    for side, color in ((0, OPEN), (1, CLOSED), (2, OPEN), (3, CLOSED)):
        if (reg & qt.sides[side]).any():
            count += 1
            continue
        comp = _component(lat, config.states, rest, qt.sides[side] & rest, color)
        count += bool((comp & nbr).any())
    return count


def is_pivotal(config, quad, tiles) -> PivotalReport:
    """Crossing with ``tiles`` all open vs all closed (forced tiles are left alone)."""
    lat = config.lattice
    tiles = tuple(int(t) for t in np.atleast_1d(tiles))
    free = [t for t in tiles if lat.forced[t] == 0]
    st = config.states
    a = st.copy()
    a[free] = 1
    b = st.copy()
    b[free] = 0
    sc = K.Scratch(lat.n_tiles)
    cross_open = _cross(lat, a, quad, sc)
    cross_closed = _cross(lat, b, quad, sc)
    arms = four_arm_certificate(config, quad, free) if free and cross_open != cross_closed else 0
    return PivotalReport(tiles, quad, cross_open, cross_closed, arms)


def _cross(lat, states, quad, sc=None):
    qt = quad_tiles(lat, quad)
    if qt.degenerate:
        return False
    sc = sc or K.Scratch(lat.n_tiles)
    return bool(K.bfs_reaches(lat.indptr, lat.indices, states, qt.region, qt.sides[0], qt.sides[2],
                              OPEN, sc.mark, sc.next_tag(), sc.queue))


def pivotal_set(config, quad):
    """Free tiles whose flip changes the open 0<->2 crossing (via cluster labels and duality)."""
    lat = config.lattice
    qt = quad_tiles(lat, quad)
    st = config.states
    crossed = _cross(lat, st, quad)
    # crossed: closing t must join the closed clusters of sides 1 and 3;
    # not crossed: opening t must join the open clusters of sides 0 and 2
    color, sa, sb = (CLOSED, 1, 3) if crossed else (OPEN, 0, 2)
    labels = K.union_find_labels(lat.indptr, lat.indices, st, qt.region, color)
    la = set(np.unique(labels[qt.sides[sa] & (labels >= 0)]).tolist())
    lb = set(np.unique(labels[qt.sides[sb] & (labels >= 0)]).tolist())
    out = []
    cand = np.flatnonzero(qt.region & (lat.forced == 0) & (st != color))
    for t in cand:
        nl = set(labels[lat.neighbors(t)].tolist())
        nl.discard(-1)
        hit_a = qt.sides[sa][t] or bool(nl & la)
        hit_b = qt.sides[sb][t] or bool(nl & lb)
        if hit_a and hit_b:
            out.append(int(t))
    return np.array(out, dtype=np.int64)


def curves_to_json(lattice, curves):
    """Polyline list for plotting tools."""
    return json.dumps([c.polyline(lattice) for c in curves])
