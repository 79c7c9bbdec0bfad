import itertools
from collections import deque

import numpy as np
import pytest
from shapely.geometry import LineString, Polygon, box

from percolab.tiling import build_lattice


def shapely_polys(lattice):
    return [Polygon(lattice.polygon(t)) for t in range(lattice.n_tiles)]


def shapely_adjacency(lattice):
    """Tiles sharing a boundary segment of positive length."""
    polys = shapely_polys(lattice)
    adj = [set() for _ in polys]
    tol = 1e-9 * lattice.mesh
    for a, b in itertools.combinations(range(len(polys)), 2):
        if polys[a].distance(polys[b]) > tol:
            continue
        inter = polys[a].buffer(tol).intersection(polys[b].buffer(tol))
        if inter.area > 0 and inter.length > 4 * tol + lattice.mesh * 1e-3:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def oracle_region(lattice, rect):
    polys = shapely_polys(lattice)
    r = box(*rect)
    tol = 1e-9 * lattice.mesh
    region = {t for t, p in enumerate(polys) if p.distance(r) <= tol}
    x0, y0, x1, y1 = rect
    segs = [LineString([(x0, y0), (x0, y1)]), LineString([(x0, y0), (x1, y0)]),
            LineString([(x1, y0), (x1, y1)]), LineString([(x0, y1), (x1, y1)])]
    sides = [{t for t in region if polys[t].distance(s) <= tol} for s in segs]
    return region, sides


def oracle_reach(adj, states, region, src, dst, color):
    seen = {t for t in src if t in region and states[t] == color}
    q = deque(seen)
    while q:
        t = q.popleft()
        if t in dst:
            return True
        for u in adj[t]:
            if u not in seen and u in region and states[u] == color:
                seen.add(u)
                q.append(u)
    return False


def oracle_components(adj, states, region, color):
    comp = {}
    k = 0
    for t in sorted(region):
        if t in comp or states[t] != color:
            continue
        comp[t] = k
        q = deque([t])
        while q:
            a = q.popleft()
            for u in adj[a]:
                if u in region and u not in comp and states[u] == color:
                    comp[u] = k
                    q.append(u)
        k += 1
    return comp


def all_colorings(lattice, free):
    """Yield full state vectors for every colouring of ``free`` (others closed unless forced open)."""
    base = (lattice.forced == 1).astype(np.int8)
    free = np.asarray(free)
    for bits in itertools.product((0, 1), repeat=len(free)):
        st = base.copy()
        st[free] = bits
        yield st


@pytest.fixture(scope="session")
def small_lattices():
    return {kind: build_lattice(kind, 1.0, (-2.0, -2.0, 6.0, 6.0))
            for kind in ("square-bond", "triangular-site")}


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
