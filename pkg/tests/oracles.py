"""Brute-force references for the exploration routines."""
from collections import deque

import numpy as np

from conftest import oracle_components, oracle_reach


def simple_crossings(adj, states, region, src, dst, limit=200000):
    """All simple open paths from a src tile to a dst tile that touch dst only at the end."""
    out = []

    def dfs(path, seen):
        t = path[-1]
        if t in dst:
            out.append(tuple(path))
            return
        if len(out) >= limit:
            return
        for u in adj[t]:
            if u in region and u not in seen and states[u] == 1:
                seen.add(u)
                path.append(u)
                dfs(path, seen)
                path.pop()
                seen.discard(u)

    for s in sorted(src):
        if s in region and states[s] == 1:
            dfs([s], {s})
    return out


def below(adj, region, gamma, side1):
    g = set(gamma)
    rest = region - g
    seen = {t for t in side1 if t in rest}
    q = deque(seen)
    while q:
        t = q.popleft()
        for u in adj[t]:
            if u in rest and u not in seen:
                seen.add(u)
                q.append(u)
    return seen | g


def _below_mask(nbr, full, g, side1):
    rest = full & ~g
    reach = side1 & rest
    while True:
        grow = reach
        m = reach
        while m:
            low = m & -m
            grow |= nbr[low.bit_length() - 1]
            m ^= low
        grow &= rest
        if grow == reach:
            return reach | g
        reach = grow


def lowest_region(adj, states, region, sides):
    """Smallest below-region over all open crossings, and all candidate regions."""
    paths = simple_crossings(adj, states, region, sides[0], sides[2])
    if not paths:
        return None, []
    # bitmask flood fill over the region tiles
    order = sorted(region)
    bit = {t: 1 << i for i, t in enumerate(order)}
    nbr = [sum(bit[u] for u in adj[t] if u in bit) for t in order]
    full = (1 << len(order)) - 1
    side1 = sum(bit[t] for t in sides[1] if t in bit)
    masks = {}
    for p in paths:
        g = sum(bit[t] for t in p)
        if g not in masks:
            masks[g] = _below_mask(nbr, full, g, side1)
    regions = [frozenset(t for t in order if m & bit[t]) for m in set(masks.values())]
    return min(regions, key=len), regions


def pivotal_tiles(adj, states, region, sides, free):
    """Free tiles of region whose flip changes the open side 0 to side 2 crossing."""
    base = oracle_reach(adj, states, region, sides[0], sides[2], 1)
    out = set()
    for t in free:
        st = states.copy()
        st[t] = 1 - st[t]
        if oracle_reach(adj, st, region, sides[0], sides[2], 1) != base:
            out.add(int(t))
    return out


def annulus_parts(lat, ann, adj):
    """Region, inner and outer boundary tiles of a square annulus by centre distance."""
    zx, zy = ann.center
    d = np.maximum(np.abs(lat.centers[:, 0] - zx), np.abs(lat.centers[:, 1] - zy))
    hole = set(np.flatnonzero(d < ann.r).tolist())
    region = set(np.flatnonzero((d >= ann.r) & (d <= ann.R)).tolist())
    outside = set(np.flatnonzero(d > ann.R).tolist())
    inner = {t for t in region if adj[t] & hole}
    outer = {t for t in region if adj[t] & outside}
    return region, inner, outer


def crossing_clusters(adj, states, region, inner, outer, color):
    comp = oracle_components(adj, states, region, color)
    ins = {comp[t] for t in inner if t in comp}
    outs = {comp[t] for t in outer if t in comp}
    return ins & outs
