"""Numba kernels over the CSR tile graph.

Conventions: ``state`` is int8 (1 open, 0 closed); ``region``, ``src`` and
``dst`` are boolean masks over all tiles.  BFS scratch uses a stamp array
``mark`` and an integer ``tag`` so repeated searches never clear memory.
"""
import numpy as np
from numba import njit

from . import rng


class Scratch:
    """Per-call BFS scratch buffers for a lattice of ``n`` tiles."""

    def __init__(self, n):
        self.mark = np.zeros(n, dtype=np.int64)
        self.mark2 = np.zeros(n, dtype=np.int64)
        self.queue = np.empty(n, dtype=np.int64)
        self.parent = np.empty(n, dtype=np.int64)
        self.tag = 0

    def next_tag(self):
        self.tag += 1
        return self.tag


@njit(cache=True, nogil=True)
def bfs_reaches(indptr, indices, state, region, src, dst, color, mark, tag, queue):
    """True iff a `color` path inside `region` joins a src tile to a dst tile."""
    head = 0
    tail = 0
    n = state.shape[0]
    for t in range(n):
        if src[t] and region[t] and state[t] == color:
            if dst[t]:
                return True
            mark[t] = tag
            queue[tail] = t
            tail += 1
    while head < tail:
        t = queue[head]
        head += 1
        for k in range(indptr[t], indptr[t + 1]):
            u = indices[k]
            if mark[u] != tag and region[u] and state[u] == color:
                if dst[u]:
                    return True
                mark[u] = tag
                queue[tail] = u
                tail += 1
    return False


@njit(cache=True, nogil=True)
def bfs_path(indptr, indices, state, region, src, dst, color, mark, tag, queue, parent):
    """Shortest `color` path (tile indices) from src to dst inside region, or empty."""
    head = 0
    tail = 0
    n = state.shape[0]
    end = -1
    for t in range(n):
        if src[t] and region[t] and state[t] == color:
            mark[t] = tag
            parent[t] = -1
            queue[tail] = t
            tail += 1
            if dst[t] and end < 0:
                end = t
    while head < tail and end < 0:
        t = queue[head]
        head += 1
        for k in range(indptr[t], indptr[t + 1]):
            u = indices[k]
            if mark[u] != tag and region[u] and state[u] == color:
                mark[u] = tag
                parent[u] = t
                queue[tail] = u
                tail += 1
                if dst[u]:
                    end = u
                    break
    if end < 0:
        return np.empty(0, dtype=np.int64)
    length = 0
    t = end
    while t >= 0:
        length += 1
        t = parent[t]
    out = np.empty(length, dtype=np.int64)
    t = end
    for i in range(length - 1, -1, -1):
        out[i] = t
        t = parent[t]
    return out


@njit(cache=True, nogil=True)
def bfs_component(indptr, indices, state, region, src, color, mark, tag, queue):
    """Tiles of `color` in region connected to src; returns (queue prefix length).

    After the call ``queue[:length]`` lists the component and ``mark == tag``
    flags it.
    """
    tail = 0
    head = 0
    n = state.shape[0]
    for t in range(n):
        if src[t] and region[t] and state[t] == color:
            mark[t] = tag
            queue[tail] = t
            tail += 1
    while head < tail:
        t = queue[head]
        head += 1
        for k in range(indptr[t], indptr[t + 1]):
            u = indices[k]
            if mark[u] != tag and region[u] and state[u] == color:
                mark[u] = tag
                queue[tail] = u
                tail += 1
    return tail


@njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def union_find_labels(indptr, indices, state, region, color):
    """Cluster labels 0..k-1 for region tiles of `color` (-1 elsewhere).

    Labels are numbered in order of the smallest tile index of each cluster.
    """
    n = state.shape[0]
    parent = np.arange(n)
    for t in range(n):
        if not (region[t] and state[t] == color):
            continue
        for k in range(indptr[t], indptr[t + 1]):
            u = indices[k]
            if u > t and region[u] and state[u] == color:
                ru = _find(parent, u)
                rt = _find(parent, t)
                if ru != rt:
                    if ru < rt:
                        parent[rt] = ru
                    else:
                        parent[ru] = rt
    labels = np.full(n, -1, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    count = 0
    for t in range(n):
        if region[t] and state[t] == color:
            r = _find(parent, t)
            if root_label[r] < 0:
                root_label[r] = count
                count += 1
            labels[t] = root_label[r]
    return labels


@njit(cache=True, nogil=True)
def fill_states(state, tiles, forced, key, p):
    """Sample the listed tiles into ``state`` (forced tiles keep their value)."""
    for i in range(tiles.shape[0]):
        t = tiles[i]
        f = forced[t]
        if f == 1:
            state[t] = 1
        elif f == -1:
            state[t] = 0
        else:
            state[t] = 1 if rng.uniform(key, t) < p else 0


@njit(cache=True, nogil=True)
def tile_state(forced, key, t, p):
    f = forced[t]
    if f == 1:
        return 1
    if f == -1:
        return 0
    return 1 if rng.uniform(key, t) < p else 0


@njit(cache=True, nogil=True)
def crossing_chunk(indptr, indices, forced, union, regions, srcs, dsts, color, master, p, start, stop):
    """Crossing bits of several quads for replicates start..stop-1.

    ``regions``/``srcs``/``dsts`` are (k, n) masks; states are drawn from the
    stream of ``sample_configuration(lattice, p, master, rep)`` on ``union``.
    """
    n = forced.shape[0]
    k = regions.shape[0]
    state = np.zeros(n, dtype=np.int8)
    mark = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    ids = np.flatnonzero(union)
    out = np.zeros((stop - start, k), dtype=np.bool_)
    tag = 0
    for rep in range(start, stop):
        key = rng.derive_key(master, rep, 0, 0)
        for i in range(ids.shape[0]):
            t = ids[i]
            state[t] = tile_state(forced, key, t, p)
        for q in range(k):
            tag += 1
            out[rep - start, q] = bfs_reaches(indptr, indices, state, regions[q], srcs[q], dsts[q],
                                              color, mark, tag, queue)
    return out
