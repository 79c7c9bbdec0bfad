"""Partial order on rectangular quads, crossing vectors and perturbation stability.

``Q1 <= Q2`` means every crossing of Q2 contains a crossing of Q1.  For
rectangles with the same orientation this holds when Q2 is longer in the
crossing direction and Q1 is wider in the transverse direction.  On a
lattice the transverse slack must be at least one mesh so that every tile of
a Q2 crossing that meets Q1's crossing band also meets [Q1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .connectivity import HORIZONTAL, OPEN, Quad, crossing_matrix, has_crossing, quad_tiles, snap_quad
from .stats import estimate
from .tiling import TRIANGULAR, build_lattice, configuration_from_states

LEQ, NOT_LEQ, UNKNOWN = 1, 0, -1


def _contains(outer, inner, tol=1e-12):
    return outer[0] <= inner[0] + tol and inner[1] <= outer[1] + tol


def _nested(q1, q2, slack):
    if q1.orientation != q2.orientation:
        return False
    c1, c2 = q1.crossing_interval(), q2.crossing_interval()
    t1, t2 = q1.transverse_interval(), q2.transverse_interval()
    return (_contains(c2, c1) and t1[0] <= t2[0] - slack + 1e-12
            and t2[1] + slack <= t1[1] + 1e-12)


def _witness_lattice(q1, q2):
    x0 = min(q1.rect[0], q2.rect[0])
    y0 = min(q1.rect[1], q2.rect[1])
    x1 = max(q1.rect[2], q2.rect[2])
    y1 = max(q1.rect[3], q2.rect[3])
    side = min(q1.width, q1.height, q2.width, q2.height)
    mesh = side / 4
    pad = 2 * mesh
    return build_lattice(TRIANGULAR, mesh, (x0 - pad, y0 - pad, x1 + pad, y1 + pad))


def _witness_configs(lattice, q2):
    """Configurations crossing q2: all of [q2] open, and straight open bands."""
    qt = quad_tiles(lattice, q2)
    yield qt.region.astype(np.int8)
    a, b = q2.crossing_interval()
    lo, hi = q2.transverse_interval()
    for u in np.linspace(0, 1, 9):
        v = lo + u * (hi - lo)
        seg = (a, v, b, v) if q2.orientation == HORIZONTAL else (v, a, v, b)
        st = np.zeros(lattice.n_tiles, dtype=np.int8)
        st[lattice.tiles_meeting_rect(seg)] = 1
        yield st


def find_separating_config(q1, q2, lattice=None):
    """A configuration crossing q2 but not q1, or None if none of the candidates works."""
    lattice = lattice or _witness_lattice(q1, q2)
    for st in _witness_configs(lattice, q2):
        cfg = configuration_from_states(lattice, st)
        if has_crossing(cfg, q2) and not has_crossing(cfg, q1):
            return cfg
    return None


def rect_leq(q1: Quad, q2: Quad, lattice=None):
    """Tri-state order test: ``LEQ`` (1), ``NOT_LEQ`` (0) or ``UNKNOWN`` (-1).

    Without a lattice the continuum nesting rule decides ``LEQ``; with one, a
    transverse slack of one mesh is required (equal rectangles always pass).
    ``NOT_LEQ`` is returned only when a separating configuration is found.
    """
    if q1 == q2:
        return LEQ
    slack = 0.0 if lattice is None else lattice.mesh
    if _nested(q1, q2, slack):
        return LEQ
    if find_separating_config(q1, q2, lattice) is not None:
        return NOT_LEQ
    return UNKNOWN


class QuadFamily:
    """Ordered quads with their precomputed order matrix ``order[i, j] = rect_leq(q_i, q_j)``."""

    def __init__(self, quads, lattice=None, witnesses=True):
        self.quads = tuple(quads)
        self.lattice = lattice
        k = len(self.quads)
        order = np.full((k, k), UNKNOWN, dtype=np.int8)
        slack = 0.0 if lattice is None else lattice.mesh
        for i, a in enumerate(self.quads):
            for j, b in enumerate(self.quads):
                if a == b or _nested(a, b, slack):
                    order[i, j] = LEQ
                elif witnesses:
                    order[i, j] = rect_leq(a, b, lattice)
        self.order = order
        self.order.flags.writeable = False

    def __len__(self):
        return len(self.quads)

    @property
    def leq(self):
        return self.order == LEQ


@dataclass(frozen=True, eq=False)
class CrossingVector:
    family: QuadFamily
    bits: np.ndarray
    lineage: object = None


def crossing_vector(config, family: QuadFamily) -> CrossingVector:
    sc = K.Scratch(config.lattice.n_tiles)
    bits = np.array([has_crossing(config, q, OPEN, sc) for q in family.quads], dtype=np.bool_)
    return CrossingVector(family, bits, config.lineage)


def check_lower_set(vector: CrossingVector):
    """Pairs (i, j) with quad i <= quad j, j crossed and i not crossed."""
    b = np.asarray(vector.bits, dtype=np.bool_)
    bad = vector.family.leq & b[None, :] & ~b[:, None]
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(bad))]


# ---------------------------------------------------------------------------
# perturbation stability

def perturbed_rect(rect, q):
    """Image of [q0, q2] x [q1, q3] (unit-square coordinates) under the affine map onto rect."""
    x0, y0, x1, y1 = rect
    w, h = x1 - x0, y1 - y0
    return (x0 + q[0] * w, y0 + q[1] * h, x0 + q[2] * w, y0 + q[3] * h)


def q_delta(delta):
    return (-delta, delta, 1 + delta, 1 - delta)


@dataclass(frozen=True)
class StabilityRow:
    delta: float
    estimate: object
    d0: float
    d1: float
    d: float
    flags: str = ""


def stability_lattice(kind, mesh, base_rect, deltas):
    dmax = max(deltas) if len(deltas) else 0.0
    big = perturbed_rect(base_rect, q_delta(dmax))
    lo = np.minimum(big[:2], base_rect[:2]) - 2 * mesh
    hi = np.maximum(big[2:], base_rect[2:]) + 2 * mesh
    return build_lattice(kind, mesh, (lo[0], lo[1], hi[0], hi[1]))


def perturbation_stability(kind, mesh, p, base_rect, deltas, n, seed, threads=1, lattice=None):
    """Estimate P(crossing of Q differs from crossing of Q^{q_delta}) for each delta.

    Both quads are horizontal and snapped to the conforming grid; ``d0``/``d1``
    are the crossing and transverse side lengths of Q and ``d`` their minimum.
    """
    for d in deltas:
        if not 0 <= d < 1 / 3:
            raise ValueError(f"delta must lie in [0, 1/3), got {d}")
    lattice = lattice or stability_lattice(kind, mesh, base_rect, deltas)
    base = snap_quad(lattice, base_rect)
    quads = [base] + [snap_quad(lattice, perturbed_rect(base_rect, q_delta(d))) for d in deltas]
    bits = crossing_matrix(lattice, quads, p, seed, n, threads)
    d0, d1 = base.width, base.height
    rows = []
    scale = min(d0, d1)
    for i, d in enumerate(deltas):
        diff = bits[:, 0] != bits[:, i + 1]
        flag = "unreliable" if lattice.mesh >= d * scale else ""
        rows.append(StabilityRow(float(d), estimate(int(diff.sum()), n), d0, d1, min(d0, d1), flag))
    return rows
