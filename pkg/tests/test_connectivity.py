import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import oracle_reach, oracle_region, shapely_adjacency
from percolab.connectivity import (CLOSED, HORIZONTAL, OPEN, VERTICAL, Quad, check_duality, clusters,
                                   crossing_matrix, crossing_witness, has_crossing, has_dual_crossing,
                                   is_conforming, quad_tiles, snap_quad)
from percolab.tiling import (SQUARE_BOND, TRIANGULAR, build_lattice, constant_configuration,
                             sample_configuration)

KINDS = (SQUARE_BOND, TRIANGULAR)


def test_quad_validation():
    with pytest.raises(ValueError):
        Quad((1, 0, 0, 1))
    with pytest.raises(ValueError):
        Quad((0, 0, 1, 1), "diagonal")
    q = Quad((0, 0, 2, 1))
    assert q.rotated().orientation == VERTICAL
    assert q.side_segments()[0] == (0, 0, 0, 1)


@pytest.mark.parametrize("kind", KINDS)
def test_quad_region_matches_shapely(kind, small_lattices):
    lat = small_lattices[kind]
    q = snap_quad(lat, (0, 0, 3, 2))
    qt = quad_tiles(lat, q)
    region, sides = oracle_region(lat, q.rect)
    assert set(np.flatnonzero(qt.region).tolist()) == region
    for k in range(4):
        # horizontal quad sides are left, bottom, right, top
        ref = sides[[0, 1, 2, 3][k]]
        assert set(np.flatnonzero(qt.sides[k]).tolist()) == ref


@pytest.mark.parametrize("kind", KINDS)
def test_crossing_matches_oracle_bfs(kind, small_lattices):
    lat = small_lattices[kind]
    adj = shapely_adjacency(lat)
    q = snap_quad(lat, (0, 0, 3, 3))
    region, sides = oracle_region(lat, q.rect)
    for rep in range(200):
        cfg = sample_configuration(lat, 0.5, 11, rep)
        ref = oracle_reach(adj, cfg.states, region, sides[0], sides[2], OPEN)
        assert has_crossing(cfg, q) == ref
        ref_dual = oracle_reach(adj, cfg.states, region, sides[1], sides[3], CLOSED)
        assert has_dual_crossing(cfg, q) == ref_dual


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32), x0=st.floats(-0.5, 1.5), y0=st.floats(-0.5, 1.5),
       w=st.floats(0.3, 2.5), h=st.floats(0.3, 2.5), vertical=st.booleans())
def test_duality_on_conforming_quads(kind, seed, x0, y0, w, h, vertical):
    lat = build_lattice(kind, 0.25, (-1, -1, 5, 5))
    q = snap_quad(lat, (x0, y0, x0 + w, y0 + h), orientation=VERTICAL if vertical else HORIZONTAL)
    assert is_conforming(lat, q)
    for rep in range(5):
        assert check_duality(sample_configuration(lat, 0.5, seed, rep), q)


def test_snap_is_idempotent_and_close():
    for kind in KINDS:
        q = snap_quad(kind, 0.1, (0.03, 0.02, 1.04, 0.77))
        assert snap_quad(kind, 0.1, q.rect) == q
        assert max(abs(a - b) for a, b in zip(q.rect, (0.03, 0.02, 1.04, 0.77))) <= 0.1


def test_constant_configurations():
    lat = build_lattice(TRIANGULAR, 0.25, (0, 0, 3, 3))
    q = snap_quad(lat, (0.5, 0.5, 2, 2))
    assert has_crossing(constant_configuration(lat, True), q)
    assert not has_crossing(constant_configuration(lat, False), q)
    assert has_dual_crossing(constant_configuration(lat, False), q)


def test_witness_is_open_crossing():
    lat = build_lattice(TRIANGULAR, 0.25, (0, 0, 3, 3))
    q = snap_quad(lat, (0.2, 0.2, 2.5, 2.0))
    qt = quad_tiles(lat, q)
    for rep in range(50):
        cfg = sample_configuration(lat, 0.5, 2, rep)
        w = crossing_witness(cfg, q)
        if not has_crossing(cfg, q):
            assert w is None
            continue
        items = list(w.items)
        assert qt.sides[0][items[0]] and qt.sides[2][items[-1]]
        assert all(cfg.states[t] == OPEN and qt.region[t] for t in items)
        for a, b in zip(items, items[1:]):
            assert b in lat.neighbors(a)


def test_clusters_partition_open_tiles():
    lat = build_lattice(SQUARE_BOND, 1.0, (0, 0, 6, 6))
    cfg = sample_configuration(lat, 0.5, 5, 0)
    labels = clusters(cfg, OPEN)
    st_ = cfg.states
    assert ((labels >= 0) == (st_ == OPEN)).all()
    for a, b, _, _ in lat.edges:
        if st_[a] == OPEN and st_[b] == OPEN:
            assert labels[a] == labels[b]


def test_crossing_matrix_matches_per_configuration():
    lat = build_lattice(TRIANGULAR, 0.2, (0, 0, 3, 3))
    quads = [snap_quad(lat, (0, 0, 2, 2)), snap_quad(lat, (0.5, 0.5, 2.8, 1.5)),
             snap_quad(lat, (0, 0, 1, 3), orientation=VERTICAL)]
    m = crossing_matrix(lat, quads, 0.5, 99, 60)
    for rep in range(60):
        cfg = sample_configuration(lat, 0.5, 99, rep)
        assert [has_crossing(cfg, q) for q in quads] == m[rep].tolist()
    assert np.array_equal(m, crossing_matrix(lat, quads, 0.5, 99, 60, threads=3, chunk=7))


def test_snap_stays_inside_the_lattice():
    lat = build_lattice(TRIANGULAR, 1 / 32, (0, 0, 1, 1))
    q = snap_quad(lat, (0, 0, 1, 1))
    assert q.rect[2] <= 1 and q.rect[3] <= 1 and is_conforming(lat, q)
    assert quad_tiles(lat, q).region.any()
