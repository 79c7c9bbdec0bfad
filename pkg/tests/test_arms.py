import csv

import numpy as np
import pytest

from conftest import shapely_adjacency
from oracles import annulus_parts, crossing_clusters
from percolab.arms import (CLOSED_ONE_ARM, FOUR_ARM, ONE_ARM, AnnulusSpec, ArmPattern, annulus_lattice,
                           annulus_tiles, arm_indicators, boundary_three_arm, estimate_arm_probability,
                           fit_exponent, has_arm_event, interface_strands, snap_to_vertex,
                           three_arm_spans)
from percolab.connectivity import CLOSED, OPEN, snap_quad
from percolab.tiling import SQUARE_BOND, TRIANGULAR, build_lattice, sample_configuration


def _annulus(kind, mesh, r, R):
    ann = AnnulusSpec((0.0, 0.0), r, R)
    lat = annulus_lattice(kind, mesh, ann)
    return lat, AnnulusSpec(snap_to_vertex(lat, (0.0, 0.0)), r, R)


def test_pattern_validation():
    assert ArmPattern(FOUR_ARM).name == "open-closed-open-closed"
    with pytest.raises(ValueError):
        ArmPattern((1, 1, 0, 0))
    with pytest.raises(ValueError):
        ArmPattern((1, 0))
    with pytest.raises(ValueError):
        AnnulusSpec((0, 0), 0.0, 2.0)


@pytest.mark.parametrize("kind", [SQUARE_BOND, TRIANGULAR])
def test_annulus_boundaries_match_geometry(kind):
    lat, ann = _annulus(kind, 1.0, 2.0, 5.0)
    adj = shapely_adjacency(lat)
    at = annulus_tiles(lat, ann)
    region, inner, outer = annulus_parts(lat, ann, adj)
    assert set(np.flatnonzero(at.region).tolist()) == region
    assert set(np.flatnonzero(at.inner).tolist()) == inner
    assert set(np.flatnonzero(at.outer).tolist()) == outer
    assert set(at.inner_ring.tolist()) == inner


@pytest.mark.parametrize("kind", [SQUARE_BOND, TRIANGULAR])
def test_arm_events_against_components(kind):
    lat, ann = _annulus(kind, 1.0, 2.0, 6.0)
    adj = shapely_adjacency(lat)
    region, inner, outer = annulus_parts(lat, ann, adj)
    for rep in range(150):
        cfg = sample_configuration(lat, 0.5, 17, rep)
        st = cfg.states
        co = crossing_clusters(adj, st, region, inner, outer, OPEN)
        cc = crossing_clusters(adj, st, region, inner, outer, CLOSED)
        assert has_arm_event(cfg, ann, ONE_ARM) == bool(co)
        assert has_arm_event(cfg, ann, CLOSED_ONE_ARM) == bool(cc)
        assert has_arm_event(cfg, ann, FOUR_ARM) == (len(co) >= 2 and len(cc) >= 2)
        count, strands = interface_strands(cfg, ann)
        assert count == (len(co) + len(cc) if co and cc else 0)
        assert count == len(strands) and count % 2 == 0


@pytest.mark.parametrize("kind", [SQUARE_BOND, TRIANGULAR])
def test_kernel_matches_single_configuration(kind):
    lat, ann = _annulus(kind, 1.0, 2.0, 8.0)
    for pattern in (ONE_ARM, CLOSED_ONE_ARM, FOUR_ARM):
        hits = arm_indicators(lat, ann, pattern, 0.5, 23, 200)
        ref = [has_arm_event(sample_configuration(lat, 0.5, 23, i), ann, pattern) for i in range(200)]
        assert hits.tolist() == ref


def test_thin_shell_is_not_a_ring():
    # an L-infinity shell half a tile wide breaks into pieces on the hexagonal tiling
    lat, ann = _annulus(TRIANGULAR, 1.0, 2.0, 2.5)
    adj = shapely_adjacency(lat)
    region, inner, outer = annulus_parts(lat, ann, adj)
    assert not annulus_tiles(lat, ann).is_ring
    cfg = sample_configuration(lat, 0.5, 1, 0)
    with pytest.raises(ValueError):
        interface_strands(cfg, ann)
    hits = arm_indicators(lat, ann, FOUR_ARM, 0.5, 2, 300)
    for rep in range(300):
        st = sample_configuration(lat, 0.5, 2, rep).states
        co = crossing_clusters(adj, st, region, inner, outer, OPEN)
        cc = crossing_clusters(adj, st, region, inner, outer, CLOSED)
        assert hits[rep] == (len(co) >= 2 and len(cc) >= 2)


def test_empty_annulus_is_certain(tmp_path):
    table = estimate_arm_probability(TRIANGULAR, 1.0, 0.5, [AnnulusSpec((0, 0), 4.0, 4.0)], ONE_ARM, 100, 1)
    row = table.rows[0]
    assert row.estimate.p_hat == 1.0 and row.flags == "empty"


def test_table_csv_and_thread_invariance(tmp_path):
    lat, ann = _annulus(TRIANGULAR, 1.0, 1.0, 6.0)
    anns = [AnnulusSpec(ann.center, 1.0, R) for R in (3.0, 6.0, 12.0)]
    a = estimate_arm_probability(TRIANGULAR, 1.0, 0.5, anns, ONE_ARM, 500, 3, threads=1)
    b = estimate_arm_probability(TRIANGULAR, 1.0, 0.5, anns, ONE_ARM, 500, 3, threads=3)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == list(a.HEADER)
    ps = [r.estimate.p_hat for r in a.rows]
    assert ps[0] >= ps[1] >= ps[2]
    slope, (lo, hi) = fit_exponent(a, 1.0, [3.0, 6.0, 12.0], n_boot=200)
    assert lo <= slope <= hi and slope > 0
    with pytest.raises(ValueError):
        estimate_arm_probability(TRIANGULAR, 1.0, 0.5, anns, ONE_ARM, 50, 3)


def test_three_arm_spans_and_monotone_rows():
    lat = build_lattice(TRIANGULAR, 0.1, (0, 0, 2.2, 2.2))
    q = snap_quad(lat, (0, 0, 2, 2))
    spans = three_arm_spans(lat, q, 0.5, 4, 300)
    assert (spans > 0).all()
    rows = boundary_three_arm(TRIANGULAR, 0.1, 0.5, q, [0.8, 0.4, 0.2, 0.05], 300, 4, lattice=lat)
    ps = [e.p_hat for _, e, _ in rows]
    assert ps == sorted(ps, reverse=True)
    assert rows[-1][2] == "unresolved"
    with pytest.raises(ValueError):
        boundary_three_arm(TRIANGULAR, 0.1, 0.5, q, [5.0], 100, 4, lattice=lat)
