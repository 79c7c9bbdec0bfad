import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.connectivity import VERTICAL, Quad, has_crossing, snap_quad
from percolab.quadalgebra import (LEQ, NOT_LEQ, UNKNOWN, QuadFamily, check_lower_set, crossing_vector,
                                  find_separating_config, perturbation_stability, perturbed_rect, q_delta,
                                  rect_leq)
from percolab.tiling import SQUARE_BOND, TRIANGULAR, build_lattice, sample_configuration


def test_continuum_order():
    wide_short = Quad((0, -1, 1, 2))
    narrow_long = Quad((-1, 0, 2, 1))
    assert rect_leq(wide_short, narrow_long) == LEQ
    assert rect_leq(narrow_long, narrow_long) == LEQ
    # a longer quad is never forced by a shorter one
    assert rect_leq(Quad((0, 0, 3, 1)), Quad((0, 0, 2, 1))) == NOT_LEQ


def test_orientation_mismatch_is_not_nested():
    h = Quad((0, 0, 1, 1))
    v = Quad((0, 0, 1, 1), VERTICAL)
    assert rect_leq(h, v) in (NOT_LEQ, UNKNOWN)


def test_separating_config_really_separates():
    q1, q2 = Quad((0, 0, 3, 1)), Quad((0, 0, 2, 1))
    cfg = find_separating_config(q1, q2)
    assert has_crossing(cfg, q2) and not has_crossing(cfg, q1)


def test_lattice_order_needs_slack():
    lat = build_lattice(TRIANGULAR, 0.25, (-1, -1, 4, 4))
    inner = snap_quad(lat, (0, 0.5, 2, 1.5))
    outer = snap_quad(lat, (0, 0, 2, 2))
    assert rect_leq(outer, inner) == LEQ
    assert rect_leq(outer, inner, lat) == LEQ
    thin = snap_quad(lat, (0, 0.1, 2, 1.9))
    assert rect_leq(thin, inner, lat) in (LEQ, UNKNOWN)


@pytest.mark.parametrize("kind", [SQUARE_BOND, TRIANGULAR])
def test_crossing_vectors_are_lower_sets(kind):
    lat = build_lattice(kind, 0.25, (-1, -1, 4, 4))
    rects = [(0, 0, 2, 2), (0, 0.5, 2, 1.5), (-0.5, 0, 2.5, 2), (0.5, -0.5, 1.5, 2.5), (0, 0, 1, 1)]
    fam = QuadFamily([snap_quad(lat, r) for r in rects], lat, witnesses=False)
    assert fam.leq.diagonal().all()
    assert fam.leq.sum() > len(fam)
    for rep in range(200):
        vec = crossing_vector(sample_configuration(lat, 0.5, 12, rep), fam)
        assert check_lower_set(vec) == []


@settings(max_examples=30, deadline=None)
@given(a=st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(1, 6), st.integers(1, 6)),
       b=st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(1, 6), st.integers(1, 6)),
       seed=st.integers(0, 2 ** 31))
def test_leq_implies_crossing_implication(a, b, seed):
    lat = build_lattice(TRIANGULAR, 0.25, (-0.5, -0.5, 3.5, 3.5))

    def q(t):
        x, y, w, h = (v * 0.25 for v in t)
        return snap_quad(lat, (x, y, x + w, y + h))

    q1, q2 = q(a), q(b)
    if rect_leq(q1, q2, lat) != LEQ:
        return
    for rep in range(10):
        cfg = sample_configuration(lat, 0.5, seed, rep)
        if has_crossing(cfg, q2):
            assert has_crossing(cfg, q1)


def test_family_order_matrix_is_read_only():
    fam = QuadFamily([Quad((0, 0, 1, 1)), Quad((0, -1, 1, 2))])
    with pytest.raises(ValueError):
        fam.order[0, 0] = 0


def test_perturbed_rect_maps_unit_square():
    assert perturbed_rect((1, 2, 3, 6), (0, 0, 1, 1)) == (1, 2, 3, 6)
    assert q_delta(0.25) == (-0.25, 0.25, 1.25, 0.75)


def test_stability_rows():
    rows = perturbation_stability(TRIANGULAR, 1 / 16, 0.5, (0, 0, 1, 1), [0.0, 0.25, 0.125, 0.01], 2000, 3)
    assert rows[0].estimate.p_hat == 0.0
    assert rows[1].estimate.p_hat > 0.0
    assert rows[1].d == pytest.approx(1.0, abs=1 / 16)
    assert rows[3].flags == "unreliable" and rows[1].flags == ""
    again = perturbation_stability(TRIANGULAR, 1 / 16, 0.5, (0, 0, 1, 1), [0.0, 0.25, 0.125, 0.01], 2000, 3,
                                   threads=2)
    assert [r.estimate for r in rows] == [r.estimate for r in again]
    with pytest.raises(ValueError):
        perturbation_stability(TRIANGULAR, 1 / 16, 0.5, (0, 0, 1, 1), [0.4], 100, 3)


def test_crossing_vector_keeps_lineage():
    lat = build_lattice(TRIANGULAR, 0.5, (0, 0, 3, 3))
    cfg = sample_configuration(lat, 0.5, 1, 2)
    vec = crossing_vector(cfg, QuadFamily([snap_quad(lat, (0.5, 0.5, 2, 2))], lat))
    assert vec.lineage == cfg.lineage and vec.bits.dtype == np.bool_
