import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smforge.response import (ChannelSelector, FrequencyGrid, GridMismatchError, Response,
                              make_grid,
                              response_distance, to_db)


def _one_point(s21):
    g = FrequencyGrid(9.0, 9.0, 0.0, np.array([9.0]))
    return Response(g, [0], [s21], [s21], [0])


@pytest.mark.parametrize("args, m", [((8, 12, 0.25), 17), ((5, 5.000000001, 1e-9), 2),
                                     ((8, 12, 0.5), 9)])
def test_make_grid_counts(args, m):
    g = make_grid(*args)
    assert g.m == m
    assert g.points[0] == args[0] and g.points[-1] == args[1]


def test_make_grid_rejects_ragged_span():
    with pytest.raises(ValueError, match="integral"):
        make_grid(8, 12, 0.3)


@pytest.mark.parametrize("v, db", [(1 + 0j, 0.0), (0.1 + 0j, -20.0), (0.5j, -6.020599913279624)])
def test_to_db(v, db):
    assert to_db(v) == pytest.approx(db, abs=1e-12)


def test_to_db_zero_is_minus_inf():
    assert to_db(0) == -math.inf


def test_distance_examples():
    sel = ChannelSelector(("S21",), "ri")
    assert response_distance(_one_point(1), _one_point(0), sel) == pytest.approx(1.0)
    assert response_distance(_one_point(3 + 4j), _one_point(0), sel) == pytest.approx(5.0)
    r = _one_point(0.3 - 0.2j)
    assert response_distance(r, r, ChannelSelector(("S11", "S21"), "db")) == 0


def test_distance_grid_mismatch_names_both():
    a = Response(make_grid(8, 12, 2.0), *[np.zeros(3)] * 4)
    b = Response(make_grid(8, 12, 1.0), *[np.zeros(5)] * 4)
    with pytest.raises(GridMismatchError, match="step 2.0.*step 1.0"):
        response_distance(a, b, ChannelSelector())


def test_csv_round_trip(coarse):
    r = coarse([0.161, 2.8517, 0.54, 2.7737, 0.73, 2.7579])
    back = Response.from_csv(r.to_csv())
    assert back.grid == r.grid
    for c in ("s11", "s12", "s21", "s22"):
        assert np.array_equal(back.channel(c), r.channel(c))


def test_selector_apply_inverts_values(coarse):
    r = coarse([0.161, 2.8517, 0.54, 2.7737, 0.73, 2.7579])
    for sel in (ChannelSelector(("S12",), "db"), ChannelSelector(("S11", "S12"), "ri")):
        same = sel.apply(r, sel.values(r))
        assert np.array_equal(sel.values(same), sel.values(r))


@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6, allow_nan=False,
                          allow_infinity=False))
def test_to_db_matches_log(v):
    assert to_db(v) == pytest.approx(20 * math.log10(abs(v)))


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=3, max_size=3),
       st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=3, max_size=3))
def test_distance_symmetric(a, b):
    g = make_grid(1, 3, 1)
    ra = Response(g, a, a, a, a)
    rb = Response(g, b, b, b, b)
    sel = ChannelSelector(("S11", "S21"), "ri")
    assert response_distance(ra, rb, sel) == response_distance(rb, ra, sel) >= 0
