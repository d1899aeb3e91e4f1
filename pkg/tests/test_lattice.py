from __future__ import annotations

import math
from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from exactapprox.errors import PreconditionViolated, ZeroVector
from exactapprox.lattice import (FlowLattice, FlowPoint, RationalPoint, flow_norm_log,
                                 lambda_min_log, lll_reduce, rational_near_bad,
                                 successive_minima_log)
from exactapprox.lognum import Enclosure, Grid, GridTime, LogQuantity, compare

from oracles import lambda1_power, rationals_up_to, sup_dist


def fp(x, l, N, n=None):
    x = tuple(mpq(Fraction(c)) for c in x)
    return FlowPoint(x, GridTime(l, Grid(N, n or len(x))))


def test_flow_norm_examples():
    assert flow_norm_log(fp([0], 0, 4), (1, 0)) == (LogQuantity.zero(), True)
    nrm, dom = flow_norm_log(fp([Fraction(1, 2)], 1, 4), (2, 1))
    assert nrm.is_zero and dom
    # (1,1): first coordinate 1/2, second 2*|1 - 1/2| = 1
    nrm, dom = flow_norm_log(fp([Fraction(1, 2)], 1, 4), (1, 1))
    assert nrm.is_zero and not dom
    with pytest.raises(ZeroVector):
        flow_norm_log(fp([0], 0, 4), (0, 0))


def test_lambda_examples():
    lam, wit = lambda_min_log(fp([0, 0], 0, 4), 3)
    assert lam.is_zero
    logs, vs = successive_minima_log(fp([0, 0], 0, 4))
    assert all(v.is_zero for v in logs)
    assert sorted(tuple(abs(c) for c in w) for w in vs) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    lam, wit = lambda_min_log(fp([Fraction(1, 2)], 1, 4))
    assert lam.is_zero and wit == [(2, 1)]
    g = Grid(16, 1)
    for l in (1, 2, 7):
        lam, wit = lambda_min_log(fp([0], l, 16))
        assert lam.same(-g.time(l)) and wit == [(1, 0)]


def test_lll_reduces_a_skewed_basis():
    B = [[1, 0, 0], [4, 1, 0], [7, 3, 1]]
    R, U, _, _ = lll_reduce([row[:] for row in B])
    assert sorted(max(abs(c) for c in r) for r in R)[0] == 1
    # U is unimodular: |det U| = 1
    a, b, c = U
    det = (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
           + a[2] * (b[0] * c[1] - b[1] * c[0]))
    assert abs(det) == 1


def test_rational_near_bad_one_dim():
    p = fp([Fraction(5, 8)], 3, 4)        # t = 3 log 2, the grid time nearest 2
    t = p.time.t
    R = Enclosure.of(mpq(1))
    v, info = rational_near_bad(p, R)
    tf, Rf = float(t), 1.0
    lo, hi = math.exp(tf - Rf), math.exp(float(p.grid.time(info["snapped_level"])))
    dmax = Fraction(1, 2 * 4 ** 3)
    ok = {w for w in rationals_up_to(1, math.ceil(hi))
          if lo <= max(w) <= hi and sup_dist((Fraction(5, 8),), w) <= dmax}
    assert v.vec in ok


def test_rational_near_bad_two_dim():
    p = fp([Fraction(3, 7), Fraction(2, 7)], 1, 4, 2)
    v, info = rational_near_bad(p, Enclosure.of(mpq(1)))
    assert info["lower"] and info["upper"] and info["distance"]
    assert sup_dist((Fraction(3, 7), Fraction(2, 7)), v.vec) <= Fraction(1, 2 * 4)


def test_rational_near_bad_trivial_and_precondition():
    v, _ = rational_near_bad(fp([0], 0, 4), LogQuantity.zero())
    assert v.vec == (1, 0)
    with pytest.raises(PreconditionViolated):
        # lambda_1 = N^{-l/2} is far below e^{-R} for R = log 2
        rational_near_bad(fp([0], 9, 4), LogQuantity.log(2))


def test_rational_point_normalises():
    assert RationalPoint.from_vector((-4, -2)).vec == (2, 1)
    assert RationalPoint.from_value((mpq(1, 2), mpq(2, 3))).vec == (6, 3, 4)
    with pytest.raises(ValueError):
        RationalPoint((2, 2))


def test_warm_start_agrees_with_cold_start():
    x = (mpq(13, 37),)
    g = Grid(16, 1)
    hint = None
    for l in range(12):
        warm = FlowLattice(x, l, g, hint)
        cold = FlowLattice(x, l, g)
        assert warm.shortest() == cold.shortest()
        hint = warm.reduced_basis()


xs1 = st.fractions(min_value=0, max_value=Fraction(63, 64), max_denominator=64)


@settings(max_examples=40, deadline=None)
@given(xs1, st.integers(min_value=0, max_value=6), st.sampled_from([4, 16]))
def test_lambda1_matches_brute_force_n1(x, l, N):
    lam, wit = lambda_min_log(fp([x], l, N))
    assert (lam * 2).same(LogQuantity.log(mpq(lambda1_power([x], l, N)), N))


@settings(max_examples=15, deadline=None)
@given(xs1, xs1, st.integers(min_value=0, max_value=4), st.sampled_from([4, 16]))
def test_lambda1_matches_brute_force_n2(x, y, l, N):
    lam, wit = lambda_min_log(fp([x, y], l, N))
    assert (lam * 3).same(LogQuantity.log(mpq(lambda1_power([x, y], l, N)), N))
    nrm, _ = flow_norm_log(fp([x, y], l, N), wit[0])
    assert nrm.same(lam)


@settings(max_examples=30, deadline=None)
@given(xs1, xs1, st.integers(min_value=0, max_value=5))
def test_minkowski_bounds(x, y, l):
    logs, _ = successive_minima_log(fp([x, y], l, 16))
    total = logs[0] + logs[1] + logs[2]
    assert compare(logs[0], LogQuantity.zero()) <= 0
    assert compare(total, LogQuantity.zero()) <= 0
    assert compare(total, LogQuantity.log(mpq(1, 6))) >= 0
    assert all(compare(a, b) <= 0 for a, b in zip(logs, logs[1:]))


def test_rational_point_json_with_huge_height():
    v = RationalPoint((10 ** 6000 + 1, 1))
    assert RationalPoint.from_json(v.to_json()) == v
