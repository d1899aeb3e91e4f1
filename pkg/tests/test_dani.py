from __future__ import annotations

from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from exactapprox.dani import classify, dani_backward, dani_forward, trajectory
from exactapprox.errors import DomainError, PreconditionViolated
from exactapprox.lattice import FlowPoint, RationalPoint, lambda_min_log
from exactapprox.lognum import Grid, GridTime, LogQuantity, compare
from exactapprox.psi import PsiSpec, Psi_inv_log

from oracles import rationals_up_to, sup_dist


def Q(*xs):
    return tuple(mpq(Fraction(x)) for x in xs)


def test_forward_example():
    sp = PsiSpec(1, 3)
    t, nrm, dom = dani_forward(sp, Q(Fraction(49, 100)), RationalPoint((2, 1)))
    assert t.same(LogQuantity.log(2) * mpq(3, 2))
    assert nrm.same(LogQuantity.log(2) * mpq(-1, 2))
    assert nrm.same(LogQuantity.log(2) - t)          # e^{-t} H
    assert dom


def test_forward_exact_hit():
    sp = PsiSpec(2, 3)
    v = RationalPoint((5, 2, 3))
    t, nrm, dom = dani_forward(sp, v.value, v)
    assert nrm.same(LogQuantity.log(v.height) - t) and dom


def test_forward_two_dim():
    sp = PsiSpec(2, 2)
    x = Q(Fraction(1, 3) + Fraction(1, 10 ** 4), Fraction(2, 3))
    v = RationalPoint((3, 1, 2))
    t, nrm, dom = dani_forward(sp, x, v)
    assert t.same(LogQuantity.log(3) * mpq(4, 3))
    assert dom and compare(nrm, Psi_inv_log(sp, t) - t) <= 0


def test_forward_rejects_poor_approximation():
    with pytest.raises(PreconditionViolated):
        dani_forward(PsiSpec(1, 3), Q(Fraction(1, 3)), RationalPoint((2, 1)))


def test_backward_round_trip_and_branches():
    sp = PsiSpec(1, 3)
    x = Q(Fraction(49, 100))
    t, _, _ = dani_forward(sp, x, RationalPoint((2, 1)))
    assert dani_backward(sp, x, (2, 1), t) == RationalPoint((2, 1))
    # a vector with q = 0 is never e1-dominant
    assert dani_backward(sp, x, (0, 1), t) is None
    # t = 0, w = e1: Psi^{-1}(1) = 1 and d(x, 0) = 49/100 <= psi(1) = 1
    assert dani_backward(sp, x, (1, 0), LogQuantity.zero()) == RationalPoint((1, 0))


def test_trajectory_of_zero():
    g = Grid(16, 1)
    rows = trajectory(PsiSpec(1, 3), Q(0), range(9), g)
    assert [r.level for r in rows] == list(range(9))
    for r in rows:
        assert r.c_x.same(-g.time(r.level)) and r.witness == (1, 0) and r.e1_dominant


def test_trajectory_matches_lattice_module():
    g = Grid(4, 1)
    x = Q(Fraction(1, 2))
    rows = trajectory(PsiSpec(1, 3), x, range(4), g)
    for r in rows:
        lam, w = lambda_min_log(FlowPoint(x, GridTime(r.level, g)))
        assert r.c_x.same(lam) and r.witness == w[0]
    assert [r.c_x.approx(6) for r in rows] == ["0.0", "0.0", "-0.693147", "-1.38629"]


def test_trajectory_rejects_outside_cube():
    with pytest.raises(DomainError):
        trajectory(PsiSpec(1, 3), Q(1), range(2), Grid(4, 1))


@settings(max_examples=25, deadline=None)
@given(st.fractions(min_value=0, max_value=Fraction(999, 1000), max_denominator=1000),
       st.integers(min_value=4, max_value=25))
def test_trajectory_slope_envelope(x, top):
    g = Grid(16, 1)
    rows = trajectory(PsiSpec(1, 3), Q(x), range(top + 1), g)
    M = g.M
    for a, b in zip(rows, rows[1:]):
        d = b.c_x - a.c_x
        assert compare(d, -M) >= 0 and compare(d, M) <= 0   # M/n with n = 1
        assert compare(b.c_x, LogQuantity.zero()) <= 0


def brute_classify(x, lam, H_max, c):
    out = []
    for v in rationals_up_to(len(x), H_max):
        H = max(v)
        if H > H_max:
            continue
        if sup_dist(x, v) < c * Fraction(1, H ** lam):
            out.append(v)
    return out


def test_classify_zero():
    rep = classify(PsiSpec(1, 3), Q(0), 5)
    assert RationalPoint((1, 0)) in rep.hits


def test_classify_half_is_exhaustive():
    x = (Fraction(1, 2),)
    rep = classify(PsiSpec(1, 3), Q(*x), 10)
    assert [v.vec for v in rep.hits] == brute_classify(x, 3, 10, 1)
    assert RationalPoint((2, 1)) in rep.hits


@settings(max_examples=20, deadline=None)
@given(st.fractions(min_value=0, max_value=Fraction(99, 100), max_denominator=100),
       st.sampled_from([1, Fraction(1, 2)]))
def test_classify_matches_brute_force(x, c):
    rep = classify(PsiSpec(1, 3), Q(x), 12, mpq(c))
    assert [v.vec for v in rep.hits] == brute_classify((x,), 3, 12, c)
