from __future__ import annotations

from fractions import Fraction

import pytest
from gmpy2 import mpq, mpz
from hypothesis import given, settings
from hypothesis import strategies as st

from exactapprox.lognum import (Enclosure, Grid, LogQuantity, compare, int_str, lq_add, lq_max, lq_min,
                                q_str, ratio_ceil, ratio_floor, to_mpq)

pos_rat = st.fractions(min_value=Fraction(1, 1000), max_value=1000).filter(lambda f: f > 0)
small_coeff = st.fractions(min_value=-6, max_value=6, max_denominator=6)


def L(coeff, mant, N):
    return LogQuantity(mpq(Fraction(coeff)), mpq(Fraction(mant)), N)


# --- frozen examples -------------------------------------------------------

def test_add_multiplies_mantissas():
    s = LogQuantity.log_base(1, 16) + LogQuantity.log(3, 16)
    assert s.same(LogQuantity(1, 3, 16))


def test_zero_plus_zero():
    z = LogQuantity.zero(16)
    assert (z + z).same(z) and (z + z).is_zero


def test_absorbs_exact_powers_of_the_base():
    s = L(Fraction(1, 2), Fraction(3, 2), 16) + L(Fraction(1, 2), Fraction(2, 3), 16)
    assert s.same(LogQuantity.log_base(1, 16))
    assert s.mantissa == 1 and s.coeff == 1


def test_compare_examples():
    assert compare(LogQuantity.log_base(2, 7), LogQuantity.log_base(2, 7)) == 0
    assert compare(LogQuantity.log_base(1, 16), LogQuantity.log(20, 16)) == -1
    # 4^(1/2) = 2 and the normal form makes both sides identical
    half = LogQuantity.log_base(mpq(1, 2), 4)
    two = LogQuantity.log(2, 4)
    assert compare(half, two) == 0
    assert half.same(two)


def test_mantissa_power_is_folded_into_coeff():
    q = LogQuantity.log(mpq(16 ** 3 * 5, 7), 16)
    assert q.coeff == 3 and q.mantissa == mpq(5, 7)


def test_floats_are_rejected():
    with pytest.raises(TypeError):
        to_mpq(0.5)
    assert to_mpq("3/4") == mpq(3, 4)


def test_enclosure_of_rational_is_the_value():
    assert compare(Enclosure.of(mpq(3)), LogQuantity.log(20)) == 1   # 3 > log 20 ~ 2.996
    assert compare(Enclosure.of(mpq(2)), LogQuantity.log(7)) == 1
    assert compare(Enclosure.of(mpq(1)), LogQuantity.log(3)) == -1


def test_grid_time_and_floor():
    g = Grid(16, 1)
    assert g.time(3).same(LogQuantity.log_base(mpq(3, 2), 16))
    assert g.level_floor(g.time(7)) == 7
    assert g.level_floor(g.time(7) - LogQuantity.log(mpq(1001, 1000))) == 6
    assert g.level_ceil(g.time(7) + LogQuantity.log(mpq(1001, 1000))) == 8
    assert Grid.from_M(4, 1).N == 2981


def test_grid_rejects_small_base():
    from exactapprox.errors import DomainError
    with pytest.raises(DomainError):
        Grid(1, 1)


def test_lq_max_min():
    xs = [LogQuantity.log(3), LogQuantity.log(mpq(1, 2)), LogQuantity.log(5)]
    assert lq_max(*xs).same(LogQuantity.log(5))
    assert lq_min(*xs).same(LogQuantity.log(mpq(1, 2)))


def test_near_tie_needs_exact_fallback():
    # log(2^100 + 1) - 100 log 2 is about 2^-100: intervals alone cannot settle it at 64 bits
    a = LogQuantity.log(2 ** 100 + 1)
    b = LogQuantity.log_base(100, 2)
    assert compare(a, b) == 1
    assert compare(b, a) == -1


# --- properties ------------------------------------------------------------

@settings(max_examples=150, deadline=None)
@given(pos_rat, pos_rat, small_coeff, small_coeff)
def test_add_is_log_of_product(a, b, ca, cb):
    N = 12
    s = lq_add(L(ca, a, N), L(cb, b, N))
    assert s.same(L(ca + cb, a * b, N))


@settings(max_examples=150, deadline=None)
@given(pos_rat, pos_rat)
def test_compare_agrees_with_rationals(a, b):
    expect = (a > b) - (a < b)
    assert compare(LogQuantity.log(mpq(a)), LogQuantity.log(mpq(b))) == expect


@settings(max_examples=100, deadline=None)
@given(pos_rat, st.integers(min_value=-4, max_value=4), st.integers(min_value=1, max_value=5))
def test_scaling_by_rationals(a, k, r):
    x = LogQuantity.log(mpq(a), 6)
    y = x * mpq(k, r)
    assert (y * r).same(x * k)
    assert (x - x).is_zero


@settings(max_examples=80, deadline=None)
@given(small_coeff, pos_rat, st.sampled_from([2, 4, 6, 16, 2981]))
def test_json_round_trip(c, m, N):
    x = L(c, m, N)
    assert LogQuantity.from_json(x.to_json()).same(x)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=400), st.sampled_from([4, 16, 2981]))
def test_ratio_floor_on_grid(l, N):
    g = Grid(N, 1)
    assert ratio_floor(g.time(l), g.M) == l
    assert ratio_ceil(g.time(l) + LogQuantity.log(mpq(3, 2)), g.M) == l + 1


def test_huge_integers_survive_text_round_trips():
    # well past the interpreter's default 4300-digit limit for int <-> str
    big = mpz(10) ** 20000 + 7
    assert int_str(big) == "1" + "0" * 19999 + "7"
    assert to_mpq(q_str(mpq(big, 3))) == mpq(big, 3)
    assert to_mpq(" 3 / 4 ") == mpq(3, 4)
