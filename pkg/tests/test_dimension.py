from __future__ import annotations

import itertools

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from exactapprox.cantor import Cube
from exactapprox.dimension import (LCG, BranchingStats, ParentSample, PrunedTree, box_counting,
                                   branching_floor, branching_survey, dim_lower_bound, mass_check,
                                   short_set)
from exactapprox.errors import DomainError, PreconditionViolated
from exactapprox.lattice import _rank
from exactapprox.lognum import Grid
from exactapprox.psi import PsiSpec
from exactapprox.schedule import Constants, choose_times


def test_lcg_stream_is_fixed():
    r = LCG(1)
    assert [r.next() for _ in range(3)] == [
        (6364136223846793005 + 1442695040888963407) % 2 ** 64,
        (6364136223846793005 * ((6364136223846793005 + 1442695040888963407) % 2 ** 64)
         + 1442695040888963407) % 2 ** 64,
        r.state,
    ]
    r2 = LCG(1)
    r2.next(); r2.next()
    assert r2.next() == r.state


def test_bound_examples():
    b = dim_lower_bound(16, 1, 2, 3)
    assert b.floor_value == 8 and b.value == mpq(1, 2)
    assert dim_lower_bound(16, 1, 0, 3).value == mpq(2, 3)
    assert dim_lower_bound(4096, 2, 0, 2).value == mpq(3, 2)
    vals = [dim_lower_bound(N, 2, 2, 2).value_float for N in (16, 256, 4096)]
    assert vals == sorted(vals) and abs(vals[-1] - 1.5) < 0.1
    assert [round(v, 3) for v in vals] == [1.069, 1.449, 1.488]


def test_branching_floor_is_exact():
    # 16 - 2*16^{1/2} = 8 exactly; 256 - 3*16 = 208
    assert branching_floor(16, 1, 2) == 8
    assert branching_floor(256, 1, 3) == 208
    # n = 2: N^2 - R3 N^{5/3}; 4096^{5/3} = 2^20
    assert branching_floor(4096, 2, 1) == 4096 ** 2 - 2 ** 20
    with pytest.raises(DomainError):
        dim_lower_bound(16, 1, 5, 3)        # 16 - 20 < 0


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=5000), st.integers(min_value=1, max_value=3),
       st.fractions(min_value=0, max_value=3, max_denominator=16))
def test_branching_floor_brackets(N, n, R3):
    F = branching_floor(N, n, mpq(R3))
    x = float(R3) * N ** (n - 1 / (n + 1))
    assert abs((N ** n - x) - F) <= 1 + 1e-9 * N ** n


def test_stats_fit():
    s = BranchingStats(16, 1, [ParentSample(3, (0,), 12, 1, 1, None), ParentSample(4, (1,), 15, 1, 1, None)])
    assert s.R3 == 1        # worst deficit 4 = R3 * 16^{1/2}
    assert s.min_fraction == mpq(12, 16)
    assert s.mean_deficit_fraction == mpq(5, 32)
    assert s.per_level_counts() == {"4": [12], "5": [15]}


@pytest.fixture(scope="module")
def small_schedule():
    sp = PsiSpec(1, 3)
    return sp, choose_times(sp, Constants.paper(1, sp.gamma), 1, Grid(16, 1), minimal=True)


def test_short_set_rank_never_exceeds_n(small_schedule):
    sp, s = small_schedule
    ep = s.epoch(1)
    assert ep.l_minus > 5
    for l in (2, 3, 5):
        for c in range(0, 16 ** l, 16 ** l // 3):
            vs = short_set(Cube(l, (c,), 16), s, 1)
            assert _rank(vs) <= 1 if vs else True


def test_survey_is_deterministic(small_schedule):
    sp, s = small_schedule
    a = branching_survey(sp, s.consts, s, 5, seed=11, max_level=6)
    b = branching_survey(sp, s.consts, s, 5, seed=11, max_level=6)
    assert a.to_json() == b.to_json()
    assert all(0 <= c <= 16 for c in a.counts) and len(a.counts) == 5


def test_pruned_tree_and_mass():
    full = PrunedTree(16, 1, [16])
    assert full.weight(1) == mpq(1, 16)
    assert mass_check(full, mpq(99, 100), 20)["pass"]
    t = PrunedTree(4, 2, [3, 16, 1, 5])
    assert t.counts() == [3, 48, 48, 240]
    inside = sum(t.contains(c, 2) for c in itertools.product(range(16), repeat=2))
    assert inside == 48
    with pytest.raises(PreconditionViolated):
        mass_check(PrunedTree(16, 1, [8] * 4), 1, 10)
    with pytest.raises(DomainError):
        PrunedTree(4, 1, [5])


def test_mass_on_regular_tree():
    t = PrunedTree(16, 1, [8] * 12)
    rep = mass_check(t, mpq(7, 10), 40, seed=5)
    assert rep["pass"] and rep["trials"] > 0
    est = box_counting(t)
    assert est["label"] == "ESTIMATE" and abs(est["slope"] - 0.75) < 1e-9
