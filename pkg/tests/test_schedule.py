from __future__ import annotations

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from exactapprox.errors import Infeasible
from exactapprox.lognum import Grid, LogQuantity, compare
from exactapprox.psi import PsiSpec, m_bound, r_psi
from exactapprox.schedule import (Constants, Template, _Ctx, build_template, choose_times,
                                  evaluate_predicates, recheck)

SPEC = PsiSpec(1, 3)
GRID = Grid.from_M(4, 1)          # N = 2981
RELAXED = Constants.relaxed(1, 2, 6, 30)


def levels(s):
    return [(e.level, e.l_minus, e.l_plus) for e in s.epochs]


def test_paper_constants():
    c = Constants.paper(1, mpq(1, 3))
    assert (c.R0, c.R1, c.R2) == (4, 60, 169)
    assert c.check() == [] and c.theorem_guarantee
    c2 = Constants.paper(3, mpq(1, 2))
    assert (c2.R0, c2.R1, c2.R2) == (12, 240, 1873)


def test_relaxed_constants_report_their_gaps():
    assert RELAXED.check() == ["R0 >= 4", "R2 > 2n(R1+6R0)"]
    assert not RELAXED.theorem_guarantee
    assert Constants.from_json(RELAXED.to_json()) == RELAXED


def test_frozen_relaxed_schedules():
    s = choose_times(SPEC, RELAXED, 2, GRID, minimal=True)
    assert s.t0_level == 10
    assert levels(s) == [(481, 294, 581), (23089, 14110, 27899)]
    s2 = choose_times(SPEC, RELAXED, 2, GRID)
    assert levels(s2) == [(962, 615, 1062), (92354, 59004, 101974)]


def test_frozen_paper_schedule_with_gap():
    s = choose_times(SPEC, Constants.paper(1, SPEC.gamma), 2, GRID, minimal=True,
                     gap_ratio=mpq(1, 10))
    assert levels(s) == [(2691, 1741, 3254), (723880, 468235, 875473)]
    assert [e.binding for e in s.epochs] == ["G3", "G3"]


@pytest.mark.parametrize("minimal", [True, False])
def test_schedule_rechecks(minimal):
    s = choose_times(SPEC, Constants.paper(1, SPEC.gamma), 2, GRID, minimal=minimal)
    for k, res in recheck(s):
        assert all(p.ok for p in res), [p.name for p in res if not p.ok]


def test_schedule_invariants():
    s = choose_times(SPEC, RELAXED, 3, GRID, minimal=True)
    assert compare(s.epochs[0].t_minus, LogQuantity.zero()) > 0
    prev_level = s.t0_level
    for a, b in zip(s.epochs, s.epochs[1:]):
        assert compare(a.t_plus_template, b.t_minus) < 0
        assert a.l_plus < b.l_minus
    for e in s.epochs:
        t_prev = GRID.time(prev_level)
        assert compare(e.M_k, -r_psi(SPEC, t_prev)) <= 0
        assert compare(e.M_k, m_bound(SPEC, t_prev)) == 0
        assert compare(e.t_minus, e.t + e.r_t) == 0
        assert compare(e.t_plus_template, e.t - e.r_t) == 0
        prev_level = e.level


def test_predicate_III_holds_everywhere_for_cubic_psi():
    # r is linear with slope -1/3 and (1 + gamma)/2 = 2/3 > 1/3
    s = choose_times(SPEC, RELAXED, 1, GRID, minimal=True)
    ctx = _Ctx(SPEC, GRID, RELAXED, 1, GRID.time(s.t0_level), s.epochs[0].M_k, 0, None, None)
    for L in (100, 300, 2000, 50000):
        res = {p.name: p for p in evaluate_predicates(ctx, L)}
        assert res["III"].ok


def test_boundary_exponent_is_rejected():
    with pytest.raises(Infeasible) as e:
        choose_times(PsiSpec(1, 2), RELAXED, 1, GRID)
    assert e.value.predicate == "G4"


def test_tiny_ceiling_names_binding_predicate():
    with pytest.raises(Infeasible) as e:
        choose_times(SPEC, Constants.paper(1, SPEC.gamma), 1, GRID, minimal=True, ceiling=50)
    assert e.value.predicate == "G3"


def test_template_breakpoints_and_values():
    s = choose_times(SPEC, RELAXED, 2, GRID, minimal=True)
    T = build_template(SPEC, s)
    assert isinstance(T, Template) and T.slopes == [0, -1, 1, 0, -1, 1, 0]
    assert T(LogQuantity.zero()).is_zero
    for e in s.epochs:
        assert compare(T(e.t), e.r_t) == 0
        assert T(e.t_minus).is_zero and T(e.t_plus_template).is_zero
    # flat prefix
    for l in range(0, s.epochs[0].l_minus, 37):
        t = GRID.time(l)
        if compare(t, s.epochs[0].t_minus) <= 0:
            assert T(t).is_zero


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=120000))
def test_template_dominates_rate(l):
    s = _cached_schedule()
    T = build_template(SPEC, s)
    t = GRID.time(l)
    v = T(t)
    assert compare(v, r_psi(SPEC, t)) >= 0
    assert compare(v, LogQuantity.zero()) <= 0


_CACHE = {}


def _cached_schedule():
    if "s" not in _CACHE:
        _CACHE["s"] = choose_times(SPEC, RELAXED, 2, GRID)
    return _CACHE["s"]


@settings(max_examples=8, deadline=None)
@given(st.sampled_from([(1, 3), (2, 2), (1, mpq(5, 2)), (2, 3), (3, 2)]))
def test_paper_schedules_recheck_across_specs(nl):
    n, lam = nl
    sp = PsiSpec(n, lam)
    g = Grid(16, n)
    s = choose_times(sp, Constants.paper(n, sp.gamma), 2, g, minimal=True)
    assert all(p.ok for _, res in recheck(s) for p in res)
    T = build_template(sp, s)
    for e in s.epochs:
        assert compare(T(e.t), e.r_t) == 0
