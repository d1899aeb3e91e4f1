from __future__ import annotations

import json
from dataclasses import replace
from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from exactapprox.cantor import (Cube, EpochWitness, case1_filter, case1_margin, certificate_from_json,
                                chain_indices, construct, corner_at, digits_needed,
                                place_y, verify_conditions)
from exactapprox.errors import DomainError, Infeasible, PreconditionViolated, WitnessOutOfCube
from exactapprox.lattice import RationalPoint
from exactapprox.lognum import Grid, LogQuantity, compare
from exactapprox.psi import PsiSpec, psi_of_height
from exactapprox.schedule import Constants, choose_times

SPEC = PsiSpec(1, 3)
GRID = Grid.from_M(4, 1)
RELAXED = Constants.relaxed(1, 2, 6, 30)


@pytest.fixture(scope="module")
def sched():
    return choose_times(SPEC, RELAXED, 2, GRID, minimal=True)


@pytest.fixture(scope="module")
def epoch1(sched):
    cert = construct(SPEC, RELAXED, sched, depth=1, verify=False)
    return cert, verify_conditions(cert)


# --- cubes -----------------------------------------------------------------

def test_cube_geometry():
    C = Cube.unit(2, 4)
    assert C.lo == (0, 0) and C.hi == (1, 1) and C.center == (mpq(1, 2), mpq(1, 2))
    kids = list(C.children())
    assert len(kids) == 16 and kids[0].corner == (0, 0) and kids[1].corner == (0, 1)
    assert all(C.child_index(c) == i for i, c in enumerate(kids))
    with pytest.raises(DomainError):
        Cube(1, (4,), 4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.fractions(min_value=0, max_value=Fraction(999, 1000)), min_size=2, max_size=2),
       st.integers(min_value=0, max_value=5), st.integers(min_value=1, max_value=12))
def test_chain_indices_match_containing(y, l0, extra):
    N = 7
    y = tuple(mpq(c) for c in y)
    start = Cube.unit(2, N).containing(y, l0)
    idx = chain_indices(y, start, l0 + extra)
    C = start
    for i in idx:
        nxt = C.containing(y, C.level + 1)
        assert C.child_index(nxt) == i
        C = nxt
    full = chain_indices(y, Cube.unit(2, N), l0 + extra)
    assert tuple(corner_at(full, l0 + extra, N, 2)) == C.corner


# --- case 1 ----------------------------------------------------------------

def test_case1_keep_rule_matches_margin(sched):
    C = Cube.unit(1, GRID.N)
    kept = case1_filter(C, 1, SPEC, sched)
    # at level 1 every centre has c_x >= -M >> -M_1 + M, so nothing is removed
    assert len(kept) == GRID.N
    m, _ = case1_margin(kept[0], 1, sched)
    assert compare(m, LogQuantity.log(2)) > 0


def test_case1_filter_rejects_case2_levels(sched):
    ep = sched.epoch(1)
    C = Cube(ep.l_minus, (0,), GRID.N)
    with pytest.raises(PreconditionViolated):
        case1_filter(C, 1, SPEC, sched)


def test_case1_drops_cubes_near_small_rationals():
    # tiny grid: the cube at 0 has c_x = -lM near x = 0, which falls below -M_1 + M
    sp, g = PsiSpec(1, 3), Grid(16, 1)
    s = choose_times(sp, Constants.paper(1, sp.gamma), 1, g, minimal=True)
    ep = s.epoch(1)
    l = min(ep.l_minus, 40)
    C = Cube(l - 1, (0,), 16)
    kept = case1_filter(C, 1, sp, s)
    assert C.child(0) not in kept and len(kept) < 16


# --- case 2 ----------------------------------------------------------------

def test_place_y_moves_one_coordinate():
    v = RationalPoint((4, 1))
    C = Cube(1, (0,), 2)           # [0, 1/2)
    y = place_y(v, mpq(1, 16), C)
    assert y == (mpq(5, 16),)
    with pytest.raises(WitnessOutOfCube):
        place_y(v, mpq(1, 2), C)


def test_epoch1_witness(epoch1, sched):
    cert, _ = epoch1
    w = cert.witnesses[0]
    assert cert.deepest == sched.epoch(1).l_plus == 581
    # k = 1: the point sits at exactly half of psi(H(v_1))
    assert w.v.distance(w.y) == psi_of_height(SPEC, w.H) / 2
    assert cert.cube(cert.deepest).contains(w.y)
    assert cert.cube(w.level_minus).contains(w.v.value)


def test_epoch1_audit(epoch1):
    _, rep = epoch1
    s = rep.summary()
    for cond in ("A", "B-lambda1", "B(i)", "B(ii)", "L2SEP", "CHAIN", "NEST", "TKMINUSR-eq"):
        assert s[cond]["failed"] == 0, cond
    assert s["A"]["checked"] == 296 and s["B-lambda1"]["checked"] == 261
    # Under R0=2, R1=6 the point lands at t^x < t_1 - R1*M_1: condition (iii) fails
    assert s["B(iii)"]["failed"] == 1
    bad = rep.failures()
    assert [(e["condition"], e["level"]) for e in bad] == [("B(iii)", 581)]
    assert bad[0]["margin_decimal"].startswith("-74.6585")


def test_construct_with_verify_raises_on_the_failing_condition(sched):
    with pytest.raises(Infeasible) as e:
        construct(SPEC, RELAXED, sched, depth=1, verify=True)
    assert e.value.predicate == "B(iii)"


def test_mutated_witness_is_rejected(epoch1):
    cert, _ = epoch1
    w = cert.witnesses[0]
    v = w.v.value[0]
    step = psi_of_height(SPEC, w.H)          # psi(H)/k with k = 1
    y = w.y[0] + (step if w.y[0] > v else -step)
    bad = replace(cert, witnesses=[replace(w, y=(y,))])
    rep = verify_conditions(bad)
    conds = {e["condition"] for e in rep.failures()}
    assert "B(ii)" in conds


def test_depth_zero_certificate(sched):
    cert = construct(SPEC, RELAXED, sched, depth=0)
    assert cert.address == [] and cert.witnesses == []
    assert cert.cube(0) == Cube.unit(1, GRID.N)
    rep = verify_conditions(cert)
    assert rep.entries == [] and rep.ok


def test_json_round_trip_and_determinism(epoch1, sched):
    cert, _ = epoch1
    d = json.loads(json.dumps(cert.to_json()))
    back = certificate_from_json(d)
    assert back.address == cert.address
    assert [w.v for w in back.witnesses] == [w.v for w in cert.witnesses]
    assert [w.y for w in back.witnesses] == [w.y for w in cert.witnesses]
    again = construct(SPEC, RELAXED, sched, depth=1, verify=False)
    assert json.dumps(again.to_json()) == json.dumps(cert.to_json())


def test_digit_cap_names_binding_predicate():
    s = choose_times(SPEC, Constants.paper(1, SPEC.gamma), 2, GRID, minimal=True)
    assert digits_needed(s, 2) > 10 ** 6
    with pytest.raises(Infeasible) as e:
        construct(SPEC, s.consts, s, depth=2, verify=False)
    assert e.value.predicate == "G3"
