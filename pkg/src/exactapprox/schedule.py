"""Epoch times, the constants R0..R3, and the piecewise-linear template.

An epoch ``k`` is anchored at a grid time ``t_k``.  With
``M_k = -sup_{t >= t_{k-1}} r(t)`` it defines

    t_k^-  = t_k + r(t_k)
    t_k^+  = t_k + R2*M_k            (the construction's end of epoch)
    t_k^+' = t_k - n*r(t_k)          (where the template returns to 0)
    l_k^-  = ceil((t_k^- - 4*R0*M_k)/M)
    l_k^+  = floor((t_k + R2*M_k)/M)

``t_k`` is the least grid time (optionally doubled once) passing every
predicate below; each predicate is re-evaluated with its exact margin and
kept in the schedule's audit trail.

  I    -gamma - 1/k <= r(t_k)/t_k <= -gamma + 1/k
  II   r(t) <= r(t_k) + R1*M_k for all t >= t_k
  III  r(t_k - R1*M_k) <= r(t_k) + (1+gamma)/2 * R1*M_k
  G1   exp(-M_k) < 1/(2k)
  G2   sup_{t >= t_k^- - 4 R0 M_k} r(t) < -5 R0 M_k
  G3   -(5 R0 + R1 + R2) M_k - On1 >= sup_{t >= t_k - R1 M_k} r(t)
  G4   M_k > 3M
  G5   l_{k-1}^+ < l_k^-  (and l_{k-1}^+ / l_k^- <= gap_ratio when given)
  ORD  t_{k-1}^+' < t_k^-  (t_1^- > 0 for the first epoch)
  G1+, G4+   G1 and G4 for M_{k+1}, so the next epoch can start
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from gmpy2 import mpq

from .errors import DomainError, Infeasible
from .lognum import (Enclosure, Grid, LogQuantity, compare, q_str, ratio_ceil,
                     ratio_floor, to_mpq)
from .psi import PsiSpec, cutoff_time, gamma_psi, m_bound, r_psi, sup_r

PAPER = "paper"
RELAXED = "relaxed"
DEFAULT_CEILING_LEVEL = 10**9


@dataclass(frozen=True)
class Constants:
    n: int
    R0: mpq
    R1: mpq
    R2: mpq
    profile: str = PAPER
    R3: mpq | None = None

    @classmethod
    def paper(cls, n: int, gamma) -> "Constants":
        gamma = to_mpq(gamma)
        if not gamma < 1:
            raise DomainError("the constants need gamma < 1")
        R0 = mpq(max(4 * n, n * n))
        R1 = 10 * R0 / (1 - gamma)
        R2 = 2 * n * (R1 + 6 * R0) + 1
        return cls(n, R0, R1, R2, PAPER)

    @classmethod
    def relaxed(cls, n: int, R0, R1, R2) -> "Constants":
        return cls(n, to_mpq(R0), to_mpq(R1), to_mpq(R2), RELAXED)

    @property
    def On1(self) -> LogQuantity:
        """Explicit Minkowski constant log((n+1)!)."""
        return LogQuantity.log(math.factorial(self.n + 1))

    @property
    def theorem_guarantee(self) -> bool:
        return self.profile == PAPER

    def check(self) -> list[str]:
        """Invariant violations (empty for the paper profile)."""
        bad = []
        if self.R0 < 4:
            bad.append("R0 >= 4")
        if not self.R1 > self.R0:
            bad.append("R1 > R0")
        if not self.R2 > 2 * self.n * (self.R1 + 6 * self.R0):
            bad.append("R2 > 2n(R1+6R0)")
        return bad

    def to_json(self) -> dict:
        return {"n": self.n, "R0": q_str(self.R0), "R1": q_str(self.R1), "R2": q_str(self.R2),
                "R3": None if self.R3 is None else q_str(self.R3),
                "On1": self.On1.to_json(), "profile": self.profile}

    @classmethod
    def from_json(cls, d) -> "Constants":
        return cls(int(d["n"]), to_mpq(d["R0"]), to_mpq(d["R1"]), to_mpq(d["R2"]),
                   d.get("profile", PAPER), None if d.get("R3") is None else to_mpq(d["R3"]))


def _json_num(x):
    if x is None:
        return None
    if isinstance(x, (LogQuantity, Enclosure)):
        return x.to_json()
    return q_str(x)


@dataclass
class PredicateResult:
    name: str
    ok: bool
    margin: object = None
    note: str = ""

    def to_json(self) -> dict:
        m = self.margin
        return {"predicate": self.name, "pass": self.ok,
                "margin": _json_num(m) if not isinstance(m, int) else str(m),
                "margin_decimal": _decimal(m), "note": self.note}


def _decimal(m):
    if m is None:
        return None
    if isinstance(m, (LogQuantity, Enclosure)):
        return m.approx(12)
    return str(float(to_mpq(m))) if not isinstance(m, int) else str(m)


@dataclass
class Epoch:
    k: int
    level: int
    t: LogQuantity
    M_k: object
    r_t: object
    t_minus: object
    t_plus_cantor: object
    t_plus_template: object
    l_minus: int
    l_plus: int
    eps: mpq
    audit: list = field(default_factory=list)
    binding: str | None = None

    def to_json(self) -> dict:
        return {
            "k": self.k, "level": self.level, "t": _json_num(self.t),
            "M_k": _json_num(self.M_k), "r_psi_t": _json_num(self.r_t),
            "t_minus": _json_num(self.t_minus), "t_plus_cantor": _json_num(self.t_plus_cantor),
            "t_plus_template": _json_num(self.t_plus_template),
            "l_minus": self.l_minus, "l_plus": self.l_plus, "eps": q_str(self.eps),
            "binding_predicate": self.binding,
            "audit": [p.to_json() for p in self.audit],
        }


@dataclass
class EpochSchedule:
    spec: PsiSpec
    grid: Grid
    consts: Constants
    t0_level: int
    epochs: list
    minimal: bool = False
    gap_ratio: mpq | None = None

    @property
    def gamma(self) -> mpq:
        return gamma_psi(self.spec)

    def epoch(self, k: int) -> Epoch:
        return self.epochs[k - 1]

    def l_plus_prev(self, k: int) -> int:
        return 0 if k == 1 else self.epochs[k - 2].l_plus

    def case_of_level(self, l: int):
        """``(k, case)`` for a level ``l >= 1``: case 1 on ``(l_{k-1}^+, l_k^-]``,
        case 2 on ``(l_k^-, l_k^+]``, or ``(K+1, 1)`` after the last epoch."""
        prev = 0
        for ep in self.epochs:
            if prev < l <= ep.l_minus:
                return ep.k, 1
            if ep.l_minus < l <= ep.l_plus:
                return ep.k, 2
            prev = ep.l_plus
        return len(self.epochs) + 1, 1

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "grid": {"N": self.grid.N, "n": self.grid.n, "M": self.grid.M.to_json()},
            "constants": self.consts.to_json(),
            "t0_level": self.t0_level,
            "minimal": self.minimal,
            "gap_ratio": None if self.gap_ratio is None else q_str(self.gap_ratio),
            "epochs": [e.to_json() for e in self.epochs],
        }


# ---------------------------------------------------------------------------
# predicates


class _Ctx:
    """Everything predicates need for epoch k with a candidate level L."""

    def __init__(self, spec, grid, consts, k, t_prev, M_k, prev_l_plus, prev_t_plus_tmpl, gap_ratio):
        self.spec, self.grid, self.consts, self.k = spec, grid, consts, k
        self.t_prev, self.M_k = t_prev, M_k
        self.prev_l_plus, self.prev_t_plus_tmpl = prev_l_plus, prev_t_plus_tmpl
        self.gap_ratio = gap_ratio
        self.gamma = gamma_psi(spec)
        self.cut = cutoff_time(spec)

    def derived(self, L: int) -> dict:
        c, g = self.consts, self.grid
        t = g.time(L)
        r = r_psi(self.spec, t)
        t_minus = t + r
        d = {
            "t": t, "r": r, "t_minus": t_minus,
            "t_plus_cantor": t + self.M_k * c.R2,
            "t_plus_template": t - r * self.spec.n,
            "l_minus": ratio_ceil(t_minus - self.M_k * (4 * c.R0), g.M),
            "l_plus": ratio_floor(t + self.M_k * c.R2, g.M),
        }
        return d


def _safe_sup(spec, a, cut):
    if compare(a, cut) < 0:
        raise DomainError("below cutoff")
    return sup_r(spec, a)


def evaluate_predicates(ctx: _Ctx, L: int, lookahead: bool = True) -> list[PredicateResult]:
    spec, c, k, M_k = ctx.spec, ctx.consts, ctx.k, ctx.M_k
    gamma = ctx.gamma
    out = []

    def add(name, fn):
        try:
            ok, margin = fn()
            out.append(PredicateResult(name, bool(ok), margin))
        except DomainError as e:
            out.append(PredicateResult(name, False, None, str(e)))

    try:
        d = ctx.derived(L)
    except DomainError as e:
        return [PredicateResult("domain", False, None, str(e))]
    t, r = d["t"], d["r"]
    R1M = M_k * c.R1

    def p_I():
        lo = r - t * (-gamma - mpq(1, k))
        hi = t * (-gamma + mpq(1, k)) - r
        m = lo if compare(lo, hi) <= 0 else hi
        return compare(m, LogQuantity.zero()) >= 0, m

    def p_II():
        m = r + R1M - _safe_sup(spec, t, ctx.cut)
        return compare(m, LogQuantity.zero()) >= 0, m

    def p_III():
        m = r + R1M * ((1 + gamma) / 2) - r_psi(spec, t - R1M)
        return compare(m, LogQuantity.zero()) >= 0, m

    def p_G1():
        m = M_k - LogQuantity.log(2 * k)
        return compare(m, LogQuantity.zero()) > 0, m

    def p_G2():
        m = M_k * (-5 * c.R0) - _safe_sup(spec, d["t_minus"] - M_k * (4 * c.R0), ctx.cut)
        return compare(m, LogQuantity.zero()) > 0, m

    def p_G3():
        m = M_k * (-(5 * c.R0 + c.R1 + c.R2)) - c.On1 - _safe_sup(spec, t - R1M, ctx.cut)
        return compare(m, LogQuantity.zero()) >= 0, m

    def p_G4():
        m = M_k - ctx.grid.M * 3
        return compare(m, LogQuantity.zero()) > 0, m

    def p_G5():
        gap = d["l_minus"] - ctx.prev_l_plus
        ok = gap > 0
        if ok and ctx.gap_ratio is not None and ctx.prev_l_plus > 0:
            ok = mpq(ctx.prev_l_plus, d["l_minus"]) <= ctx.gap_ratio
        return ok, gap

    def p_ORD():
        m = d["t_minus"] - (ctx.prev_t_plus_tmpl if ctx.prev_t_plus_tmpl is not None
                            else LogQuantity.zero())
        return compare(m, LogQuantity.zero()) > 0, m

    add("I", p_I)
    add("II", p_II)
    add("III", p_III)
    add("G1", p_G1)
    add("G2", p_G2)
    add("G3", p_G3)
    add("G4", p_G4)
    add("G5", p_G5)
    add("ORD", p_ORD)
    if lookahead:
        def nxt():
            return m_bound(spec, t)

        def p_G1n():
            m = nxt() - LogQuantity.log(2 * (k + 1))
            return compare(m, LogQuantity.zero()) > 0, m

        def p_G4n():
            m = nxt() - ctx.grid.M * 3
            return compare(m, LogQuantity.zero()) > 0, m

        add("G1+", p_G1n)
        add("G4+", p_G4n)
    return out


def _all_ok(res) -> bool:
    return all(p.ok for p in res)


def _first_failing(res):
    return next((p.name for p in res if not p.ok), None)


# ---------------------------------------------------------------------------
# search


def _search_min(ok, lo: int, ceiling: int) -> int | None:
    """Least L >= lo with ok(L) for predicates that become and stay true.

    Gallops from ``lo`` then bisects; returns None if ``ok`` never holds up to
    ``ceiling``.
    """
    if ok(lo):
        return lo
    prev, step = lo, 1
    while True:
        L = lo + step
        if L > ceiling:
            if not ok(ceiling):
                return None
            L = ceiling
            break
        if ok(L):
            break
        prev, step = L, step * 2
    a, b = prev, L  # ok(a) false, ok(b) true
    while b - a > 1:
        m = (a + b) // 2
        if ok(m):
            b = m
        else:
            a = m
    return b


def choose_t0(spec: PsiSpec, grid: Grid, ceiling: int = DEFAULT_CEILING_LEVEL) -> int:
    """Least grid level whose M_1 = -sup_{t >= t0} r(t) exceeds both 3M and log 2."""
    cut = cutoff_time(spec)
    lo = max(0, grid.level_ceil(cut))

    def ok(L):
        M1 = m_bound(spec, grid.time(L))
        return compare(M1, grid.M * 3) > 0 and compare(M1, LogQuantity.log(2)) > 0

    L = _search_min(ok, lo, ceiling)
    if L is None:
        raise Infeasible("no starting time gives M_1 > 3M below the time ceiling", "G4")
    return L


def _binding(ctx: _Ctx, failing: list[str], lo: int, ceiling: int) -> str:
    """Among failing predicates, the one whose own threshold is largest."""
    best, best_level = failing[0], -1
    for name in failing:
        def ok(L, name=name):
            res = evaluate_predicates(ctx, L)
            return all(p.ok for p in res if p.name == name)

        lvl = _search_min(ok, lo, max(ceiling, lo) * 64 + 64)
        lvl = math.inf if lvl is None else lvl
        if lvl > best_level:
            best, best_level = name, lvl
    return best


def choose_times(spec: PsiSpec, consts: Constants, k_max: int, grid: Grid,
                 minimal: bool = False, gap_ratio=None,
                 ceiling: int = DEFAULT_CEILING_LEVEL) -> EpochSchedule:
    """Choose ``t_1, ..., t_kmax`` on the grid (see the module docstring)."""
    gamma = gamma_psi(spec)
    if not spec.admissible or gamma <= 0 and spec.family == "power":
        raise Infeasible("gamma_psi = 0: M_k vanishes and G4 cannot hold", "G4")
    if not gamma < 1:
        raise Infeasible("gamma_psi must be < 1", "I")
    gap_ratio = None if gap_ratio is None else to_mpq(gap_ratio)
    t0 = choose_t0(spec, grid, ceiling)
    epochs: list[Epoch] = []
    prev_level, prev_l_plus, prev_tmpl = t0, 0, None
    for k in range(1, k_max + 1):
        t_prev = grid.time(prev_level)
        M_k = m_bound(spec, t_prev)
        ctx = _Ctx(spec, grid, consts, k, t_prev, M_k, prev_l_plus, prev_tmpl, gap_ratio)
        lo = prev_level + 1

        def ok(L):
            return _all_ok(evaluate_predicates(ctx, L))

        L = _search_min(ok, lo, ceiling)
        if L is None:
            res = evaluate_predicates(ctx, ceiling)
            failing = [p.name for p in res if not p.ok]
            name = _binding(ctx, failing, lo, ceiling)
            raise Infeasible(
                f"epoch {k}: no grid time up to level {ceiling} passes all predicates; "
                f"binding predicate {name}", name)
        L = _lemma_descent(ctx, L)
        binding = None
        if L > lo:
            res_prev = evaluate_predicates(ctx, L - 1)
            binding = _first_failing(res_prev)
        if not minimal:
            L2 = _search_min(ok, 2 * L, max(ceiling, 2 * L))
            if L2 is None or L2 > ceiling:
                raise Infeasible(f"epoch {k}: doubled time exceeds the ceiling", binding)
            L = L2
        res = evaluate_predicates(ctx, L)
        d = ctx.derived(L)
        ep = Epoch(k=k, level=L, t=d["t"], M_k=M_k, r_t=d["r"], t_minus=d["t_minus"],
                   t_plus_cantor=d["t_plus_cantor"], t_plus_template=d["t_plus_template"],
                   l_minus=d["l_minus"], l_plus=d["l_plus"],
                   eps=min(mpq(1, 2 * k), mpq(1, 8)), audit=res, binding=binding)
        epochs.append(ep)
        prev_level, prev_l_plus, prev_tmpl = L, ep.l_plus, ep.t_plus_template
    return EpochSchedule(spec, grid, consts, t0, epochs, minimal, gap_ratio)


def _lemma_descent(ctx: _Ctx, L: int) -> int:
    """Step down by R1*M_k (rounded to whole levels) while (III) fails.

    Only the final candidate is returned if every predicate still holds
    there; otherwise ``L`` is kept.
    """
    res = evaluate_predicates(ctx, L)
    if next(p for p in res if p.name == "III").ok:
        return L
    step = max(1, ratio_ceil(ctx.M_k * ctx.consts.R1, ctx.grid.M))
    cand = L
    while cand - step > 0:
        cand -= step
        res = evaluate_predicates(ctx, cand)
        if next(p for p in res if p.name == "III").ok:
            return cand if _all_ok(res) else L
    return L


def recheck(schedule: EpochSchedule) -> list[tuple[int, list[PredicateResult]]]:
    """Independent re-evaluation of every predicate for every epoch."""
    out = []
    spec, grid, consts = schedule.spec, schedule.grid, schedule.consts
    prev_level, prev_l_plus, prev_tmpl = schedule.t0_level, 0, None
    for ep in schedule.epochs:
        t_prev = grid.time(prev_level)
        M_k = m_bound(spec, t_prev)
        ctx = _Ctx(spec, grid, consts, ep.k, t_prev, M_k, prev_l_plus, prev_tmpl,
                   schedule.gap_ratio)
        res = evaluate_predicates(ctx, ep.level)
        d = ctx.derived(ep.level)
        consistent = (d["l_minus"] == ep.l_minus and d["l_plus"] == ep.l_plus
                      and compare(M_k, ep.M_k) == 0 and compare(d["t_minus"], ep.t_minus) == 0)
        res.append(PredicateResult("fields", consistent, None))
        out.append((ep.k, res))
        prev_level, prev_l_plus, prev_tmpl = ep.level, ep.l_plus, ep.t_plus_template
    return out


# ---------------------------------------------------------------------------
# template


@dataclass
class Template:
    n: int
    breakpoints: list  # [(t, T(t))]
    slopes: list       # slope on [breakpoints[i], breakpoints[i+1]]

    def __call__(self, t):
        """Exact value T(t) (LogQuantity arithmetic)."""
        if compare(t, LogQuantity.zero()) < 0:
            raise DomainError("template is defined for t >= 0")
        bp = self.breakpoints
        for i in range(len(bp) - 1):
            if compare(t, bp[i + 1][0]) <= 0:
                return bp[i][1] + (t - bp[i][0]) * self.slopes[i]
        return bp[-1][1] + (t - bp[-1][0]) * self.slopes[-1]

    def to_json(self) -> dict:
        return {"n": self.n,
                "breakpoints": [{"t": _json_num(t), "T": _json_num(v)} for t, v in self.breakpoints],
                "slopes": [q_str(s) for s in self.slopes]}


def build_template(spec: PsiSpec, schedule: EpochSchedule) -> Template:
    if not schedule.epochs:
        raise DomainError("empty schedule")
    n = spec.n
    zero = LogQuantity.zero(schedule.grid.N)
    bps = [(zero, zero)]
    slopes = []
    for ep in schedule.epochs:
        bps.append((ep.t_minus, zero))
        slopes.append(mpq(0))
        bps.append((ep.t, ep.r_t))
        slopes.append(mpq(-1))
        bps.append((ep.t_plus_template, zero))
        slopes.append(mpq(1, n))
    slopes.append(mpq(0))
    tmpl = Template(n, bps, slopes)
    # continuity: each segment's end value matches the next breakpoint exactly
    for i in range(len(bps) - 1):
        (t0, v0), (t1, v1) = bps[i], bps[i + 1]
        if compare(v0 + (t1 - t0) * slopes[i], v1) != 0:
            raise DomainError(f"template discontinuous at breakpoint {i + 1}")
    return tmpl
