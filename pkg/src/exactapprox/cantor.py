"""One branch of the Cantor set: construction, certificate and verifier.

Levels ``E_l`` are unions of cubes of side ``N^-l``.  Between epochs
(case 1) a subcube is kept when ``c_x(lM) >= -M_k + M`` is certified for all
of its points; around ``t_k`` (case 2) the branch is pinned to the cubes
containing a point ``y_k`` at distance ``(1 - 1/2k) psi(H(v_k))`` from a
rational ``v_k`` of controlled height.

Every inequality is checked at a cube centre and transferred to the whole
cube with the distortion bound: for ``d(x, x') <= eps * N^-l`` and ``t = lM``,
``lambda_1`` moves by a factor in ``[1 - eps, 1 + eps]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from gmpy2 import mpq, mpz
from mpmath import iv, mp

from .errors import DomainError, Infeasible, InternalError, PreconditionViolated, WitnessOutOfCube
from .lattice import FlowLattice, FlowPoint, RationalPoint, rational_near_bad
from .lognum import (Enclosure, GridTime, LogQuantity, compare, int_str, lq_max, q_str, ratio_ceil,
                     ratio_floor, to_mpq)
from .psi import PsiSpec, m_bound, psi_log, psi_of_height, r_psi, scale
from .schedule import Constants, EpochSchedule

DIGIT_CAP = 10**6
VERIFY_LOOKAHEAD = 4


# ---------------------------------------------------------------------------
# cubes


@dataclass(frozen=True)
class Cube:
    """``prod [c_i/N^l, (c_i+1)/N^l)``."""

    level: int
    corner: tuple
    N: int

    def __post_init__(self):
        side = mpz(self.N) ** self.level
        if any(not 0 <= c < side for c in self.corner):
            raise DomainError("cube corner outside [0,1)^n")

    @classmethod
    def unit(cls, n: int, N: int) -> "Cube":
        return cls(0, (0,) * n, N)

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def scale(self) -> mpz:
        return mpz(self.N) ** self.level

    @property
    def lo(self) -> tuple:
        return tuple(mpq(c, self.scale) for c in self.corner)

    @property
    def hi(self) -> tuple:
        return tuple(mpq(c + 1, self.scale) for c in self.corner)

    @property
    def center(self) -> tuple:
        s = 2 * self.scale
        return tuple(mpq(2 * c + 1, s) for c in self.corner)

    def child(self, index: int) -> "Cube":
        digits = []
        for _ in range(self.n):
            index, j = divmod(index, self.N)
            digits.append(j)
        return Cube(self.level + 1, tuple(self.N * c + j for c, j in zip(self.corner, reversed(digits))),
                    self.N)

    def child_index(self, child: "Cube") -> int:
        idx = 0
        for c, cc in zip(self.corner, child.corner):
            idx = idx * self.N + (cc - self.N * c)
        return int(idx)

    def children(self):
        """Subcubes in lexicographic order of their corners."""
        for i in range(self.N ** self.n):
            yield self.child(i)

    def contains(self, y) -> bool:
        return all(a <= to_mpq(v) < b for a, b, v in zip(self.lo, self.hi, y))

    def containing(self, y, level: int) -> "Cube":
        s = mpz(self.N) ** level
        corner = tuple(int((to_mpq(v) * s).__floor__()) for v in y)
        return Cube(level, corner, self.N)

    def to_json(self) -> dict:
        return {"level": self.level, "corner": [int_str(c) for c in self.corner], "N": self.N}


def chain_indices(y, start: Cube, to_level: int) -> list:
    """Child indices of the cubes containing ``y`` below ``start`` down to ``to_level``.

    Works digit by digit on the remainders of ``y * N^l`` so no huge rational
    is ever normalised.
    """
    N = start.N
    s = start.scale
    rs, bs = [], []
    for yi, c in zip(y, start.corner):
        yi = to_mpq(yi)
        a, b = mpz(yi.numerator), mpz(yi.denominator)
        r = a * s - c * b
        if not 0 <= r < b:
            raise DomainError("point is not in the starting cube")
        rs.append(r)
        bs.append(b)
    out = []
    for _ in range(start.level, to_level):
        idx = 0
        for i, b in enumerate(bs):
            d, rs[i] = divmod(rs[i] * N, b)
            idx = idx * N + int(d)
        out.append(idx)
    return out


def corner_at(address, level: int, N: int, n: int) -> list:
    """Corner integers of the address cube at ``level``."""
    corner = [mpz(0)] * n
    for idx in address[:level]:
        digits = []
        for _ in range(n):
            idx, j = divmod(idx, N)
            digits.append(j)
        corner = [N * c + j for c, j in zip(corner, reversed(digits))]
    return corner


def _distortion(l: int, D: int, N: int):
    """``log(1 - N^{l-D}/2)`` and ``log((1+e)/(1-e))`` with ``e = N^{l-D}/2``."""
    m = 2 * mpz(N) ** (D - l)
    return LogQuantity.log(mpq(m - 1, m)), LogQuantity.log(mpq(m + 1, m - 1))


def _pos(x) -> bool:
    return compare(x, LogQuantity.zero()) >= 0


# ---------------------------------------------------------------------------
# case 1


def _threshold(schedule: EpochSchedule, k: int):
    """``-M_k + M``; epochs past the schedule use ``M_{k} = -sup_{t >= t_{k-1}} r``."""
    grid = schedule.grid
    return -_M(schedule, k) + grid.M


def _M(schedule: EpochSchedule, k: int):
    if k <= len(schedule.epochs):
        return schedule.epoch(k).M_k
    return m_bound(schedule.spec, schedule.epoch(k - 1).t)


def case1_margin(cube: Cube, k: int, schedule: EpochSchedule, hint=None):
    """``(margin, lattice)`` for keeping ``cube`` at its own level in epoch k.

    The margin is ``c_{x_c}(lM) - log 2 + M_k - M`` at the centre ``x_c``;
    the cube is kept when it is nonnegative.
    """
    lat = FlowLattice(cube.center, cube.level, schedule.grid, hint)
    nrm, _ = lat.shortest()
    c = lat.log_of(nrm)
    return c + LogQuantity.log(mpq(1, 2)) - _threshold(schedule, k), lat


def case1_filter(C: Cube, k: int, spec: PsiSpec, schedule: EpochSchedule, hint=None) -> list:
    """Subcubes of ``C`` where ``c_x(lM) >= -M_k + M`` holds for every point."""
    l = C.level + 1
    lo = schedule.l_plus_prev(k)
    if not lo < l <= schedule.epoch(k).l_minus:
        raise PreconditionViolated(f"level {l} is not a case-1 level of epoch {k}")
    kept = []
    for sub in C.children():
        margin, lat = case1_margin(sub, k, schedule, hint)
        hint = lat.reduced_basis()
        if _pos(margin):
            kept.append(sub)
    return kept


def _first_kept(C: Cube, k: int, schedule: EpochSchedule, hint):
    for i in range(C.N ** C.n):
        sub = C.child(i)
        margin, lat = case1_margin(sub, k, schedule, hint)
        if _pos(margin):
            return sub, margin, lat
        hint = lat.reduced_basis()
    raise Infeasible(f"case 1 kept no subcube at level {C.level + 1} (epoch {k})", "A")


# ---------------------------------------------------------------------------
# case 2


@dataclass
class EpochWitness:
    k: int
    v: RationalPoint
    y: tuple
    d_exact: object          # mpq, or LogQuantity/Enclosure of log d when irrational
    level_minus: int
    snapped_level: int
    R: object
    margins: dict = field(default_factory=dict)

    @property
    def H(self) -> int:
        return self.v.height

    def to_json(self) -> dict:
        d = self.d_exact
        return {
            "k": self.k, "v": self.v.to_json(), "H": int_str(self.H),
            "y": [q_str(c) for c in self.y],
            "d_exact": q_str(d) if isinstance(d, type(mpq(0))) else d.to_json(),
            "level_minus": self.level_minus, "snapped_level": self.snapped_level,
            "R": self.R.to_json(),
            "margins": {k: _jm(m) for k, m in self.margins.items()},
        }

    @classmethod
    def from_json(cls, d) -> "EpochWitness":
        dex = d["d_exact"]
        return cls(int(d["k"]), RationalPoint.from_json(d["v"]), tuple(to_mpq(c) for c in d["y"]),
                   to_mpq(dex) if isinstance(dex, str) else None,
                   int(d["level_minus"]), int(d["snapped_level"]), None, d.get("margins", {}))


def _jm(m):
    if m is None or isinstance(m, (str, bool)):
        return m
    if isinstance(m, dict):
        return m
    return {"decimal": m.approx(12), "pass": _pos(m)}


def _target_distance(spec: PsiSpec, H: int, k: int):
    """``(1 - 1/2k) psi(H)`` exactly when rational, else a close rational below it."""
    f = 1 - mpq(1, 2 * k)
    p = psi_of_height(spec, H)
    if p is not None:
        return f * p, True
    logt = psi_log(spec, LogQuantity.log(H)) + LogQuantity.log(f)
    e = Enclosure.of(logt)
    # 2^-P relative accuracy, well inside the 1/(2k) slack of (B)(ii)
    P = 64 + 2 * k.bit_length()
    prec = P + 64
    old = iv.prec
    iv.prec = prec
    try:
        lo = iv.exp(e.interval(prec)).a
        with mp.workprec(prec):
            m, ex = mp.frexp(mp.mpf(lo))
            num = int(mp.floor(mp.ldexp(m, P)))
    finally:
        iv.prec = old
    ex = int(ex) - P
    val = mpq(num) * (mpq(2) ** ex if ex >= 0 else mpq(1, 2 ** -ex))
    return val, False


def place_y(v: RationalPoint, delta: mpq, C: Cube) -> tuple:
    """``y`` with ``d(v, y) = delta`` inside ``C``: one coordinate moved by
    ``+-delta``, the move with the most clearance to the cube boundary."""
    lo, hi = C.lo, C.hi
    best = None
    for i in range(C.n):
        for sgn in (1, -1):
            y = list(v.value)
            y[i] += sgn * delta
            if not all(a <= c < b for a, b, c in zip(lo, hi, y)):
                continue
            clear = min(min(c - a, b - c) for a, b, c in zip(lo, hi, y))
            if best is None or clear > best[0]:
                best = (clear, tuple(y))
    if best is None:
        raise WitnessOutOfCube(
            f"no point at distance {q_str(delta)} from v stays in the level-{C.level} cube")
    return best[1]


def case2_select(C: Cube, k: int, spec: PsiSpec, schedule: EpochSchedule, consts: Constants,
                 hint=None):
    """Witness ``v_k``, the point ``y_k`` and the chain ``C_l(y_k)`` through ``l_k^+``.

    The chain is returned as child indices (one per level after ``l_k^-``).
    """
    ep = schedule.epoch(k)
    grid = schedule.grid
    if C.level != ep.l_minus:
        raise PreconditionViolated(f"case 2 starts at level l_k^- = {ep.l_minus}")
    x_k = C.center
    lat = FlowLattice(x_k, C.level, grid, hint)
    nrm, _ = lat.shortest()
    c = lat.log_of(nrm)
    # R = max(-c, log 3): lambda_1 >= e^{-R} and R > log 2 for the distance bound
    R = lq_max(-c, LogQuantity.log(3))
    v, info = rational_near_bad(FlowPoint(x_k, GridTime(C.level, grid)), R, lat.reduced_basis())
    H = v.height
    logH = LogQuantity.log(H, grid.N)
    R0M = ep.M_k * consts.R0
    bi_lo = logH - (ep.t_minus - R0M * 5)
    bi_hi = (ep.t_minus - R0M * 3) - logH
    if not (_pos(bi_lo) and _pos(bi_hi)):
        raise Infeasible(f"epoch {k}: H(v_k) misses the window of condition (B)(i)", "B(i)")
    delta, exact = _target_distance(spec, H, k)
    y = place_y(v, delta, C)
    chain = chain_indices(y, C, ep.l_plus)
    w = EpochWitness(k, v, y, delta if exact else psi_log(spec, LogQuantity.log(H))
                     + LogQuantity.log(1 - mpq(1, 2 * k)),
                     C.level, info["snapped_level"], R, {"Bi_lower": bi_lo, "Bi_upper": bi_hi})
    return chain, w


# ---------------------------------------------------------------------------
# certificate


@dataclass
class Certificate:
    spec: PsiSpec
    consts: Constants
    schedule: EpochSchedule
    depth: int
    address: list
    witnesses: list
    audit: list = field(default_factory=list)

    @property
    def theorem_guarantee(self) -> bool:
        return self.consts.theorem_guarantee and not self.consts.check()

    @property
    def deepest(self) -> int:
        return len(self.address)

    def cube(self, level: int) -> Cube:
        N = self.schedule.grid.N
        return Cube(level, tuple(corner_at(self.address, level, N, self.spec.n)), N)

    def point(self) -> tuple:
        """Centre of the deepest cube (a representative point)."""
        return self.cube(self.deepest).center

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "constants": self.consts.to_json(),
            "schedule": self.schedule.to_json(),
            "depth": self.depth,
            "address": list(map(int, self.address)),
            "witnesses": [w.to_json() for w in self.witnesses],
            "audit": self.audit,
            "theorem_guarantee": self.theorem_guarantee,
        }


def digits_needed(schedule: EpochSchedule, k: int) -> int:
    """Decimal digits of ``N^{l_k^+}``."""
    return int(schedule.epoch(k).l_plus * math.log10(schedule.grid.N)) + 1


def construct(spec: PsiSpec, consts: Constants, schedule: EpochSchedule, depth: int | None = None,
              verify: bool = True, progress=None, digit_cap: int = DIGIT_CAP) -> Certificate:
    """Build one branch through ``depth`` epochs.

    Case-1 levels keep the lexicographically first certified subcube; case-2
    levels follow ``y_k``.  With ``verify`` the independent verifier replays
    the certificate after each epoch and any failure raises Infeasible.
    """
    depth = len(schedule.epochs) if depth is None else int(depth)
    if not 0 <= depth <= len(schedule.epochs):
        raise DomainError(f"depth {depth} exceeds the {len(schedule.epochs)} scheduled epochs")
    for k in range(1, depth + 1):
        if digits_needed(schedule, k) > digit_cap:
            ep = schedule.epoch(k)
            raise Infeasible(
                f"epoch {k} needs N^{ep.l_plus} ({digits_needed(schedule, k)} digits, cap {digit_cap});"
                f" t_{k} is set by predicate {ep.binding}", ep.binding or "digit_cap")
    cert = Certificate(spec, consts, schedule, depth, [], [])
    C = Cube.unit(spec.n, schedule.grid.N)
    hint = None
    for k in range(1, depth + 1):
        ep = schedule.epoch(k)
        for l in range(schedule.l_plus_prev(k) + 1, ep.l_minus + 1):
            sub, margin, lat = _first_kept(C, k, schedule, hint)
            hint = lat.reduced_basis()
            cert.address.append(C.child_index(sub))
            C = sub
            if progress:
                progress(l)
        chain, w = case2_select(C, k, spec, schedule, consts, hint)
        cert.address.extend(chain)
        C = C.containing(w.y, ep.l_plus)
        cert.witnesses.append(w)
        if verify:
            rep = verify_conditions(cert, cert.deepest)
            cert.audit = rep.entries
            if not rep.ok:
                bad = rep.failures()[0]
                raise Infeasible(f"epoch {k}: verifier rejected {bad['condition']} at level "
                                 f"{bad['level']} (margin {bad['margin_decimal']})", bad["condition"])
    return cert


# ---------------------------------------------------------------------------
# verifier


@dataclass
class VerifyReport:
    entries: list

    @property
    def ok(self) -> bool:
        return all(e["pass"] for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e["pass"]]

    def summary(self) -> dict:
        out = {}
        for e in self.entries:
            s = out.setdefault(e["condition"], {"checked": 0, "failed": 0, "min_margin": None})
            s["checked"] += 1
            s["failed"] += not e["pass"]
            m = e.get("margin_float")
            if m is not None and (s["min_margin"] is None or m < s["min_margin"]):
                s["min_margin"] = m
        return out


def _entry(level, cond, margin, ok=None, k=None):
    if ok is None:
        ok = _pos(margin)
    dec = None if margin is None else margin.approx(12)
    e = {"level": level, "k": k, "condition": cond, "margin_decimal": dec, "pass": bool(ok)}
    if margin is not None:
        e["margin_float"] = float(dec)
    return e


def _ranges(schedule: EpochSchedule, k: int):
    """Grid levels of (A) for epoch k and of (B) for epoch k (B empty past the schedule)."""
    grid = schedule.grid
    cs = schedule.consts
    M_k = _M(schedule, k)
    a_lo = 0 if k == 1 else ratio_ceil(schedule.epoch(k - 1).t_plus_cantor, grid.M)
    if k <= len(schedule.epochs):
        ep = schedule.epoch(k)
        a_hi = ratio_floor(ep.t_minus - M_k * (4 * cs.R0), grid.M)
        b = (ratio_ceil(ep.t_minus, grid.M), ep.l_plus)
    else:
        a_hi, b = None, None
    return (a_lo, a_hi), b


def _witness_box_checks(spec, cert, w: EpochWitness, C: Cube, entries):
    """(B)(i)-(iii) and the chain for witness ``w`` over the cube ``C``."""
    sch, cs, grid = cert.schedule, cert.consts, cert.schedule.grid
    k = w.k
    ep = sch.epoch(k)
    v = w.v
    H = v.height
    lvl = ep.l_plus
    logH = LogQuantity.log(H, grid.N)
    R0M = ep.M_k * cs.R0
    entries.append(_entry(lvl, "B(i)", logH - (ep.t_minus - R0M * 5), k=k))
    entries.append(_entry(lvl, "B(i)", (ep.t_minus - R0M * 3) - logH, k=k))
    lpsi = psi_log(spec, LogQuantity.log(H))
    vv = v.value
    # extreme distances from v over the closed cube
    dmax = max(max(abs(a - p), abs(b - p)) for a, b, p in zip(C.lo, C.hi, vv))
    dmin = max(max(a - p, p - b, mpq(0)) for a, b, p in zip(C.lo, C.hi, vv))
    entries.append(_entry(lvl, "B(ii)", lpsi - LogQuantity.log(dmax), ok=compare(LogQuantity.log(dmax), lpsi) < 0, k=k))
    if k > 1:
        low = lpsi + LogQuantity.log(1 - mpq(1, k))
        if dmin == 0:
            entries.append(_entry(lvl, "B(ii)", None, ok=False, k=k))
        else:
            m = LogQuantity.log(dmin) - low
            entries.append(_entry(lvl, "B(ii)", m, ok=compare(m, LogQuantity.zero()) > 0, k=k))
    # the stored y_k itself
    dy = v.distance(w.y)
    ok_y = dy != 0 and compare(LogQuantity.log(dy), lpsi) < 0 and (
        k == 1 or compare(LogQuantity.log(dy), lpsi + LogQuantity.log(1 - mpq(1, k))) > 0)
    entries.append(_entry(lvl, "B(ii)", None if dy == 0 else lpsi - LogQuantity.log(dy), ok=ok_y, k=k))
    # (iii): t_k - R1 M_k < -(n/(n+1)) log d < t_k + 1 for d in [dmin, dmax]
    f = mpq(-spec.n, spec.n + 1)
    if dmin > 0:
        tx_hi = LogQuantity.log(dmin) * f
        m = Enclosure.of(ep.t) + 1 - Enclosure.of(tx_hi)
        entries.append(_entry(lvl, "B(iii)", m, ok=compare(m, LogQuantity.zero()) > 0, k=k))
    else:
        entries.append(_entry(lvl, "B(iii)", None, ok=False, k=k))
    tx_lo = LogQuantity.log(dmax) * f
    m = tx_lo - (ep.t - ep.M_k * cs.R1)
    entries.append(_entry(lvl, "B(iii)", m, ok=compare(m, LogQuantity.zero()) > 0, k=k))
    return tx_lo


def verify_conditions(cert: Certificate, through_level: int | None = None,
                      lookahead: int = VERIFY_LOOKAHEAD, progress=None) -> VerifyReport:
    """Independent replay of (A_l) and (B_l) for every point of the deepest cube.

    ``c_x(lM)`` is recomputed at the centre of the address cube at level
    ``D = min(l + lookahead, deepest)``; the factor ``1 -+ N^{l-D}/2``
    transfers each inequality to the whole deepest cube.
    """
    spec, sch, cs = cert.spec, cert.schedule, cert.consts
    grid = sch.grid
    N, n = grid.N, spec.n
    deepest = cert.deepest
    through = deepest if through_level is None else min(int(through_level), deepest)
    entries: list = []
    if through == 0 and not cert.witnesses:
        return VerifyReport(entries)
    wit = {w.k: w for w in cert.witnesses}
    K = len(sch.epochs)
    # level -> list of (kind, k)
    roles: dict = {}
    tx_level = {}
    deep_cube = cert.cube(deepest)
    for k in range(1, K + 2):
        (a_lo, a_hi), b = _ranges(sch, k)
        a_hi = through if a_hi is None else min(a_hi, through)
        for l in range(a_lo, a_hi + 1):
            roles.setdefault(l, []).append(("A", k))
        if b is not None and k in wit and b[1] <= through:
            w = wit[k]
            ep = sch.epoch(k)
            if w.level_minus != ep.l_minus:
                entries.append(_entry(w.level_minus, "CHAIN", None, ok=False, k=k))
            # chain: the address follows the cubes containing y_k from l_k^- to l_k^+
            Cm = cert.cube(ep.l_minus)
            ok = Cm.contains(w.y) and \
                chain_indices(w.y, Cm, ep.l_plus) == list(cert.address[ep.l_minus:ep.l_plus])
            entries.append(_entry(ep.l_plus, "CHAIN", None, ok=ok, k=k))
            tx = _witness_box_checks(spec, cert, w, deep_cube, entries)
            tx_level[k] = ratio_floor(tx, grid.M)
            for l in range(b[0], b[1] + 1):
                roles.setdefault(l, []).append(("B", k))
        if a_lo > through:
            break
    if through > 0 and 1 not in wit and K == 0:
        pass
    # nesting is structural: each address digit must be a valid child index
    bad_digit = next((i + 1 for i, d in enumerate(cert.address) if not 0 <= d < N ** n), None)
    entries.append(_entry(bad_digit or deepest, "NEST", None, ok=bad_digit is None))
    if bad_digit is not None:
        return VerifyReport(entries)
    # walk levels with incrementally refined corners
    top = max(roles) if roles else -1
    top = min(top, through)
    corner = [mpz(0)] * n
    D = 0
    hint = None
    for l in range(0, top + 1):
        want = min(l + lookahead, deepest)
        while D < want:
            idx = cert.address[D]
            digits = []
            for _ in range(n):
                idx, j = divmod(idx, N)
                digits.append(j)
            corner = [N * c + j for c, j in zip(corner, reversed(digits))]
            D += 1
        if l not in roles:
            continue
        s = 2 * mpz(N) ** D
        x = tuple(mpq(2 * c + 1, s) for c in corner)
        lat = FlowLattice(x, l, grid, hint)
        hint = lat.reduced_basis()
        shrink, ratio = _distortion(l, D, N)
        kinds = roles[l]
        need2 = any(kd == "B" for kd, _ in kinds)
        if need2:
            mins = lat.minima(2)
            nrm, w1 = mins[0]
        else:
            nrm, w1 = lat.shortest()
        c = lat.log_of(nrm)
        for kind, k in kinds:
            if kind == "A":
                entries.append(_entry(l, "A", c + shrink - _threshold(sch, k), k=k))
                continue
            w = wit[k]
            ep = sch.epoch(k)
            vk = w.v.vec
            attains = lat.norm(vk) == nrm
            c2 = lat.log_of(mins[1][0])
            gap = c2 - c
            entries.append(_entry(l, "B-lambda1", gap - ratio, ok=attains and _pos(gap - ratio), k=k))
            t = grid.time(l)
            if l == tx_level[k]:
                T = ep.t_minus - ep.M_k * (4 * cs.R0)
                s_el = t - T
                bound = s_el * mpq(n + 1, n) - ep.M_k * (3 * cs.R0) - cs.On1
                entries.append(_entry(l, "L2SEP", gap - bound, k=k))
            if lat.e1_dominant(vk) and l <= tx_level[k]:
                exact = compare(c, LogQuantity.log(w.v.height, N) - t) == 0 and attains
                entries.append(_entry(l, "TKMINUSR-eq", None, ok=exact, k=k))
                if k > 1:
                    rc = r_psi(scale(spec, 1 - mpq(1, k)), t, check=False)
                    entries.append(_entry(l, "TKMINUSR", c - rc, k=k))
        if progress:
            progress(l)
    return VerifyReport(entries)


def certificate_from_json(d: dict) -> Certificate:
    """Rebuild a certificate (schedule re-derived from its stored fields)."""
    from .lognum import Grid
    from .schedule import choose_times

    spec = PsiSpec.from_json(d["spec"])
    consts = Constants.from_json(d["constants"])
    sj = d["schedule"]
    grid = Grid(int(sj["grid"]["N"]), int(sj["grid"]["n"]))
    sch = choose_times(spec, consts, len(sj["epochs"]), grid, minimal=sj["minimal"],
                       gap_ratio=sj.get("gap_ratio"))
    if [e.level for e in sch.epochs] != [e["level"] for e in sj["epochs"]]:
        raise InternalError("stored schedule does not match a fresh recomputation")
    wits = [EpochWitness.from_json(w) for w in d["witnesses"]]
    return Certificate(spec, consts, sch, int(d["depth"]), [int(a) for a in d["address"]], wits,
                       d.get("audit", []))
