"""Dani's correspondence, trajectories and a brute-force classifier.

Dani's correspondence translates "``v`` approximates ``x`` to within
``psi(H(v))``" into "``a_t u_x v`` is short with ``e^t = Psi(H(v))``" and back.
The trajectory helper samples ``c_x(t) = log lambda_1`` at grid times next
to ``r_psi(t)``; :func:`classify` is the independent ground truth that lists
every rational of bounded height approximating ``x``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from gmpy2 import mpq, mpz
from mpmath import iv, mp

from .errors import DomainError, InternalError, PreconditionViolated, ZeroVector
from .lattice import FlowLattice, RationalPoint
from .lognum import Enclosure, Grid, GridTime, LogQuantity, compare, int_str, lq_max, to_mpq
from .psi import PsiSpec, Psi_inv_log, Psi_log, cutoff_time, psi_log, r_psi


def _coord_logs(x, w, t):
    """Logs of the nonzero coordinates of ``a_t u_x w`` (first one first)."""
    n = len(x)
    q = int(w[0])
    out = []
    first = None
    if q != 0:
        first = LogQuantity.log(abs(q)) - t
    rest = []
    for xi, pi in zip(x, w[1:]):
        r = abs(mpq(int(pi)) - q * to_mpq(xi))
        if r != 0:
            rest.append(LogQuantity.log(r) + t / n)
    return first, rest


def _norm_and_dominance(x, w, t):
    if all(int(c) == 0 for c in w):
        raise ZeroVector("zero vector has no flow norm")
    first, rest = _coord_logs(x, w, t)
    if first is None:
        return lq_max(*rest), False
    if not rest:
        return first, True
    m = lq_max(*rest)
    if compare(first, m) >= 0:
        return first, True
    return m, False


def dani_forward(spec: PsiSpec, x, v: RationalPoint):
    """Forward direction: a good approximation gives a short e1-dominant vector.

    Returns ``(t, norm_log, e1_dominant)`` with ``e^t = Psi(H(v))``.
    """
    x = tuple(to_mpq(c) for c in x)
    if any(not 0 <= c <= 1 for c in v.value):
        raise PreconditionViolated("v must lie in [0,1]^n")
    H = v.height
    logH = LogQuantity.log(H)
    d = v.distance(x)
    bound = psi_log(spec, logH)
    if d != 0 and compare(LogQuantity.log(d), bound) > 0:
        raise PreconditionViolated("d(x, v) exceeds psi(H(v))")
    t = Psi_log(spec, logH)
    norm, dom = _norm_and_dominance(x, v.vec, t)
    if not dom or compare(norm, Psi_inv_log(spec, t, check=False) - t) > 0:
        raise InternalError("forward correspondence post-condition failed")
    return t, norm, dom


def dani_backward(spec: PsiSpec, x, w, t):
    """Backward direction.

    If ``||a_t u_x w|| <= e^{-t} Psi^{-1}(e^t)`` with the first coordinate
    dominant, return the rational point of ``w``; otherwise None.  The two
    conclusions ``H(v) <= Psi^{-1}(e^t)`` and ``d(x, v) <= psi(H(v))`` are
    re-checked exactly and a point failing them is not returned (this can only
    happen when ``v`` lies outside ``[0,1]^n``, where ``H(v) > q``).
    """
    x = tuple(to_mpq(c) for c in x)
    if isinstance(t, GridTime):
        t = t.t
    norm, dom = _norm_and_dominance(x, w, t)
    if not dom:
        return None
    inv = Psi_inv_log(spec, t)
    if compare(norm, inv - t) > 0:
        return None
    v = RationalPoint.from_vector(w)
    logH = LogQuantity.log(v.height)
    if compare(logH, inv) > 0:
        return None
    d = v.distance(x)
    if d != 0 and compare(LogQuantity.log(d), psi_log(spec, logH)) > 0:
        return None
    return v


@dataclass(frozen=True)
class TrajectorySample:
    level: int
    t: LogQuantity
    c_x: LogQuantity
    r_psi: object  # LogQuantity, Enclosure, or None below the cutoff
    witness: tuple
    e1_dominant: bool


def trajectory(spec: PsiSpec, x, levels, grid: Grid) -> list[TrajectorySample]:
    """Samples of ``c_x`` and ``r_psi`` at the grid levels in ``levels``."""
    x = tuple(to_mpq(c) for c in x)
    if any(not 0 <= c < 1 for c in x):
        raise DomainError("x must lie in [0,1)^n")
    levels = list(levels)
    wanted = set(levels)
    out = []
    hint = None
    cut = cutoff_time(spec)
    for l in _walk_order(levels):
        lat = FlowLattice(x, l, grid, hint)
        hint = lat.reduced_basis()
        if l not in wanted:
            continue
        nrm, w = lat.shortest()
        t = grid.time(l)
        r = r_psi(spec, t) if compare(t, cut) >= 0 else None
        out.append(TrajectorySample(l, t, lat.log_of(nrm), r, w, lat.e1_dominant(w)))
    return out


def _walk_order(levels):
    """Every level from 0 to max(levels): reductions are warm-started."""
    if not levels:
        return []
    top = max(levels)
    start = 0
    return range(start, top + 1)


# ---------------------------------------------------------------------------
# classification oracle


@dataclass
class ClassifyReport:
    H_max: int
    c: mpq
    hits: list
    candidates_checked: int

    def to_json(self) -> dict:
        return {
            "H_max": self.H_max,
            "c": f"{self.c.numerator}/{self.c.denominator}",
            "hits": [{**v.to_json(), "H": int_str(v.height)} for v in self.hits],
            "candidates_checked": self.candidates_checked,
        }


def _psi_interval(spec: PsiSpec, H: int, c: mpq, prec: int = 64):
    val = psi_log(spec, LogQuantity.log(H)) + LogQuantity.log(c)
    e = Enclosure.of(val)
    old = iv.prec
    iv.prec = prec
    try:
        return iv.exp(e.interval(prec))
    finally:
        iv.prec = old


def classify(spec: PsiSpec, x, H_max: int, c=1) -> ClassifyReport:
    """Every primitive rational ``v`` with ``H(v) <= H_max`` and
    ``d(x, v) < c * psi(H(v))``, in (q, p) lexicographic order."""
    x = tuple(to_mpq(v) for v in x)
    c = to_mpq(c)
    H_max = int(H_max)
    if H_max < 1:
        raise DomainError("H_max must be >= 1")
    if not 0 < c <= 1:
        raise DomainError("c must lie in (0, 1]")
    n = len(x)
    K = 2 * H_max.bit_length() + 64
    # x rounded down to K bits: |x - xa| < 2^-K
    xa = [mpz(xi.numerator * (mpz(1) << K) // xi.denominator) for xi in x]
    hits = []
    checked = 0
    old = iv.prec
    for q in range(1, H_max + 1):
        if q < spec.s_min:
            continue
        # |q x_i - p_i| < rad since psi(H) <= psi(q)
        rad = mp.mpf(_psi_interval(spec, q, c).b) * q
        ranges = []
        for xai in xa:
            with mp.workprec(K + 64):
                centre = mp.mpf(int(xai) * q) / mp.mpf(2) ** K
                lo = int(mp.floor(centre - rad)) - 1
                hi = int(mp.ceil(centre + rad)) + 1
            ranges.append(range(max(lo, -H_max), min(hi, H_max) + 1))
        for p in itertools.product(*ranges):
            if math.gcd(q, *p) != 1:
                continue
            v = RationalPoint((q,) + tuple(p))
            if v.height > H_max:
                continue
            checked += 1
            if _beats(spec, x, xa, K, v, c):
                hits.append(v)
    iv.prec = old
    return ClassifyReport(H_max, c, hits, checked)


def _beats(spec: PsiSpec, x, xa, K, v: RationalPoint, c) -> bool:
    """Exact test of ``d(x, v) < c psi(H(v))`` with a cheap interval pre-filter."""
    q = v.q
    H = v.height
    bound = _psi_interval(spec, H, c)
    # approximate distance from the truncated x (error < 2^-K)
    with mp.workprec(K + 64):
        da = max(abs(mp.mpf(int(a)) / mp.mpf(2) ** K - mp.mpf(p) / q) for a, p in zip(xa, v.p))
        eps = mp.mpf(2) ** (-K + 1)
        if da - eps > mp.mpf(bound.b):
            return False
        if da + eps < mp.mpf(bound.a):
            return True
    d = v.distance(x)
    if d == 0:
        return True
    rhs = psi_log(spec, LogQuantity.log(H)) + LogQuantity.log(c)
    return compare(LogQuantity.log(d), rhs) < 0
