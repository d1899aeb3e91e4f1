"""Lattices ``a_t u_x Z^{n+1}`` at grid times, in exact integer arithmetic.

For ``x = (a_1/Q, ..., a_n/Q)`` and ``t = l*M`` the vector ``v = (q, p)``
is sent to

    a_t u_x v = N^{-ln/(n+1)} * (q, N^l (p_i - q x_i))
              = N^{-ln/(n+1)} / alpha * (alpha*q, beta*(p_i*Q - q*a_i))

with ``g = gcd(Q, N^l)``, ``alpha = Q/g`` and ``beta = N^l/g``.  The
bracketed vector has integer entries, so sup-norms compare as integers and the
common factor is carried as a :class:`LogQuantity`.  Keeping the residuals
``p_i*Q - q*a_i`` instead of scaling by ``N^l`` keeps the integers about as
large as ``e^t * Q`` rather than ``N^l * Q``.

Minima are found by integral LLL (delta = 3/4) followed by exhaustive
enumeration: the outer coefficients are pruned with a Euclidean bound using
outward-rounded intervals, and the innermost coefficient is cut exactly by the
sup-norm box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import gmpy2
from gmpy2 import mpq, mpz
from mpmath import iv, mp

from .errors import InternalError, PreconditionViolated, ZeroVector
from .lognum import Enclosure, Grid, GridTime, LogQuantity, compare, int_str, to_mpq

# Lines of the innermost enumeration longer than this are represented by
# their endpoints only when collecting tied minimizers.
TIE_SCAN_LIMIT = 4096
ENUM_PREC = 160


# ---------------------------------------------------------------------------
# rational points


@dataclass(frozen=True)
class RationalPoint:
    """Primitive integer vector ``(q, p_1, ..., p_n)`` with ``q > 0``."""

    vec: tuple

    def __post_init__(self):
        v = tuple(int(c) for c in self.vec)
        if v[0] <= 0:
            raise ValueError("rational point needs q > 0")
        if reduce(math.gcd, v) != 1:
            raise ValueError("rational point vector must be primitive")
        object.__setattr__(self, "vec", v)

    @classmethod
    def from_vector(cls, w) -> "RationalPoint":
        w = [int(c) for c in w]
        if w[0] == 0:
            raise ZeroVector("vector with q = 0 has no rational point")
        g = reduce(math.gcd, w)
        s = 1 if w[0] > 0 else -1
        return cls(tuple(s * c // g for c in w))

    @classmethod
    def from_value(cls, v) -> "RationalPoint":
        vals = [to_mpq(c) for c in v]
        q = reduce(lambda a, b: a * b // math.gcd(a, b), [int(c.denominator) for c in vals], 1)
        return cls.from_vector([q] + [int(c * q) for c in vals])

    @property
    def q(self) -> int:
        return self.vec[0]

    @property
    def p(self) -> tuple:
        return self.vec[1:]

    @property
    def height(self) -> int:
        return max(abs(c) for c in self.vec)

    @property
    def value(self) -> tuple:
        return tuple(mpq(pi, self.q) for pi in self.p)

    def distance(self, x) -> mpq:
        """Sup-norm distance to the rational vector ``x``."""
        return max(abs(to_mpq(xi) - vi) for xi, vi in zip(x, self.value))

    def to_json(self) -> dict:
        return {"q": int_str(self.q), "p": [int_str(c) for c in self.p]}

    @classmethod
    def from_json(cls, d) -> "RationalPoint":
        return cls((int(mpz(d["q"])),) + tuple(int(mpz(c)) for c in d["p"]))


@dataclass(frozen=True)
class FlowPoint:
    """A rational point ``x`` in ``[0,1)^n`` observed at a grid time."""

    x: tuple
    time: GridTime

    @property
    def level(self) -> int:
        return self.time.level

    @property
    def grid(self) -> Grid:
        return self.time.grid


# ---------------------------------------------------------------------------
# integral LLL


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def lll_reduce(B, U=None, delta=(3, 4)):
    """Integral LLL (fraction-free Gram-Schmidt).

    ``B`` is a list of linearly independent integer rows, ``U`` an optional
    list of rows transformed alongside.  Returns ``(B, U, d, lam)`` where
    ``d[i]`` is the Gram determinant of the first ``i`` rows and
    ``lam[k][j] = d[j+1] * mu[k][j]``.
    """
    B = [[mpz(c) for c in row] for row in B]
    dim = len(B)
    U = [list(r) for r in U] if U is not None else [[int(i == j) for j in range(dim)] for i in range(dim)]
    dn, dd = delta
    d = [mpz(1)] + [mpz(0)] * dim
    lam = [[mpz(0)] * dim for _ in range(dim)]
    d[1] = _dot(B[0], B[0])
    if d[1] == 0:
        raise ValueError("zero basis vector")
    if dim == 1:
        return B, U, d, lam
    k, kmax = 1, 0

    def red(k, l):
        if 2 * abs(lam[k][l]) > d[l + 1]:
            q = (2 * lam[k][l] + d[l + 1]) // (2 * d[l + 1])
            B[k] = [a - q * b for a, b in zip(B[k], B[l])]
            U[k] = [a - q * b for a, b in zip(U[k], U[l])]
            lam[k][l] -= q * d[l + 1]
            for i in range(l):
                lam[k][i] -= q * lam[l][i]

    def swap(k):
        B[k], B[k - 1] = B[k - 1], B[k]
        U[k], U[k - 1] = U[k - 1], U[k]
        for j in range(k - 1):
            lam[k][j], lam[k - 1][j] = lam[k - 1][j], lam[k][j]
        lk = lam[k][k - 1]
        nb = (d[k - 1] * d[k + 1] + lk * lk) // d[k]
        for i in range(k + 1, kmax + 1):
            t = lam[i][k]
            lam[i][k] = (d[k + 1] * lam[i][k - 1] - lk * t) // d[k]
            lam[i][k - 1] = (nb * t + lk * lam[i][k]) // d[k + 1]
        d[k] = nb

    while k < dim:
        if k > kmax:
            kmax = k
            for j in range(k + 1):
                u = _dot(B[k], B[j])
                for i in range(j):
                    u = (d[i + 1] * u - lam[k][i] * lam[j][i]) // d[i]
                if j < k:
                    lam[k][j] = u
                else:
                    if u == 0:
                        raise ValueError("basis rows are linearly dependent")
                    d[k + 1] = u
        red(k, k - 1)
        if dd * d[k + 1] * d[k - 1] < dn * d[k] * d[k] - dd * lam[k][k - 1] ** 2:
            swap(k)
            k = max(1, k - 1)
        else:
            for l in range(k - 2, -1, -1):
                red(k, l)
            k += 1
    return B, U, d, lam


def _rank(vectors) -> int:
    """Rank of integer vectors by fraction-free elimination."""
    rows = [[mpz(c) for c in v] for v in vectors]
    if not rows:
        return 0
    ncol = len(rows[0])
    r = 0
    for col in range(ncol):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(r + 1, len(rows)):
            if rows[i][col] != 0:
                f, g = rows[i][col], rows[r][col]
                rows[i] = [g * a - f * b for a, b in zip(rows[i], rows[r])]
        r += 1
        if r == len(rows):
            break
    return r


def _sign_normal(v):
    for c in v:
        if c != 0:
            return tuple(v) if c > 0 else tuple(-a for a in v)
    return tuple(v)


# ---------------------------------------------------------------------------
# the lattice at one grid time


def _common_denominator(x) -> tuple[int, list[int]]:
    xs = [to_mpq(c) for c in x]
    Q = reduce(lambda a, b: a * b // math.gcd(a, b), [int(c.denominator) for c in xs], 1)
    return Q, [int(c * Q) for c in xs]


class FlowLattice:
    """The lattice ``a_{lM} u_x Z^{n+1}`` with a reduced basis.

    ``hint`` is a list of ``n+1`` independent integer vectors (typically the
    reduced basis at a nearby level) used to warm-start the reduction.
    """

    def __init__(self, x, level: int, grid: Grid, hint=None):
        self.x = tuple(to_mpq(c) for c in x)
        self.n = len(self.x)
        if self.n != grid.n:
            raise ValueError("point dimension does not match the grid")
        self.level = int(level)
        self.grid = grid
        Q, a = _common_denominator(self.x)
        self.Q, self.a = mpz(Q), [mpz(c) for c in a]
        NL = mpz(grid.N) ** self.level
        g = gmpy2.gcd(self.Q, NL)
        self.alpha = self.Q // g
        self.beta = NL // g
        self._scale = LogQuantity.log(mpq(1, int(self.alpha)), grid.N) - grid.time(self.level)
        dim = self.n + 1
        U = [list(map(int, r)) for r in hint] if hint is not None else \
            [[int(i == j) for j in range(dim)] for i in range(dim)]
        B = [self.image(u) for u in U]
        self.B, self.U, self._d, self._lam = lll_reduce(B, U)
        self._gs = None

    # coordinates ----------------------------------------------------------
    def image(self, v) -> list:
        """Integer coordinates ``(alpha*q, beta*(p_i*Q - q*a_i))`` of ``v``."""
        q = mpz(v[0])
        return [self.alpha * q] + [self.beta * (mpz(p) * self.Q - q * ai)
                                   for p, ai in zip(v[1:], self.a)]

    def norm(self, v) -> int:
        return max(abs(c) for c in self.image(v))

    def log_of(self, scaled: int) -> LogQuantity:
        """Log of the true sup-norm for a scaled norm value."""
        return LogQuantity.log(int(scaled), self.grid.N) + self._scale

    def e1_dominant(self, v) -> bool:
        w = self.image(v)
        return abs(w[0]) >= max(abs(c) for c in w)

    # enumeration ----------------------------------------------------------
    def _gs_intervals(self):
        if self._gs is None:
            old = iv.prec
            iv.prec = ENUM_PREC
            try:
                dim = self.n + 1
                d = [iv.mpf(int(c)) for c in self._d]
                bn = [d[i + 1] / d[i] for i in range(dim)]
                mu = [[iv.mpf(int(self._lam[j][i])) / d[i + 1] if i < j else None
                       for i in range(dim)] for j in range(dim)]
            finally:
                iv.prec = old
            self._gs = (bn, mu)
        return self._gs

    def lines(self, rho: int):
        """All lines ``c_0*b_0 + y`` meeting the scaled sup-ball of radius rho.

        Yields ``(coeffs, y, lo, hi)``: ``coeffs`` the outer coefficients
        ``c_1..c_d``, ``y`` their combination, and ``[lo, hi]`` the exact range
        of ``c_0`` with sup-norm at most ``rho``.  One of each pair ``w, -w`` is
        produced and the zero vector is skipped.
        """
        dim = self.n + 1
        B = self.B
        rho = mpz(rho)
        bn, mu = self._gs_intervals()
        R2 = dim * rho * rho
        out = []
        old = iv.prec
        iv.prec = ENUM_PREC
        try:
            R2i = iv.mpf(int(R2))
            coeffs = [0] * dim

            def rec(i, partial, all_zero):
                if i == 0:
                    y = [mpz(0)] * dim
                    for j in range(1, dim):
                        if coeffs[j]:
                            y = [a + coeffs[j] * b for a, b in zip(y, B[j])]
                    lo, hi = _box_range(B[0], y, rho)
                    if all_zero:
                        lo = max(lo, 1)
                    if lo <= hi:
                        out.append((tuple(coeffs[1:]), y, lo, hi))
                    return
                ctr = iv.mpf(0)
                for j in range(i + 1, dim):
                    if coeffs[j]:
                        ctr -= coeffs[j] * mu[j][i]
                room = R2i - partial
                if room.b < 0:
                    return
                w = iv.sqrt(iv.mpf([0, room.b]) / bn[i]).b
                # one unit of slack absorbs any rounding in the float conversion
                lo = int(mp.floor(mp.mpf((ctr.a - w).a))) - 1
                hi = int(mp.ceil(mp.mpf((ctr.b + w).b))) + 1
                if all_zero:
                    lo = max(lo, 0)
                for c in range(lo, hi + 1):
                    diff = c + ctr
                    np_ = partial + diff * diff * bn[i]
                    if np_.a > R2i.b:
                        continue
                    coeffs[i] = c
                    rec(i - 1, np_, all_zero and c == 0)
                coeffs[i] = 0

            rec(dim - 1, iv.mpf(0), True)
        finally:
            iv.prec = old
        return out

    def _vec(self, coeffs, c0):
        dim = self.n + 1
        v = [c0 * u for u in self.U[0]]
        for j in range(1, dim):
            if coeffs[j - 1]:
                v = [a + coeffs[j - 1] * b for a, b in zip(v, self.U[j])]
        return tuple(int(c) for c in v)

    def _key(self, norm, v):
        return (norm, not self.e1_dominant(v), tuple(abs(c) for c in v), _sign_normal(v))

    def basis_norms(self) -> list:
        return sorted(max(abs(c) for c in row) for row in self.B)

    def shortest(self):
        """``(scaled_norm, v)`` with v the canonical shortest vector.

        Canonical: least norm, then e1-dominant first, then lexicographically
        least absolute values, then lexicographically least after making the
        first nonzero coordinate positive.
        """
        rho = self.basis_norms()[0]
        lines = self.lines(rho)
        best = None
        for coeffs, y, lo, hi in lines:
            c, f = _line_min(self.B[0], y, lo, hi)
            if best is None or f < best:
                best = f
        if best is None:
            raise InternalError("enumeration found no vector within the basis norm")
        cands = []
        for coeffs, y, lo, hi in lines:
            a, b = _box_range(self.B[0], y, best)
            a, b = max(a, lo), min(b, hi)
            if a > b:
                continue
            cs = range(a, b + 1) if b - a < TIE_SCAN_LIMIT else (a, b)
            for c0 in cs:
                v = self._vec(coeffs, c0)
                cands.append(self._key(best, v))
        cands.sort()
        return int(best), cands[0][-1]

    def minima(self, k: int | None = None):
        """Successive minima ``[(scaled_norm, v), ...]`` up to index k."""
        dim = self.n + 1
        k = dim if k is None else int(k)
        if not 1 <= k <= dim:
            raise ValueError("index out of range")
        first = self.shortest()
        if k == 1:
            return [first]
        rho = self.basis_norms()[k - 1]
        cands = []
        for coeffs, y, lo, hi in self.lines(rho):
            c, f = _line_min(self.B[0], y, lo, hi)
            for c0 in (c - 1, c, c + 1):
                if lo <= c0 <= hi:
                    w = [c0 * a + b for a, b in zip(self.B[0], y)]
                    nrm = max(abs(t) for t in w)
                    v = self._vec(coeffs, c0)
                    cands.append((int(nrm), tuple(abs(t) for t in v), _sign_normal(v), v))
        # later minima only need their norms; ties go to the lexicographically least vector
        cands.sort()
        chosen = [first]
        for nrm, _, _, v in cands:
            if len(chosen) == k:
                break
            if _rank([c[1] for c in chosen] + [v]) == len(chosen) + 1:
                chosen.append((nrm, v))
        if len(chosen) < k:
            raise InternalError("successive minima enumeration incomplete")
        return chosen

    def reduced_basis(self) -> list:
        return [tuple(int(c) for c in u) for u in self.U]


def _box_range(b0, y, rho):
    """Exact range of integers c with max_k |c*b0[k] + y[k]| <= rho."""
    lo, hi = None, None
    for bk, yk in zip(b0, y):
        if bk == 0:
            if abs(yk) > rho:
                return 1, 0
            continue
        if bk > 0:
            a = -((rho + yk) // bk)          # ceil((-rho - yk)/bk)
            b = (rho - yk) // bk
        else:
            a = -((rho - yk) // (-bk))       # ceil((rho - yk)/bk) with bk < 0
            b = (rho + yk) // (-bk)          # floor((-rho - yk)/bk)
        lo = a if lo is None else max(lo, a)
        hi = b if hi is None else min(hi, b)
    return int(lo), int(hi)


def _line_min(b0, y, lo, hi):
    """Least c in [lo, hi] minimising max_k |c*b0[k] + y[k]|.

    The function is convex and piecewise linear in c, so its integer minimum
    sits next to a breakpoint: a zero of one term or a crossing of two.  Only
    those candidates (and the endpoints) are evaluated.
    """

    def f(c):
        return max(abs(c * a + b) for a, b in zip(b0, y))

    cands = {lo, hi}
    terms = list(zip(b0, y))
    pts = [(-b, a) for a, b in terms if a != 0]
    for i, (a1, b1) in enumerate(terms):
        for a2, b2 in terms[i + 1:]:
            for sgn in (1, -1):
                den = a1 - sgn * a2
                if den != 0:
                    pts.append((sgn * b2 - b1, den))
    for num, den in pts:
        if den < 0:
            num, den = -num, -den
        q = num // den
        for c in (q, q + 1):
            if lo <= c <= hi:
                cands.add(c)
    best = min((f(c), c) for c in cands)
    return best[1], best[0]


# ---------------------------------------------------------------------------
# public operations


def flow_norm_log(fp: FlowPoint, w) -> tuple[LogQuantity, bool]:
    """``log ||a_t u_x w||`` and whether the first coordinate attains it."""
    if all(int(c) == 0 for c in w):
        raise ZeroVector("flow norm of the zero vector")
    lat = _bare(fp)
    img = lat.image(w)
    nrm = max(abs(c) for c in img)
    return lat.log_of(nrm), abs(img[0]) >= nrm


class _Bare(FlowLattice):
    """Coordinates only; no reduction."""

    def __init__(self, x, level, grid):
        self.x = tuple(to_mpq(c) for c in x)
        self.n = len(self.x)
        self.level = int(level)
        self.grid = grid
        Q, a = _common_denominator(self.x)
        self.Q, self.a = mpz(Q), [mpz(c) for c in a]
        NL = mpz(grid.N) ** self.level
        g = gmpy2.gcd(self.Q, NL)
        self.alpha, self.beta = self.Q // g, NL // g
        self._scale = LogQuantity.log(mpq(1, int(self.alpha)), grid.N) - grid.time(self.level)


def _bare(fp: FlowPoint) -> FlowLattice:
    return _Bare(fp.x, fp.level, fp.grid)


def lambda_min_log(fp: FlowPoint, k: int = 1, hint=None):
    """``(log lambda_k, [w_1, ..., w_k])`` for the lattice at ``fp``."""
    lat = FlowLattice(fp.x, fp.level, fp.grid, hint)
    mins = lat.minima(k)
    return lat.log_of(mins[-1][0]), [v for _, v in mins]


def successive_minima_log(fp: FlowPoint, hint=None):
    lat = FlowLattice(fp.x, fp.level, fp.grid, hint)
    mins = lat.minima()
    return [lat.log_of(nrm) for nrm, _ in mins], [v for _, v in mins]


def rational_near_bad(fp: FlowPoint, R: LogQuantity, hint=None):
    """Rational point close to ``x`` with controlled height.

    Requires ``lambda_1 >= e^{-R}`` at ``fp``.  The vector is the canonical
    shortest vector at the first grid time ``>= t + 2nR``.  Returns the point
    and a dict recording the level used and the exact bound checks.
    """
    grid, n, l = fp.grid, fp.grid.n, fp.level
    t = fp.time.t
    if isinstance(R, LogQuantity):
        R = R.with_base(grid.N)
    elif not isinstance(R, Enclosure):
        R = Enclosure.of(R)
    if compare(R, LogQuantity.zero()) < 0:
        raise PreconditionViolated("R must be nonnegative")
    lat = FlowLattice(fp.x, l, grid, hint)
    nrm, _ = lat.shortest()
    c = lat.log_of(nrm)
    if compare(c, -R) < 0:
        raise PreconditionViolated(
            f"lambda_1 = exp({c.approx(10)}) is below exp(-R) = exp({(-R).approx(10)})")
    l2 = grid.level_ceil(t + R * (2 * n))
    lat2 = FlowLattice(fp.x, l2, grid, lat.reduced_basis())
    _, w = lat2.shortest()
    v = RationalPoint.from_vector(w)
    logH = LogQuantity.log(v.height, grid.N)
    dist = v.distance(fp.x)
    checks = {
        "lower": compare(logH, t - R) >= 0,
        "upper": compare(logH, grid.time(l2)) <= 0,
        "distance": dist * 2 * mpz(grid.N) ** l <= 1,
    }
    if not all(checks.values()):
        bad = [k for k, ok in checks.items() if not ok]
        if bad == ["distance"] and compare(R, LogQuantity.log(2)) < 0:
            raise PreconditionViolated("R < log 2 does not guarantee the distance bound")
        raise InternalError(f"rational_near_bad post-condition failed: {bad}")
    return v, {"level": l, "snapped_level": l2, "log_lambda1": c, "R": R, **checks}
