"""Exact log-scale numbers.

A :class:`LogQuantity` represents the real number

    coeff * log N + (1/root) * log(mantissa)

with ``coeff`` rational, ``mantissa`` a positive rational and ``root`` a
positive integer.  The set of such numbers (for a fixed base ``N``) is closed
under addition, subtraction and multiplication by rationals, which is all the
construction ever does with heights, norms and times.  Keeping ``root``
explicit lets us scale ``log c`` by ``1/lambda`` without leaving the class.

Normal form (unique for a given value):

* write ``N = B**g`` with ``B`` not a perfect power and let ``p0`` be the
  smallest prime dividing ``B``;
* the mantissa has ``p0``-adic valuation zero (powers of ``N`` are moved into
  ``coeff``);
* ``root`` is minimal, i.e. the mantissa is not a perfect ``p``-th power for
  any prime ``p`` dividing ``root``.

A quantity with ``base=None`` is "pure": ``coeff`` is 0 and it combines with a
quantity of any base.

Comparisons are exact.  Signs are decided symbolically when possible, then by
interval evaluation at 64, 128, ..., 16384 bits, then by an exact integer
power comparison when the operands are small enough.  Only if all of that is
out of reach is :class:`NonSeparable` raised.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import gmpy2
from gmpy2 import mpq, mpz
from mpmath import iv, mp

from .errors import DomainError, NonSeparable

MIN_PREC = 64
MAX_PREC = 16384
# Largest exponentiated operand (in bits) the exact fallback will build.
EXACT_FALLBACK_BITS = 1 << 24

Rational = Union[int, Fraction, "mpq", str]


def to_mpq(x) -> mpq:
    """Coerce ints, Fractions, gmpy2 numbers and ``"p/q"`` strings to mpq.

    Floats are rejected: exact inputs only.
    """
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a rational or a 'p/q' string")
    if isinstance(x, str):
        # gmpy2 parses without the interpreter's limit on integer string length
        return mpq("".join(x.split()))
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def int_str(x) -> str:
    """Decimal string of an integer of any size."""
    return mpz(x).digits(10)


def q_str(x) -> str:
    x = to_mpq(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _primes_of(k: int) -> list[int]:
    out = []
    p = 2
    while p * p <= k:
        if k % p == 0:
            out.append(p)
            while k % p == 0:
                k //= p
        p += 1
    if k > 1:
        out.append(k)
    return out


@functools.lru_cache(maxsize=64)
def base_info(N: int) -> tuple[int, int, int, int]:
    """Return ``(B, g, p0, b0)`` with ``N = B**g``, ``B`` not a perfect power,
    ``p0`` the least prime of ``B`` and ``b0 = v_p0(B)``."""
    N = int(N)
    if N < 2:
        raise DomainError(f"log base must be an integer >= 2, got {N}")
    B, g = N, 1
    for e in range(N.bit_length(), 1, -1):
        r, exact = gmpy2.iroot(mpz(N), e)
        if exact:
            B, g = int(r), e
            break
    p0 = None
    limit = min(math.isqrt(B), 10**7)
    p = 2
    while p <= limit:
        if B % p == 0:
            p0 = p
            break
        p += 1 if p == 2 else 2
    if p0 is None:
        if B <= 10**14 or gmpy2.is_prime(B):
            p0 = B
        else:
            raise DomainError(f"cannot factor log base {N}")
    b0 = 0
    t = B
    while t % p0 == 0:
        t //= p0
        b0 += 1
    return B, g, p0, b0


def _perfect_root(m: mpq, p: int) -> mpq | None:
    rn, en = gmpy2.iroot(m.numerator, p)
    if not en:
        return None
    rd, ed = gmpy2.iroot(m.denominator, p)
    if not ed:
        return None
    return mpq(rn, rd)


def _pow(m: mpq, e: int) -> mpq:
    if e >= 0:
        return m**e
    return 1 / (m ** (-e))


def _normalize(coeff: mpq, mant: mpq, base: int | None, root: int):
    if mant <= 0:
        raise DomainError("mantissa must be positive")
    if root <= 0:
        raise DomainError("root must be positive")
    if base is None and coeff != 0:
        raise DomainError("a pure quantity cannot carry a log N coefficient")
    if base is not None:
        B, g, p0, b0 = base_info(base)
        num, vn = gmpy2.remove(mant.numerator, p0) if mant.numerator != 0 else (0, 0)
        den, vd = gmpy2.remove(mant.denominator, p0)
        v = int(vn) - int(vd)
        if v != 0:
            if b0 == 1:
                rest = B // p0
                # m / B^v keeps the cofactor of p0 in B
                new = mpq(num, den) / _pow(mpq(rest), v)
                coeff = coeff + mpq(v, root * g)
                mant = new
            else:
                new = _pow(mant, b0) / _pow(mpq(B), v)
                coeff = coeff + mpq(v, root * b0 * g)
                mant = new
                root = root * b0
    if mant == 1:
        return coeff, mpq(1), base, 1
    for p in _primes_of(root):
        while root % p == 0:
            r = _perfect_root(mant, p)
            if r is None:
                break
            mant = r
            root //= p
    if mant == 1:
        root = 1
    return coeff, mant, base, root


def _merge_base(a: int | None, b: int | None) -> int | None | bool:
    if a is None:
        return b
    if b is None or a == b:
        return a
    return False


def _ivq(x: mpq):
    return iv.mpf(int(x.numerator)) / int(x.denominator)


@dataclass(frozen=True, eq=False)
class LogQuantity:
    """``coeff*log(base) + log(mantissa)/root`` kept in normal form."""

    coeff: mpq
    mantissa: mpq
    base: int | None = None
    root: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c, m, b, r = _normalize(
            to_mpq(self.coeff), to_mpq(self.mantissa),
            None if self.base is None else int(self.base), int(self.root),
        )
        object.__setattr__(self, "coeff", c)
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "root", r)

    # constructors ---------------------------------------------------------
    @classmethod
    def log(cls, r: Rational, base: int | None = None) -> "LogQuantity":
        """``log r`` for a positive rational ``r``."""
        return cls(mpq(0), to_mpq(r), base)

    @classmethod
    def log_base(cls, coeff: Rational, base: int) -> "LogQuantity":
        """``coeff * log base``."""
        return cls(to_mpq(coeff), mpq(1), base)

    @classmethod
    def zero(cls, base: int | None = None) -> "LogQuantity":
        return cls(mpq(0), mpq(1), base)

    # predicates -----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.coeff == 0 and self.mantissa == 1

    def with_base(self, base: int | None) -> "LogQuantity":
        if base == self.base or base is None:
            return self
        if self.base is not None:
            raise ValueError("cannot rebase a quantity with a log N part")
        return LogQuantity(self.coeff, self.mantissa, base, self.root)

    def exp_rational(self) -> mpq | None:
        """``exp(self)`` if it is rational, else None."""
        if self.root != 1:
            return None
        if self.coeff == 0:
            return self.mantissa
        if self.coeff.denominator == 1:
            return self.mantissa * _pow(mpq(self.base), int(self.coeff.numerator))
        B, g, _, _ = base_info(self.base)
        e = self.coeff * g
        if e.denominator == 1:
            return self.mantissa * _pow(mpq(B), int(e.numerator))
        return None

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Enclosure):
            return Enclosure.of(self) + other
        if not isinstance(other, LogQuantity):
            return NotImplemented
        base = _merge_base(self.base, other.base)
        if base is False:
            return Enclosure.of(self) + Enclosure.of(other)
        L = self.root * other.root // math.gcd(self.root, other.root)
        m = (self.mantissa ** (L // self.root)) * (other.mantissa ** (L // other.root))
        return LogQuantity(self.coeff + other.coeff, m, base, L)

    def __neg__(self):
        return LogQuantity(-self.coeff, 1 / self.mantissa, self.base, self.root)

    def __sub__(self, other):
        if isinstance(other, (LogQuantity, Enclosure)):
            return self + (-other)
        return NotImplemented

    def __mul__(self, s):
        if isinstance(s, (LogQuantity, Enclosure)):
            return NotImplemented
        s = to_mpq(s)
        if s == 0:
            return LogQuantity.zero(self.base)
        a, b = int(s.numerator), int(s.denominator)
        return LogQuantity(self.coeff * s, _pow(self.mantissa, a), self.base, self.root * b)

    __rmul__ = __mul__

    def __truediv__(self, s):
        if isinstance(s, (LogQuantity, Enclosure)):
            return NotImplemented
        return self * (1 / to_mpq(s))

    # comparison -----------------------------------------------------------
    def key(self):
        return (self.coeff, self.mantissa, self.base, self.root)

    def same(self, other: "LogQuantity") -> bool:
        """Normal-form identity."""
        if self.is_zero and other.is_zero:
            return True
        return self.key() == other.key()

    def __eq__(self, other):
        if isinstance(other, (LogQuantity, Enclosure)):
            return compare(self, other) == 0
        return NotImplemented

    def __lt__(self, other):
        return compare(self, other) < 0

    def __le__(self, other):
        return compare(self, other) <= 0

    def __gt__(self, other):
        return compare(self, other) > 0

    def __ge__(self, other):
        return compare(self, other) >= 0

    __hash__ = None

    def sign(self) -> int:
        return _lq_sign(self)

    # evaluation -----------------------------------------------------------
    def interval(self, prec: int = MIN_PREC):
        hit = self._cache.get(prec)
        if hit is not None:
            return hit
        old = iv.prec
        iv.prec = prec + 8
        try:
            val = iv.mpf(0)
            if self.coeff != 0:
                val = _ivq(self.coeff) * iv.log(iv.mpf(self.base))
            if self.mantissa != 1:
                lm = iv.log(iv.mpf(int(self.mantissa.numerator)))
                if self.mantissa.denominator != 1:
                    lm = lm - iv.log(iv.mpf(int(self.mantissa.denominator)))
                val = val + lm / self.root
        finally:
            iv.prec = old
        self._cache[prec] = val
        return val

    def approx(self, digits: int = 30) -> str:
        x = self.interval(max(MIN_PREC, int(digits * 3.33) + 16))
        with mp.workdps(digits + 5):
            mid = (mp.mpf(x.a) + mp.mpf(x.b)) / 2
            return mp.nstr(mid, digits)

    def __float__(self) -> float:
        x = self.interval(MIN_PREC)
        return float((mp.mpf(x.a) + mp.mpf(x.b)) / 2)

    def __repr__(self) -> str:
        parts = []
        if self.coeff != 0:
            parts.append(f"{q_str(self.coeff)}*log({self.base})")
        if self.mantissa != 1:
            r = "" if self.root == 1 else f"/{self.root}"
            parts.append(f"log({q_str(self.mantissa)}){r}")
        body = " + ".join(parts) or "0"
        return f"LogQuantity({body} ~ {self.approx(12)})"

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "coeff": q_str(self.coeff),
            "mantissa": q_str(self.mantissa),
            "logN_base": self.base,
            "root": self.root,
            "decimal": self.approx(20),
        }

    @classmethod
    def from_json(cls, d: dict) -> "LogQuantity":
        return cls(to_mpq(d["coeff"]), to_mpq(d["mantissa"]),
                   d.get("logN_base"), int(d.get("root", 1)))


class Enclosure:
    """A real number known through certified interval evaluation.

    ``fn(prec)`` must return an mpmath interval containing the value whose
    width shrinks as ``prec`` grows.  Used for quantities outside the exact
    class (the log-log terms of power-log approximation functions).
    """

    __slots__ = ("_fn", "_cache", "label")
    __hash__ = None

    def __init__(self, fn: Callable[[int], object], label: str = ""):
        self._fn = fn
        self._cache: dict = {}
        self.label = label

    @classmethod
    def of(cls, x) -> "Enclosure":
        if isinstance(x, Enclosure):
            return x
        if isinstance(x, LogQuantity):
            return cls(x.interval, repr(x))
        q = to_mpq(x)
        return cls(lambda prec: _ivq(q), q_str(q))

    def interval(self, prec: int = MIN_PREC):
        hit = self._cache.get(prec)
        if hit is None:
            old = iv.prec
            iv.prec = prec + 8
            try:
                hit = self._fn(prec)
            finally:
                iv.prec = old
            self._cache[prec] = hit
        return hit

    def _binop(self, other, op):
        o = Enclosure.of(other)
        a, b = self, o
        return Enclosure(lambda prec: op(a.interval(prec), b.interval(prec)))

    def __add__(self, other):
        return self._binop(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return Enclosure.of(other) - self

    def __neg__(self):
        a = self
        return Enclosure(lambda prec: -a.interval(prec))

    def __mul__(self, s):
        if isinstance(s, (LogQuantity, Enclosure)):
            return NotImplemented
        q = to_mpq(s)
        a = self
        return Enclosure(lambda prec: a.interval(prec) * _ivq(q))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1 / to_mpq(s))

    def sign(self) -> int:
        return _interval_sign(self, None)

    def approx(self, digits: int = 30) -> str:
        x = self.interval(max(MIN_PREC, int(digits * 3.33) + 16))
        with mp.workdps(digits + 5):
            return mp.nstr((mp.mpf(x.a) + mp.mpf(x.b)) / 2, digits)

    def __float__(self) -> float:
        x = self.interval(MIN_PREC)
        return float((mp.mpf(x.a) + mp.mpf(x.b)) / 2)

    def __eq__(self, other):
        return compare(self, other) == 0

    def __lt__(self, other):
        return compare(self, other) < 0

    def __le__(self, other):
        return compare(self, other) <= 0

    def __gt__(self, other):
        return compare(self, other) > 0

    def __ge__(self, other):
        return compare(self, other) >= 0

    def __repr__(self) -> str:
        return f"Enclosure(~{self.approx(12)})"

    def to_json(self) -> dict:
        x = self.interval(128)
        with mp.workdps(40):
            return {"enclosure": [mp.nstr(mp.mpf(x.a), 30), mp.nstr(mp.mpf(x.b), 30)],
                    "decimal": self.approx(20)}


def _interval_sign(x, exact: LogQuantity | None) -> int:
    prec = MIN_PREC
    while prec <= MAX_PREC:
        v = x.interval(prec)
        if v.a > 0:
            return 1
        if v.b < 0:
            return -1
        prec *= 2
    if exact is not None:
        s = _exact_power_sign(exact)
        if s is not None:
            return s
    raise NonSeparable(f"could not separate {x!r} from 0 at {MAX_PREC} bits")


def _exact_power_sign(x: LogQuantity) -> int | None:
    # sign(u/w log N + (1/r) log m) = sign(u*r*log N + w*log m) = sign(log(N^(u r) m^w))
    u, w = int(x.coeff.numerator), int(x.coeff.denominator)
    r = x.root
    e1 = u * r
    bits = abs(e1) * int(x.base).bit_length() + w * max(
        int(x.mantissa.numerator).bit_length(), int(x.mantissa.denominator).bit_length())
    if bits > EXACT_FALLBACK_BITS:
        return None
    val = _pow(mpq(x.base), e1) * (x.mantissa ** w)
    return (val > 1) - (val < 1)


def _lq_sign(x: LogQuantity) -> int:
    if x.coeff == 0:
        return (x.mantissa > 1) - (x.mantissa < 1)
    if x.mantissa == 1:
        return (x.coeff > 0) - (x.coeff < 0)
    return _interval_sign(x, x)


def compare(a, b) -> int:
    """Return -1, 0 or 1 as ``a < b``, ``a == b``, ``a > b``.

    ``a`` and ``b`` may be LogQuantity, Enclosure or rationals (a rational
    ``r`` stands for the real number ``r`` itself, not ``log r``).
    """
    if isinstance(a, LogQuantity) and isinstance(b, LogQuantity):
        d = a - b
        if isinstance(d, LogQuantity):
            return _lq_sign(d)
    d = Enclosure.of(a) - Enclosure.of(b)
    return _interval_sign(d, None)


lq_compare = compare


def lq_add(a, b):
    """Exact sum of two log quantities (an Enclosure if bases differ)."""
    return a + b


def ratio_floor(a, b) -> int:
    """``floor(a / b)`` for ``b > 0`` (LogQuantity/Enclosure operands)."""
    if compare(b, LogQuantity.zero()) <= 0:
        raise DomainError("ratio_floor needs a positive divisor")
    prec = MIN_PREC
    while True:
        x, y = Enclosure.of(a).interval(prec), Enclosure.of(b).interval(prec)
        old = iv.prec
        iv.prec = prec
        try:
            q = x / y
        finally:
            iv.prec = old
        lo, hi = int(mp.floor(q.a)), int(mp.floor(q.b))
        if hi - lo <= 1 or prec >= MAX_PREC:
            break
        prec *= 2
    k = lo
    while compare(a, b * k) < 0:
        k -= 1
    while compare(a, b * (k + 1)) >= 0:
        k += 1
    return k


def ratio_ceil(a, b) -> int:
    k = ratio_floor(a, b)
    return k if compare(a, b * k) == 0 else k + 1


def lq_max(*xs):
    best = xs[0]
    for x in xs[1:]:
        if compare(x, best) > 0:
            best = x
    return best


def lq_min(*xs):
    best = xs[0]
    for x in xs[1:]:
        if compare(x, best) < 0:
            best = x
    return best


# ---------------------------------------------------------------------------
# grid times


@dataclass(frozen=True)
class Grid:
    """Time grid ``t = l*M`` with ``M = (n/(n+1)) log N`` and integer ``N``."""

    N: int
    n: int

    def __post_init__(self):
        if int(self.N) < 2:
            raise DomainError("grid base N must be an integer >= 2")
        if int(self.n) < 1:
            raise DomainError("dimension n must be >= 1")

    @classmethod
    def from_M(cls, M: Rational, n: int) -> "Grid":
        """Grid whose step is closest to ``M``: ``N = round(exp((n+1)M/n))``."""
        m = to_mpq(M)
        with mp.workdps(50):
            N = int(mp.nint(mp.exp(mp.mpf(int(m.numerator)) / int(m.denominator) * (n + 1) / n)))
        return cls(max(N, 2), n)

    @property
    def M(self) -> LogQuantity:
        return LogQuantity.log_base(mpq(self.n, self.n + 1), self.N)

    def time(self, level: int) -> LogQuantity:
        return LogQuantity.log_base(mpq(self.n * int(level), self.n + 1), self.N)

    def level_floor(self, t) -> int:
        return ratio_floor(t, self.M)

    def level_ceil(self, t) -> int:
        return ratio_ceil(t, self.M)

    def log(self, r: Rational) -> LogQuantity:
        return LogQuantity.log(r, self.N)

    def zero(self) -> LogQuantity:
        return LogQuantity.zero(self.N)


@dataclass(frozen=True)
class GridTime:
    level: int
    grid: Grid

    @property
    def t(self) -> LogQuantity:
        return self.grid.time(self.level)
