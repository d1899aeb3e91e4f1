"""Approximation functions psi and the derived rate function.

Two families are supported:

* ``power``:      psi(s) = c * s**(-lam)
* ``power_log``:  psi(s) = c * s**(-lam) * (log s)**(-beta),  s >= s0

From psi we derive Psi(s) = psi(s)**(-n/(n+1)), its inverse, and the rate
function r(t) = -t + log Psi^{-1}(e^t).  For the power family everything is
an exact :class:`LogQuantity` (r is the linear function -gamma*t); the
power-log family goes through certified :class:`Enclosure` objects.

All functions take and return log-scale values: ``s`` below means log of the
height, ``t`` a flow time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from gmpy2 import mpq
from mpmath import iv, mp

from .errors import DomainError
from .lognum import Enclosure, LogQuantity, compare, q_str, to_mpq

POWER = "power"
POWER_LOG = "power_log"


@dataclass(frozen=True)
class PsiSpec:
    n: int
    lam: mpq
    c: mpq = mpq(1)
    family: str = POWER
    beta: mpq = mpq(0)
    s0: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "lam", to_mpq(self.lam))
        object.__setattr__(self, "c", to_mpq(self.c))
        object.__setattr__(self, "beta", to_mpq(self.beta))
        n = int(self.n)
        object.__setattr__(self, "n", n)
        if n < 1:
            raise DomainError("n must be a positive integer")
        if self.family not in (POWER, POWER_LOG):
            raise DomainError(f"unknown family {self.family!r}")
        if self.c <= 0:
            raise DomainError("c must be positive")
        crit = mpq(n + 1, n)
        if self.lam < crit:
            raise DomainError(
                f"lambda={q_str(self.lam)} is below the Dirichlet exponent (n+1)/n={q_str(crit)}")
        if self.family == POWER and self.beta != 0:
            raise DomainError("beta only applies to the power_log family")
        if self.family == POWER_LOG and self.lam == crit and self.beta <= 0:
            raise DomainError("power_log at lambda=(n+1)/n needs beta > 0")
        if self.s0 is None:
            object.__setattr__(self, "s0", _default_s0(self))
        elif self.family == POWER_LOG and not _decreasing_from(self, int(self.s0)):
            raise DomainError("psi is not decreasing from the given s0")

    @property
    def admissible(self) -> bool:
        """True when psi(s) = o(s^{-(n+1)/n}) as the construction requires."""
        crit = mpq(self.n + 1, self.n)
        if self.lam > crit:
            return True
        return self.family == POWER_LOG and self.beta > 0

    @property
    def gamma(self) -> mpq:
        return gamma_psi(self)

    @property
    def s_min(self) -> int:
        """Least height at which the closed form is evaluated."""
        return 1 if self.family == POWER else int(self.s0)

    def describe(self) -> str:
        if self.family == POWER:
            return f"psi(s) = {q_str(self.c)}*s^(-{q_str(self.lam)}), n={self.n}"
        return (f"psi(s) = {q_str(self.c)}*s^(-{q_str(self.lam)})*(log s)^(-{q_str(self.beta)}),"
                f" n={self.n}, s0={self.s0}")

    def to_json(self) -> dict:
        return {"family": self.family, "n": self.n, "lambda": q_str(self.lam),
                "c": q_str(self.c), "beta": q_str(self.beta), "s0": self.s0}

    @classmethod
    def from_json(cls, d: dict) -> "PsiSpec":
        return cls(n=int(d["n"]), lam=to_mpq(d["lambda"]), c=to_mpq(d.get("c", "1")),
                   family=d.get("family", POWER), beta=to_mpq(d.get("beta", "0")),
                   s0=d.get("s0"))


def _decreasing_from(spec: PsiSpec, s: int) -> bool:
    # d/ds log psi < 0  <=>  lam*log s + beta > 0 (power_log, s > 1)
    if s < 2:
        return False
    with mp.workdps(30):
        return spec.lam * mp.log(s) + spec.beta > 0


def _psi_below_one(spec: PsiSpec, s: int) -> bool:
    if spec.family == POWER:
        a, b = int(spec.lam.numerator), int(spec.lam.denominator)
        # c * s^(-a/b) < 1  <=>  c^b < s^a
        return spec.c ** b < mpq(s) ** a
    return compare(psi_log(spec, LogQuantity.log(s), check=False), LogQuantity.zero()) < 0


def _default_s0(spec: PsiSpec) -> int:
    s = 1 if spec.family == POWER else 3
    if spec.family == POWER_LOG:
        while not _decreasing_from(spec, s):
            s += 1
    if spec.c > 1:
        with mp.workdps(30):
            guess = int(mp.floor(mp.power(mp.mpf(int(spec.c.numerator)) / int(spec.c.denominator),
                                          1 / (mp.mpf(int(spec.lam.numerator)) / int(spec.lam.denominator)))))
        s = max(s, guess - 2)
    while not _psi_below_one(spec, s):
        s += 1
    return s


def _check_height(spec: PsiSpec, s: LogQuantity) -> None:
    if compare(s, LogQuantity.log(spec.s_min)) < 0:
        raise DomainError(f"height exp({s.approx(8)}) is below the cutoff {spec.s_min}")


def _ivlog_of(x: Enclosure | LogQuantity):
    e = Enclosure.of(x)

    def fn(prec):
        v = e.interval(prec)
        if not v.a > 0:
            raise DomainError("log of a non-positive enclosure")
        return iv.log(v)

    return Enclosure(fn)


def psi_log(spec: PsiSpec, s, check: bool = True):
    """``log psi(exp(s))``."""
    if check:
        _check_height(spec, s)
    base = s.base if isinstance(s, LogQuantity) else None
    exact = LogQuantity.log(spec.c, base) - s * spec.lam
    if spec.family == POWER or spec.beta == 0:
        return exact
    return exact - _ivlog_of(s) * spec.beta


def psi_of_height(spec: PsiSpec, H: int):
    """``psi(H)`` as a rational when it is one, else None."""
    if spec.family == POWER_LOG and spec.beta != 0:
        return None
    v = psi_log(spec, LogQuantity.log(int(H))).exp_rational()
    return v


def Psi_log(spec: PsiSpec, s):
    """``log Psi(exp(s)) = -(n/(n+1)) log psi(exp(s))``."""
    return psi_log(spec, s) * mpq(-spec.n, spec.n + 1)


def cutoff_time(spec: PsiSpec) -> LogQuantity | Enclosure:
    return Psi_log(spec, LogQuantity.log(spec.s_min))


def _check_time(spec: PsiSpec, t) -> None:
    if compare(t, cutoff_time(spec)) < 0:
        raise DomainError(f"time {t.approx(8)} is below the cutoff log Psi(s0)")


def Psi_inv_log(spec: PsiSpec, t, check: bool = True):
    """``log Psi^{-1}(exp(t))``."""
    if check:
        _check_time(spec, t)
    n = spec.n
    base = t.base if isinstance(t, LogQuantity) else None
    if spec.family == POWER or spec.beta == 0:
        # Psi(s) = c^{-n/(n+1)} s^{n lam/(n+1)}
        return t * (mpq(n + 1, n) / spec.lam) + LogQuantity.log(spec.c, base) / spec.lam
    rhs = Enclosure.of(LogQuantity.log(spec.c, base) + t * mpq(n + 1, n)) if isinstance(t, LogQuantity) \
        else Enclosure.of(LogQuantity.log(spec.c)) + t * mpq(n + 1, n)
    lam, beta = spec.lam, spec.beta
    umin = math.log(spec.s_min)

    def fn(prec):
        K = rhs.interval(prec + 16)
        return _solve_lam_beta(lam, beta, K, prec, umin)

    return Enclosure(fn)


def _solve_lam_beta(lam: mpq, beta: mpq, K, prec: int, umin: float):
    """Enclose the root u of lam*u + beta*log(u) = K (f increasing for u >= umin)."""
    lam_i = iv.mpf(int(lam.numerator)) / int(lam.denominator)
    beta_i = iv.mpf(int(beta.numerator)) / int(beta.denominator)

    def f_iv(u):
        u = iv.mpf(u)
        return lam_i * u + beta_i * iv.log(u)

    with mp.workprec(prec + 40):
        lm = mp.mpf(int(lam.numerator)) / int(lam.denominator)
        bm = mp.mpf(int(beta.numerator)) / int(beta.denominator)

        def root(target):
            u = max(mp.mpf(umin), target / lm)
            for _ in range(400):
                step = (lm * u + bm * mp.log(u) - target) / (lm + bm / u)
                u2 = u - step
                if u2 <= 0:
                    u2 = u / 2
                if abs(u2 - u) <= abs(u) * mp.ldexp(1, -(prec + 30)):
                    u = u2
                    break
                u = u2
            return u

        lo = root(mp.mpf(K.a))
        hi = root(mp.mpf(K.b))
        eps = mp.ldexp(1, -prec) * (1 + abs(hi))
        for _ in range(200):
            a, b = lo - eps, hi + eps
            if f_iv(a).b <= K.a and f_iv(b).a >= K.b:
                return iv.mpf([a, b])
            eps *= 4
    raise DomainError("could not bracket the inverse of Psi")


def r_psi(spec: PsiSpec, t, check: bool = True):
    """Rate function ``r(t) = -t + log Psi^{-1}(e^t)``."""
    return Psi_inv_log(spec, t, check) - t


def gamma_psi(spec: PsiSpec) -> mpq:
    n, lam = spec.n, spec.lam
    return (n * lam - n - 1) / (n * lam)


def scale(spec: PsiSpec, c) -> PsiSpec:
    """Spec of ``c * psi``."""
    c = to_mpq(c)
    if c <= 0:
        raise DomainError("scale factor must be positive")
    return replace(spec, c=spec.c * c, s0=None if spec.family == POWER else spec.s0)


def t_peak(spec: PsiSpec):
    """Time where r attains its maximum, or None when r is nonincreasing."""
    if spec.family == POWER or spec.beta >= 0:
        return None
    delta = spec.lam - mpq(spec.n + 1, spec.n)
    ustar = -spec.beta / delta
    if ustar <= math.log(spec.s_min):
        return None
    n = spec.n
    lam, beta, c = spec.lam, spec.beta, spec.c
    # t = (n/(n+1)) (lam u* + beta log u* - log c)
    return (Enclosure.of(ustar) * lam + Enclosure.of(LogQuantity.log(ustar)) * beta
            - Enclosure.of(LogQuantity.log(c))) * mpq(n, n + 1)


def sup_r(spec: PsiSpec, a):
    """``sup_{t >= a} r(t)``.

    r is linear for the power family.  For power-log, r' has the sign of
    (n+1)/n - lam - beta/u with u = log Psi^{-1}(e^t) increasing in t, so r is
    unimodal and the supremum is at ``max(a, t_peak)``.
    """
    _check_time(spec, a)
    tp = t_peak(spec)
    if tp is not None and compare(a, tp) < 0:
        return r_psi(spec, tp, check=False)
    return r_psi(spec, a)


def m_bound(spec: PsiSpec, t_prev):
    """``M_k = -sup_{t >= t_prev} r(t)``."""
    return -sup_r(spec, t_prev)
