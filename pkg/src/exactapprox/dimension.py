"""Branching statistics and Hausdorff-dimension lower bounds.

* :func:`branching_survey` measures how many of the ``N^n`` subcubes of a
  case-1 parent survive the filter and fits the constant ``R3`` of the bound
  ``card E_l(C) >= N^n - R3 N^{n - 1/(n+1)}``.
* :func:`dim_lower_bound` evaluates
  ``log floor(N^n - R3 N^{n-1/(n+1)}) / log N * (n+1)/(n lambda)``.
* :class:`PrunedTree` and :func:`mass_check` replay the mass distribution
  argument on a regular subtree; :func:`box_counting` is an ESTIMATE only.

Sampling uses a fixed 64-bit linear congruential stream,
``s <- (6364136223846793005 * s + 1442695040888963407) mod 2^64``, and a
draw in ``[0, m)`` is ``(s >> 32) % m``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpq, mpz
from mpmath import iv, mp

from .cantor import Cube, case1_margin, _pos
from .errors import DomainError, PreconditionViolated, SimplexViolation
from .lattice import FlowLattice, _rank
from .lognum import Enclosure, LogQuantity, compare, int_str, q_str, to_mpq
from .psi import PsiSpec
from .schedule import Constants, EpochSchedule

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
MASK64 = (1 << 64) - 1


class LCG:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next(self) -> int:
        self.state = (LCG_A * self.state + LCG_C) & MASK64
        return self.state

    def below(self, m: int) -> int:
        return (self.next() >> 32) % int(m)


# ---------------------------------------------------------------------------
# the bound


def _ceil_root_times(R3: mpq, N: int, n: int) -> int:
    """``ceil(R3 * N^{n - 1/(n+1)})`` exactly."""
    if R3 == 0:
        return 0
    # X^{n+1} = R3^{n+1} N^{n^2+n-1}
    target = R3 ** (n + 1) * mpq(N) ** (n * n + n - 1)
    a, b = int(target.numerator), int(target.denominator)
    m = int(gmpy2.iroot(mpz(a // b), n + 1)[0])
    while mpq(m) ** (n + 1) < target:
        m += 1
    while m > 0 and mpq(m - 1) ** (n + 1) >= target:
        m -= 1
    return m


def branching_floor(N: int, n: int, R3) -> int:
    """``floor(N^n - R3 N^{n-1/(n+1)})``."""
    R3 = to_mpq(R3)
    if R3 < 0:
        raise DomainError("R3 must be nonnegative")
    return int(mpz(N) ** n) - _ceil_root_times(R3, N, n)


@dataclass
class DimBound:
    N: int
    n: int
    lam: mpq
    R3: mpq
    floor_value: int
    value: object      # mpq when exact, else a decimal string
    target: mpq

    @property
    def value_float(self) -> float:
        return float(self.value)

    def to_json(self) -> dict:
        v = q_str(self.value) if not isinstance(self.value, str) else None
        return {"N": self.N, "n": self.n, "lambda": q_str(self.lam), "R3": q_str(self.R3),
                "floor": str(self.floor_value), "bound_exact": v,
                "bound_decimal": mp.nstr(mp.mpf(self.value_float), 15) if v else self.value,
                "target": q_str(self.target), "target_decimal": str(float(self.target))}


def _log_ratio(a: int, b: int) -> mpq | None:
    """``log a / log b`` when both are powers of one integer, else None."""
    if a == 1:
        return mpq(0)
    for e in range(int(b).bit_length(), 0, -1):
        g, exact = gmpy2.iroot(mpz(b), e)
        if exact and g > 1:
            k, x = 0, mpz(a)
            while x % g == 0:
                x //= g
                k += 1
            return mpq(k, e) if x == 1 else None
    return None


def dim_lower_bound(N: int, n: int, R3, lam) -> DimBound:
    N, n = int(N), int(n)
    R3, lam = to_mpq(R3), to_mpq(lam)
    if N < 2 or n < 1:
        raise DomainError("need N >= 2 and n >= 1")
    F = branching_floor(N, n, R3)
    if F <= 0:
        raise DomainError(f"floor(N^n - R3 N^(n-1/(n+1))) = {F} <= 0")
    factor = mpq(n + 1, n) / lam
    target = mpq(n + 1) / lam
    ratio = _log_ratio(F, N)
    if ratio is not None:
        value = ratio * factor
    else:
        with mp.workdps(30):
            value = mp.nstr(mp.log(F) / mp.log(N) * mp.mpf(int(factor.numerator)) / int(factor.denominator), 25)
    return DimBound(N, n, lam, R3, F, value, target)


# ---------------------------------------------------------------------------
# branching survey


@dataclass
class ParentSample:
    level: int            # level of the parent cube
    corner: tuple
    kept: int
    s_rank: int           # rank of S_C
    s_size: int
    slab_constant: float | None   # max distance of removed centres to the hull, / (N^{-level} e^{-M/n})

    def to_json(self) -> dict:
        return {"level": self.level, "corner": [str(c) for c in self.corner], "kept": self.kept,
                "S_rank": self.s_rank, "S_size": self.s_size, "slab_constant": self.slab_constant}


@dataclass
class BranchingStats:
    N: int
    n: int
    samples: list = field(default_factory=list)
    draws: int = 0

    @property
    def total(self) -> int:
        return self.N ** self.n

    @property
    def counts(self) -> list:
        return [s.kept for s in self.samples]

    @property
    def R3(self) -> mpq:
        """Least R3 consistent with every sample (exact, up to the irrational root)."""
        if not self.samples:
            return mpq(0)
        worst = max(self.total - c for c in self.counts)
        with mp.workdps(40):
            den = mp.power(self.N, mp.mpf(self.n) - mp.mpf(1) / (self.n + 1))
            r = mp.mpf(worst) / den
        # round up to a rational with 2^-40 granularity
        return mpq(int(mp.ceil(r * 2**40)), 2**40)

    @property
    def min_fraction(self) -> mpq:
        return mpq(min(self.counts), self.total) if self.samples else mpq(1)

    @property
    def max_deficit_fraction(self) -> mpq:
        return 1 - self.min_fraction

    @property
    def mean_deficit_fraction(self) -> mpq:
        if not self.samples:
            return mpq(0)
        return mpq(sum(self.total - c for c in self.counts), self.total * len(self.samples))

    def per_level_counts(self) -> dict:
        out: dict = {}
        for s in self.samples:
            out.setdefault(s.level + 1, []).append(s.kept)
        return {str(k): v for k, v in sorted(out.items())}

    def to_json(self) -> dict:
        return {"N": self.N, "n": self.n, "draws": self.draws, "R3_fitted": q_str(self.R3),
                "R3_decimal": str(float(self.R3)),
                "min_fraction_kept": str(float(self.min_fraction)),
                "mean_deficit_fraction": str(float(self.mean_deficit_fraction)),
                "per_level_counts": self.per_level_counts(),
                "samples": [s.to_json() for s in self.samples]}


def short_set(cube: Cube, schedule: EpochSchedule, k: int):
    """``S_C``: nonzero vectors with ``||a_t u_{x0} v|| < e^{-M_k + 3M}`` at the corner
    ``x0`` of ``cube`` and ``t`` its own level time (one of each ``+-v``)."""
    grid = schedule.grid
    lat = FlowLattice(cube.lo, cube.level, grid)
    bound = -schedule.epoch(k).M_k + grid.M * 3
    # scaled radius: log(scaled) = log(true) - scale
    rad = Enclosure.of(bound - lat._scale)
    prec = 64 + int(lat.beta.bit_length()) + int(lat.alpha.bit_length())
    old = iv.prec
    iv.prec = prec
    try:
        top = iv.exp(rad.interval(prec)).b
        with mp.workprec(prec):
            rho = int(mp.floor(mp.mpf(top))) + 1
    finally:
        iv.prec = old
    out = []
    for coeffs, y, lo, hi in lat.lines(rho):
        for c0 in range(lo, hi + 1):
            v = lat._vec(coeffs, c0)
            if compare(lat.log_of(lat.norm(v)), bound) < 0:
                out.append(tuple(int(c) for c in v))
    return out


def _hull_distance(points, x) -> float | None:
    """Sup-norm distance from ``x`` to the affine hull of rational ``points``
    (n <= 2 only; None otherwise)."""
    if not points:
        return None
    if len(points) == 1 or all(p == points[0] for p in points):
        return float(max(abs(a - b) for a, b in zip(points[0], x)))
    if len(x) != 2:
        return None
    p0 = points[0]
    d = next((tuple(a - b for a, b in zip(p, p0)) for p in points[1:] if p != p0), None)
    # distance from x to the line p0 + s d, measured in sup norm along the best s
    with mp.workdps(30):
        px, py = mp.mpf(float(x[0] - p0[0])), mp.mpf(float(x[1] - p0[1]))
        dx, dy = mp.mpf(float(d[0])), mp.mpf(float(d[1]))
        # min over s of max(|px - s dx|, |py - s dy|): piecewise linear, check breakpoints
        cands = []
        for s in ([px / dx] if dx else []) + ([py / dy] if dy else []) + \
                ([(px - py) / (dx - dy)] if dx != dy else []) + ([(px + py) / (dx + dy)] if dx != -dy else []):
            cands.append(max(abs(px - s * dx), abs(py - s * dy)))
        return float(min(cands))


def _descent_parent(rng, schedule, k, l, N, n):
    """Random walk through certified subcubes down to level ``l - 1``."""
    total = N ** n
    C = Cube.unit(n, N)
    for _ in range(1, l):
        for _ in range(8 * total):
            sub = C.child(rng.below(total))
            margin, _ = case1_margin(sub, k, schedule)
            if _pos(margin):
                C = sub
                break
        else:
            return None
    return C


def _targeted_parent(rng, schedule, k, l, N, n):
    """Level ``l - 1`` cube around a random rational ``p/q`` with
    ``e^{lM - M_k} <= q <= e^{lM - M_k + M}``, provided every ancestor is certified.

    These are the parents where the filter bites hardest: ``(q, p)`` sits
    just above the threshold at time ``(l-1)M`` and drops below it at ``lM``.
    """
    grid = schedule.grid
    M_k, M = float(schedule.epoch(k).M_k), float(grid.M)
    lo = max(1, math.ceil(math.exp(l * M - M_k)))
    hi = max(lo, math.floor(math.exp(l * M - M_k + M)))
    q = lo + rng.below(hi - lo + 1)
    v = tuple(mpq(rng.below(q), q) for _ in range(n))
    hint = None
    C = Cube.unit(n, N)
    for j in range(1, l):
        C = C.containing(v, j)
        margin, lat = case1_margin(C, k, schedule, hint)
        hint = lat.reduced_basis()
        if not _pos(margin):
            return None
    return C


def branching_survey(spec: PsiSpec, consts: Constants, schedule: EpochSchedule, samples: int,
                     seed: int = 1, k: int = 1, max_level: int = 8, max_draws: int | None = None,
                     mode: str = "targeted") -> BranchingStats:
    """Kept-subcube counts at sampled case-1 parents of epoch ``k``.

    ``mode="descent"`` reaches a parent in ``E_{l-1}`` by a random walk
    through certified subcubes and keeps it only when ``S_C`` is nonempty
    (elsewhere nothing can be removed).  ``mode="targeted"`` draws the parent
    around a rational of the critical height instead (see
    :func:`_targeted_parent`); ``R3`` is a worst-case constant and uniform
    parents almost never exhibit it.
    """
    if mode not in ("targeted", "descent"):
        raise DomainError(f"unknown survey mode {mode!r}")
    grid = schedule.grid
    N, n = grid.N, grid.n
    ep = schedule.epoch(k)
    lo_l = max(schedule.l_plus_prev(k) + 1, 2)
    hi_l = min(ep.l_minus, max_level)
    if hi_l < lo_l:
        raise PreconditionViolated("no case-1 levels to survey")
    if not compare(ep.M_k, grid.M * 3) > 0:
        raise PreconditionViolated("the survey needs M_k > 3M")
    rng = LCG(seed)
    stats = BranchingStats(N, n)
    max_draws = max_draws or 50 * samples
    e_mn = float(mp.power(N, -mp.mpf(1) / (n + 1)))
    pick = _targeted_parent if mode == "targeted" else _descent_parent
    while len(stats.samples) < samples and stats.draws < max_draws:
        stats.draws += 1
        l = lo_l + rng.below(hi_l - lo_l + 1)
        C = pick(rng, schedule, k, l, N, n)
        if C is None:
            continue
        S = short_set(C, schedule, k)
        r = _rank(S) if S else 0
        if r > n:
            raise SimplexViolation(f"S_C spans {r} dimensions at a level-{C.level} parent")
        if not S:
            continue
        kept, removed = 0, []
        hint = None
        for sub in C.children():
            margin, lat = case1_margin(sub, k, schedule, hint)
            hint = lat.reduced_basis()
            if _pos(margin):
                kept += 1
            else:
                removed.append(sub.center)
        pts = [tuple(mpq(c, v[0]) for c in v[1:]) for v in S if v[0] != 0]
        slab = None
        if removed and pts:
            ds = [_hull_distance(pts, x) for x in removed]
            if all(d is not None for d in ds):
                slab = max(ds) * float(mpz(N) ** C.level) / e_mn
        stats.samples.append(ParentSample(C.level, tuple(int(c) for c in C.corner), kept, r, len(S), slab))
    return stats


# ---------------------------------------------------------------------------
# pruned tree and mass distribution


def _base_digits(c: mpz, N: int, L: int) -> list:
    """The ``L`` base-``N`` digits of ``c``, most significant first.

    Splits in halves so deep corners cost a few big divisions rather than
    ``L`` passes over the whole number.
    """
    if L <= 32:
        out = [0] * L
        c = int(c)
        for j in range(L - 1, -1, -1):
            c, out[j] = divmod(c, N)
        return out
    h = L // 2
    hi, lo = divmod(c, mpz(N) ** h)
    return _base_digits(hi, N, L - h) + _base_digits(lo, N, h)


@dataclass
class PrunedTree:
    """Regular tree: every level-``(l-1)`` cube keeps its first ``b_l`` children."""

    N: int
    n: int
    b: list

    def __post_init__(self):
        if any(not 1 <= int(x) <= self.N ** self.n for x in self.b):
            raise DomainError("each b_l must lie in [1, N^n]")
        self.b = [int(x) for x in self.b]

    @classmethod
    def from_schedule(cls, schedule: EpochSchedule, R3, depth: int | None = None) -> "PrunedTree":
        grid = schedule.grid
        N, n = grid.N, grid.n
        bc = branching_floor(N, n, R3)
        if bc < 1:
            raise DomainError("R3 too large: no branching left")
        depth = len(schedule.epochs) if depth is None else depth
        b = []
        for k in range(1, depth + 1):
            ep = schedule.epoch(k)
            b += [bc] * (ep.l_minus - schedule.l_plus_prev(k))
            b += [1] * (ep.l_plus - ep.l_minus)
        return cls(N, n, b)

    @property
    def levels(self) -> int:
        return len(self.b)

    def log_mass_inverse(self, l: int) -> float:
        """``log(b_1 ... b_l)``."""
        return sum(math.log(x) for x in self.b[:l])

    def weight(self, l: int) -> mpq:
        p = 1
        for x in self.b[:l]:
            p *= x
        return mpq(1, p)

    def liminf_proxy(self) -> float:
        """``min_l log(b_1...b_l) / (l log N)`` over the built levels."""
        lg = math.log(self.N)
        acc, best = 0.0, math.inf
        for l, x in enumerate(self.b, 1):
            acc += math.log(x)
            best = min(best, acc / (l * lg))
        return best

    def contains(self, corner, l: int) -> bool:
        """Is the level-``l`` cube with this corner in ``F_l``?"""
        N, n = self.N, self.n
        digits = [_base_digits(mpz(c), N, l) for c in corner]
        for j in range(l):
            idx = 0
            for i in range(n):
                idx = idx * N + digits[i][j]
            if idx >= self.b[j]:
                return False
        return True

    def count_in_box(self, ranges, l: int) -> int:
        """Number of level-``l`` cubes of ``F_l`` with corners in the box ``ranges``.

        Corners in a small box share all but their last digits, so the common
        prefix is checked once per group.
        """
        N, n = self.N, self.n
        tail = min(2, l)
        P = N ** tail
        groups = []
        for r in ranges:
            g: dict = {}
            for c in r:
                hi, lo = divmod(int(c), P)
                g.setdefault(hi, []).append(lo)
            groups.append(g)
        hits = 0
        for prefix in itertools.product(*[list(g) for g in groups]):
            if l > tail and not self._prefix_ok(prefix, l - tail):
                continue
            for lows in itertools.product(*[groups[i][p] for i, p in enumerate(prefix)]):
                digits = [_base_digits(mpz(c), N, tail) for c in lows]
                ok = True
                for j in range(tail):
                    idx = 0
                    for i in range(n):
                        idx = idx * N + digits[i][j]
                    if idx >= self.b[l - tail + j]:
                        ok = False
                        break
                hits += ok
        return hits

    def _prefix_ok(self, prefix, m: int) -> bool:
        return self.contains(prefix, m)

    def counts(self) -> list:
        c, out = 1, []
        for x in self.b:
            c *= x
            out.append(c)
        return out


def mass_check(tree: PrunedTree, alpha, trials: int, seed: int = 1) -> dict:
    """Sample balls ``B(x, r)`` and check ``mu(B) <= (3N)^n r^alpha``."""
    alpha = to_mpq(alpha)
    proxy = tree.liminf_proxy()
    if not float(alpha) < proxy:
        raise PreconditionViolated(f"alpha = {q_str(alpha)} is not below the liminf proxy {proxy:.6f}")
    N, n, L = tree.N, tree.n, tree.levels
    rng = LCG(seed)
    K = 64
    worst = 0.0
    results = []
    lgN = math.log(N)
    for _ in range(trials):
        l = 1 + rng.below(L)
        # radius r = 2^-j with N^-l < r <= N^-(l-1)
        jmin = math.ceil((l - 1) * math.log2(N))
        jmax = math.floor(l * math.log2(N) - 1e-12)
        if jmax < jmin:
            continue
        j = jmin + rng.below(jmax - jmin + 1)
        r = mpq(1, 2 ** j)
        x = [mpq(rng.next(), 2 ** K) for _ in range(n)]
        s = mpz(N) ** l
        ranges = []
        for xi in x:
            lo = max(0, int(((xi - r) * s).__floor__()))
            hi = min(int(s) - 1, int(((xi + r) * s).__floor__()))
            ranges.append(range(lo, hi + 1))
        hits = tree.count_in_box(ranges, l)
        if hits == 0:
            ratio = 0.0
        else:
            log_mu = math.log(hits) - tree.log_mass_inverse(l)
            log_bound = n * math.log(3 * N) + float(alpha) * (-j * math.log(2))
            ratio = math.exp(log_mu - log_bound)
        worst = max(worst, ratio)
        results.append({"level": l, "r_log2": -j, "cubes_hit": hits, "ratio": ratio})
    return {"alpha": q_str(alpha), "liminf_proxy": proxy, "trials": len(results),
            "max_ratio": worst, "pass": worst <= 1.0, "samples": results}


def box_counting(tree: PrunedTree, from_level: int = 1) -> dict:
    """ESTIMATE: least-squares slope of log count_l against l log N."""
    counts = tree.counts()
    xs, ys = [], []
    lg = math.log(tree.N)
    for l, c in enumerate(counts, 1):
        if l >= from_level:
            xs.append(l * lg)
            ys.append(math.log(c))
    if len(xs) < 2:
        raise DomainError("box counting needs at least two levels")
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((a - mx) ** 2 for a in xs)
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    return {"label": "ESTIMATE", "slope": sxy / sxx, "levels": len(xs),
            "per_level_counts": [int_str(c) for c in counts]}


def dimension_report(spec: PsiSpec, stats: BranchingStats, Ns=(16, 256, 4096)) -> dict:
    """``{N, n, lambda, R3_fitted, bound_decimal, target_decimal, per_level_counts}``
    for the surveyed N plus the bound at each N in ``Ns`` with the same R3."""
    b = dim_lower_bound(stats.N, spec.n, stats.R3, spec.lam)
    return {
        "N": stats.N, "n": spec.n, "lambda": q_str(spec.lam),
        "R3_fitted": q_str(stats.R3), "bound_decimal": b.to_json()["bound_decimal"],
        "target_decimal": str(float(b.target)),
        "per_level_counts": stats.per_level_counts(),
        "bounds": [dim_lower_bound(N, spec.n, stats.R3, spec.lam).to_json() for N in Ns
                   if branching_floor(N, spec.n, stats.R3) > 0],
    }
