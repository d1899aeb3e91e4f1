"""Run configuration: an INI file with ``[psi]``, ``[grid]``, ``[constants]``,
``[run]`` and ``[survey]`` sections.

Rationals are written as integers or ``p/q``; decimal notation is rejected so
that no exact value ever comes from a float.

Example::

    [psi]
    family = power
    n = 1
    lambda = 3

    [grid]
    M = 4

    [constants]
    profile = relaxed
    R0 = 2
    R1 = 6
    R2 = 30

    [run]
    epochs = 2
    minimal = true
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from fractions import Fraction

from gmpy2 import mpq

from .errors import ConfigError, DomainError
from .lognum import Grid
from .psi import PsiSpec
from .schedule import DEFAULT_CEILING_LEVEL, PAPER, RELAXED, Constants

_RAT = re.compile(r"^\s*[+-]?\d+(\s*/\s*\d+)?\s*$")


def parse_rational(text: str, name: str) -> mpq:
    if not _RAT.match(text or ""):
        raise ConfigError(f"{name}: expected an integer or 'p/q', got {text!r}")
    f = Fraction(text.replace(" ", ""))
    return mpq(f.numerator, f.denominator)


def parse_vector(text: str, name: str) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise ConfigError(f"{name}: empty vector")
    return tuple(parse_rational(p, name) for p in parts)


def _bool(text: str, name: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {text!r}")


@dataclass
class RunConfig:
    spec: PsiSpec
    grid: Grid
    profile: str = PAPER
    R: tuple | None = None          # (R0, R1, R2) for the relaxed profile
    epochs: int = 2
    minimal: bool = False
    gap_ratio: mpq | None = None
    ceiling: int = DEFAULT_CEILING_LEVEL
    seed: int = 1
    samples: int = 20
    max_level: int = 8
    survey_mode: str = "targeted"
    lookahead: int = 4
    extra: dict = field(default_factory=dict)

    def constants(self) -> Constants:
        if self.profile == PAPER:
            return Constants.paper(self.spec.n, self.spec.gamma)
        if self.R is None:
            raise ConfigError("constants: the relaxed profile needs R0, R1 and R2")
        return Constants.relaxed(self.spec.n, *self.R)

    def with_profile(self, profile: str | None) -> "RunConfig":
        if profile is None or profile == self.profile:
            return self
        if profile not in (PAPER, RELAXED):
            raise ConfigError(f"profile must be 'paper' or 'relaxed', got {profile!r}")
        if profile == RELAXED and self.R is None:
            raise ConfigError("constants: --profile relaxed needs R0, R1 and R2 in the config")
        from dataclasses import replace
        return replace(self, profile=profile)


def _need(cp, section, key):
    if not cp.has_section(section):
        raise ConfigError(f"missing [{section}] section")
    if not cp.has_option(section, key):
        raise ConfigError(f"[{section}] is missing the field {key!r}")
    return cp.get(section, key)


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep 'M' and 'N' distinct
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e
    return config_from_parser(cp)


def config_from_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> RunConfig:
    fam = cp.get("psi", "family", fallback="power") if cp.has_section("psi") else None
    n = int(parse_rational(_need(cp, "psi", "n"), "psi.n"))
    lam = parse_rational(_need(cp, "psi", "lambda"), "psi.lambda")
    c = parse_rational(cp.get("psi", "c", fallback="1"), "psi.c")
    beta = parse_rational(cp.get("psi", "beta", fallback="0"), "psi.beta")
    s0 = cp.get("psi", "s0", fallback="").strip()
    try:
        spec = PsiSpec(n=n, lam=lam, c=c, family=fam, beta=beta,
                       s0=int(parse_rational(s0, "psi.s0")) if s0 else None)
    except DomainError as e:
        raise ConfigError(f"[psi]: {e}") from e

    if not cp.has_section("grid"):
        raise ConfigError("missing [grid] section")
    has_M, has_N = cp.has_option("grid", "M"), cp.has_option("grid", "N")
    if has_M == has_N:
        raise ConfigError("[grid] needs exactly one of 'M' or 'N'")
    if has_N:
        N = int(parse_rational(cp.get("grid", "N"), "grid.N"))
        if N < 2:
            raise ConfigError("grid.N must be an integer >= 2")
        grid = Grid(N, n)
    else:
        grid = Grid.from_M(parse_rational(cp.get("grid", "M"), "grid.M"), n)

    profile = cp.get("constants", "profile", fallback=PAPER).strip() if cp.has_section("constants") else PAPER
    keys = [k for k in ("R0", "R1", "R2") if cp.has_option("constants", k)] if cp.has_section("constants") else []
    if profile == PAPER and keys:
        raise ConfigError("profile=paper forbids overriding R0, R1, R2")
    if profile not in (PAPER, RELAXED):
        raise ConfigError(f"constants.profile must be 'paper' or 'relaxed', got {profile!r}")
    R = None
    if keys:
        if len(keys) != 3:
            raise ConfigError("[constants] needs all of R0, R1, R2")
        R = tuple(parse_rational(cp.get("constants", k), f"constants.{k}") for k in ("R0", "R1", "R2"))

    def run(key, default, conv):
        if cp.has_section("run") and cp.has_option("run", key):
            return conv(cp.get("run", key), f"run.{key}")
        return default

    def sv(key, default, conv):
        if cp.has_section("survey") and cp.has_option("survey", key):
            return conv(cp.get("survey", key), f"survey.{key}")
        return default

    as_int = lambda t, nm: int(parse_rational(t, nm))  # noqa: E731
    gap = run("gap_ratio", None, parse_rational)
    mode = sv("mode", "targeted", lambda t, nm: t.strip())
    return RunConfig(
        spec=spec, grid=grid, profile=profile, R=R,
        epochs=run("epochs", 2, as_int), minimal=run("minimal", False, _bool),
        gap_ratio=gap, ceiling=run("time_ceiling_level", DEFAULT_CEILING_LEVEL, as_int),
        seed=sv("seed", 1, as_int), samples=sv("samples", 20, as_int),
        max_level=sv("max_level", 8, as_int), survey_mode=mode,
        lookahead=run("lookahead", 4, as_int),
    )
