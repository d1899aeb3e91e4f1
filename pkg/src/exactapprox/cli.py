"""Command-line entry point.

Every subcommand reads the INI run configuration given by ``--config`` and
writes its results under ``--out``.  Files are written to a temporary name in
the target directory and renamed into place, so a crash never leaves a
half-written output behind.

Exit codes: 0 success, 2 configuration error, 3 domain or precondition error,
4 infeasible, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile

from . import __version__
from .cantor import certificate_from_json, construct, verify_conditions
from .config import RunConfig, load_config, parse_rational, parse_vector
from .dani import classify, trajectory
from .dimension import branching_survey, dimension_report
from .errors import (ConfigError, DomainError, ExactApproxError, Infeasible, NonSeparable,
                     PreconditionViolated, SimplexViolation, ZeroVector)
from .lognum import int_str, q_str
from .schedule import PAPER, RELAXED, build_template, choose_times

log = logging.getLogger("exactapprox")

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 2, 3, 4, 5


class VerificationFailed(ExactApproxError):
    code = "VERIFY"


def write_atomic(path: str, data: str) -> str:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _out(args, name: str) -> str:
    return os.path.join(args.out, name)


def _config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_config(args.config).with_profile(args.profile)


def _schedule(cfg: RunConfig, epochs: int | None = None):
    k = cfg.epochs if epochs is None else epochs
    return choose_times(cfg.spec, cfg.constants(), k, cfg.grid, minimal=cfg.minimal,
                        gap_ratio=cfg.gap_ratio, ceiling=cfg.ceiling)


def parse_levels(text: str) -> list:
    """``"a:b"`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            lo, hi = int(a), int(b)
            if lo < 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        out = sorted({int(p) for p in text.split(",") if p.strip()})
    except ValueError:
        raise DomainError(f"bad level range {text!r}") from None
    if not out or out[0] < 0:
        raise DomainError(f"bad level range {text!r}")
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_trajectory(args) -> int:
    cfg = _config(args)
    x = parse_vector(args.x, "--x")
    if len(x) != cfg.spec.n:
        raise DomainError(f"x has {len(x)} coordinates, n = {cfg.spec.n}")
    rows = trajectory(cfg.spec, x, parse_levels(args.levels), cfg.grid)
    n = cfg.spec.n
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(["level", "t_decimal", "c_x_decimal", "r_psi_decimal", "witness_q"]
               + [f"witness_p{i + 1}" for i in range(n)] + ["e1_dominant"])
    exact = []
    for r in rows:
        rd = "" if r.r_psi is None else r.r_psi.approx(20)
        w.writerow([r.level, r.t.approx(20), r.c_x.approx(20), rd]
                   + [int(c) for c in r.witness] + [int(r.e1_dominant)])
        exact.append({"level": r.level, "t": r.t.to_json(), "c_x": r.c_x.to_json(),
                      "r_psi": None if r.r_psi is None else r.r_psi.to_json(),
                      "witness": [int_str(c) for c in r.witness],
                      "e1_dominant": bool(r.e1_dominant)})
    write_atomic(_out(args, "trajectory.csv"), buf.getvalue())
    write_atomic(_out(args, "trajectory.json"), _dump({
        "spec": cfg.spec.to_json(), "N": cfg.grid.N, "x": [q_str(c) for c in x], "rows": exact}))
    print(f"trajectory: {len(rows)} rows -> {_out(args, 'trajectory.csv')}")
    return EXIT_OK


def cmd_schedule(args) -> int:
    cfg = _config(args)
    sch = _schedule(cfg)
    write_atomic(_out(args, "schedule.json"), _dump(sch.to_json()))
    for ep in sch.epochs:
        print(f"epoch {ep.k}: level {ep.level}, l- {ep.l_minus}, l+ {ep.l_plus}, binding {ep.binding}")
    return EXIT_OK


def cmd_template(args) -> int:
    cfg = _config(args)
    tmpl = build_template(cfg.spec, _schedule(cfg))
    write_atomic(_out(args, "template.json"), _dump(tmpl.to_json()))
    print(f"template: {len(tmpl.breakpoints)} breakpoints")
    return EXIT_OK


def cmd_construct(args) -> int:
    cfg = _config(args)
    depth = cfg.epochs if args.depth is None else args.depth
    sch = _schedule(cfg, depth)
    cert = construct(cfg.spec, cfg.constants(), sch, depth=depth, verify=False)
    rep = None
    if not args.no_verify:
        rep = verify_conditions(cert, lookahead=cfg.lookahead)
        cert.audit = rep.entries
    path = write_atomic(_out(args, "certificate.json"), _dump(cert.to_json()))
    print(f"certificate: depth {cert.depth}, {cert.deepest} levels -> {path}")
    if rep is not None and not rep.ok:
        f = rep.failures()[0]
        raise VerificationFailed(f"audit: {f['condition']} fails at level {f['level']} "
                                 f"(margin {f['margin_decimal']}); certificate written with its audit")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        with open(args.certificate, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read certificate {args.certificate}: {e}") from e
    cert = certificate_from_json(d)
    rep = verify_conditions(cert, lookahead=args.lookahead)
    report = {"ok": rep.ok, "summary": rep.summary(), "failures": rep.failures()}
    if args.H_max is not None and cert.witnesses:
        w = cert.witnesses[0]
        cl = classify(cert.spec, w.y, args.H_max, parse_rational(args.c, "--c"))
        hits = [v.to_json() for v in cl.hits]
        report["classify"] = {**cl.to_json(), "matches_witness": hits == [w.v.to_json()]}
    write_atomic(_out(args, "verify.json"), _dump(report))
    for cond, s in sorted(rep.summary().items()):
        print(f"{cond}: {s['checked']} checked, {s['failed']} failed, min margin {s['min_margin']}")
    if not rep.ok:
        f = rep.failures()[0]
        raise VerificationFailed(f"{f['condition']} fails at level {f['level']} "
                                 f"(margin {f['margin_decimal']})")
    if "classify" in report and not report["classify"]["matches_witness"]:
        raise VerificationFailed("classify does not report exactly the epoch-1 witness")
    return EXIT_OK


def cmd_dimension(args) -> int:
    cfg = _config(args)
    sch = _schedule(cfg, 1)
    stats = branching_survey(cfg.spec, cfg.constants(), sch, cfg.samples, seed=cfg.seed,
                             max_level=cfg.max_level, mode=cfg.survey_mode)
    rep = dimension_report(cfg.spec, stats)
    rep["survey"] = stats.to_json()
    write_atomic(_out(args, "dimension.json"), _dump(rep))
    print(f"R3 {rep['R3_fitted']}, bound {rep['bound_decimal']}, target {rep['target_decimal']}")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    x = parse_vector(args.x, "--x")
    if len(x) != cfg.spec.n:
        raise DomainError(f"x has {len(x)} coordinates, n = {cfg.spec.n}")
    rep = classify(cfg.spec, x, args.H_max, parse_rational(args.c, "--c"))
    write_atomic(_out(args, "classify.json"), _dump(rep.to_json()))
    print(f"classify: {len(rep.hits)} hits among {rep.candidates_checked} candidates")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR", default=".")
    common.add_argument("--threads", metavar="K", type=int, default=1,
                        help="accepted for compatibility; work runs in one process")
    common.add_argument("--profile", choices=(PAPER, RELAXED), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="exactapprox", parents=[common],
                                description="Exact trajectories and certified exactly-approximable points.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("trajectory", parents=[common], help="c_x and r_psi along grid times")
    s.add_argument("--x", required=True, help="comma-separated rationals p/q")
    s.add_argument("--levels", default="0:8", help="a:b inclusive, or a comma list")
    s.set_defaults(fn=cmd_trajectory)

    s = sub.add_parser("schedule", parents=[common], help="choose the epoch times")
    s.set_defaults(fn=cmd_schedule)

    s = sub.add_parser("template", parents=[common], help="template breakpoints")
    s.set_defaults(fn=cmd_template)

    s = sub.add_parser("construct", parents=[common], help="build a certificate")
    s.add_argument("--depth", type=int, default=None, help="epochs to build (default: run.epochs)")
    s.add_argument("--no-verify", action="store_true")
    s.set_defaults(fn=cmd_construct)

    s = sub.add_parser("verify", parents=[common], help="replay a certificate")
    s.add_argument("--certificate", required=True)
    s.add_argument("--H-max", dest="H_max", type=int, default=None)
    s.add_argument("--c", default="1/2")
    s.add_argument("--lookahead", type=int, default=4)
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("dimension", parents=[common], help="branching survey and bounds")
    s.set_defaults(fn=cmd_dimension)

    s = sub.add_parser("classify", parents=[common], help="rationals beating c*psi")
    s.add_argument("--x", required=True)
    s.add_argument("--H-max", dest="H_max", type=int, required=True)
    s.add_argument("--c", default="1")
    s.set_defaults(fn=cmd_classify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except ExactApproxError as e:
        code, tag = _classify_error(e)
        print(f"error: {tag}: {e}", file=sys.stderr)
        return code


def _classify_error(e: ExactApproxError):
    if isinstance(e, ConfigError):
        return EXIT_CONFIG, "config error"
    if isinstance(e, Infeasible):
        return EXIT_INFEASIBLE, f"INFEASIBLE [{e.predicate}]"
    if isinstance(e, VerificationFailed):
        return EXIT_VERIFY, "verification failed"
    if isinstance(e, (DomainError, PreconditionViolated, SimplexViolation, ZeroVector, NonSeparable)):
        return EXIT_DOMAIN, type(e).__name__
    raise e

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
