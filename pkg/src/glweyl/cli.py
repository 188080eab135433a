"""Command line interface: ``glweyl catalog | check | coeffs``.

Exit codes: 0 all checks passed, 1 a check failed, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .connection import chern_rund, weyl_connection
from .manifold import PointTM
from .metric import form_at, inverse
from .scenario import CATALOG_SUMMARY, ScenarioFileError, catalog_names, load_scenario
from .verify import Scenario, ScenarioError, run_all

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def fmt(v: float) -> str:
    """12 significant digits, '.' decimal separator, no negative zero."""
    v = float(v)
    if v == 0.0:
        v = 0.0
    return format(v, ".12g")


def _override(s: Scenario, args) -> Scenario:
    changes = {}
    for attr, flag in (("engine", "engine"), ("fd_step", "fd_step"), ("points", "points"),
                       ("seed", "seed"), ("tolerance", "tolerance")):
        v = getattr(args, flag, None)
        if v is not None:
            changes[attr] = v
    if not changes:
        return s
    try:
        return s.replace(**changes)
    except ScenarioError as err:
        raise InputError(f"bad flag value: {err}") from None


def _load(source: str) -> Scenario:
    try:
        return load_scenario(source)
    except ScenarioFileError as err:
        raise InputError(str(err)) from None


def build_report(s: Scenario) -> dict:
    reports, skipped = run_all(s)
    return {
        "scenario": s.name,
        "n": s.n,
        "engine": s.engine,
        "seed": s.seed,
        "point_count": s.points,
        "domain": s.box.describe(),
        "pass": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
        "skipped": skipped,
    }


def cmd_catalog(args, out) -> int:
    for name in catalog_names():
        print(f"{name:14s} {CATALOG_SUMMARY[name]}", file=out)
    return EXIT_OK


def cmd_check(args, out) -> int:
    s = _override(_load(args.scenario), args)
    report = build_report(s)
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        if c["error"]:
            line = f"{status} {c['name']}: {c['error']}"
        else:
            line = f"{status} {c['name']}: {fmt(c['worst_residual'])} (bound {fmt(c['tolerance'])})"
        print(line, file=sys.stderr)
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def parse_point(text: str, n: int) -> PointTM:
    """``x1=0.5,y2=1`` -> PointTM; unspecified coordinates are 0."""
    x, y = [0.0] * n, [0.0] * n
    if text:
        for item in text.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or len(key) < 2 or key[0] not in "xy" or not key[1:].isdigit():
                raise InputError(f"bad --point entry {item!r}")
            i = int(key[1:])
            if not 1 <= i <= n:
                raise InputError(f"--point coordinate {key} outside 1..{n}")
            try:
                v = float(value)
            except ValueError:
                raise InputError(f"bad number in --point entry {item!r}") from None
            (x if key[0] == "x" else y)[i - 1] = v
    try:
        return PointTM(x, y)
    except ValueError as err:
        raise InputError(str(err)) from None


def coefficient_table(s: Scenario, p: PointTM) -> list[tuple[str, str, float]]:
    """Rows (quantity, 1-based indices, value) in a fixed order."""
    n = s.n
    eng = s.eng
    G = s.g.at(p)
    Ginv = inverse(s.g, p)
    N = s.N.matrix(p)
    F_cr = chern_rund(s.g, s.N, eng).F(p)
    F_w = weyl_connection(s.g, s.N, s.w0, eng).F(p)
    w = form_at(s.w0, p)
    w_up = Ginv @ w
    rows = []
    r2 = [(i, j) for i in range(n) for j in range(n)]
    r3 = [(i, j, k) for i in range(n) for j in range(n) for k in range(n)]
    rows += [("g", f"_{i + 1}{j + 1}", G[i, j]) for i, j in r2]
    rows += [("g_inv", f"^{i + 1}{j + 1}", Ginv[i, j]) for i, j in r2]
    rows += [("N", f"^{j + 1}_{i + 1}", N[j, i]) for j, i in r2]
    rows += [("F_CR", f"^{i + 1}_{j + 1}{k + 1}", F_cr[i, j, k]) for i, j, k in r3]
    rows += [("F_Weyl", f"^{i + 1}_{j + 1}{k + 1}", F_w[i, j, k]) for i, j, k in r3]
    rows += [("w", f"_{i + 1}", w[i]) for i in range(n)]
    rows += [("w_up", f"^{i + 1}", w_up[i]) for i in range(n)]
    return rows


def cmd_coeffs(args, out) -> int:
    s = _override(_load(args.scenario), args)
    p = parse_point(args.point or "", s.n)
    try:
        rows = coefficient_table(s, p)
    except ArithmeticError as err:
        raise InputError(f"cannot evaluate coefficients at this point: {err}") from None
    coords = " ".join([f"x{i + 1}={fmt(v)}" for i, v in enumerate(p.x)]
                      + [f"y{i + 1}={fmt(v)}" for i, v in enumerate(p.y)])
    print(f"# scenario {s.name}  n={s.n}  engine={s.engine}", file=out)
    print(f"# point {coords}", file=out)
    print(f"{'quantity':<8} {'index':<8} value", file=out)
    for name, idx, v in rows:
        print(f"{name:<8} {idx:<8} {fmt(v)}", file=out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glweyl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("catalog", help="list built-in scenarios")

    def common(p):
        p.add_argument("scenario", help="catalog name or path to a scenario file")
        p.add_argument("--engine", choices=["symbolic", "fd"],
                       help="derivative engine (default: the scenario's, else symbolic)")
        p.add_argument("--fd-step", dest="fd_step", type=_positive_float,
                       help="base finite-difference step h0 (default 1e-5)")
        p.add_argument("--points", type=_positive_int, help="sample points per check (default 64)")
        p.add_argument("--seed", type=int, help="sampling seed (default 42)")
        p.add_argument("--tolerance", type=_positive_float,
                       help="override the engine tolerance (1e-9 symbolic, 1e-6 fd)")

    check = sub.add_parser("check", help="run every verification check")
    common(check)
    check.add_argument("--report", help="write the JSON report here instead of stdout")
    coeffs = sub.add_parser("coeffs", help="print connection coefficients at a point")
    common(coeffs)
    coeffs.add_argument("--point", help="coordinates, e.g. x1=0.7,y2=1 (others are 0)")
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = make_parser().parse_args(argv)
    handler = {"catalog": cmd_catalog, "check": cmd_check, "coeffs": cmd_coeffs}[args.command]
    try:
        return handler(args, out)
    except InputError as err:
        print(f"glweyl: error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
