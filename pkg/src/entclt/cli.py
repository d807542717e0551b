"""Command line entry point: ``entclt convergence | suite | show``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .config import load_config
from .errors import DomainError
from .experiments import (convergence_passed, run_convergence,
                          run_inequality_suite, suite_passed)
from .reports import CONVERGENCE_COLUMNS, emit_report, load_report


def _out_dir(config, override, default):
    return Path(override or config.out_dir or default)


def cmd_convergence(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    report = run_convergence(config, debruijn=not args.no_debruijn)
    out = _out_dir(config, args.out, "entclt-out")
    emit_report(report, out / "convergence.csv")
    emit_report(report, out / "convergence.json")
    print(",".join(CONVERGENCE_COLUMNS))
    for r in report.rows:
        cells = [str(r.n)] + ["%.6g" % getattr(r, c) for c in CONVERGENCE_COLUMNS[1:]]
        print(",".join(cells) + (f"  # {r.error}" if r.error else ""))
    for k, v in sorted(report.summary.items()):
        print(f"{k}: {v}")
    print(f"wrote {out / 'convergence.csv'} and {out / 'convergence.json'}")
    return 0 if convergence_passed(report) else 1


def cmd_suite(args):
    config = load_config(args.config)
    reports = run_inequality_suite(config)
    out = _out_dir(config, args.out, "entclt-out")
    path = emit_report(reports, out / "suite.json")
    by_check = {}
    for r in reports:
        n, bad = by_check.get(r.check_name, (0, 0))
        by_check[r.check_name] = (n + 1, bad + (not r.passed))
    for name, (n, bad) in by_check.items():
        print(f"{'FAIL' if bad else 'pass'}  {name:34s} {n - bad}/{n}")
    for r in reports:
        if not r.passed:
            print(f"  failed: {r.check_name} [{r.label}] value={r.value:.6g} "
                  f"bound={r.bound:.6g} slack={r.slack:.3g}")
    print(f"wrote {path}")
    return 0 if suite_passed(reports) else 1


def cmd_show(args):
    data = load_report(args.report)
    if isinstance(data, list) and data and "n" in data[0]:
        # convergence CSV
        print(",".join(CONVERGENCE_COLUMNS))
        for row in data:
            print(",".join(row[c] for c in CONVERGENCE_COLUMNS))
        return 0 if all(not math.isnan(float(row["jst"])) for row in data) else 1
    if isinstance(data, list):
        bad = [r for r in data if not r["pass"]]
        print(f"{len(data) - len(bad)}/{len(data)} checks pass")
        for r in bad:
            print(f"  failed: {r['check_name']} slack={r['slack']}")
        return 0 if not bad else 1
    if isinstance(data, dict) and "rows" in data:
        for k, v in sorted(data["summary"].items()):
            print(f"{k}: {v}")
        flags = [v for v in data["summary"].values() if isinstance(v, bool)]
        return 0 if all(flags) and not data["summary"].get("failed_rows") else 1
    print("unrecognised report", file=sys.stderr)
    return 2


def build_parser():
    parser = argparse.ArgumentParser(prog="entclt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", help="J_st and relative entropy along an n-schedule")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--no-debruijn", action="store_true",
                   help="skip the de Bruijn cross-check on the last row")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("suite", help="run the inequality verification suite")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("show", help="summarise a written report")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_show)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, OSError) as exc:
        print(f"entclt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
