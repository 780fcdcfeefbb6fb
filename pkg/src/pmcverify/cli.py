"""Command-line entry point.

``pmcverify run <config>`` executes a verification run and writes
``report.json`` plus CSV grids; ``pmcverify list-gallery`` prints the
available closed-form charts.

Exit codes: 0 all non-skipped checks passed, 1 some check failed or was
flagged, 2 the configuration could not be parsed, 3 a geometric contract
error stopped a check.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys

from .config import load_config
from .errors import InputError, VerificationError
from .gallery import list_gallery


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmcverify", description="Numerical verification of branched surfaces in space forms.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the checks described by a TOML config")
    r.add_argument("config", help="path to the TOML configuration")
    r.add_argument("--out", default=None, help="output directory (overrides [output].dir)")
    r.add_argument("--jobs", type=int, default=1, help="worker threads for grid evaluation")
    r.add_argument("--tol-scale", type=float, default=1.0, help="multiply every default tolerance")
    sub.add_parser("list-gallery", help="list gallery ids, parameters and expected formulas")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-gallery":
        sys.stdout.write(list_gallery())
        return 0
    from .runner import run

    try:
        cfg = load_config(args.config, args.out, args.tol_scale)
    except InputError as exc:
        print(f"pmcverify: {exc}", file=sys.stderr)
        return 2
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    try:
        report, code = run(cfg, jobs=args.jobs, timestamp=stamp)
    except InputError as exc:
        print(f"pmcverify: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"pmcverify: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for rec in report["checks"]:
        res = rec["residual"]
        res_s = "-" if res is None else f"{res:.3e}"
        print(f"{rec['name']:<22} {rec['status']:<8} {res_s}")
    if report["summary"]["errors"]:
        print("contract errors in: " + ", ".join(report["summary"]["errors"]), file=sys.stderr)
    print(f"report: {cfg.out_dir / 'report.json'}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
