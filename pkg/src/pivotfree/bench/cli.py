"""``bench`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..kkt import Formulation
from ..lp import LpOptions, solve_lp
from ..model import FAMILIES, builtin_instance
from ..nlp import NlpOptions, solve_nlp
from .batch import DEFAULT_MAX_ITER, DEFAULT_MAX_TIME, Problem, run_batch
from .mps import MpsError, read_mps
from .records import read_csv, sgm10

FORMULATIONS = [f.value for f in Formulation]


def _common(p: argparse.ArgumentParser, formulation: str):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--max-time", type=float, default=DEFAULT_MAX_TIME)
    p.add_argument("--formulation", default=formulation, help=f"one of {', '.join(FORMULATIONS)}")
    p.add_argument("--solution", action="store_true", help="include the primal-dual solution in the JSON report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description="Interior-point solver harness.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("solve-lp", help="solve an LP read from an MPS file")
    lp.add_argument("file", type=Path)
    _common(lp, Formulation.DUAL.value)
    lp.add_argument("--delta-p", type=float, default=1e-8)
    lp.add_argument("--delta-d", type=float, default=1e-8)
    lp.add_argument("--dump-kkt", type=Path, default=None, metavar="DIR",
                    help="write each iteration's KKT matrix to DIR in Matrix Market format")

    nlp = sub.add_parser("solve-nlp", help="solve a built-in NLP family instance")
    nlp.add_argument("--family", required=True, choices=FAMILIES)
    nlp.add_argument("--size", type=int, required=True)
    _common(nlp, Formulation.PRIMAL.value)
    nlp.add_argument("--mu0", type=float, default=0.1)
    nlp.add_argument("--log", action="store_true", help="print the iteration log to stderr")

    batch = sub.add_parser("batch", help="run a JSON manifest of problems")
    batch.add_argument("manifest", type=Path)
    batch.add_argument("--out", type=Path, required=True)
    batch.add_argument("--tol", type=float, default=None)
    batch.add_argument("--max-time", type=float, default=None)

    sg = sub.add_parser("sgm10", help="shifted geometric mean of the time column of a records CSV")
    sg.add_argument("records", type=Path)
    sg.add_argument("--max-time", type=float, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "solve-lp":
        try:
            lp = read_mps(args.file)
        except (OSError, MpsError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        opts = LpOptions(args.tol, args.max_iter, args.max_time, args.formulation,
                         args.delta_p, args.delta_d, args.dump_kkt)
        report = solve_lp(lp, opts, log=(lambda s: print(s, file=sys.stderr)) if args.verbose else None)
        print(report.to_json(args.solution))
        return 0 if report.solved else 1
    if args.command == "solve-nlp":
        model = builtin_instance(args.family, args.size)
        opts = NlpOptions(args.tol, args.max_iter, args.max_time, args.mu0, args.formulation)
        report = solve_nlp(model, opts, log=(lambda s: print(s, file=sys.stderr)) if args.log else None)
        print(report.to_json(args.solution))
        return 0 if report.solved else 1
    if args.command == "batch":
        specs = json.loads(args.manifest.read_text())
        if not isinstance(specs, list):
            print("error: manifest must be a JSON array", file=sys.stderr)
            return 2
        base = args.manifest.parent
        problems = [Problem.from_spec(s, base) for s in specs]
        options = {}
        if args.tol is not None:
            options["tol"] = args.tol
        if args.max_time is not None:
            options["max_wall_time"] = args.max_time
        records = run_batch(problems, options, args.out)
        return 0 if all(r.solved for r in records) else 1
    records = read_csv(args.records)
    if not records:
        print("error: no records", file=sys.stderr)
        return 2
    print(f"{sgm10([r.time_s for r in records], args.max_time):.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
