"""Batch runs over MPS files and built-in NLP families."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..lp import LinearProgram, LpOptions, solve_lp
from ..model import Model, builtin_instance
from ..nlp import NlpOptions, solve_nlp
from .mps import MpsError, read_mps
from .records import BenchmarkRecord, log2_nnz, summary_table, write_csv, write_json

log = logging.getLogger(__name__)

DEFAULT_MAX_TIME = 900.0
DEFAULT_MAX_ITER = 500

_LP_KEYS = {"tol", "max_iter", "max_wall_time", "formulation", "delta_p", "delta_d"}
_NLP_KEYS = {"tol", "max_iter", "max_wall_time", "formulation", "mu0", "scale_residuals"}


@dataclass
class Problem:
    """One batch entry: an MPS path, a built-in family, or a ready object."""

    name: str
    path: str | None = None
    family: str | None = None
    size: int | None = None
    obj: LinearProgram | Model | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_spec(cls, spec: dict, base: Path | None = None) -> "Problem":
        spec = dict(spec)
        opts = dict(spec.pop("options", {}))
        if "path" in spec:
            path = Path(spec.pop("path"))
            if base is not None and not path.is_absolute():
                path = base / path
            name = spec.pop("name", path.stem)
            opts.update(spec)
            return cls(name, path=str(path), options=opts)
        if "family" in spec:
            fam, size = spec.pop("family"), int(spec.pop("size"))
            name = spec.pop("name", f"{fam}_{size}")
            opts.update(spec)
            return cls(name, family=fam, size=size, options=opts)
        raise ValueError(f"manifest entry needs 'path' or 'family': {spec}")


def _options(problem: Problem, defaults: dict):
    merged = {"max_iter": DEFAULT_MAX_ITER, "max_wall_time": DEFAULT_MAX_TIME, **defaults, **problem.options}
    if "max_time" in merged:
        merged["max_wall_time"] = merged.pop("max_time")
    return merged


def solve_problem(problem: Problem, defaults: dict | None = None) -> BenchmarkRecord:
    opts = _options(problem, defaults or {})
    cap = float(opts["max_wall_time"])
    tol = float(opts.get("tol", 1e-8))
    t0 = time.perf_counter()
    try:
        if problem.path is not None:
            obj = read_mps(problem.path)
        elif problem.family is not None:
            obj = builtin_instance(problem.family, problem.size)
        else:
            obj = problem.obj
    except (OSError, MpsError, ValueError) as exc:
        log.warning("skipping %s: %s", problem.name, exc)
        return BenchmarkRecord(problem.name, 0.0, 0, cap, "none", tol, "ReadError")
    if isinstance(obj, LinearProgram):
        solver = "ipm-lp"
        nnz = obj.nnz
        report = solve_lp(obj, LpOptions(**{k: v for k, v in opts.items() if k in _LP_KEYS}))
    else:
        solver = "ipm-nlp"
        nnz = obj.nnz_jac + obj.nnz_hess
        report = solve_nlp(obj, NlpOptions(**{k: v for k, v in opts.items() if k in _NLP_KEYS}))
    elapsed = time.perf_counter() - t0
    solved = report.solved and elapsed <= cap
    status = report.status.value if report.solved == solved else "TimeLimit"
    return BenchmarkRecord(problem.name, log2_nnz(nnz), int(solved), elapsed if solved else cap,
                           solver, tol, status)


def worker_count(n_jobs: int) -> int:
    cap = int(os.environ.get("BENCH_THREADS", "0") or 0)
    cap = cap if cap > 0 else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def run_batch(problems, options: dict | None = None, out_dir=None, echo=print) -> list[BenchmarkRecord]:
    """Solve every problem (in parallel up to ``BENCH_THREADS``), keep input order,
    write ``records.csv``/``records.json`` to ``out_dir`` and print the summary."""
    probs = [p if isinstance(p, Problem) else Problem.from_spec(p) for p in problems]
    options = dict(options or {})
    if not probs:
        return []
    with ThreadPoolExecutor(max_workers=worker_count(len(probs))) as pool:
        records = list(pool.map(lambda p: solve_problem(p, options), probs))
    cap = float(options.get("max_wall_time", options.get("max_time", DEFAULT_MAX_TIME)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(records, out / "records.csv")
        write_json(records, out / "records.json")
    if echo is not None:
        echo(summary_table(records, max(cap, max(r.time_s for r in records))))
    return records
