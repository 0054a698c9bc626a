from .batch import Problem, run_batch, solve_problem
from .mps import MpsError, MpsWarning, emit_mps, parse_mps, read_mps
from .records import BenchmarkRecord, SizeClass, read_csv, sgm10, summary_table, write_csv, write_json

__all__ = [
    "BenchmarkRecord",
    "MpsError",
    "MpsWarning",
    "Problem",
    "SizeClass",
    "emit_mps",
    "parse_mps",
    "read_csv",
    "read_mps",
    "run_batch",
    "sgm10",
    "solve_problem",
    "summary_table",
    "write_csv",
    "write_json",
]
