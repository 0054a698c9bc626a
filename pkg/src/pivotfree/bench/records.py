"""Benchmark records, size classes and the shifted geometric mean."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("name", "log2_nnz", "solved", "time_s", "solver", "tol", "status")


def sgm10(times, max_time: float | None = None, shift: float = 10.0) -> float:
    """Shifted geometric mean ``prod(t_i + shift)^(1/n) - shift``, in log space."""
    t = np.asarray(times, dtype=np.float64).ravel()
    if t.size == 0:
        raise ValueError("sgm10 of an empty sequence")
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise ValueError("times must be finite and nonnegative")
    if max_time is not None and np.any(t > max_time):
        raise ValueError(f"times must not exceed max_time={max_time}")
    return float(np.exp(np.mean(np.log(t + shift))) - shift)


class SizeClass(str, enum.Enum):
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"

    @classmethod
    def classify(cls, nnz: int) -> "SizeClass":
        if nnz < 2 ** 18:
            return cls.SMALL
        if nnz < 2 ** 20:
            return cls.MEDIUM
        return cls.LARGE

    @classmethod
    def from_log2(cls, log2_nnz: float) -> "SizeClass":
        return cls.classify(int(round(2.0 ** log2_nnz)))


@dataclass(frozen=True)
class BenchmarkRecord:
    name: str
    log2_nnz: float
    solved: int
    time_s: float
    solver: str
    tol: float
    status: str

    def __post_init__(self):
        if self.solved not in (0, 1):
            raise ValueError("solved is 0 or 1")
        if not self.time_s >= 0:
            raise ValueError("time must be nonnegative")

    @property
    def size_class(self) -> SizeClass:
        return SizeClass.from_log2(self.log2_nnz)

    def without_time(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self) if f.name != "time_s")


def log2_nnz(nnz: int) -> float:
    return math.log2(max(int(nnz), 1))


def write_csv(records, target) -> None:
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.name, repr(r.log2_nnz), r.solved, repr(r.time_s), r.solver, repr(r.tol), r.status])


def read_csv(source) -> list[BenchmarkRecord]:
    with open(source, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(CSV_COLUMNS) - set(rows[0]):
        raise ValueError(f"records file lacks columns {sorted(set(CSV_COLUMNS) - set(rows[0]))}")
    return [
        BenchmarkRecord(r["name"], float(r["log2_nnz"]), int(r["solved"]), float(r["time_s"]),
                        r["solver"], float(r["tol"]), r["status"])
        for r in rows
    ]


def write_json(records, target) -> None:
    Path(target).write_text(json.dumps([asdict(r) for r in records], indent=2) + "\n")


def summary_table(records, max_time: float) -> str:
    """Per-problem rows followed by per-size-class counts and SGM10."""
    records = list(records)
    out = io.StringIO()
    width = max([len("problem")] + [len(r.name) for r in records])
    out.write(f"{'problem':<{width}} | log2(nnz) | solved | time\n")
    out.write(f"{'-' * width}-+-----------+--------+-----------\n")
    for r in records:
        out.write(f"{r.name:<{width}} | {r.log2_nnz:9.2f} | {r.solved:6d} | {r.time_s:9.3f}\n")
    out.write("\n")
    out.write(f"{'class':<7} | {'count':>5} | {'solved':>6} | {'SGM10':>9}\n")
    groups = [(c.value, [r for r in records if r.size_class is c]) for c in SizeClass]
    groups.append(("Total", records))
    for label, rs in groups:
        if not rs:
            out.write(f"{label:<7} | {0:5d} | {0:6d} | {'-':>9}\n")
            continue
        g = sgm10([min(r.time_s, max_time) for r in rs], max_time)
        out.write(f"{label:<7} | {len(rs):5d} | {sum(r.solved for r in rs):6d} | {g:9.3f}\n")
    return out.getvalue()
