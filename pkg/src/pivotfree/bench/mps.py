"""MPS reader and writer for the ``A x >= b`` LP form.

Every row ``lo <= a^T x <= hi`` of the file becomes ``a^T x >= lo`` (if
``lo`` is finite) followed by ``-a^T x >= -hi`` (if ``hi`` is finite), in
row order; variable bounds are appended the same way, variable by variable.
Variables are free in the resulting LP.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np

from ..lp import LinearProgram
from ..sparse import SparseMatrix

SECTIONS = ("NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
# 1-based inclusive column ranges of the fixed-field layout
_FIXED = ((2, 3), (5, 12), (15, 22), (25, 36), (40, 47), (50, 61))


class MpsError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MpsWarning(UserWarning):
    pass


def _fixed_fields(raw: str) -> list[str]:
    out = []
    for a, b in _FIXED:
        out.append(raw[a - 1:b].strip() if len(raw) >= a else "")
    while out and not out[-1]:
        out.pop()
    return out


class _Reader:
    def __init__(self, fixed: bool):
        self.fixed = fixed
        self.name = ""
        self.maximize = False
        self.obj_row: str | None = None
        self.free_rows: set[str] = set()
        self.rows: dict[str, tuple[int, str]] = {}  # name -> (index, type)
        self.cols: dict[str, int] = {}
        self.col_names: list[str] = []
        self.entries: dict[tuple[int, int], float] = {}
        self.cost: dict[int, float] = {}
        self.rhs: dict[int, float] = {}
        self.ranges: dict[int, float] = {}
        self.lb: dict[int, float] = {}
        self.ub: dict[int, float] = {}
        self.integer = False

    def fields(self, raw: str, section: str) -> list[str]:
        if self.fixed and section in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
            if "'MARKER'" in raw:
                return raw.split()
            f = _fixed_fields(raw)
            # field 1 only carries a code in ROWS and BOUNDS
            return f if section in ("ROWS", "BOUNDS") else f[1:]
        return raw.split()

    def row(self, name, lineno):
        if name == self.obj_row:
            return -1
        if name in self.free_rows:
            return None
        if name not in self.rows:
            raise MpsError(f"unknown row {name!r}", lineno)
        return self.rows[name][0]

    def number(self, tok, lineno):
        try:
            return float(tok)
        except ValueError:
            raise MpsError(f"expected a number, found {tok!r}", lineno) from None

    def pairs(self, toks, lineno):
        if len(toks) % 2:
            raise MpsError("expected (row, value) pairs", lineno)
        for k in range(0, len(toks), 2):
            yield toks[k], self.number(toks[k + 1], lineno)

    def read(self, text: str):
        section = None
        saw_end = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip() or raw.lstrip().startswith("*"):
                continue
            if not raw[0].isspace():
                head = raw.split()
                key = head[0].upper()
                if key not in SECTIONS:
                    raise MpsError(f"unknown section {head[0]!r}", lineno)
                section = key
                if key == "NAME":
                    self.name = raw[4:].strip() if self.fixed else " ".join(head[1:])
                elif key == "OBJSENSE" and len(head) > 1:
                    self.sense(head[1], lineno)
                elif key == "ENDATA":
                    saw_end = True
                    break
                elif len(head) > 1 and key not in ("RHS", "RANGES", "BOUNDS"):
                    raise MpsError(f"unexpected text after section {key}", lineno)
                continue
            if section is None or section == "NAME":
                raise MpsError("data line outside of a section", lineno)
            toks = self.fields(raw, section)
            if section == "OBJSENSE":
                self.sense(toks[0], lineno)
            elif section == "ROWS":
                self.read_row(toks, lineno)
            elif section == "COLUMNS":
                if len(toks) >= 3 and toks[1].strip("'").upper() == "MARKER":
                    marker = toks[2].strip("'").upper()
                    if marker == "INTORG":
                        self.warn_integer()
                    elif marker != "INTEND":
                        raise MpsError(f"unknown marker {toks[2]!r}", lineno)
                    continue
                self.read_column(toks, lineno)
            elif section in ("RHS", "RANGES"):
                self.read_rhs(toks, lineno, section)
            elif section == "BOUNDS":
                self.read_bound(toks, lineno)
        if not saw_end:
            raise MpsError("missing ENDATA")
        if self.obj_row is None:
            raise MpsError("no objective (N) row")

    def sense(self, tok, lineno):
        t = tok.upper()
        if t in ("MAX", "MAXIMIZE"):
            self.maximize = True
        elif t not in ("MIN", "MINIMIZE"):
            raise MpsError(f"unknown objective sense {tok!r}", lineno)

    def warn_integer(self):
        if not self.integer:
            warnings.warn("integrality markers ignored; reading the LP relaxation", MpsWarning, stacklevel=4)
        self.integer = True

    def read_row(self, toks, lineno):
        if len(toks) != 2:
            raise MpsError("ROWS lines need a type and a name", lineno)
        kind, name = toks[0].upper(), toks[1]
        if kind not in ("N", "G", "L", "E"):
            raise MpsError(f"unknown row type {toks[0]!r}", lineno)
        if name in self.rows or name == self.obj_row or name in self.free_rows:
            raise MpsError(f"row {name!r} declared twice", lineno)
        if kind == "N":
            if self.obj_row is None:
                self.obj_row = name
            else:
                self.free_rows.add(name)
        else:
            self.rows[name] = (len(self.rows), kind)

    def read_column(self, toks, lineno):
        if len(toks) < 3:
            raise MpsError("COLUMNS lines need a column name and (row, value) pairs", lineno)
        col = toks[0]
        j = self.cols.get(col)
        if j is None:
            j = self.cols[col] = len(self.col_names)
            self.col_names.append(col)
        for rname, v in self.pairs(toks[1:], lineno):
            i = self.row(rname, lineno)
            if i is None:
                continue
            if i == -1:
                if j in self.cost:
                    raise MpsError(f"duplicate entry for column {col!r} in row {rname!r}", lineno)
                self.cost[j] = v
                continue
            if (i, j) in self.entries:
                raise MpsError(f"duplicate entry for column {col!r} in row {rname!r}", lineno)
            self.entries[(i, j)] = v

    def read_rhs(self, toks, lineno, section):
        # an odd token count means the set name is present
        body = toks[1:] if len(toks) % 2 else toks
        target = self.rhs if section == "RHS" else self.ranges
        for rname, v in self.pairs(body, lineno):
            i = self.row(rname, lineno)
            if i is None:
                continue
            if i == -1:
                if section == "RHS" and v != 0.0:
                    warnings.warn("objective constant in RHS ignored", MpsWarning, stacklevel=4)
                continue
            if i in target:
                raise MpsError(f"duplicate {section} entry for row {rname!r}", lineno)
            target[i] = v

    def read_bound(self, toks, lineno):
        if len(toks) < 2:
            raise MpsError("BOUNDS lines need a type and a column", lineno)
        kind = toks[0].upper()
        valued = kind in ("UP", "LO", "FX", "LI", "UI")
        if kind in ("FR", "MI", "PL", "BV"):
            colname = toks[2] if len(toks) >= 3 else toks[1]
            value = None
        elif valued:
            if len(toks) < 3:
                raise MpsError(f"{kind} bound needs a value", lineno)
            colname, value = (toks[2], self.number(toks[3], lineno)) if len(toks) >= 4 else (toks[1], self.number(toks[2], lineno))
        else:
            raise MpsError(f"unsupported bound type {toks[0]!r}", lineno)
        if colname not in self.cols:
            raise MpsError(f"unknown column {colname!r}", lineno)
        j = self.cols[colname]
        if kind in ("UP", "UI"):
            if kind == "UI":
                self.warn_integer()
            self.ub[j] = value
            if value < 0 and j not in self.lb:
                warnings.warn(f"negative upper bound on {colname!r} with default lower bound; lower bound set to -inf",
                              MpsWarning, stacklevel=4)
                self.lb[j] = -math.inf
        elif kind in ("LO", "LI"):
            if kind == "LI":
                self.warn_integer()
            self.lb[j] = value
        elif kind == "FX":
            self.lb[j] = self.ub[j] = value
        elif kind == "FR":
            self.lb[j], self.ub[j] = -math.inf, math.inf
        elif kind == "MI":
            self.lb[j] = -math.inf
        elif kind == "PL":
            self.ub[j] = math.inf
        else:  # BV
            self.warn_integer()
            self.lb[j], self.ub[j] = 0.0, 1.0

    def row_bounds(self):
        m = len(self.rows)
        lo, hi = np.full(m, -math.inf), np.full(m, math.inf)
        for i, kind in self.rows.values():
            r = self.rhs.get(i, 0.0)
            rng = self.ranges.get(i)
            if kind == "G":
                lo[i] = r
                if rng is not None:
                    hi[i] = r + abs(rng)
            elif kind == "L":
                hi[i] = r
                if rng is not None:
                    lo[i] = r - abs(rng)
            else:
                if rng is None or rng == 0.0:
                    lo[i] = hi[i] = r
                elif rng > 0:
                    lo[i], hi[i] = r, r + rng
                else:
                    lo[i], hi[i] = r + rng, r
        return lo, hi

    def build(self) -> LinearProgram:
        n = len(self.col_names)
        lo, hi = self.row_bounds()
        if self.entries:
            keys = np.array(list(self.entries.keys()), dtype=np.int64)
            vals = np.array(list(self.entries.values()))
        else:
            keys, vals = np.zeros((0, 2), dtype=np.int64), np.zeros(0)
        rows, cols, data, rhs = [], [], [], []
        # rows of each original constraint, grouped by row index
        order = np.argsort(keys[:, 0], kind="stable")
        keys, vals = keys[order], vals[order]
        starts = np.searchsorted(keys[:, 0], np.arange(len(self.rows) + 1))
        out = 0
        for i in range(len(self.rows)):
            cj, cv = keys[starts[i]:starts[i + 1], 1], vals[starts[i]:starts[i + 1]]
            for bound, sign in ((lo[i], 1.0), (hi[i], -1.0)):
                if math.isfinite(bound):
                    rows.append(np.full(cj.size, out))
                    cols.append(cj)
                    data.append(sign * cv)
                    rhs.append(sign * bound)
                    out += 1
        for j in range(n):
            lb, ub = self.lb.get(j, 0.0), self.ub.get(j, math.inf)
            for bound, sign in ((lb, 1.0), (ub, -1.0)):
                if math.isfinite(bound):
                    rows.append(np.array([out]))
                    cols.append(np.array([j]))
                    data.append(np.array([sign]))
                    rhs.append(sign * bound)
                    out += 1
        cat = lambda p, dt: np.concatenate(p).astype(dt) if p else np.zeros(0, dtype=dt)
        A = SparseMatrix.from_coo(cat(rows, np.int64), cat(cols, np.int64), cat(data, np.float64), (out, n))
        c = np.zeros(n)
        for j, v in self.cost.items():
            c[j] = v
        if self.maximize:
            c = -c
        return LinearProgram(c, A, np.array(rhs, dtype=np.float64), name=self.name or "lp",
                             var_names=list(self.col_names))


def parse_mps(text: str, fmt: str = "auto") -> LinearProgram:
    """Parse MPS text (``fmt`` is ``"free"``, ``"fixed"`` or ``"auto"``)."""
    if fmt not in ("auto", "free", "fixed"):
        raise ValueError("fmt must be 'auto', 'free' or 'fixed'")
    if fmt != "auto":
        r = _Reader(fixed=fmt == "fixed")
        r.read(text)
        return r.build()
    try:
        r = _Reader(fixed=False)
        r.read(text)
    except MpsError as free_err:
        try:
            r = _Reader(fixed=True)
            r.read(text)
        except MpsError:
            raise free_err from None
    return r.build()


def read_mps(path: str | Path, fmt: str = "auto") -> LinearProgram:
    path = Path(path)
    lp = parse_mps(path.read_text(), fmt)
    if lp.name == "lp":
        lp.name = path.stem
    return lp


def emit_mps(lp: LinearProgram, name: str | None = None) -> str:
    """Free-format MPS: one ``G`` row per constraint, all variables free.

    Values are written with ``repr`` so they parse back bit for bit.  Column
    names that free format cannot carry (empty or containing whitespace) are
    replaced by ``X0, X1, ...`` for every column.
    """
    names = lp.var_names
    if not names or any(not v or any(ch.isspace() for ch in v) for v in names):
        names = [f"X{j}" for j in range(lp.n)]
    num = lambda v: repr(float(v))
    out = [f"NAME {name or lp.name}", "ROWS", " N obj"]
    out += [f" G R{i}" for i in range(lp.m)]
    out.append("COLUMNS")
    A = lp.A
    for j in range(lp.n):
        out.append(f" {names[j]} obj {num(lp.c[j])}")
        for p in range(A.indptr[j], A.indptr[j + 1]):
            out.append(f" {names[j]} R{A.indices[p]} {num(A.data[p])}")
    out.append("RHS")
    out += [f" RHS R{i} {num(lp.b[i])}" for i in range(lp.m) if lp.b[i] != 0.0]
    out.append("BOUNDS")
    out += [f" FR BND {names[j]}" for j in range(lp.n)]
    out.append("ENDATA")
    return "\n".join(out) + "\n"
