"""Matrix Market coordinate I/O for symmetric real matrices.

Values are written with ``repr`` (shortest round-trip decimal), so a
write/read cycle reproduces every bit.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .matrix import SparseMatrix, StructuralError

HEADER = "%%MatrixMarket matrix coordinate real symmetric"


def write_matrix_market(target, a: SparseMatrix, comment: str | None = None) -> None:
    if not a.is_lower():
        raise StructuralError("only lower-triangular symmetric storage can be written")
    lines = [HEADER]
    if comment:
        lines.extend("% " + c for c in comment.splitlines())
    lines.append(f"{a.nrows} {a.ncols} {a.nnz}")
    cols = a.col_indices()
    for i, j, v in zip(a.indices.tolist(), cols.tolist(), a.data.tolist()):
        lines.append(f"{i + 1} {j + 1} {v!r}")
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w") as fh:
            fh.write(text)
    else:
        target.write(text)


def read_matrix_market(source) -> SparseMatrix:
    """Read a symmetric (or general, lower part kept only if symmetric) real matrix."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        text = source.read()
    else:
        raise TypeError("expected a path or a text stream")
    lines = text.splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise StructuralError("missing %%MatrixMarket banner")
    banner = lines[0].lower().split()
    if banner[1:4] != ["matrix", "coordinate", "real"] or banner[4] != "symmetric":
        raise StructuralError(f"unsupported Matrix Market flavour: {lines[0]!r}")
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise StructuralError("missing size line")
    nrows, ncols, nnz = (int(t) for t in body[0].split()[:3])
    if nrows != ncols:
        raise StructuralError("symmetric matrix must be square")
    entries = body[1:]
    if len(entries) != nnz:
        raise StructuralError(f"expected {nnz} entries, found {len(entries)}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for k, ln in enumerate(entries):
        t = ln.split()
        i, j = int(t[0]) - 1, int(t[1]) - 1
        # upper-triangle entries are folded into the lower triangle
        rows[k], cols[k] = max(i, j), min(i, j)
        vals[k] = float(t[2])
    return SparseMatrix.from_coo(rows, cols, vals, (nrows, ncols))
