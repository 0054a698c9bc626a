"""Time the sparse kernels with numba and with the pure-Python fallback.

Each mode runs in its own interpreter because ``PIVOTFREE_NO_JIT`` is read
at import time.  The workload is a quasi-definite KKT matrix built from a 2-D
grid Laplacian; results from both modes are compared before timings are shown.

    python3 benchmarks/bench_kernels.py [--grid 40] [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np
import scipy.sparse as sp


def kkt_matrix(k: int):
    """``[[L + I, B^T], [B, -I]]`` with ``L`` the k x k grid Laplacian."""
    t = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(k, k))
    lap = sp.kron(sp.identity(k), t) + sp.kron(t, sp.identity(k))
    n = k * k
    m = n // 2
    rng = np.random.default_rng(0)
    B = sp.random(m, n, density=3.0 / n, random_state=rng, format="csr") + sp.eye(m, n)
    K = sp.bmat([[lap + sp.identity(n), B.T], [B, -sp.identity(m)]], format="csc")
    return sp.tril(K).tocsc(), n


def worker(grid: int, repeat: int) -> dict:
    from pivotfree import _jit
    from pivotfree.sparse import FactorOptions, SparseMatrix, amd_order, ldlt_factorize, solve, symbolic_analyze

    lower, n = kkt_matrix(grid)
    A = SparseMatrix.from_scipy(lower)
    perm = amd_order(A)
    signs = np.concatenate([np.ones(n), -np.ones(A.ncols - n)])
    b = np.ones(A.ncols)
    opts = FactorOptions(allow_perturbation=False)

    # the first call includes compilation when numba is on
    t0 = time.perf_counter()
    sym = symbolic_analyze(A, perm)
    num = ldlt_factorize(A, sym, opts, signs)
    x = solve(num, sym, b)
    first = time.perf_counter() - t0

    times = {"symbolic": [], "numeric": [], "solve": []}
    for _ in range(repeat):
        t0 = time.perf_counter()
        sym = symbolic_analyze(A, perm)
        t1 = time.perf_counter()
        num = ldlt_factorize(A, sym, opts, signs)
        t2 = time.perf_counter()
        x = solve(num, sym, b)
        t3 = time.perf_counter()
        times["symbolic"].append(t1 - t0)
        times["numeric"].append(t2 - t1)
        times["solve"].append(t3 - t2)
    return {
        "jit": _jit.JIT_ENABLED,
        "dim": A.ncols,
        "nnz_l": sym.nnz_l,
        "first_call": first,
        **{k: min(v) for k, v in times.items()},
        "checksum": float(np.sum(x)),
        "inertia": list(num.inertia),
    }


def run_mode(no_jit: bool, grid: int, repeat: int) -> dict:
    env = dict(os.environ)
    if no_jit:
        env["PIVOTFREE_NO_JIT"] = "1"
    else:
        env.pop("PIVOTFREE_NO_JIT", None)
    out = subprocess.run(
        [sys.executable, __file__, "--worker", "--grid", str(grid), "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(worker(args.grid, args.repeat)))
        return 0

    jit = run_mode(False, args.grid, args.repeat)
    py = run_mode(True, args.grid, args.repeat)
    if not jit["jit"]:
        print("numba is unavailable; both runs used the Python fallback")
    agree = np.isclose(jit["checksum"], py["checksum"], rtol=1e-10) and jit["inertia"] == py["inertia"]
    print(f"KKT dimension {jit['dim']}, nnz(L) = {jit['nnz_l']}, results agree: {agree}")
    print(f"{'phase':<10} {'numba [s]':>12} {'python [s]':>12} {'speedup':>9}")
    for phase in ("symbolic", "numeric", "solve"):
        a, b = jit[phase], py[phase]
        print(f"{phase:<10} {a:12.4f} {b:12.4f} {b / max(a, 1e-12):9.1f}")
    print(f"{'first call':<10} {jit['first_call']:12.4f} {py['first_call']:12.4f}   (includes compilation)")
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
