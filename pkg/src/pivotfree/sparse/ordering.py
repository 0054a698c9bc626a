"""Fill-reducing ordering by approximate minimum degree."""

from __future__ import annotations

import heapq

import numpy as np

from .matrix import Permutation, SparseMatrix, StructuralError


def _adjacency(pattern: SparseMatrix) -> list[set[int]]:
    if pattern.nrows != pattern.ncols:
        raise StructuralError(f"ordering needs a square pattern, got {pattern.shape}")
    n = pattern.ncols
    adj: list[set[int]] = [set() for _ in range(n)]
    rows = pattern.indices.tolist()
    cols = pattern.col_indices().tolist()
    for i, j in zip(rows, cols):
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def amd_order(pattern: SparseMatrix) -> Permutation:
    """Approximate minimum degree ordering on the quotient graph.

    Only the structure of ``pattern`` matters; either triangle (or both) may
    be stored.  Degrees use the AMD upper bound
    ``min(remaining, d_old + |Lp \\ i|, |A_i| + |Lp \\ i| + sum |Le \\ Lp|)``.
    Elements whose variable set becomes a subset of the new element are
    absorbed; there is no aggressive absorption and no supervariable
    detection.  Ties go to the smallest original index, so the result is
    deterministic.
    """
    adj = _adjacency(pattern)
    n = len(adj)
    elems: list[set[int]] = [set() for _ in range(n)]  # elements adjacent to each variable
    members: dict[int, set[int]] = {}  # element id (its pivot) -> variables
    deg = [len(a) for a in adj]
    done = [False] * n
    heap = [(deg[i], i) for i in range(n)]
    heapq.heapify(heap)
    order = []

    for k in range(n):
        while True:
            d, p = heapq.heappop(heap)
            if not done[p] and d == deg[p]:
                break
        done[p] = True
        order.append(p)

        lp = set(adj[p])
        for e in elems[p]:
            le = members.pop(e)
            lp |= le
            for i in le:
                if i != p:
                    elems[i].discard(e)
        lp.discard(p)
        adj[p] = set()
        elems[p] = set()
        members[p] = lp

        for i in lp:
            adj[i] -= lp
            adj[i].discard(p)
            elems[i].add(p)

        # |Le \ Lp| for every other element touching the new one
        outside: dict[int, int] = {}
        for i in lp:
            for e in elems[i]:
                if e != p:
                    if e not in outside:
                        outside[e] = len(members[e])
                    outside[e] -= 1
        for e, w in outside.items():
            if w == 0:
                for i in members.pop(e):
                    elems[i].discard(e)

        others = n - k - 2
        grow = len(lp) - 1
        for i in lp:
            ext = len(adj[i]) + grow
            for e in elems[i]:
                if e != p:
                    ext += outside[e]
            new = min(others, deg[i] + grow, ext)
            if new != deg[i]:
                deg[i] = new
                heapq.heappush(heap, (new, i))

    return Permutation.from_order(np.array(order, dtype=np.int64))


def natural_order(n: int) -> Permutation:
    return Permutation.identity(n)
