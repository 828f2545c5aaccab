"""Rectangular min-cost assignment (Hungarian method with potentials).

Among all optimal assignments the lexicographically smallest one is
returned: after solving, rows are visited in order and moved to the smallest
column that still allows an optimal completion, using alternating cycles in
the subgraph of zero reduced cost.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def _hungarian(a: np.ndarray):
    n, m = a.shape
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # row (1-based) matched to each column
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = a[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], INF)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            cols[p[j] - 1] = j - 1
    return cols, u[1:], v[1:]


def min_cost_assignment(costs) -> tuple[list[int], float]:
    """Assign every row to a distinct column at minimum total cost.

    Returns ``(columns, total)`` where ``columns[r]`` is the column of row ``r``.
    Requires ``rows <= columns`` and finite, nonnegative entries.
    """
    a = np.asarray(costs, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost matrix must be two-dimensional")
    n, m = a.shape
    if n == 0:
        return [], 0.0
    if n > m:
        raise ValueError(f"more rows ({n}) than columns ({m})")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ValueError("costs must be finite and nonnegative")
    cols, u, v = _hungarian(a)
    scale = max(1.0, float(a.max()))
    tol = 1e-9 * scale * (n + 1)
    cols = _lexicographic(a - u[:, None] - v[None, :] <= tol, v < -tol, cols)
    return cols.tolist(), float(a[np.arange(n), cols].sum())


def _lexicographic(tight: np.ndarray, required: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Smallest optimal assignment, given the tight edges and the columns every optimum covers.

    Spare columns are filled with interchangeable dummy rows, so optimal
    assignments are exactly the perfect matchings of the extended tight graph
    and rows can be moved along alternating cycles.
    """
    n, m = tight.shape
    adj = [np.flatnonzero(tight[r]) for r in range(n)]
    spare = np.flatnonzero(~required)
    owner = np.full(m, -1, dtype=np.int64)  # -1 marks a dummy row
    owner[cols] = np.arange(n)
    cols = cols.copy()
    for r in range(n):
        for c in adj[r]:
            if c >= cols[r]:
                break
            path = _cycle(r, c, cols, owner, adj, spare)
            if path is None:
                continue
            # path: list of (row, new column); row -1 is a dummy
            for row, col in path:
                if row >= 0:
                    cols[row] = col
                owner[col] = row
            owner[c] = r
            cols[r] = c
            break
    return cols


def _cycle(r: int, c: int, cols, owner, adj, spare):
    """Moves that free column ``c`` for row ``r`` and re-cover ``cols[r]``; rows < r stay put."""
    target = cols[r]
    start = owner[c]
    if start >= 0 and start < r:
        return None
    seen = {c}
    prev = {}
    queue = deque([(start, c)])
    while queue:
        row, col = queue.popleft()
        nexts = adj[row] if row >= 0 else spare
        for nc in nexts:
            nc = int(nc)
            if nc in seen:
                continue
            o = owner[nc]
            if nc != target and 0 <= o < r:
                continue
            if nc == target and o != r:
                continue
            seen.add(nc)
            prev[nc] = (row, col)
            if nc == target:
                moves = []
                cur = nc
                while cur != c:
                    mover, from_col = prev[cur]
                    moves.append((mover, cur))
                    cur = from_col
                return moves
            if o == r:
                continue
            queue.append((o, nc))
    return None
