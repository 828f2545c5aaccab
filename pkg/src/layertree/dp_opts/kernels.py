"""Compiled inner loops for the array solver.

Stored vectors of all leaf counts live in one buffer ``vecs`` with per-count
ranges ``start[c]:end[c]``. Vectors of one leaf count are packed into a
single int64 key (mixed radix over layers 1..lam-1), which preserves their
lexicographic order.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _layer_table(lam, lo, hi, a0, b0):
    # next_k[t]: smallest admissible k >= t (lam when none)
    c = a0 + b0
    nxt = np.full(lam + 1, lam, dtype=np.int64)
    best = lam
    for k in range(lam - 1, -1, -1):
        if c <= hi[k + 1] and a0 >= lo[k] and b0 >= lo[k]:
            best = k
        nxt[k] = best
    return nxt


_MULT = np.uint64(11400714819323198485)


@njit(cache=True)
def _emit(key, a0, ia, ib, k, table, shift, keys, prov, slots, count):
    """Insert ``key`` unless present; returns the new count, or -1 when the output is full."""
    mask = table.shape[0] - 1
    h = np.int64((np.uint64(key) * _MULT) >> shift)
    while True:
        t = table[h]
        if t < 0:
            break
        if keys[t] == key:
            return count
        h = (h + 1) & mask
    if count >= keys.shape[0]:
        return -1
    table[h] = count
    slots[count] = h
    keys[count] = key
    prov[count, 0] = a0
    prov[count, 1] = ia
    prov[count, 2] = ib
    prov[count, 3] = k
    return count + 1


@njit(cache=True)
def combine(vecs, branch, start, end, n, lo, hi, radix, c, a_lo, a_hi, single_k,
            table, shift, keys, prov, slots, count):
    """Add every valid combination with ``a0`` in ``a_lo..a_hi`` and ``b0 = c - a0``.

    Distinct packed keys go to ``keys``/``prov`` (first occurrence wins, in
    the order a0, left row, right row, k), indexed through the hash ``table``.
    Returns ``(count, pairs examined, emitted)``; ``count == -1`` means the
    buffers are full and the caller must start this leaf count over.
    """
    lam = n.shape[0] - 1
    examined = 0
    emitted = 0
    ks = np.empty(lam, dtype=np.int64)
    for a0 in range(a_lo, a_hi + 1):
        b0 = c - a0
        sa, ea = start[a0], end[a0]
        sb, eb = start[b0], end[b0]
        if ea <= sa or eb <= sb:
            continue
        nxt = _layer_table(lam, lo, hi, a0, b0)
        if nxt[0] == lam:
            continue
        nks = 0
        for k in range(lam):
            if c <= hi[k + 1] and a0 >= lo[k] and b0 >= lo[k]:
                ks[nks] = k
                nks += 1
        kmax = ks[nks - 1]
        for ia in range(sa, ea):
            jb = sb + (ia - sa) if a0 == b0 else sb
            for ib in range(jb, eb):
                examined += 1
                kmin = max(branch[ia], branch[ib])
                if single_k:
                    k = nxt[kmin]
                    if k == lam:
                        continue
                    ok = True
                    for i in range(k + 1):
                        if vecs[ia, i] + vecs[ib, i] > n[i]:
                            ok = False
                            break
                    if not ok:
                        continue
                    key = 0
                    for i in range(1, lam):
                        v = vecs[ia, i] + vecs[ib, i] if i <= k else 1
                        key += v * radix[i - 1]
                    emitted += 1
                    count = _emit(key, a0, ia - sa, ib - sb, k, table, shift, keys, prov, slots, count)
                    if count < 0:
                        return -1, examined, emitted
                else:
                    # first layer where the summed counts exceed the available vertices
                    bad = kmax + 1
                    for i in range(kmax + 1):
                        if vecs[ia, i] + vecs[ib, i] > n[i]:
                            bad = i
                            break
                    for t in range(nks):
                        k = ks[t]
                        if k < kmin:
                            continue
                        if k >= bad:
                            break
                        key = 0
                        for i in range(1, lam):
                            v = vecs[ia, i] + vecs[ib, i] if i <= k else 1
                            key += v * radix[i - 1]
                        emitted += 1
                        count = _emit(key, a0, ia - sa, ib - sb, k, table, shift, keys, prov, slots, count)
                        if count < 0:
                            return -1, examined, emitted
    return count, examined, emitted


@njit(cache=True)
def first_join(vecs, branch, start, end, n, lo, hi, a0, b0):
    """First ``(left row, right row, k)`` joining sets ``a0`` and ``b0`` into a full vector."""
    lam = n.shape[0] - 1
    sa, ea = start[a0], end[a0]
    sb, eb = start[b0], end[b0]
    nxt = _layer_table(lam, lo, hi, a0, b0)
    examined = 0
    if nxt[0] < lam:
        for ia in range(sa, ea):
            jb = sb + (ia - sa) if a0 == b0 else sb
            for ib in range(jb, eb):
                examined += 1
                k = nxt[max(branch[ia], branch[ib])]
                if k == lam:
                    continue
                ok = True
                for i in range(k + 1):
                    if vecs[ia, i] + vecs[ib, i] > n[i]:
                        ok = False
                        break
                if ok:
                    return ia - sa, ib - sb, k, examined
    return -1, -1, -1, examined


@njit(cache=True)
def pareto_sweep(rows):
    """Keep-mask of non-dominated rows; ``rows`` sorted lexicographically and duplicate-free.

    Front members that just dominated a row move halfway to the start of the
    scan order, since dominators tend to repeat.
    """
    m, width = rows.shape
    keep = np.zeros(m, dtype=np.bool_)
    front = np.empty(m, dtype=np.int64)
    nf = 0
    for r in range(m):
        dominated = False
        for f in range(nf):
            q = front[f]
            le = True
            for i in range(1, width - 1):
                if rows[q, i] > rows[r, i]:
                    le = False
                    break
            if le:
                dominated = True
                g = f // 2
                front[f] = front[g]
                front[g] = q
                break
        if not dominated:
            keep[r] = True
            front[nf] = r
            nf += 1
    return keep


def decode(keys: np.ndarray, radix: np.ndarray, c: int, lam: int) -> np.ndarray:
    """Rows ``(c, a_1, .., a_{lam-1}, 1)`` from packed keys."""
    rows = np.empty((len(keys), lam + 1), dtype=np.int64)
    rows[:, 0] = c
    rows[:, lam] = 1
    rem = keys.copy()
    for i in range(1, lam):
        rows[:, i], rem = np.divmod(rem, radix[i - 1])
    return rows
