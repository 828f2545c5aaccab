"""Greedy completion of a partial solution.

``greedy_max_flow`` estimates how many sources a residual instance can still
connect by packing subtree flows bottom-up: every layer-1 vertex starts with
full capacity and each layer's flows are assigned, smallest first, to the
least loaded vertex above. If that is promising, an explicit completion tree
is built with the same packing and the actual sources are pushed down it.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..model import Instance
from ..dp_core import _Built, _weights, combine_trees


@dataclass(frozen=True)
class ResidualInstance:
    """What is left of an instance: ``n[0]`` sources and ``n[i]`` vertices per layer.

    ``lo``/``hi`` follow the same layout as :class:`~layertree.model.Instance`
    and have index 0 set to 1.
    """

    n: tuple
    lo: tuple
    hi: tuple

    @property
    def lam(self) -> int:
        return len(self.n) - 1

    @property
    def sources(self) -> int:
        return self.n[0]


def residual_instance(inst: Instance, vec) -> ResidualInstance:
    """Residual after committing ``vec``: layers with ``a_i > 1`` lose ``a_i`` vertices."""
    n = (inst.n0 - vec[0],) + tuple(c - a if a > 1 else c for c, a in zip(inst.n[1:], vec[1:]))
    return ResidualInstance(n, inst.lo, inst.hi)


def merge_layer(inst: Instance) -> Optional[int]:
    """Lowest ``k`` whose layer ``k + 1`` can carry all sources."""
    for k in range(inst.lam):
        if inst.hi[k + 1] >= inst.n0:
            return k
    return None


def completion_residual(inst: Instance, vec, k: int) -> ResidualInstance:
    """Residual for completing ``vec`` into a full tree joined at layer ``k``.

    Up to the branching layer of ``vec`` its vertices are taken away; between
    it and ``k`` one vertex per layer is kept for the path of ``vec``; above
    ``k`` both trees share a single vertex, whose lower capacity is met by the
    joined tree and therefore dropped.
    """
    kp = _branch(vec)
    n, lo, hi = [inst.n0 - vec[0]], [1], [1]
    for i in range(1, inst.lam + 1):
        if i <= kp:
            n.append(inst.n[i] - vec[i])
        elif i <= k:
            n.append(inst.n[i] - 1)
        else:
            n.append(1)
        lo.append(inst.lo[i] if i <= k else 0)
        hi.append(inst.hi[i])
    return ResidualInstance(tuple(n), tuple(lo), tuple(hi))


def _branch(vec) -> int:
    for i in range(len(vec) - 1, -1, -1):
        if vec[i] > 1:
            return i
    return 0


def _layer_bins(res: ResidualInstance, i: int) -> int:
    return min(res.n[i], 1) if i == res.lam else res.n[i]


def _pack(items: list, bins: int, cap: int) -> list:
    """Assign item flows (ascending ``(value, multiplicity)``) to the least loaded bins.

    Bins with equal load are interchangeable, so they are tracked as
    ``[load, count]`` groups and items are handed out a whole round at a
    time. Returns the resulting nonzero loads in the same format.
    """
    groups = [[0, bins]]
    for v, mult in items:
        r = mult
        while r > 0:
            load, g = groups[0]
            if load >= cap:
                break
            nxt = groups[1][0] if len(groups) > 1 else None
            t = r // g
            if nxt is not None:
                t = min(t, -(-(nxt - load) // v))
            if t >= 1:
                r -= t * g
                groups[0][0] = min(load + t * v, cap)
            else:
                groups[0][1] = g - r
                groups.append([min(load + v, cap), r])
                r = 0
            groups = _merge(groups)
    return [(load, g) for load, g in groups if load > 0]


def _merge(groups: list) -> list:
    out: list = []
    for load, g in sorted(x for x in groups if x[1] > 0):
        if out and out[-1][0] == load:
            out[-1][1] += g
        else:
            out.append([load, g])
    return out


def greedy_max_flow(res: ResidualInstance) -> int:
    """Sources the greedy packing can connect, capped at ``res.sources``."""
    lam = res.lam
    first = _layer_bins(res, 1)
    if first == 0:
        return 0
    items = [(res.hi[1], first)]
    for i in range(2, lam + 1):
        bins = _layer_bins(res, i)
        if bins == 0:
            return 0
        items = _pack(items, bins, res.hi[i])
    return min(res.sources, sum(v * m for v, m in items))


def greedy_max_flow_naive(res: ResidualInstance) -> int:
    """Per-vertex version of :func:`greedy_max_flow`, kept as a cross-check."""
    lam = res.lam
    flows = [res.hi[1]] * _layer_bins(res, 1)
    for i in range(2, lam + 1):
        loads = [0] * _layer_bins(res, i)
        if not loads:
            return 0
        for v in sorted(f for f in flows if f > 0):
            j = min(range(len(loads)), key=lambda b: (loads[b], b))
            loads[j] = min(loads[j] + v, res.hi[i])
        flows = loads
    return min(res.sources, sum(flows))


class GreedyMemo:
    """Last residual seen by the flow computation, for the cheap pre-estimate."""

    def __init__(self):
        self.prev: Optional[tuple] = None
        self.connected = 0

    def update(self, res: ResidualInstance, connected: int):
        self.prev = res.n
        self.connected = connected


def estimated_flow(memo: GreedyMemo, hi, b) -> int:
    """Extrapolate the last flow result by the capacity gained or lost per layer.

    ``b`` is a residual count vector, ``hi`` the upper capacities per layer.
    """
    lam = len(b) - 1
    top = min(b[i] * hi[i] for i in range(1, lam + 1))
    if memo.prev is None:
        return top
    est = memo.connected + sum((x - p) * u for x, p, u in zip(b[1:], memo.prev[1:], hi[1:]))
    return max(0, min(est, top))


def estimate_greedy(memo: GreedyMemo, inst, b, needed: int) -> bool:
    """Whether the estimate says a greedy attempt on residual counts ``b`` can reach ``needed``."""
    if memo.prev is None:
        return True
    return estimated_flow(memo, inst.hi, b) >= needed


# ------------------------------------------------------------ explicit completion


def _greedy_tree(res: ResidualInstance):
    """Explicit packing: per layer, the vertex flows and the parent index of every vertex below."""
    lam = res.lam
    flows = [np.full(_layer_bins(res, 1), res.hi[1], dtype=np.int64)]
    parents = []
    for i in range(2, lam + 1):
        below = flows[-1]
        heap = [(0, b) for b in range(_layer_bins(res, i))]
        loads = [0] * len(heap)
        par = np.full(len(below), -1, dtype=np.int64)
        for j in np.argsort(below, kind="stable"):
            load, b = heapq.heappop(heap)
            par[j] = b
            load = min(load + int(below[j]), res.hi[i])
            loads[b] = load
            heapq.heappush(heap, (load, b))
        parents.append(par)
        flows.append(np.asarray(loads, dtype=np.int64))
    return flows, parents


def greedy_complete(res: ResidualInstance) -> Optional[_Built]:
    """Build a tree connecting exactly ``res.sources`` leaves inside ``res``, or ``None``.

    The packing fixes the tree shape. Bottom-up every vertex gets ``fmin``
    (its flow when the whole subtree is used), ``floor`` (the least flow it
    can take when parts of the subtree stay unused) and ``fmax``. Top-down
    the sources are handed out so that as many children as possible receive
    at least ``fmin``; the rest is spread over partially used subtrees.
    """
    lam = res.lam
    total = res.sources
    if total < max(res.lo[lam], 1) or _layer_bins(res, lam) == 0:
        return None
    flows, parents = _greedy_tree(res)
    children: list[list[list[int]]] = [[]]
    for i in range(1, lam):
        kids: list[list[int]] = [[] for _ in flows[i]]
        for j, p in enumerate(parents[i - 1]):
            kids[p].append(j)
        children.append(kids)
    # index i describes vertices of layer i + 1
    big = total + 1
    lo0, hi0 = max(res.lo[1], 1), res.hi[1]
    fmin = [[lo0] * len(flows[0])]
    floor = [[lo0] * len(flows[0])]
    fmax = [[hi0] * len(flows[0])]
    use: list[list[list[int]]] = [[]]
    for i in range(1, lam):
        lo_i, hi_i = max(res.lo[i + 1], 1), res.hi[i + 1]
        mn, fl, mx, us = [], [], [], []
        for kids in children[i]:
            ok = [c for c in kids if floor[i - 1][c] <= fmax[i - 1][c]]
            hi_v = min(hi_i, sum(fmax[i - 1][c] for c in ok))
            lo_v = max(lo_i, min((floor[i - 1][c] for c in ok), default=big))
            if ok and lo_v <= hi_v:
                mn.append(max(lo_i, sum(fmin[i - 1][c] for c in ok)))
                fl.append(lo_v)
                mx.append(hi_v)
            else:
                mn.append(big)
                fl.append(big)
                mx.append(0)
            us.append(ok)
        fmin.append(mn)
        floor.append(fl)
        fmax.append(mx)
        use.append(us)
    top = lam - 1
    if not floor[top][0] <= total <= fmax[top][0]:
        return None
    alloc = [dict() for _ in range(lam)]
    alloc[top][0] = total
    for i in range(top, 0, -1):
        mn, fl, mx = fmin[i - 1], floor[i - 1], fmax[i - 1]
        for v, amount in alloc[i].items():
            got = _split(amount, sorted(use[i][v], key=lambda c: (-mn[c], c)), mn, fl, mx)
            if got is None:
                return None
            alloc[i - 1].update(got)
    return _materialize(alloc, children, lam)


def _split(amount: int, kids: list, mn, fl, mx) -> Optional[dict]:
    """Share ``amount`` among ``kids`` so each gets 0 or a value in ``[floor, fmax]``."""
    got: dict = {}
    rem = amount
    for c in kids:
        if mn[c] <= min(rem, mx[c]):
            got[c] = mn[c]
            rem -= mn[c]
    for c in kids:
        if not rem:
            break
        if c in got:
            add = min(mx[c] - got[c], rem)
            got[c] += add
            rem -= add
    for c in kids:
        if not rem:
            break
        if c not in got and fl[c] <= rem:
            got[c] = min(rem, mx[c])
            rem -= got[c]
    if rem:
        # make room for one more child by trimming the others towards their floors
        for d in sorted((c for c in kids if c not in got), key=lambda c: (fl[c], c)):
            need = fl[d] - rem
            slack = sum(got[c] - fl[c] for c in got)
            if slack < need:
                continue
            for c in reversed(list(got)):
                cut = min(got[c] - fl[c], need)
                got[c] -= cut
                need -= cut
                if not need:
                    break
            got[d] = fl[d]
            rem = 0
            break
    if not rem:
        return got
    for c in kids:
        if fl[c] <= amount <= mx[c]:
            return {c: amount}
    got, rem = {}, amount
    for c in sorted(kids, key=lambda c: (-mx[c], c)):
        take = min(rem, mx[c])
        if take >= fl[c] and (rem - take == 0 or rem - take >= min(fl[d] for d in kids)):
            got[c] = take
            rem -= take
            if not rem:
                return got
    return None


def _materialize(alloc: list, children: list, lam: int) -> _Built:
    # renumber used vertices layer by layer, top down
    keep = [sorted(a) for a in alloc]
    index = [{v: t for t, v in enumerate(k)} for k in keep]
    parents = []
    leaf_par = []
    for t, v in enumerate(keep[0]):
        leaf_par.extend([t] * alloc[0][v])
    parents.append(np.asarray(leaf_par, dtype=np.int64))
    for i in range(1, lam):
        par = np.empty(len(keep[i - 1]), dtype=np.int64)
        for v, t_parent in index[i].items():
            for c in children[i][v]:
                if c in index[i - 1]:
                    par[index[i - 1][c]] = t_parent
        parents.append(par)
    parents.append(np.full(1, -1, dtype=np.int64))
    return _Built(parents, _weights(parents))


def complete_with(inst: Instance, vec, tree_p: _Built, k_target: int) -> Optional[_Built]:
    """Greedy completion of ``vec`` joined with its tree ``tree_p``; ``None`` on failure."""
    res = completion_residual(inst, vec, k_target)
    tree_b = greedy_complete(res)
    if tree_b is None:
        return None
    kb = 0
    for i in range(inst.lam, -1, -1):
        if len(tree_b.parents[i]) > 1:
            kb = i
            break
    k = max(_branch(vec), kb, merge_layer(inst) or 0)
    if k > k_target:
        return None
    return combine_trees(tree_p, tree_b, k)
