"""Exhaustive ground truth for tiny instances.

Nothing here uses the dynamic program: valid subtrees are enumerated layer by
layer as sums over multisets of child subtrees, so the results are an
independent reference for the solver and its bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .model import Instance, LayerTree


class OracleLimitError(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_n0: int = 12
    max_lambda: int = 3
    max_count: int = 6

    def check(self, inst: Instance):
        if inst.n0 > self.max_n0:
            raise OracleLimitError(f"n0={inst.n0} exceeds oracle limit {self.max_n0}")
        if inst.lam > self.max_lambda:
            raise OracleLimitError(f"lambda={inst.lam} exceeds oracle limit {self.max_lambda}")
        big = max(s.count for s in inst.layers)
        if big > self.max_count:
            raise OracleLimitError(f"layer count {big} exceeds oracle limit {self.max_count}")


@dataclass
class OracleResult:
    feasible: bool
    # leaf count -> set of count vectors of almost-valid trees
    almost_valid: dict[int, set[tuple]]
    vectors: set[tuple]  # count vectors of valid full trees


def _fits(vec: tuple, n: tuple) -> bool:
    return all(a <= b for a, b in zip(vec, n))


def _add(u: tuple, v: tuple) -> tuple:
    return tuple(a + b for a, b in zip(u, v))


def _subtree_vectors(inst: Instance) -> list[dict[int, set[tuple]]]:
    """``R[j][w]``: count vectors (layers 0..j) of valid subtrees rooted in layer ``j`` with weight ``w``."""
    n, lo, hi = inst.n, inst.lo, inst.hi
    n0 = inst.n0
    R: list[dict[int, set[tuple]]] = [{1: {(1,)}}]
    for j in range(1, inst.lam + 1):
        sums = _multiset_sums(R[j - 1], n0, j, n)
        layer: dict[int, set[tuple]] = {}
        for w in range(max(lo[j], 1), min(hi[j], n0) + 1):
            vecs = {s + (1,) for s, parts in sums.get(w, set())}
            vecs = {v for v in vecs if _fits(v, n)}
            if vecs:
                layer[w] = vecs
        R.append(layer)
    return R


def _multiset_sums(children: dict[int, set[tuple]], limit: int, width: int, n: tuple):
    """Sums of nonempty multisets of child vectors, by total weight.

    Values are sets of ``(vector, min(parts, 2))`` so callers can ask for at
    least two children.
    """
    zero = (0,) * width
    S: dict[int, set[tuple]] = {0: {(zero, 0)}}
    for w in range(1, limit + 1):
        acc = set()
        for wc, vecs in children.items():
            if wc > w:
                continue
            for s, parts in S.get(w - wc, ()):
                for v in vecs:
                    t = _add(s, v)
                    if _fits(t, n):
                        acc.add((t, min(parts + 1, 2)))
        if acc:
            S[w] = acc
    return S


def brute_force_decide(inst: Instance, limits: OracleLimits = OracleLimits()) -> OracleResult:
    """Exact feasibility plus every almost-valid count vector, per leaf count."""
    limits.check(inst)
    lam, n, hi = inst.lam, inst.n, inst.hi
    R = _subtree_vectors(inst)
    vectors = set(R[lam].get(inst.n0, set()))
    almost: dict[int, set[tuple]] = {}
    for c in range(1, inst.n0 + 1):
        found = set()
        if all(c <= hi[i] for i in range(1, lam + 1)):
            v = (c,) + (1,) * lam
            if _fits(v, n):
                found.add(v)
        for k in range(1, lam):
            if not all(c <= hi[i] for i in range(k + 1, lam + 1)):
                continue
            for s, parts in _multiset_sums(R[k], c, k + 1, n).get(c, ()):
                if parts >= 2:
                    v = s + (1,) * (lam - k)
                    if _fits(v, n):
                        found.add(v)
        if found:
            almost[c] = found
    return OracleResult(bool(vectors), almost, vectors)


# ------------------------------------------------------------ explicit trees


def tree_form(tree: LayerTree):
    """Canonical nested-tuple form of a layer tree (children sorted)."""
    par = tree.parent_indices()
    forms = [() for _ in tree.layers[0]]
    for i in range(1, tree.lam + 1):
        kids: list[list] = [[] for _ in tree.layers[i]]
        for j, p in enumerate(par[i - 1]):
            kids[p].append(forms[j])
        forms = [tuple(sorted(k)) for k in kids]
    if len(forms) != 1:
        raise ValueError("tree has more than one root")
    return forms[0]


def _form_counts(form, depth: int) -> tuple:
    counts = [0] * (depth + 1)
    level = [form]
    for d in range(depth, -1, -1):
        counts[d] = len(level)
        level = [c for f in level for c in f]
    return tuple(counts)


def enumerate_valid_trees(inst: Instance, limits: OracleLimits = OracleLimits(max_n0=8)) -> set:
    """Canonical forms of all valid layer trees, up to isomorphism."""
    limits.check(inst)
    n, lo, hi = inst.n, inst.lo, inst.hi
    n0 = inst.n0
    # forms[j][w]: canonical forms rooted in layer j with weight w
    forms: list[dict[int, set]] = [{1: {()}}]
    for j in range(1, inst.lam + 1):
        items = sorted((w, f) for w, fs in forms[j - 1].items() for f in fs)
        layer: dict[int, set] = {}
        for w in range(max(lo[j], 1), min(hi[j], n0) + 1):
            out = set()
            for combo in _multisets(items, w, 0):
                f = tuple(sorted(combo))
                if _fits(_form_counts(f, j), n):
                    out.add(f)
            if out:
                layer[w] = out
        forms.append(layer)
    return forms[inst.lam].get(n0, set())


def _multisets(items: list, total: int, start: int):
    if total == 0:
        yield []
        return
    for idx in range(start, len(items)):
        w, f = items[idx]
        if w > total:
            continue
        for rest in _multisets(items, total - w, idx):
            yield [f] + rest


# ------------------------------------------------------------ two-layer maxima


def max_leaves_two_layer_bruteforce(n_i: int, u_i: int, n_j: int, u_j: int,
                                    l_i: int = 0, l_j: int = 0, size_limit: int = 10_000) -> int:
    """Exact maximum number of leaves below ``n_j`` parents fed by ``n_i`` children.

    Every child carries a weight in ``[max(l_i, 1), u_i]`` and every parent a
    total in ``[max(l_j, 1), u_j]``; weights and groupings are free otherwise.
    """
    if n_i * u_i > size_limit:
        raise OracleLimitError("two-layer configuration too large")
    lo_i, lo_j = max(l_i, 1), max(l_j, 1)

    def best(m: int) -> Optional[int]:
        # heaviest parent total with exactly m children
        w = min(m * u_i, u_j)
        return w if w >= max(m * lo_i, lo_j) else None

    @lru_cache(maxsize=None)
    def go(parents: int, children: int) -> int:
        if parents == 0 or children == 0:
            return 0
        top = go(parents - 1, children)
        for m in range(1, children + 1):
            w = best(m)
            if w is not None:
                top = max(top, w + go(parents - 1, children - m))
        return top

    return go(n_j, n_i)
