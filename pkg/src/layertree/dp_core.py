"""The basic dynamic program over relaxed partial solutions.

A relaxed partial solution is a count vector ``(a_0, .., a_lam)`` realized by
an almost-valid tree: valid up to its branching layer, a single path above
it. Vectors with ``c`` leaves are built by ``k``-combining two stored vectors
whose leaf counts add up to ``c``.

This module is the plain reference implementation (dicts and tuples, no
pruning). The optimized solver lives in :mod:`layertree.dp_opts`; both share
the provenance model and :func:`reconstruct_tree`.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, fields
from typing import Optional, Union

import numpy as np

from .model import Instance, InconsistentInstance, LayerTree, normalize

CountVector = tuple  # (a_0, .., a_lam)


class Outcome(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Base:
    pass


@dataclass(frozen=True)
class Combined:
    left_leaves: int
    left_key: object
    right_leaves: int
    right_key: object
    k: int


@dataclass(frozen=True)
class GreedyTree:
    tree: LayerTree


Provenance = Union[Base, Combined, GreedyTree]


def branching_layer(v: CountVector) -> int:
    """Highest layer holding more than one vertex, 0 if there is none."""
    for i in range(len(v) - 1, -1, -1):
        if v[i] > 1:
            return i
    return 0


def k_combine(a: CountVector, b: CountVector, k: int) -> CountVector:
    assert max(branching_layer(a), branching_layer(b)) <= k < len(a), "k below branching layers"
    return tuple(a[i] + b[i] for i in range(k + 1)) + (1,) * (len(a) - k - 1)


@dataclass(frozen=True)
class PartialSolution:
    vec: CountVector
    provenance: Provenance = Base()

    @property
    def leaves(self) -> int:
        return self.vec[0]

    @property
    def branch(self) -> int:
        return branching_layer(self.vec)


def combination_valid(inst: Instance, a: CountVector, b: CountVector, k: int) -> bool:
    """Whether the ``k``-combination of ``a`` and ``b`` is again a relaxed partial solution.

    ``inst`` must be normalized. ``k = lam`` would give two roots and is
    never valid.
    """
    lam = inst.lam
    if k >= lam:
        return False
    n, lo, hi = inst.n, inst.lo, inst.hi
    for i in range(k + 1):
        if a[i] + b[i] > n[i]:
            return False
    return a[0] + b[0] <= hi[k + 1] and a[0] >= lo[k] and b[0] >= lo[k]


def admissible_layers(inst: Instance, a0: int, b0: int) -> list[int]:
    """Layers ``k`` whose leaf-count clauses hold for a pair with ``a0`` and ``b0`` leaves."""
    lo, hi = inst.lo, inst.hi
    c = a0 + b0
    return [k for k in range(inst.lam) if c <= hi[k + 1] and a0 >= lo[k] and b0 >= lo[k]]


@dataclass
class Diagnostics:
    stored: int = 0
    pruned: int = 0
    dominated: int = 0
    duplicates: int = 0
    combinations: int = 0
    greedy_calls: int = 0
    greedy_successes: int = 0
    counterpart_hits: int = 0
    max_set: int = 0
    elapsed: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Decision:
    outcome: Outcome
    tree: Optional[LayerTree] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def feasible(self) -> bool:
        return self.outcome is Outcome.FEASIBLE


@dataclass(frozen=True)
class Budget:
    seconds: float = 3600.0
    max_stored: Optional[int] = None


class BudgetExceeded(Exception):
    pass


class Deadline:
    def __init__(self, budget: Budget):
        self.budget = budget
        self.start = time.perf_counter()
        self.until = self.start + budget.seconds

    def check(self, stored: int = 0):
        if time.perf_counter() > self.until:
            raise BudgetExceeded("time")
        if self.budget.max_stored is not None and stored > self.budget.max_stored:
            raise BudgetExceeded("memory")

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


class SolutionStore:
    """Per leaf count, an insertion-ordered map from count vector to provenance.

    Entries are keyed by the vector itself; the first provenance wins.
    """

    def __init__(self):
        self.sets: dict[int, dict[CountVector, Provenance]] = {}
        self.diag = Diagnostics()

    def insert(self, ps: PartialSolution) -> bool:
        bucket = self.sets.setdefault(ps.leaves, {})
        if ps.vec in bucket:
            self.diag.duplicates += 1
            return False
        bucket[ps.vec] = ps.provenance
        self.diag.stored += 1
        self.diag.max_set = max(self.diag.max_set, len(bucket))
        return True

    def entries(self, c: int) -> list[PartialSolution]:
        bucket = self.sets.get(c, {})
        return [PartialSolution(v, bucket[v]) for v in sorted(bucket)]

    def vector(self, c: int, key) -> CountVector:
        return key

    def provenance(self, c: int, key) -> Provenance:
        return self.sets[c][key]

    def __contains__(self, item) -> bool:
        c, key = item
        return key in self.sets.get(c, {})


def solve_basic(inst: Instance, budget: Budget = Budget()) -> Decision:
    """Decide feasibility with the unoptimized dynamic program."""
    deadline = Deadline(budget)
    try:
        norm = normalize(inst)
    except InconsistentInstance:
        return Decision(Outcome.INFEASIBLE)
    n0, lam = norm.n0, norm.lam
    store = SolutionStore()
    if max(norm.lo) > n0 or min(norm.n) == 0:
        return Decision(Outcome.INFEASIBLE, diagnostics=store.diag)
    store.insert(PartialSolution((1,) * (lam + 1)))
    try:
        for c in range(2, n0 + 1):
            for a0 in range(1, c // 2 + 1):
                b0 = c - a0
                ks = admissible_layers(norm, a0, b0)
                if not ks:
                    continue
                left, right = store.entries(a0), store.entries(b0)
                for ia, pa in enumerate(left):
                    for ib, pb in enumerate(right):
                        if a0 == b0 and ib < ia:
                            continue
                        kmin = max(pa.branch, pb.branch)
                        for k in ks:
                            if k < kmin:
                                continue
                            store.diag.combinations += 1
                            if combination_valid(norm, pa.vec, pb.vec, k):
                                vec = k_combine(pa.vec, pb.vec, k)
                                store.insert(PartialSolution(vec, Combined(a0, pa.vec, b0, pb.vec, k)))
                deadline.check(store.diag.stored)
    except BudgetExceeded:
        store.diag.elapsed = deadline.elapsed()
        return Decision(Outcome.TIMEOUT, diagnostics=store.diag)
    store.diag.elapsed = deadline.elapsed()
    full = store.entries(n0)
    if not full:
        return Decision(Outcome.INFEASIBLE, diagnostics=store.diag)
    tree = reconstruct_tree(store, n0, full[0].vec)
    return Decision(Outcome.FEASIBLE, tree, store.diag)


# ------------------------------------------------------------ reconstruction


class _Built:
    """Explicit tree as per-layer parent-index arrays plus weights."""

    __slots__ = ("parents", "weights")

    def __init__(self, parents: list[np.ndarray], weights: list[np.ndarray]):
        self.parents = parents
        self.weights = weights

    @classmethod
    def path(cls, lam: int) -> "_Built":
        one = np.zeros(1, dtype=np.int64)
        return cls([one.copy() for _ in range(lam)] + [np.full(1, -1, dtype=np.int64)],
                   [np.ones(1, dtype=np.int64) for _ in range(lam + 1)])

    @classmethod
    def from_tree(cls, tree: LayerTree) -> "_Built":
        par = [np.asarray(p, dtype=np.int64) for p in tree.parent_indices()]
        return cls(par, _weights(par))

    def to_tree(self) -> LayerTree:
        return LayerTree.from_parents([p.tolist() for p in self.parents])


def _weights(parents: list[np.ndarray]) -> list[np.ndarray]:
    w = [np.ones(len(parents[0]), dtype=np.int64)]
    for i in range(1, len(parents)):
        w.append(np.bincount(parents[i - 1], weights=w[i - 1], minlength=len(parents[i])).astype(np.int64))
    return w


def combine_trees(ta: _Built, tb: _Built, k: int) -> _Built:
    """Disjoint union of two trees, contracting the single vertices above layer ``k``."""
    lam = len(ta.parents) - 1
    parents, weights = [], []
    for i in range(lam + 1):
        if i < k:
            off = len(ta.parents[i + 1])
            parents.append(np.concatenate([ta.parents[i], tb.parents[i] + off]))
            weights.append(np.concatenate([ta.weights[i], tb.weights[i]]))
        elif i == k:
            size = len(ta.parents[i]) + len(tb.parents[i])
            parents.append(np.zeros(size, dtype=np.int64) if i < lam else np.full(size, -1, dtype=np.int64))
            weights.append(np.concatenate([ta.weights[i], tb.weights[i]]))
        else:
            parents.append(np.zeros(1, dtype=np.int64) if i < lam else np.full(1, -1, dtype=np.int64))
            weights.append(ta.weights[i] + tb.weights[i])
    out = _Built(parents, weights)
    # weights at layers <= k are inherited unchanged from the operands
    recomputed = _weights(parents)
    for i in range(lam + 1):
        assert np.array_equal(recomputed[i], weights[i]), f"weight changed in layer {i}"
    return out


def reconstruct_tree(store, c: int, key) -> LayerTree:
    """Rebuild an explicit tree for the stored entry ``(c, key)``.

    ``store`` must provide ``provenance(c, key)`` and ``vector(c, key)``.
    """
    return _reconstruct(store, c, key).to_tree()


def _reconstruct(store, c: int, key) -> _Built:
    lam = len(store.vector(c, key)) - 1
    built: dict = {}
    stack = [(c, key)]
    while stack:
        node = stack[-1]
        if node in built:
            stack.pop()
            continue
        prov = store.provenance(*node)
        if isinstance(prov, Base):
            built[node] = _Built.path(lam)
            stack.pop()
        elif isinstance(prov, GreedyTree):
            built[node] = _Built.from_tree(prov.tree)
            stack.pop()
        else:
            left = (prov.left_leaves, prov.left_key)
            right = (prov.right_leaves, prov.right_key)
            pending = [x for x in (left, right) if x not in built]
            if pending:
                stack.extend(pending)
                continue
            built[node] = combine_trees(built[left], built[right], prov.k)
            stack.pop()
    return built[(c, key)]
