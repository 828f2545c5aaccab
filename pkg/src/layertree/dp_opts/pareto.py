"""Pareto dominance between count vectors with equal leaf counts."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


def dominates(a, b) -> bool:
    """``a`` uses no more vertices than ``b`` on every layer 1..lam (equality included)."""
    assert a[0] == b[0], "dominance compares vectors with equal leaf counts"
    return all(x <= y for x, y in zip(a[1:], b[1:]))


class InsertKind(enum.Enum):
    INSERTED = "inserted"
    REJECTED_DOMINATED = "rejected_dominated"
    REJECTED_DUPLICATE = "rejected_duplicate"


@dataclass(frozen=True)
class InsertOutcome:
    kind: InsertKind
    evicted: int = 0


class ParetoSet:
    """Mutually non-dominating vectors for one leaf count, with sequential insertion."""

    def __init__(self):
        self.items: dict[tuple, object] = {}

    def insert(self, vec: tuple, provenance=None) -> InsertOutcome:
        if vec in self.items:
            return InsertOutcome(InsertKind.REJECTED_DUPLICATE)
        if any(dominates(u, vec) for u in self.items):
            return InsertOutcome(InsertKind.REJECTED_DOMINATED)
        gone = [u for u in self.items if dominates(vec, u)]
        for u in gone:
            del self.items[u]
        self.items[vec] = provenance
        return InsertOutcome(InsertKind.INSERTED, len(gone))

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(sorted(self.items))


def pareto_insert(pset: ParetoSet, vec: tuple, provenance=None) -> InsertOutcome:
    return pset.insert(vec, provenance)


_CELLS = 1 << 22  # elements per comparison block


def pareto_minimal(vecs: np.ndarray) -> np.ndarray:
    """Keep-mask of the non-dominated rows of a lexicographically sorted, duplicate-free array.

    A dominating row is lexicographically smaller, so a single forward sweep
    against the front found so far is enough.
    """
    m = len(vecs)
    keep = np.zeros(m, dtype=bool)
    if m == 0:
        return keep
    cols = vecs[:, 1:]
    width = max(cols.shape[1], 1)
    front = np.empty((0, cols.shape[1]), dtype=vecs.dtype)
    block = max(1, min(2048, int((_CELLS // width) ** 0.5)))
    for start in range(0, m, block):
        x = cols[start:start + block]
        alive = np.ones(len(x), dtype=bool)
        if len(front):
            step = max(1, _CELLS // (width * len(x)))
            for f0 in range(0, len(front), step):
                f = front[f0:f0 + step]
                hit = np.all(f[None, :, :] <= x[:, None, :], axis=2).any(axis=1)
                alive &= ~hit
        idx = np.flatnonzero(alive)
        if len(idx) > 1:
            y = x[idx]
            d = np.all(y[None, :, :] <= y[:, None, :], axis=2)
            np.fill_diagonal(d, False)
            idx = idx[~d.any(axis=1)]
        keep[start + idx] = True
        front = np.concatenate([front, x[idx]])
    return keep
