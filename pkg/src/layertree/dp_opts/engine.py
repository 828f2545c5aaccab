"""Array-based solver with the optional speedups.

Every leaf count ``c`` owns a lexicographically sorted ``(S, lam + 1)`` array
of count vectors plus a provenance array ``(left_leaves, left_row, right_row,
k)``. Candidates for ``c`` are produced for all pairs at once, deduplicated,
pruned and Pareto-filtered before they are stored.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..dp_core import (Base, Budget, BudgetExceeded, Combined, Deadline, Decision, Diagnostics,
                       Outcome, _reconstruct, admissible_layers, branching_layer, combination_valid,
                       combine_trees)
from ..model import Instance, InconsistentInstance, normalize, verify_tree
from .bounds import instance_bound, prune_mask
from .config import OptConfig, all_pairs, balanced_pairs
from .greedy import GreedyMemo, complete_with, completion_residual, greedy_max_flow, merge_layer
from .pareto import pareto_minimal

try:
    from . import kernels
except ImportError:  # pragma: no cover - numba missing
    kernels = None

_CELLS = 1 << 21  # pair-sum elements per numpy chunk


class ArrayStore:
    """Stored partial solutions, one sorted array per leaf count.

    A packed copy of all vectors (``buf`` with ranges ``start[c]:end[c]``)
    feeds the compiled kernels.
    """

    def __init__(self, lam: int, n0: int):
        self.lam = lam
        self.vecs: dict[int, np.ndarray] = {}
        self.branch: dict[int, np.ndarray] = {}
        self.prov: dict[int, np.ndarray] = {}
        self.buf = np.ones((64, lam + 1), dtype=np.int64)
        self.buf_branch = np.zeros(64, dtype=np.int64)
        self.start = np.zeros(n0 + 2, dtype=np.int64)
        self.end = np.zeros(n0 + 2, dtype=np.int64)
        self.top = 0

    def put(self, c: int, vecs: np.ndarray, prov: np.ndarray):
        self.vecs[c] = vecs
        self.prov[c] = prov
        self.branch[c] = br = _branch_layers(vecs)
        need = self.top + len(vecs)
        if need > len(self.buf):
            size = max(need, 2 * len(self.buf))
            buf = np.ones((size, self.lam + 1), dtype=np.int64)
            buf[:self.top] = self.buf[:self.top]
            bb = np.zeros(size, dtype=np.int64)
            bb[:self.top] = self.buf_branch[:self.top]
            self.buf, self.buf_branch = buf, bb
        self.buf[self.top:need] = vecs
        self.buf_branch[self.top:need] = br
        self.start[c], self.end[c] = self.top, need
        self.top = need

    def drop(self, c: int):
        if self.end[c] == self.top:
            self.top = int(self.start[c])
        self.start[c] = self.end[c] = 0
        for d in (self.vecs, self.branch, self.prov):
            d.pop(c, None)

    def size(self, c: int) -> int:
        v = self.vecs.get(c)
        return 0 if v is None else len(v)

    def vector(self, c: int, key) -> tuple:
        return tuple(int(x) for x in self.vecs[c][key])

    def provenance(self, c: int, key):
        a0, ia, ib, k = (int(x) for x in self.prov[c][key])
        if a0 < 0:
            return Base()
        return Combined(a0, ia, c - a0, ib, k)

    def __contains__(self, item) -> bool:
        c, key = item
        return 0 <= key < self.size(c)


def _branch_layers(vecs: np.ndarray) -> np.ndarray:
    multi = vecs > 1
    last = vecs.shape[1] - 1 - np.argmax(multi[:, ::-1], axis=1)
    return np.where(multi.any(axis=1), last, 0)


def _next_layer_table(ks: list[int], lam: int) -> np.ndarray:
    # t -> smallest admissible k >= t, or lam when none is left
    table = np.full(lam + 1, lam, dtype=np.int64)
    for t in range(lam, -1, -1):
        later = [k for k in ks if k >= t]
        table[t] = later[0] if later else lam
    return table


def _pair_candidates(store: ArrayStore, n: np.ndarray, lam: int, a0: int, b0: int,
                     ks: list[int], single_k: bool, deadline: Deadline, stored: int):
    """All valid combinations of the ``a0`` and ``b0`` arrays, as (vectors, provenance) chunks."""
    A, B = store.vecs[a0], store.vecs[b0]
    bra, brb = store.branch[a0], store.branch[b0]
    width = lam + 1
    step = max(1, _CELLS // (width * len(B)))
    table = _next_layer_table(ks, lam)
    out_v, out_p, count = [], [], 0
    for s in range(0, len(A), step):
        deadline.check(stored)
        S = A[s:s + step, None, :] + B[None, :, :]
        over = S > n
        first_bad = np.where(over.any(axis=2), over.argmax(axis=2), width)
        kmin = np.maximum(bra[s:s + step, None], brb[None, :])
        upper = None
        if a0 == b0:
            upper = np.arange(len(B))[None, :] >= np.arange(s, s + len(S))[:, None]
            count += int(upper.sum())
        else:
            count += S.shape[0] * S.shape[1]
        if single_k:
            kk = table[kmin]
            ok = (kk < lam) & (kk < first_bad)
            if upper is not None:
                ok &= upper
            ii, jj = np.nonzero(ok)
            picks = [(ii, jj, kk[ii, jj])]
        else:
            picks = []
            for k in ks:
                ok = (kmin <= k) & (k < first_bad)
                if upper is not None:
                    ok &= upper
                ii, jj = np.nonzero(ok)
                picks.append((ii, jj, np.full(len(ii), k, dtype=np.int64)))
        for ii, jj, kv in picks:
            if not len(ii):
                continue
            rows = S[ii, jj]
            rows[np.arange(width)[None, :] > kv[:, None]] = 1
            out_v.append(rows)
            out_p.append(np.stack([np.full(len(ii), a0), ii + s, jj, kv], axis=1))
    return out_v, out_p, count


class _Run:
    def __init__(self, inst: Instance, cfg: OptConfig, budget: Budget, compiled: bool):
        self.inst = inst
        self.cfg = cfg
        self.lam = inst.lam
        self.n0 = inst.n0
        self.n = np.asarray(inst.n, dtype=np.int64)
        self.lo = np.asarray(inst.lo, dtype=np.int64)
        self.hi = np.asarray(inst.hi, dtype=np.int64)
        self.store = ArrayStore(inst.lam, inst.n0)
        self.diag = Diagnostics()
        self.deadline = Deadline(budget)
        self.memo = GreedyMemo()
        self.flow_evals = 0
        self.kstar = merge_layer(inst)
        # mixed-radix weights packing layers 1..lam-1 into one order-preserving int64
        radix, prod = [], 1
        for c in reversed(inst.n[1:-1]):
            radix.append(prod)
            prod *= c + 1
        self.radix = np.asarray(radix[::-1], dtype=np.int64) if prod < 2**62 else None
        self.fast = compiled and kernels is not None and self.radix is not None and self.lam > 1
        if self.fast:
            self._grow(1 << 15)

    def a_range(self, c: int) -> tuple[int, int]:
        return (-(-c // 3) if self.cfg.balance else 1), c // 2

    # -------------------------------------------------------- generation

    def _grow(self, size: int):
        bits = max(16, int(size - 1).bit_length() + 1)
        self.table = np.full(1 << bits, -1, dtype=np.int64)
        self.shift = np.uint64(64 - bits)
        self.keys = np.empty(1 << (bits - 1), dtype=np.int64)
        self.kprov = np.empty((1 << (bits - 1), 4), dtype=np.int64)
        self.slots = np.empty(1 << (bits - 1), dtype=np.int64)

    def generate(self, c: int):
        """Deduplicated candidates for ``c`` in lexicographic order, or ``None``."""
        a_lo, a_hi = self.a_range(c)
        single_k = self.cfg.pareto
        if self.fast:
            st = self.store
            while True:
                count, seen_all, emitted_all = 0, 0, 0
                step = 8
                for lo in range(a_lo, a_hi + 1, step):
                    self.deadline.check(self.diag.stored)
                    count, seen, emitted = kernels.combine(
                        st.buf, st.buf_branch, st.start, st.end, self.n, self.lo, self.hi,
                        self.radix, c, lo, min(a_hi, lo + step - 1), single_k,
                        self.table, self.shift, self.keys, self.kprov, self.slots, count)
                    seen_all += seen
                    emitted_all += emitted
                    if count < 0:
                        break
                if count >= 0:
                    break
                # table full: start this leaf count over with twice the room
                self._grow(2 * len(self.keys))
            self.diag.combinations += seen_all
            self.table[self.slots[:count]] = -1
            if not count:
                return None
            self.diag.duplicates += emitted_all - count
            order = np.argsort(self.keys[:count], kind="stable")
            K = self.keys[order]
            return kernels.decode(K, self.radix, c, self.lam), self.kprov[order]
        vs, ps = [], []
        for a0 in range(a_lo, a_hi + 1):
            b0 = c - a0
            if not (self.store.size(a0) and self.store.size(b0)):
                continue
            ks = admissible_layers(self.inst, a0, b0)
            if not ks:
                continue
            v, p, seen = _pair_candidates(self.store, self.n, self.lam, a0, b0, ks, single_k,
                                          self.deadline, self.diag.stored)
            self.diag.combinations += seen
            vs += v
            ps += p
        if not vs:
            return None
        V = np.concatenate(vs)
        P = np.concatenate(ps)
        first = self.unique_rows(V)
        self.diag.duplicates += len(V) - len(first)
        return V[first], P[first]

    def unique_rows(self, V: np.ndarray) -> np.ndarray:
        """Indices of first occurrences, in lexicographic order of the rows."""
        if self.radix is None:
            return np.unique(V, axis=0, return_index=True)[1]
        return np.unique(V[:, 1:-1] @ self.radix, return_index=True)[1]

    def build(self, c: int):
        """Filtered candidate set for leaf count ``c`` as (vectors, provenance)."""
        got = self.generate(c)
        if got is None:
            return None
        V, P = got
        if self.cfg.balance:
            small = np.minimum(P[:, 0], c - P[:, 0])
            assert (small >= -(-c // 3)).all(), "unbalanced combination"
        if self.cfg.prune:
            bad = prune_mask(self.inst, V, c)
            self.diag.pruned += int(bad.sum())
            V, P = V[~bad], P[~bad]
        if self.cfg.pareto and len(V) > 1:
            keep = kernels.pareto_sweep(V) if self.fast else pareto_minimal(V)
            self.diag.dominated += int(len(V) - keep.sum())
            V, P = V[keep], P[keep]
        if not len(V):
            return None
        return V, P

    def store_set(self, c: int, V: np.ndarray, P: np.ndarray):
        self.store.put(c, V, P)
        self.diag.stored += len(V)
        self.diag.max_set = max(self.diag.max_set, len(V))
        self.deadline.check(self.diag.stored)

    # -------------------------------------------------------- greedy

    def try_greedy(self, c: int):
        """Greedy completion for each new vector of ``c`` leaves, in order; a tree on success."""
        if not self.cfg.greedy or self.kstar is None:
            return None
        inst, V = self.inst, self.store.vecs[c]
        b0 = self.n0 - c
        K = np.maximum(self.store.branch[c], self.kstar)
        layers = np.arange(self.lam + 1)
        # residual counts: vertices used up to the join layer are gone, one vertex above it
        R = np.where(layers[None, :] <= K[:, None], self.n[None, :] - V, 1)
        R[:, 0] = b0
        cand = np.flatnonzero(c >= self.lo[K])
        hi = self.hi[1:]
        top = (R[:, 1:] * hi).min(axis=1)
        pos = 0
        while pos < len(cand):
            self.deadline.check(self.diag.stored)
            if self.cfg.estimate and self.memo.prev is not None:
                rest = cand[pos:]
                prev = np.asarray(self.memo.prev[1:], dtype=np.int64)
                est = self.memo.connected + (R[rest, 1:] - prev) @ hi
                est = np.clip(est, 0, top[rest])
                hit = np.flatnonzero(est >= b0)
                if not len(hit):
                    return None
                pos += int(hit[0])
            idx = int(cand[pos])
            pos += 1
            vec = tuple(int(x) for x in V[idx])
            res = completion_residual(inst, vec, int(K[idx]))
            flow = greedy_max_flow(res)
            self.flow_evals += 1
            self.memo.update(res, flow)
            if flow < b0:
                continue
            self.diag.greedy_calls += 1
            tree_p = _reconstruct(self.store, c, idx)
            built = complete_with(inst, vec, tree_p, int(K[idx]))
            if built is None:
                continue
            tree = built.to_tree()
            if verify_tree(inst, tree):
                self.diag.greedy_successes += 1
                return tree
        return None

    # -------------------------------------------------------- counterpart

    def counterpart(self, c: int):
        """A full tree joining a vector of ``c`` leaves with a stored vector of ``n0 - c``."""
        other = self.n0 - c
        if not (self.store.size(other) and self.store.size(c)):
            return None
        a0, b0 = min(c, other), max(c, other)
        if self.fast:
            st = self.store
            ia, ib, k, seen = kernels.first_join(st.buf, st.buf_branch, st.start, st.end,
                                                 self.n, self.lo, self.hi, a0, b0)
            self.diag.combinations += seen
            if ia < 0:
                return None
        else:
            ks = admissible_layers(self.inst, a0, b0)
            if not ks:
                return None
            v, p, seen = _pair_candidates(self.store, self.n, self.lam, a0, b0, ks, True,
                                          self.deadline, self.diag.stored)
            self.diag.combinations += seen
            if not v:
                return None
            _, ia, ib, k = (int(x) for x in p[0][0])
        self.diag.counterpart_hits += 1
        ta = _reconstruct(self.store, a0, ia)
        tb = _reconstruct(self.store, b0, ib)
        return combine_trees(ta, tb, k).to_tree()

    # -------------------------------------------------------- driver

    def run(self):
        n0, lam = self.n0, self.lam
        store, cfg = self.store, self.cfg
        base = np.ones((1, lam + 1), dtype=np.int64)
        self.store_set(1, base, np.array([[-1, -1, -1, -1]], dtype=np.int64))
        if n0 == 1:
            return _reconstruct(store, 1, 0).to_tree()
        tree = self.try_greedy(1)
        if tree is not None:
            return tree
        half, two_thirds = n0 // 2, (2 * n0) // 3
        if cfg.counterpart:
            limit = half
        else:
            limit = two_thirds if cfg.balance else n0 - 1
        for c in range(2, limit + 1):
            built = self.build(c)
            if built is None:
                continue
            self.store_set(c, *built)
            tree = self.try_greedy(c)
            if tree is not None:
                return tree
        if not cfg.counterpart:
            built = self.generate(n0)
            if built is None:
                return None
            store.put(n0, *built)
            return _reconstruct(store, n0, 0).to_tree()
        if n0 % 2 == 0:
            tree = self.counterpart(half)
            if tree is not None:
                return tree
        # transient sets; without balancing they also feed later transient sets
        top = two_thirds if cfg.balance else n0 - 1
        for c in range(half + 1, top + 1):
            built = self.build(c)
            if built is None:
                continue
            store.put(c, *built)
            tree = self.counterpart(c)
            if tree is not None:
                return tree
            if cfg.balance:
                store.drop(c)
        return None


def counterpart_check(inst: Instance, store, vec) -> Optional[tuple[tuple, int]]:
    """First stored vector with ``n0 - vec[0]`` leaves that joins ``vec`` into a full solution.

    ``inst`` must be normalized. Works with :class:`ArrayStore` and with the
    basic solution store. Returns ``(vector, k)`` or ``None``.
    """
    other = inst.n0 - vec[0]
    if isinstance(store, ArrayStore):
        cands = [tuple(int(x) for x in row) for row in store.vecs.get(other, ())]
    else:
        cands = [ps.vec for ps in store.entries(other)]
    kv = branching_layer(vec)
    for b in sorted(cands):
        for k in range(max(kv, branching_layer(b)), inst.lam):
            if combination_valid(inst, tuple(vec), b, k):
                return b, k
    return None


def solve(inst: Instance, cfg: OptConfig = OptConfig(), budget: Budget = Budget(),
          compiled: bool = True) -> Decision:
    """Decide feasibility; a feasible decision carries a verified tree.

    ``compiled=False`` forces the pure numpy code path.
    """
    try:
        norm = normalize(inst)
    except InconsistentInstance:
        return Decision(Outcome.INFEASIBLE)
    if max(norm.lo) > norm.n0 or min(norm.n) == 0 or norm.hi[norm.lam] < norm.n0:
        return Decision(Outcome.INFEASIBLE)
    if cfg.prune and instance_bound(norm) < norm.n0:
        return Decision(Outcome.INFEASIBLE, diagnostics=Diagnostics(pruned=1))
    run = _Run(norm, cfg, budget, compiled)
    try:
        tree = run.run()
    except BudgetExceeded:
        run.diag.elapsed = run.deadline.elapsed()
        return Decision(Outcome.TIMEOUT, diagnostics=run.diag)
    run.diag.elapsed = run.deadline.elapsed()
    if tree is None:
        return Decision(Outcome.INFEASIBLE, diagnostics=run.diag)
    report = verify_tree(norm, tree)
    assert report.ok, f"solver produced an invalid tree: {report.violations}"
    return Decision(Outcome.FEASIBLE, tree, run.diag)
