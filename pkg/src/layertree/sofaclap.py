"""Geometric cable layouts: embed a layer tree into positioned layers and improve it.

A :class:`LayerGraph` gives every layer a list of candidate positions and a
cable catalogue. A tree edge from ``u`` to its parent costs
``cable_cost(w(u))`` per unit of Euclidean length. Three local searches improve
an embedding: per-layer reassignment by matching, rewiring children of equal
weight, and pairwise parent swaps that keep capacities intact.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .matching import min_cost_assignment
from .model import FormatError, Instance, LayerSpec, LayerTree, Node, tree_to_obj, verify_tree

HEURISTICS = ("layerwise", "equal-weight", "general")
REL_TOL = 1e-9


class CatalogError(ValueError):
    """No cable in the catalogue can carry the requested load."""


@dataclass(frozen=True)
class Cable:
    max_load: int
    cost_per_unit: float


def canonical_cables(cables: Iterable) -> tuple[Cable, ...]:
    """Sort by load and drop every cable that a larger, no more expensive one replaces."""
    items = [c if isinstance(c, Cable) else Cable(int(c[0]), float(c[1])) for c in cables]
    items.sort(key=lambda c: (c.max_load, c.cost_per_unit))
    kept: list[Cable] = []
    for c in reversed(items):
        if kept and (c.cost_per_unit >= kept[-1].cost_per_unit or c.max_load == kept[-1].max_load):
            continue
        kept.append(c)
    return tuple(reversed(kept))


def cable_cost(table: Sequence[Cable], w: int) -> float:
    """Cost per unit length of the cheapest cable able to carry ``w`` leaves."""
    if w < 1:
        raise ValueError(f"load must be positive, got {w}")
    table = canonical_cables(table)
    k = bisect.bisect_left([c.max_load for c in table], w)
    if k == len(table):
        raise CatalogError(f"no cable carries a load of {w}")
    return table[k].cost_per_unit


@dataclass(frozen=True)
class LayerGraph:
    """Positions for layers ``0..lam`` (layer 0 are the sources) plus capacities and cables."""

    positions: tuple[np.ndarray, ...]
    caps: tuple[tuple[int, int], ...]  # layers 1..lam
    cables: tuple[Cable, ...]

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(np.asarray(p, dtype=float).reshape(-1, 2) for p in self.positions))
        object.__setattr__(self, "cables", canonical_cables(self.cables))
        if len(self.positions) != len(self.caps) + 1:
            raise ValueError("need positions for every layer including the sources")
        if not self.cables:
            raise CatalogError("empty cable catalogue")
        if self.cables[-1].max_load < self.n0:
            raise CatalogError(f"largest cable carries {self.cables[-1].max_load} < {self.n0} sources")

    @property
    def lam(self) -> int:
        return len(self.caps)

    @property
    def n0(self) -> int:
        return len(self.positions[0])

    def instance(self) -> Instance:
        """The capacity skeleton: one available vertex per position."""
        return Instance(self.n0, tuple(LayerSpec(len(p), lo, hi) for p, (lo, hi) in zip(self.positions[1:], self.caps)))

    def cost_table(self, max_w: int) -> np.ndarray:
        loads = np.array([c.max_load for c in self.cables])
        costs = np.array([c.cost_per_unit for c in self.cables])
        w = np.arange(max_w + 1)
        k = np.searchsorted(loads, np.maximum(w, 1))
        out = np.full(max_w + 1, np.inf)
        ok = k < len(loads)
        out[ok] = costs[k[ok]]
        return out


def read_graph(data) -> LayerGraph:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("version") != 1:
        raise FormatError("expected a version 1 layer graph object")
    try:
        layers = obj["layers"]
        positions = [obj["sources"]] + [layer["positions"] for layer in layers]
        caps = tuple((int(layer["cap_lo"]), int(layer["cap_hi"])) for layer in layers)
        cables = [Cable(int(c["max_load"]), float(c["cost_per_unit"])) for c in obj["cables"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"missing or malformed field: {exc}") from None
    if not layers:
        raise FormatError("a layer graph needs at least one layer")
    return LayerGraph(tuple(positions), caps, tuple(cables))


def graph_to_obj(graph: LayerGraph) -> dict:
    return {
        "version": 1,
        "sources": graph.positions[0].tolist(),
        "layers": [{"cap_lo": lo, "cap_hi": hi, "positions": p.tolist()}
                   for (lo, hi), p in zip(graph.caps, graph.positions[1:])],
        "cables": [{"max_load": c.max_load, "cost_per_unit": c.cost_per_unit} for c in graph.cables],
    }


@dataclass(frozen=True)
class Embedding:
    """``layers[i][node_id]`` is the position index of that node within layer ``i``."""

    layers: tuple[dict, ...]

    def check(self, graph: LayerGraph, tree: LayerTree):
        for i, (layer, m) in enumerate(zip(tree.layers, self.layers)):
            ids = {nd.id for nd in layer}
            if set(m) != ids:
                raise ValueError(f"layer {i}: embedding does not cover exactly the tree nodes")
            used = list(m.values())
            if len(set(used)) != len(used):
                raise ValueError(f"layer {i}: two nodes share a position")
            if any(not 0 <= p < len(graph.positions[i]) for p in used):
                raise ValueError(f"layer {i}: position index out of range")


def initial_embedding(graph: LayerGraph, tree: LayerTree) -> Embedding:
    """Nodes in increasing id order take positions ``0, 1, ..`` of their layer."""
    if tree.lam != graph.lam:
        raise ValueError(f"tree has {tree.lam} layers above the sources, graph has {graph.lam}")
    out = []
    for i, layer in enumerate(tree.layers):
        ids = sorted(nd.id for nd in layer)
        if len(ids) > len(graph.positions[i]):
            raise ValueError(f"layer {i}: {len(ids)} nodes but only {len(graph.positions[i])} positions")
        out.append({nid: k for k, nid in enumerate(ids)})
    return Embedding(tuple(out))


def layout_cost(graph: LayerGraph, tree: LayerTree, emb: Embedding) -> float:
    return _Layout(graph, tree, emb).cost()


# ------------------------------------------------------------ mutable working state


class _Layout:
    """Index-based copy of a tree and its embedding that the heuristics edit in place."""

    def __init__(self, graph: LayerGraph, tree: LayerTree, emb: Embedding):
        self.graph = graph
        self.lam = tree.lam
        self.ids = [[nd.id for nd in layer] for layer in tree.layers]
        self.parent = [np.asarray(p, dtype=np.int64) for p in tree.parent_indices()]
        self.pos = [np.array([emb.layers[i][nid] for nid in ids], dtype=np.int64) for i, ids in enumerate(self.ids)]
        self.table = graph.cost_table(graph.n0)
        inst = graph.instance()
        self.lo, self.hi = inst.lo, inst.hi
        self.reweigh()

    def reweigh(self):
        w = [np.ones(len(self.ids[0]), dtype=np.int64)]
        for i in range(1, self.lam + 1):
            w.append(np.bincount(self.parent[i - 1], weights=w[-1], minlength=len(self.ids[i])).astype(np.int64))
        self.w = w

    def xy(self, i: int) -> np.ndarray:
        return self.graph.positions[i][self.pos[i]]

    def edge_costs(self, i: int) -> np.ndarray:
        """Cost of every edge from layer ``i`` to layer ``i + 1``."""
        d = np.linalg.norm(self.xy(i) - self.xy(i + 1)[self.parent[i]], axis=1)
        return self.table[self.w[i]] * d

    def cost(self) -> float:
        return float(sum(self.edge_costs(i).sum() for i in range(self.lam)))

    def tree(self) -> LayerTree:
        layers = []
        for i, ids in enumerate(self.ids):
            if i == self.lam:
                layers.append(tuple(Node(nid, None) for nid in ids))
            else:
                up = self.ids[i + 1]
                layers.append(tuple(Node(nid, up[p]) for nid, p in zip(ids, self.parent[i])))
        return LayerTree(tuple(layers))

    def embedding(self) -> Embedding:
        return Embedding(tuple({nid: int(p) for nid, p in zip(ids, pos)} for ids, pos in zip(self.ids, self.pos)))

    def assert_valid(self, inst: Instance):
        report = verify_tree(inst, self.tree())
        assert report.ok, report.violations
        for i, p in enumerate(self.pos):
            assert len(set(p.tolist())) == len(p), f"layer {i} embedding not injective"


def _threshold(cost: float) -> float:
    return REL_TOL * max(cost, 1e-300)


# ------------------------------------------------------------ layer-wise matching


def _layer_matrix(st: _Layout, i: int) -> np.ndarray:
    """Cost of placing each node of layer ``i`` at each position of that layer."""
    cand = st.graph.positions[i]
    costs = np.zeros((len(st.ids[i]), len(cand)))
    if i < st.lam:
        up = st.xy(i + 1)[st.parent[i]]
        d = np.linalg.norm(cand[None, :, :] - up[:, None, :], axis=2)
        costs += st.table[st.w[i]][:, None] * d
    if i > 0:
        kids = st.xy(i - 1)
        d = np.linalg.norm(kids[:, None, :] - cand[None, :, :], axis=2)
        kc = st.table[st.w[i - 1]][:, None] * d
        np.add.at(costs, st.parent[i - 1], kc)
    return costs


def _local_cost(st: _Layout, i: int) -> float:
    total = 0.0
    if i < st.lam:
        total += st.edge_costs(i).sum()
    if i > 0:
        total += st.edge_costs(i - 1).sum()
    return float(total)


def _layerwise(st: _Layout) -> float:
    """Repeatedly apply the single most improving layer reassignment; returns the total gain."""
    gained = 0.0
    while True:
        best = None
        cost = st.cost()
        for i in range(st.lam + 1):
            if i == st.lam and len(st.graph.positions[i]) == 1:
                continue
            if len(st.ids[i]) == len(st.graph.positions[i]) == 1:
                continue
            cols, total = min_cost_assignment(_layer_matrix(st, i))
            gain = _local_cost(st, i) - total
            if gain > _threshold(cost) and (best is None or gain > best[0]):
                best = (gain, i, cols)
        if best is None:
            return gained
        gain, i, cols = best
        st.pos[i] = np.asarray(cols, dtype=np.int64)
        gained += gain


def improve_layerwise(graph: LayerGraph, tree: LayerTree, emb: Embedding) -> tuple[Embedding, float]:
    st = _Layout(graph, tree, emb)
    gained = _layerwise(st)
    return st.embedding(), gained


# ------------------------------------------------------------ equal-weight rewiring


def _equal_weight(st: _Layout) -> float:
    gained = 0.0
    for i in range(st.lam):
        kids_xy = st.xy(i)
        up_xy = st.xy(i + 1)
        for wt in np.unique(st.w[i]).tolist():
            members = np.flatnonzero(st.w[i] == wt)
            if len(members) < 2:
                continue
            slots = np.sort(st.parent[i][members])
            if slots[0] == slots[-1]:
                continue
            d = np.linalg.norm(kids_xy[members][:, None, :] - up_xy[slots][None, :, :], axis=2)
            costs = st.table[wt] * d
            cols, total = min_cost_assignment(costs)
            now = float(st.table[wt] * np.linalg.norm(kids_xy[members] - up_xy[st.parent[i][members]], axis=1).sum())
            if now - total > _threshold(st.cost()):
                st.parent[i][members] = slots[np.asarray(cols)]
                gained += now - total
    return gained


def improve_equal_weight_swaps(graph: LayerGraph, tree: LayerTree, emb: Embedding) -> LayerTree:
    st = _Layout(graph, tree, emb)
    _equal_weight(st)
    return st.tree()


# ------------------------------------------------------------ general parent swaps


def _climb(st: _Layout, i: int, a: int, b: int):
    """Ancestor chains of nodes ``a`` and ``b`` of layer ``i``, each stopping below their meeting point."""
    left, right = [], []
    j = i
    while a != b:
        left.append((j, a))
        right.append((j, b))
        if j == st.lam:
            break
        a, b = int(st.parent[j][a]), int(st.parent[j][b])
        j += 1
    return left, right


def _shift(st: _Layout, chain, delta: int):
    """Validity and cost change of adding ``delta`` leaves along ``chain``."""
    lo, hi = st.lo, st.hi
    change = 0.0
    for j, v in chain:
        nw = int(st.w[j][v]) + delta
        if nw < max(lo[j], 1) or nw > hi[j]:
            return False, 0.0
        if j < st.lam:
            p = st.parent[j][v]
            d = float(np.linalg.norm(st.graph.positions[j][st.pos[j][v]] - st.graph.positions[j + 1][st.pos[j + 1][p]]))
            change += (st.table[nw] - st.table[st.w[j][v]]) * d
    return True, change


def _general(st: _Layout) -> float:
    gained = 0.0
    for i in range(st.lam - 1):
        while True:
            m = len(st.ids[i])
            if m < 2:
                break
            par = st.parent[i]
            xy = st.xy(i)
            pxy = st.xy(i + 1)
            c = st.table[st.w[i]]
            # base[a, b]: edge cost change when a moves under b's parent and b under a's
            d_cross = np.linalg.norm(xy[:, None, :] - pxy[par][None, :, :], axis=2)
            d_own = np.diagonal(d_cross).copy()
            move = c[:, None] * (d_cross - d_own[:, None])
            base = move + move.T
            aa, bb = np.nonzero(np.triu(par[:, None] != par[None, :], 1))
            if len(aa) == 0:
                break
            delta = st.w[i][bb] - st.w[i][aa]
            keys = np.stack([par[aa], par[bb], delta], axis=1)
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            extra = np.empty(len(uniq))
            for k, (p1, p2, dl) in enumerate(uniq.tolist()):
                if dl == 0:
                    extra[k] = 0.0
                    continue
                left, right = _climb(st, i + 1, p1, p2)
                ok1, c1 = _shift(st, left, dl)
                ok2, c2 = _shift(st, right, -dl) if ok1 else (False, 0.0)
                extra[k] = c1 + c2 if ok2 else np.inf
            total = base[aa, bb] + extra[inv.reshape(-1)]
            k = int(np.argmin(total))
            if not total[k] < -_threshold(st.cost()):
                break
            a, b = int(aa[k]), int(bb[k])
            par[a], par[b] = par[b], par[a]
            st.reweigh()
            gained -= float(total[k])
    return gained


def improve_general_swaps(graph: LayerGraph, tree: LayerTree, emb: Embedding) -> LayerTree:
    st = _Layout(graph, tree, emb)
    _general(st)
    return st.tree()


# ------------------------------------------------------------ driver


@dataclass
class OptimizeResult:
    tree: LayerTree
    embedding: Embedding
    trace: list[float]
    passes: int


def optimize(graph: LayerGraph, tree: LayerTree, emb: Embedding,
             heuristics: Sequence[str] = HEURISTICS, check: bool = True,
             max_passes: Optional[int] = None) -> OptimizeResult:
    """Run the enabled heuristics in order, pass after pass, until a pass changes nothing.

    ``trace`` starts with the initial cost and gets one entry per heuristic
    run. With ``check`` the tree and embedding are validated after every run.
    """
    unknown = set(heuristics) - set(HEURISTICS)
    if unknown:
        raise ValueError(f"unknown heuristics: {', '.join(sorted(unknown))}")
    emb.check(graph, tree)
    st = _Layout(graph, tree, emb)
    inst = graph.instance()
    if check:
        st.assert_valid(inst)
    steps = {"layerwise": _layerwise, "equal-weight": _equal_weight, "general": _general}
    trace = [st.cost()]
    passes = 0
    while max_passes is None or passes < max_passes:
        passes += 1
        changed = False
        for name in HEURISTICS:
            if name not in heuristics:
                continue
            if steps[name](st) > 0:
                changed = True
            if check:
                st.assert_valid(inst)
            trace.append(st.cost())
        if not changed:
            break
    return OptimizeResult(st.tree(), st.embedding(), trace, passes)


def layout_obj(graph: LayerGraph, tree: LayerTree, emb: Embedding, trace: Optional[list] = None) -> dict:
    obj = tree_to_obj(tree, [{nid: {"position": p} for nid, p in m.items()} for m in emb.layers])
    obj["total_cost"] = layout_cost(graph, tree, emb)
    if trace is not None:
        obj["cost_trace"] = trace
    return obj
