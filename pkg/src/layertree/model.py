"""Instances, layer trees, normalization, validity checks and file formats.

Layer 0 holds the sources. Its capacities are fixed at ``lo = hi = 1`` and
never stored; ``Instance.lo`` / ``Instance.hi`` expose them at index 0 so
that layer-indexed code can treat every layer uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

U64_MAX = 2**64 - 1


class FormatError(ValueError):
    """Raised for malformed instance or tree files."""


class InconsistentInstance(ValueError):
    """Normalization produced a layer with ``cap_lo > cap_hi``."""

    def __init__(self, layer: int, lo: int, hi: int):
        super().__init__(f"layer {layer}: normalized cap_lo {lo} > cap_hi {hi}")
        self.layer = layer


@dataclass(frozen=True)
class LayerSpec:
    count: int
    cap_lo: int
    cap_hi: int

    def __post_init__(self):
        if min(self.count, self.cap_lo, self.cap_hi) < 0:
            raise ValueError(f"negative value in {self}")
        if self.cap_lo > self.cap_hi:
            raise ValueError(f"cap_lo > cap_hi in {self}")


@dataclass(frozen=True)
class Instance:
    n0: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.n0 < 1:
            raise ValueError("n0 must be positive")
        if not self.layers:
            raise ValueError("an instance needs at least one layer")

    @classmethod
    def from_lists(cls, n: Sequence[int], lo: Sequence[int], hi: Sequence[int]) -> "Instance":
        """Build from ``n = (n0, n1, .., n_lam)`` and per-layer caps for layers 1..lam."""
        if not (len(n) - 1 == len(lo) == len(hi)):
            raise ValueError("length mismatch between counts and capacities")
        return cls(int(n[0]), tuple(LayerSpec(int(c), int(l), int(u)) for c, l, u in zip(n[1:], lo, hi)))

    @property
    def lam(self) -> int:
        return len(self.layers)

    @cached_property
    def n(self) -> tuple[int, ...]:
        return (self.n0,) + tuple(s.count for s in self.layers)

    @cached_property
    def lo(self) -> tuple[int, ...]:
        return (1,) + tuple(s.cap_lo for s in self.layers)

    @cached_property
    def hi(self) -> tuple[int, ...]:
        return (1,) + tuple(s.cap_hi for s in self.layers)

    def is_normalized(self) -> bool:
        n, lo, hi = self.n, self.lo, self.hi
        return all(
            n[i] <= n[i - 1] and lo[i] >= lo[i - 1] and hi[i] >= hi[i - 1]
            for i in range(1, self.lam + 1)
        )


def normalize(inst: Instance) -> Instance:
    """Return the equivalent normalized instance.

    Counts and lower capacities are propagated upwards, upper capacities
    downwards. Raises :class:`InconsistentInstance` when some layer ends up
    with an empty capacity interval (the instance is then infeasible).
    """
    lam = inst.lam
    n = list(inst.n)
    lo = list(inst.lo)
    hi = list(inst.hi)
    for i in range(1, lam + 1):
        n[i] = min(n[i], n[i - 1])
        lo[i] = max(lo[i], lo[i - 1])
    for i in range(lam, 0, -1):
        hi[i - 1] = min(hi[i - 1], hi[i])
    for i in range(lam + 1):
        if lo[i] > hi[i]:
            raise InconsistentInstance(i, lo[i], hi[i])
    return Instance.from_lists(n, lo[1:], hi[1:])


# ---------------------------------------------------------------- layer trees


class Node(NamedTuple):
    id: int
    parent: Optional[int]  # id of a node in the next layer; None for the root


@dataclass(frozen=True)
class LayerTree:
    """A rooted tree whose leaves sit in layer 0 and whose root sits in the top layer.

    ``layers[i]`` holds the nodes of layer ``i``. Construction does not
    validate structure; use :func:`verify_tree` or :func:`read_tree` for that.
    """

    layers: tuple[tuple[Node, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(Node(*nd) for nd in layer) for layer in self.layers))

    @classmethod
    def from_parents(cls, parents: Sequence[Sequence[int]]) -> "LayerTree":
        """Build from per-layer parent *indices*; the top entry must have length 1.

        ``parents[i][j]`` is the index, within layer ``i + 1``, of the parent of
        node ``j`` of layer ``i``. Node ids become list positions.
        """
        layers = []
        top = len(parents) - 1
        for i, layer in enumerate(parents):
            if i == top:
                layers.append(tuple(Node(j, None) for j in range(len(layer))))
            else:
                layers.append(tuple(Node(j, int(p)) for j, p in enumerate(layer)))
        return cls(tuple(layers))

    @property
    def lam(self) -> int:
        return len(self.layers) - 1

    def counts(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)

    def parent_indices(self) -> list[list[int]]:
        """Per-layer parent indices (positions in the next layer); root layer gets -1.

        Raises ``KeyError`` on dangling parents.
        """
        out = []
        for i, layer in enumerate(self.layers):
            if i == self.lam:
                out.append([-1] * len(layer))
                continue
            pos = {nd.id: j for j, nd in enumerate(self.layers[i + 1])}
            out.append([pos[nd.parent] for nd in layer])
        return out

    def weights(self) -> list[list[int]]:
        """Leaf counts below every node, per layer, in node order."""
        par = self.parent_indices()
        w = [[1] * len(self.layers[0])]
        for i in range(1, self.lam + 1):
            acc = [0] * len(self.layers[i])
            for j, p in enumerate(par[i - 1]):
                acc[p] += w[i - 1][j]
            w.append(acc)
        return w

    def canonical(self) -> "LayerTree":
        return LayerTree(tuple(tuple(sorted(layer)) for layer in self.layers))


@dataclass
class VerificationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def verify_tree(inst: Instance, tree: LayerTree) -> VerificationReport:
    """Check ``tree`` against ``inst``; every defect becomes a report entry."""
    v: list[str] = []
    lam = inst.lam
    if tree.lam != lam:
        v.append(f"structure: tree has {tree.lam + 1} layers, instance needs {lam + 1}")
        return VerificationReport(v)
    top = tree.layers[lam]
    if len(top) != 1:
        v.append(f"structure: {len(top)} nodes in root layer (need exactly 1)")
    structural = False
    for i, layer in enumerate(tree.layers):
        ids = [nd.id for nd in layer]
        if len(set(ids)) != len(ids):
            v.append(f"structure: duplicate node id in layer {i}")
            structural = True
        if i == lam:
            if any(nd.parent is not None for nd in layer):
                v.append("structure: root has a parent")
            continue
        above = {nd.id for nd in tree.layers[i + 1]}
        for nd in layer:
            if nd.parent is None:
                v.append(f"structure: orphan node {nd.id} in layer {i}")
                structural = True
            elif nd.parent not in above:
                v.append(f"structure: node {nd.id} in layer {i} has dangling parent {nd.parent}")
                structural = True
    if structural:
        return VerificationReport(v)

    w = tree.weights()
    n, lo, hi = inst.n, inst.lo, inst.hi
    if len(tree.layers[0]) != inst.n0:
        v.append(f"leaves: {len(tree.layers[0])} leaves, instance has {inst.n0} sources")
    for i in range(1, lam + 1):
        if len(tree.layers[i]) > n[i]:
            v.append(f"count: layer {i} uses {len(tree.layers[i])} nodes > n_{i}={n[i]}")
        for nd, wt in zip(tree.layers[i], w[i]):
            if wt == 0:
                v.append(f"structure: node {nd.id} in layer {i} has no leaves")
            elif wt < lo[i]:
                v.append(f"capacity: node {nd.id} in layer {i} has weight {wt} < l_{i}={lo[i]}")
            elif wt > hi[i]:
                v.append(f"capacity: node {nd.id} in layer {i} has weight {wt} > u_{i}={hi[i]}")
    return VerificationReport(v)


# ---------------------------------------------------------------- file formats


def _parse_u64(tok: str, lineno: int) -> int:
    if not tok.isdigit():
        raise FormatError(f"line {lineno}: expected a nonnegative integer, got {tok!r}")
    val = int(tok)
    if val > U64_MAX:
        raise FormatError(f"line {lineno}: value {tok} exceeds 64 bits")
    return val


def read_instance(data: bytes | str) -> Instance:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("line 1: empty input")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "clt":
        raise FormatError("line 1: expected header 'clt 1'")
    if head[1] != "1":
        raise FormatError(f"line 1: unsupported version {head[1]!r}")
    if len(lines) < 2:
        raise FormatError("line 2: missing '<lambda> <n0>' line")
    toks = lines[1].split()
    if len(toks) != 2:
        raise FormatError(f"line 2: expected 2 fields, got {len(toks)}")
    lam, n0 = (_parse_u64(t, 2) for t in toks)
    if lam < 1:
        raise FormatError("line 2: lambda must be at least 1")
    if n0 < 1:
        raise FormatError("line 2: n0 must be positive")
    if len(lines) - 2 != lam:
        raise FormatError(f"line {min(len(lines), lam + 2) + 1}: expected {lam} layer lines, got {len(lines) - 2}")
    specs = []
    for i, line in enumerate(lines[2:], start=3):
        toks = line.split()
        if len(toks) != 3:
            raise FormatError(f"line {i}: expected 3 fields, got {len(toks)}")
        c, lo, hi = (_parse_u64(t, i) for t in toks)
        if lo > hi:
            raise FormatError(f"line {i}: cap_lo {lo} > cap_hi {hi}")
        specs.append(LayerSpec(c, lo, hi))
    return Instance(n0, tuple(specs))


def write_instance(inst: Instance) -> bytes:
    out = [f"clt 1\n{inst.lam} {inst.n0}\n"]
    out.extend(f"{s.count} {s.cap_lo} {s.cap_hi}\n" for s in inst.layers)
    return "".join(out).encode("utf-8")


def tree_to_obj(tree: LayerTree, extra: Optional[list[dict]] = None) -> dict:
    """JSON-ready dict; ``extra[i][id]`` entries are merged into node objects."""
    layers = []
    for i, layer in enumerate(tree.layers):
        nodes = []
        for nd in sorted(layer):
            obj = {"id": nd.id}
            if nd.parent is not None:
                obj["parent"] = nd.parent
            if extra is not None:
                obj.update(extra[i][nd.id])
            nodes.append(obj)
        layers.append(nodes)
    return {"version": 1, "layers": layers}


def write_tree(tree: LayerTree) -> bytes:
    return (json.dumps(tree_to_obj(tree), separators=(",", ":")) + "\n").encode("utf-8")


def read_tree(data: bytes | str) -> LayerTree:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("version") != 1:
        raise FormatError("expected a version 1 tree object")
    raw = obj.get("layers")
    if not isinstance(raw, list) or not raw:
        raise FormatError("'layers' must be a nonempty list")
    top = len(raw) - 1
    layers = []
    for i, layer in enumerate(raw):
        if not isinstance(layer, list):
            raise FormatError(f"layer {i}: expected a list of nodes")
        nodes, seen = [], set()
        for nd in layer:
            if not isinstance(nd, dict) or not isinstance(nd.get("id"), int):
                raise FormatError(f"layer {i}: node without integer id")
            if nd["id"] in seen:
                raise FormatError(f"layer {i}: duplicate node id {nd['id']}")
            seen.add(nd["id"])
            parent = nd.get("parent")
            if i == top and parent is not None:
                raise FormatError(f"layer {i}: root node {nd['id']} refers to parent in layer {i + 1} (out of range)")
            if i < top and parent is None:
                raise FormatError(f"layer {i}: node {nd['id']} has no parent (multiple roots)")
            nodes.append(Node(nd["id"], parent))
        layers.append(tuple(nodes))
    if len(layers[top]) != 1:
        raise FormatError(f"layer {top}: expected exactly one root, found {len(layers[top])}")
    for i in range(top):
        above = {nd.id for nd in layers[i + 1]}
        for nd in layers[i]:
            if nd.parent not in above:
                raise FormatError(f"layer {i}: node {nd.id} has dangling parent {nd.parent}")
    return LayerTree(tuple(layers))
