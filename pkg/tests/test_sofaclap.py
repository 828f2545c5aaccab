import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from layertree.dp_opts import solve
from layertree.generator import GenParams, generate_geometric
from layertree.model import LayerTree, verify_tree
from layertree.sofaclap import (Cable, CatalogError, Embedding, LayerGraph, cable_cost,
                                canonical_cables, graph_to_obj, improve_equal_weight_swaps,
                                improve_general_swaps, improve_layerwise, initial_embedding,
                                layout_cost, layout_obj, optimize, read_graph)

TABLE = [Cable(5, 1.0), Cable(10, 2.5)]


def graph(positions, caps, cables=((100, 1.0),)):
    return LayerGraph(tuple(positions), tuple(caps), tuple(Cable(*c) for c in cables))


def test_cable_cost():
    assert cable_cost(TABLE, 3) == 1.0
    assert cable_cost(TABLE, 7) == 2.5
    with pytest.raises(CatalogError):
        cable_cost(TABLE, 11)
    with pytest.raises(ValueError):
        cable_cost(TABLE, 0)


def test_canonical_cables_drops_dominated():
    table = canonical_cables([(10, 2.0), (5, 3.0), (5, 1.0), (20, 2.0)])
    assert table == (Cable(5, 1.0), Cable(20, 2.0))


def test_graph_needs_big_enough_cable():
    with pytest.raises(CatalogError):
        graph([[(0, 0)] * 3, [(0, 0)]], [(0, 3)], cables=((2, 1.0),))


def test_layout_cost_examples():
    g = graph([[(0, 0)] * 3, [(0, 0)], [(3, 4)]], [(0, 3), (0, 3)], cables=((5, 1.0),))
    tree = LayerTree.from_parents([[0, 0, 0], [0], [-1]])
    assert layout_cost(g, tree, initial_embedding(g, tree)) == pytest.approx(5.0)
    flat = graph([[(1, 1)] * 2, [(1, 1)], [(1, 1)]], [(0, 2), (0, 2)])
    t2 = LayerTree.from_parents([[0, 0], [0], [-1]])
    assert layout_cost(flat, t2, initial_embedding(flat, t2)) == 0.0
    path = graph([[(0, 0)], [(1, 0)], [(2, 0)]], [(0, 1), (0, 1)], cables=((1, 1.0),))
    t3 = LayerTree.from_parents([[0], [0], [-1]])
    assert layout_cost(path, t3, initial_embedding(path, t3)) == pytest.approx(2.0)


def test_initial_embedding():
    g = graph([[(0, 0)] * 2, [(0, 0), (1, 1), (2, 2)], [(0, 0)]], [(0, 2), (0, 2)])
    tree = LayerTree.from_parents([[0, 1], [0, 0], [-1]])
    emb = initial_embedding(g, tree)
    assert emb.layers[0] == {0: 0, 1: 1} and emb.layers[1] == {0: 0, 1: 1}
    small = graph([[(0, 0)] * 2, [(0, 0)], [(0, 0)]], [(0, 2), (0, 2)])
    with pytest.raises(ValueError):
        initial_embedding(small, tree)


def crossed():
    # two leaves, two middle vertices placed on the wrong sides, one root
    g = graph([[(0, 0), (10, 0)], [(10, 1), (0, 1)], [(5, 5)]], [(0, 1), (0, 2)])
    tree = LayerTree.from_parents([[0, 1], [0, 0], [-1]])
    return g, tree


def test_layerwise_swaps_crossed_pair():
    g, tree = crossed()
    emb = initial_embedding(g, tree)
    alt = Embedding((emb.layers[0], {0: 1, 1: 0}, emb.layers[2]))
    best = min(layout_cost(g, tree, emb), layout_cost(g, tree, alt))
    new, gain = improve_layerwise(g, tree, emb)
    assert layout_cost(g, tree, new) == pytest.approx(best)
    assert gain == pytest.approx(layout_cost(g, tree, emb) - best)
    again, zero = improve_layerwise(g, tree, new)
    assert zero == 0 and again == new


def test_layerwise_single_nodes_unchanged():
    g = graph([[(0, 0)], [(3, 3)], [(1, 1)]], [(0, 1), (0, 1)])
    tree = LayerTree.from_parents([[0], [0], [-1]])
    emb = initial_embedding(g, tree)
    assert improve_layerwise(g, tree, emb) == (emb, 0.0)


def test_layerwise_uses_free_positions():
    g = graph([[(0, 0)], [(50, 50), (0, 1)], [(0, 2)]], [(0, 1), (0, 1)])
    tree = LayerTree.from_parents([[0], [0], [-1]])
    new, _ = improve_layerwise(g, tree, initial_embedding(g, tree))
    assert new.layers[1] == {0: 1}


def equal_weight_case():
    # leaves of A sit left, leaves of B right; A hangs under the right parent and B under the left one
    src = [(0, 0), (0, 0), (10, 0), (10, 0)]
    mid = [(0, 1), (10, 1)]
    par = [(10, 2), (0, 2)]
    g = graph([src, mid, par, [(5, 9)]], [(0, 2), (0, 2), (0, 4)])
    tree = LayerTree.from_parents([[0, 0, 1, 1], [0, 1], [0, 0], [-1]])
    return g, tree


def test_equal_weight_uncrosses():
    g, tree = equal_weight_case()
    emb = initial_embedding(g, tree)
    new = improve_equal_weight_swaps(g, tree, emb)
    assert new.parent_indices()[1] == [1, 0]
    alt_cost = layout_cost(g, LayerTree.from_parents([[0, 0, 1, 1], [1, 0], [0, 0], [-1]]), emb)
    assert layout_cost(g, new, emb) == pytest.approx(min(alt_cost, layout_cost(g, tree, emb)))
    assert sorted(new.weights()[2]) == sorted(tree.weights()[2])
    assert improve_equal_weight_swaps(g, new, emb).parent_indices() == new.parent_indices()


def general_case(u2):
    # v1 (weight 1) under p1 on the right, v2 (weight 2) under p2 on the left: crossing edges
    src = [(0, 0), (10, 0), (10, 0), (10, 0)]
    mid = [(0, 1), (10, 1), (10, 1)]
    par = [(10, 2), (0, 2)]
    g = graph([src, mid, par, [(5, 9)]], [(0, 2), (0, u2), (0, 4)])
    # layer-1 nodes: 0 = v1 (leaf 0), 1 = v2 (leaves 1, 2), 2 = filler (leaf 3)
    tree = LayerTree.from_parents([[0, 1, 1, 2], [0, 1, 0], [0, 0], [-1]])
    return g, tree


def test_general_swap_applied_with_slack():
    g, tree = general_case(u2=4)
    emb = initial_embedding(g, tree)
    before = layout_cost(g, tree, emb)
    new = improve_general_swaps(g, tree, emb)
    assert new.parent_indices()[1] != tree.parent_indices()[1]
    assert verify_tree(g.instance(), new).ok
    assert layout_cost(g, new, emb) < before


def test_general_swap_rejected_at_upper_cap():
    g, tree = general_case(u2=2)
    emb = initial_embedding(g, tree)
    # p1 holds v1 and the filler at weight 2 = u_2; taking v2 instead would give 3
    new = improve_general_swaps(g, tree, emb)
    assert new.parent_indices()[1] == tree.parent_indices()[1]


def test_general_swap_equal_weights_reduce_to_exchange():
    g, tree = equal_weight_case()
    emb = initial_embedding(g, tree)
    new = improve_general_swaps(g, tree, emb)
    assert new.parent_indices()[1] == [1, 0]


def _geom(seed, index, n0=(15, 40), lam=3):
    p = GenParams(lam, n0, (Fraction(2), Fraction(3)), seed=seed)
    return read_graph(json.dumps(generate_geometric(p, index)))


def test_optimize_monotone_and_valid():
    done = 0
    for i in range(12):
        g = _geom(4, i)
        d = solve(g.instance())
        if not d.feasible:
            continue
        res = optimize(g, d.tree, initial_embedding(g, d.tree))
        assert all(b <= a + 1e-9 * a for a, b in zip(res.trace, res.trace[1:]))
        assert verify_tree(g.instance(), res.tree).ok
        res.embedding.check(g, res.tree)
        assert layout_cost(g, res.tree, res.embedding) == pytest.approx(res.trace[-1])
        again = optimize(g, res.tree, res.embedding)
        assert again.passes == 1 and again.trace[-1] == pytest.approx(res.trace[-1])
        done += 1
    assert done >= 5


def test_heuristic_subsets():
    g = _geom(5, 0)
    d = solve(g.instance())
    emb = initial_embedding(g, d.tree)
    full = optimize(g, d.tree, emb).trace[-1]
    for subset in (("layerwise",), ("equal-weight",), ("general",)):
        res = optimize(g, d.tree, emb, subset)
        assert res.trace[-1] <= res.trace[0]
    with pytest.raises(ValueError):
        optimize(g, d.tree, emb, ("nope",))
    assert full <= optimize(g, d.tree, emb, ()).trace[-1]


def exhaustive_optimum(g: LayerGraph) -> float:
    """Cheapest layout for a two-layer graph: every source picks a middle position, all meet at one root."""
    src, mid, top = g.positions
    (lo1, hi1), (lo2, hi2) = g.caps
    n0 = len(src)
    table = g.cost_table(n0)
    best = math.inf
    for choice in itertools.product(range(len(mid)), repeat=n0):
        w = np.bincount(choice, minlength=len(mid))
        used = np.flatnonzero(w)
        if ((w[used] < max(lo1, 1)) | (w[used] > hi1)).any():
            continue
        if not max(lo2, 1) <= n0 <= hi2:
            continue
        base = sum(table[1] * np.linalg.norm(src[j] - mid[c]) for j, c in enumerate(choice))
        for r in range(len(top)):
            up = sum(table[w[p]] * np.linalg.norm(mid[p] - top[r]) for p in used)
            best = min(best, base + up)
    return best


def test_small_instances_close_to_optimum():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(25):
        n0 = int(rng.integers(2, 6))
        m1 = int(rng.integers(1, 5))
        m2 = int(rng.integers(1, 3))
        hi1 = int(rng.integers(1, n0 + 1))
        g = graph([rng.random((n0, 2)) * 10, rng.random((m1, 2)) * 10, rng.random((m2, 2)) * 10],
                  [(0, hi1), (0, n0)], cables=((2, 1.0), (n0, 1.5)))
        d = solve(g.instance())
        if not d.feasible:
            continue
        res = optimize(g, d.tree, initial_embedding(g, d.tree))
        opt = exhaustive_optimum(g)
        assert opt - 1e-9 <= res.trace[-1] <= 3 * opt + 1e-9
        checked += 1
    assert checked >= 10


def test_layout_json_roundtrip():
    g = _geom(6, 1)
    d = solve(g.instance())
    emb = initial_embedding(g, d.tree)
    obj = layout_obj(g, d.tree, emb, [1.0])
    assert obj["total_cost"] == pytest.approx(layout_cost(g, d.tree, emb))
    assert all("position" in nd for layer in obj["layers"] for nd in layer)
    assert read_graph(json.dumps(graph_to_obj(g))).instance() == g.instance()
