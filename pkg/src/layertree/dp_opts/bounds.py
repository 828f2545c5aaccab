"""Upper bounds on the number of leaves a residual instance can still connect."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..model import Instance


def two_layer_bound(n_i: int, u_i: int, n_j: int, u_j: int) -> int:
    """Max leaves of a valid tree given two layers ``i < j`` (counts and upper caps)."""
    q, r = divmod(u_j, u_i)
    return min(n_i * u_i, n_j * u_j, q * u_i * n_j + r * max(0, n_i - n_j * q))


def lower_cap_bound(n_i: int, u_i: int, n_j: int, u_j: int, l_j: int) -> Optional[int]:
    """Extra bound when full-weight children alone cannot reach ``l_j``; ``None`` if not triggered."""
    if (u_j // u_i) * u_i < l_j:
        return u_j * (n_i // -(-u_j // u_i))
    return None


def instance_bound(inst: Instance) -> int:
    """Smallest pairwise bound over consecutive layers of the whole instance."""
    n, lo, hi = inst.n, inst.lo, inst.hi
    best = n[1] * hi[1]
    for i in range(1, inst.lam):
        j = i + 1
        best = min(best, two_layer_bound(n[i], hi[i], n[j], hi[j]))
        extra = lower_cap_bound(n[i], hi[i], n[j], hi[j], lo[j])
        if extra is not None:
            best = min(best, extra)
    return best


def residual_counts(inst: Instance, vec) -> tuple:
    """Vertices left per layer after committing ``vec``: layers with ``a_i > 1`` lose ``a_i``."""
    return tuple(c - a if a > 1 else c for c, a in zip(inst.n, vec))


def prune(inst: Instance, vec) -> bool:
    """True if the partial solution ``vec`` provably cannot be extended to ``n0`` leaves.

    Bounds are evaluated on residual counts for each consecutive layer pair.
    For the pair straddling the branching layer the lower-capacity bound gets
    one extra parent: the path vertex directly above the branching layer may
    still absorb up to ``u_j - a_0`` further leaves.
    """
    remaining = inst.n0 - vec[0]
    if remaining <= 0:
        return False
    n, lo, hi = inst.n, inst.lo, inst.hi
    res = residual_counts(inst, vec)
    for i in range(1, inst.lam):
        j = i + 1
        if two_layer_bound(res[i], hi[i], res[j], hi[j]) < remaining:
            return True
        extra = lower_cap_bound(res[i], hi[i], res[j], hi[j], lo[j])
        if extra is not None:
            if vec[i] > 1 and vec[j] == 1:
                extra += max(0, hi[j] - vec[0])
            if extra < remaining:
                return True
    return False


def prune_mask(inst: Instance, vecs: np.ndarray, leaves: int) -> np.ndarray:
    """Vectorized :func:`prune` for many vectors sharing the leaf count ``leaves``."""
    remaining = inst.n0 - leaves
    out = np.zeros(len(vecs), dtype=bool)
    if remaining <= 0 or not len(vecs):
        return out
    n, lo, hi = inst.n, inst.lo, inst.hi
    for i in range(1, inst.lam):
        j = i + 1
        ai, aj = vecs[:, i], vecs[:, j]
        ri = np.where(ai > 1, n[i] - ai, n[i])
        rj = np.where(aj > 1, n[j] - aj, n[j])
        q, r = divmod(hi[j], hi[i])
        tb = np.minimum(np.minimum(ri * hi[i], rj * hi[j]),
                        q * hi[i] * rj + r * np.maximum(0, ri - rj * q))
        out |= tb < remaining
        if q * hi[i] < lo[j]:
            extra = hi[j] * (ri // -(-hi[j] // hi[i]))
            extra = extra + np.where((ai > 1) & (aj == 1), max(0, hi[j] - leaves), 0)
            out |= extra < remaining
    return out
