"""Tree lengths of finite site sets: minimum spanning tree length over the
complete L1-distance graph, and the exact rectilinear Steiner minimal tree
length with auxiliary vertices restricted to the Hanan grid.

The Hanan restriction makes the Steiner search finite and exact for the
rectilinear metric; the exact solver is a Dreyfus-Wagner dynamic program over
(grid vertex, terminal subset) pairs, vectorized over grid vertices. The two
lengths always satisfy steiner <= mst <= 2 * steiner.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from typing import NamedTuple

import numpy as np

from .errors import ResourceCapError
from .lattice import l1_distance, validate_sites

MAX_STEINER_TERMINALS = 8


class TwoFactorResult(NamedTuple):
    steiner: int
    mst: int
    ok: bool


def mst_tree_length(terminals) -> int:
    """Minimum total L1 length of a spanning tree on the terminals alone."""
    pts = sorted(set(validate_sites(terminals)))
    k = len(pts)
    if k == 1:
        return 0
    # Prim; k <= 8 in practice, no need for anything fancier
    in_tree = [False] * k
    best = [None] * k
    in_tree[0] = True
    for j in range(1, k):
        best[j] = l1_distance(pts[0], pts[j])
    total = 0
    for _ in range(k - 1):
        j = min((j for j in range(k) if not in_tree[j]), key=lambda j: best[j])
        total += best[j]
        in_tree[j] = True
        for u in range(k):
            if not in_tree[u]:
                d = l1_distance(pts[j], pts[u])
                if d < best[u]:
                    best[u] = d
    return total


def hanan_grid(terminals) -> list:
    """Coordinatewise cross product of the terminal coordinate values."""
    pts = validate_sites(terminals)
    axes = [sorted({p[k] for p in pts}) for k in range(len(pts[0]))]
    return [tuple(v) for v in product(*axes)]


def steiner_tree_length(terminals) -> int:
    """Exact rectilinear Steiner minimal tree length of the terminal set."""
    pts = sorted(set(validate_sites(terminals)))
    if len(pts) > MAX_STEINER_TERMINALS:
        raise ResourceCapError(
            f"{len(pts)} terminals exceed the exact-solver cap "
            f"{MAX_STEINER_TERMINALS}"
        )
    if len(pts) <= 1:
        return 0
    if len(pts) == 2:
        return l1_distance(pts[0], pts[1])
    # normalize by translation so repeated queries hit the cache
    lo = tuple(min(p[k] for p in pts) for k in range(len(pts[0])))
    key = tuple(tuple(c - l for c, l in zip(p, lo)) for p in pts)
    return _steiner_normalized(key)


@lru_cache(maxsize=1 << 16)
def _steiner_normalized(terminals: tuple) -> int:
    grid = hanan_grid(terminals)
    pts = np.asarray(grid, dtype=np.int64)
    dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    index = {site: i for i, site in enumerate(grid)}
    term_idx = [index[t] for t in terminals]
    root, rest = term_idx[0], term_idx[1:]
    t = len(rest)

    # S[mask][v]: min length of a tree spanning {terminals in mask} + vertex v
    n_vert = len(grid)
    big = np.iinfo(np.int64).max // 4
    s_table = np.full((1 << t, n_vert), big, dtype=np.int64)
    for i in range(t):
        s_table[1 << i] = dist[rest[i]]
    for mask in range(1, 1 << t):
        if mask & (mask - 1) == 0:
            continue
        low = mask & -mask
        merged = np.full(n_vert, big, dtype=np.int64)
        sub = (mask - 1) & mask
        while sub:
            if sub & low:
                np.minimum(merged, s_table[sub] + s_table[mask ^ sub], out=merged)
            sub = (sub - 1) & mask
        # relocate the junction through the metric closure in one min-plus step
        s_table[mask] = (dist + merged[None, :]).min(axis=1)
    return int(s_table[(1 << t) - 1][root])


def check_two_factor(terminals) -> TwoFactorResult:
    """Both tree lengths plus whether steiner <= mst <= 2 * steiner holds."""
    lt = steiner_tree_length(terminals)
    lt_prime = mst_tree_length(terminals)
    return TwoFactorResult(lt, lt_prime, lt <= lt_prime <= 2 * lt)
