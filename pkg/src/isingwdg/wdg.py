"""Weighted graphs over (possibly infinite) vertex domains: maximum-weight
spanning trees of induced multiset subgraphs, graph powers, weighted degrees,
and the cumulant-bound inequality checker.

Graphs are represented by their symmetric weight function plus whatever finite
restriction the caller enumerates; Z^d cannot be materialized. Tree weight is
the PRODUCT of edge weights; maximization runs on sums of logs (with -inf for
zero weights) so standard MST code applies without underflow. Duplicated
multiset vertices attach through weight-1 edges, so the maximum weight of a
multiset equals that of its support set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .lattice import Box, Site, l1_distance


@dataclass(frozen=True)
class IsingWdgSpec:
    """Decay base epsilon in (0,1) and the lattice dimension."""

    epsilon: float
    d: int

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie strictly between 0 and 1")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")


class SignedSite(NamedTuple):
    site: Site
    sign: int


@dataclass(frozen=True)
class WeightedGraph:
    """A symmetric weight function vertex x vertex -> [0, 1]."""

    weight: Callable
    description: str = ""


def ising_spin_graph(spec: IsingWdgSpec) -> WeightedGraph:
    """Complete graph on Z^d with weight epsilon^(dist/2)."""
    eps = spec.epsilon

    def w(a, b):
        return eps ** (l1_distance(a, b) / 2.0)

    return WeightedGraph(w, f"ising spins, eps={spec.epsilon}")


def signed_site_graph(spec: IsingWdgSpec) -> WeightedGraph:
    """Graph on Z^d x {+,-}; the sign channel never affects the weight."""
    eps = spec.epsilon

    def w(a, b):
        return eps ** (l1_distance(a[0], b[0]) / 2.0)

    return WeightedGraph(w, f"signed sites, eps={spec.epsilon}")


def max_weight_spanning_tree(graph: WeightedGraph, vertices):
    """(max product of edge weights, tree edges) over the vertex multiset.

    Duplicated vertices are linked by weight-1 edges, so the weight equals the
    maximum over the support; a disconnected support (only through zero
    weights) yields weight 0 with an empty tree.
    """
    vertices = list(vertices)
    if not vertices:
        raise ValueError("need at least one vertex")
    support = sorted(set(vertices))
    counts: dict = {}
    for v in vertices:
        counts[v] = counts.get(v, 0) + 1
    dup_edges = [(v, v) for v, c in sorted(counts.items()) for _ in range(c - 1)]

    k = len(support)
    if k == 1:
        return 1.0, dup_edges

    log_w = np.full((k, k), -math.inf)
    for i in range(k):
        for j in range(i + 1, k):
            w = graph.weight(support[i], support[j])
            if w > 0.0:
                log_w[i, j] = log_w[j, i] = math.log(w)

    in_tree = np.zeros(k, dtype=bool)
    best = np.full(k, -math.inf)
    parent = np.full(k, -1, dtype=np.int64)
    in_tree[0] = True
    best[:] = log_w[0]
    parent[:] = 0
    product = 1.0
    edges = []
    for _ in range(k - 1):
        cand = np.where(~in_tree)[0]
        j = cand[np.argmax(best[cand])]
        if best[j] == -math.inf:
            return 0.0, []
        edges.append((support[parent[j]], support[j]))
        product *= graph.weight(support[parent[j]], support[j])
        in_tree[j] = True
        improve = log_w[j] > best
        improve &= ~in_tree
        best[improve] = log_w[j][improve]
        parent[improve] = j
    return product, edges + dup_edges


def power_graph(graph: WeightedGraph, m: int) -> WeightedGraph:
    """Graph on multisets of at most m vertices with max-over-cross-pair weight.

    Multisets are passed as tuples; shared elements short-circuit to weight 1
    (the diagonal convention w(v, v) = 1).
    """
    if m < 1:
        raise ValueError("power must be >= 1")

    def w(i_set, j_set):
        i_set, j_set = tuple(i_set), tuple(j_set)
        if not 1 <= len(i_set) <= m or not 1 <= len(j_set) <= m:
            raise ValueError(f"multiset size outside 1..{m}")
        if set(i_set) & set(j_set):
            return 1.0
        return max(graph.weight(a, b) for a in i_set for b in j_set)

    return WeightedGraph(w, f"power {m} of ({graph.description})")


def weighted_degree(graph: WeightedGraph, v, restriction) -> float:
    """Sum of w(u, v) over u != v in the finite restriction."""
    return float(sum(graph.weight(u, v) for u in restriction if u != v))


def ising_max_weighted_degree(spec: IsingWdgSpec, box: Box) -> float:
    """max_v sum_{u != v in box} eps^(dist(u,v)/2), computed vectorized."""
    coords = np.asarray(box.sites(), dtype=np.int64)
    sqrt_eps = math.sqrt(spec.epsilon)
    best = 0.0
    for i in range(coords.shape[0]):
        dist = np.abs(coords - coords[i]).sum(axis=1)
        w = np.power(sqrt_eps, dist.astype(np.float64))
        deg = float(w.sum() - 1.0)  # drop the self term
        if deg > best:
            best = deg
    return best


def weighted_degree_series_bound(spec: IsingWdgSpec, tol: float = 1e-14) -> float:
    """Convergent upper bound sum_y 2^d C(d+y-1, d-1) eps^(y/2) on any degree."""
    from .lattice import sphere_count_upper_bound

    sqrt_eps = math.sqrt(spec.epsilon)
    total, y = 0.0, 1
    while True:
        term = sphere_count_upper_bound(spec.d, y) * sqrt_eps ** y
        total += term
        if term < tol and y > 8:
            return total
        y += 1
        if y > 10000:
            raise RuntimeError("degree bound series did not converge")


def fit_epsilon(pair_data) -> float:
    """Fit the decay base from (distance, kappa_2) pairs.

    Least-squares slope of log|kappa_2| against distance gives the per-unit
    decay rho; the edge-weight convention w = eps^(dist/2) means eps = rho^2.
    """
    xs, ys = [], []
    for dist, kappa in pair_data:
        if abs(kappa) > 1e-14 and dist > 0:
            xs.append(float(dist))
            ys.append(math.log(abs(kappa)))
    if len(xs) < 2:
        raise ValueError("need at least two usable pair cumulants")
    slope = np.polyfit(xs, ys, 1)[0]
    if slope >= 0:
        raise ValueError("pair cumulants do not decay with distance")
    eps = math.exp(2.0 * slope)
    return min(eps, 1.0 - 1e-12)


def pair_decay_data(system) -> list:
    """(distance, kappa_2) for all distinct site pairs of an exact system."""
    sites = system.box.sites()
    out = []
    for i, a in enumerate(sites):
        for b in sites[i + 1:]:
            out.append((l1_distance(a, b), system.joint_cumulant([a, b])))
    return out


# ---------------------------------------------------------------------------
# inequality checker

@dataclass
class RBound:
    order: int
    c_r: float
    worst_multiset: tuple
    count: int
    ratios: list = field(repr=False, default_factory=list)

    def histogram(self, bins: int = 10) -> dict:
        counts, edges = np.histogram(self.ratios, bins=bins)
        return {"bin_edges": [float(e) for e in edges],
                "counts": [int(c) for c in counts]}


@dataclass
class WdgInequalityReport:
    epsilon: float
    per_order: dict

    def to_jsonable(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "orders": {
                str(r): {
                    "C_r": b.c_r,
                    "worst_multiset": [list(site) for site in b.worst_multiset],
                    "count": b.count,
                    "ratio_histogram": b.histogram(),
                }
                for r, b in sorted(self.per_order.items())
            },
        }


def check_wdg_inequality(table, graph: WeightedGraph, r_max: int,
                         epsilon: float = float("nan")) -> WdgInequalityReport:
    """Smallest per-order constants C_r with |kappa(B)| <= C_r * MWST(G[B]).

    Scans every multiset in the cumulant table up to size r_max; reports the
    worst multiset and the ratio distribution per order.
    """
    per_order: dict = {}
    for key in table.multisets():
        r = len(key)
        if r > r_max:
            continue
        weight, _ = max_weight_spanning_tree(graph, key)
        kappa = abs(table.get(key).value)
        ratio = math.inf if weight == 0.0 and kappa > 0.0 else (
            0.0 if kappa == 0.0 else kappa / weight)
        bound = per_order.get(r)
        if bound is None:
            bound = RBound(r, -1.0, key, 0, [])
            per_order[r] = bound
        bound.count += 1
        bound.ratios.append(ratio)
        if ratio > bound.c_r:
            bound.c_r = ratio
            bound.worst_multiset = key
    return WdgInequalityReport(epsilon, per_order)
