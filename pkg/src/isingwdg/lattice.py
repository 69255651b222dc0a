"""Geometry of Z^d: boxes, L1 distance, neighbor/edge enumeration, boundary sets.

Sites are plain tuples of ints; the dimension lives in the Box (one validation
point instead of per-site checks in hot loops). Site enumeration inside a box
is lexicographic, so every downstream output is reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterator, Sequence

Site = tuple  # integer coordinate tuple, length = dimension


def l1_distance(a: Site, b: Site) -> int:
    """Graph (L1) distance between two sites of Z^d."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return sum(abs(x - y) for x, y in zip(a, b))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi] in Z^d with inclusive corners."""

    lo: Site
    hi: Site

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("corner dimensions differ")
        if len(self.lo) < 1:
            raise ValueError("dimension must be >= 1")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty box: lo={self.lo} hi={self.hi}")
        object.__setattr__(self, "lo", tuple(int(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(int(c) for c in self.hi))

    @classmethod
    def centered(cls, n: int, d: int) -> "Box":
        """The cube [-n, n]^d with (2n+1)^d sites."""
        if n < 0 or d < 1:
            raise ValueError("need n >= 0 and d >= 1")
        return cls((-n,) * d, (n,) * d)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def side_lengths(self) -> tuple:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def n_sites(self) -> int:
        return math.prod(self.side_lengths)

    @cached_property
    def _sites(self) -> tuple:
        ranges = [range(l, h + 1) for l, h in zip(self.lo, self.hi)]
        return tuple(product(*ranges))

    def sites(self) -> tuple:
        """All sites in lexicographic order (first coordinate slowest)."""
        return self._sites

    @cached_property
    def site_index(self) -> dict:
        return {s: k for k, s in enumerate(self._sites)}

    def contains(self, site: Site) -> bool:
        return all(l <= c <= h for c, l, h in zip(site, self.lo, self.hi))

    def neighbors(self, site: Site) -> Iterator[Site]:
        """The 2d nearest neighbors of a site in Z^d (not restricted to the box)."""
        for k in range(len(site)):
            for step in (-1, 1):
                yield site[:k] + (site[k] + step,) + site[k + 1:]


def _canonical_edge(a: Site, b: Site) -> tuple:
    return (a, b) if a <= b else (b, a)


def interior_edges(box: Box) -> list:
    """All nearest-neighbor pairs {i, j} with both endpoints inside the box."""
    edges = []
    for site in box.sites():
        for k in range(box.dimension):
            nb = site[:k] + (site[k] + 1,) + site[k + 1:]
            if box.contains(nb):
                edges.append((site, nb))
    return edges


def boundary_edges(box: Box) -> list:
    """All nearest-neighbor pairs with at least one endpoint inside the box.

    This is the interior edges plus the edges crossing the box boundary
    (inside endpoint listed first for crossing edges).
    """
    edges = list(interior_edges(box))
    for site in box.sites():
        for nb in box.neighbors(site):
            if not box.contains(nb):
                edges.append((site, nb))
    return edges


def crossing_edges(box: Box) -> list:
    """Edges with exactly one endpoint in the box, inside endpoint first."""
    return [e for e in boundary_edges(box) if not box.contains(e[1])]


def exterior_neighbor_counts(box: Box) -> list:
    """Per-site number of neighbors outside the box, in lexicographic site order."""
    counts = []
    for site in box.sites():
        counts.append(sum(1 for nb in box.neighbors(site) if not box.contains(nb)))
    return counts


def sphere_count_upper_bound(d: int, y: int) -> int:
    """Upper bound 2^d * C(d+y-1, d-1) on the number of sites at L1 distance y.

    The bound statement counts sign choices for coordinates that may be zero,
    so it overcounts; it is guaranteed >= the exact sphere size. Python ints
    are arbitrary precision, so the result is exact (no silent wraparound).
    """
    if d < 1 or y < 1:
        raise ValueError("need d >= 1 and y >= 1")
    return (2 ** d) * math.comb(d + y - 1, d - 1)


def validate_sites(sites: Sequence[Site], dimension: int | None = None) -> list:
    """Check a site collection is nonempty with one common dimension."""
    out = [tuple(int(c) for c in s) for s in sites]
    if not out:
        raise ValueError("empty site collection")
    d = dimension if dimension is not None else len(out[0])
    for s in out:
        if len(s) != d:
            raise ValueError(f"dimension mismatch in site {s}: expected {d}")
    return out
