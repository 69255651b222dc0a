"""Local and global spin patterns: occurrence indicators, counting statistics
over a box, and the dependency-graph weights their occurrences inherit.

A local pattern is a finite shape around the origin with prescribed signs; an
occurrence at position i matches every translated sign. A global pattern of
size m fixes one total order per axis plus signs; an occurrence is an m-site
set that realizes every ranking (which forces pairwise-distinct coordinates
along each axis) with matching spins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from .errors import ResourceCapError
from .gibbs_exact import BoundaryCondition, SpinConfiguration
from .lattice import Box, Site
from .wdg import IsingWdgSpec, ising_spin_graph, power_graph

_SIGN_CHARS = {"+": 1, "-": -1}
_SIGN_TEXT = {1: "+", -1: "-"}

DEFAULT_GLOBAL_BUDGET = 200_000_000


@dataclass(frozen=True)
class LocalPattern:
    """Finite shape containing the origin plus a sign for each shape site."""

    shape: tuple
    signs: tuple

    def __post_init__(self):
        shape = tuple(tuple(int(c) for c in s) for s in self.shape)
        signs = tuple(int(v) for v in self.signs)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "signs", signs)
        if len(shape) != len(signs) or not shape:
            raise ValueError("shape and signs must align and be nonempty")
        if len(set(shape)) != len(shape):
            raise ValueError("shape sites must be distinct")
        d = len(shape[0])
        if any(len(s) != d for s in shape):
            raise ValueError("shape sites must share one dimension")
        if (0,) * d not in shape:
            raise ValueError("shape must contain the origin")
        if any(v not in (-1, 1) for v in signs):
            raise ValueError("signs must be +-1")

    @property
    def size(self) -> int:
        return len(self.shape)

    @property
    def dimension(self) -> int:
        return len(self.shape[0])

    def diameter(self) -> int:
        return max(sum(abs(a - b) for a, b in zip(p, q))
                   for p in self.shape for q in self.shape)

    @classmethod
    def single_site(cls, d: int, sign: int = 1) -> "LocalPattern":
        return cls(((0,) * d,), (sign,))

    @classmethod
    def isolated_plus(cls, d: int) -> "LocalPattern":
        """A + spin whose 2d nearest neighbors are all -."""
        shape = [(0,) * d]
        for k in range(d):
            for step in (-1, 1):
                shape.append((0,) * k + (step,) + (0,) * (d - k - 1))
        return cls(tuple(shape), (1,) + (-1,) * (2 * d))


@dataclass(frozen=True)
class GlobalPattern:
    """d total orders over {1..m} plus a sign for each element.

    Each order lists the elements 1..m from smallest to largest; internally
    comparisons use rank permutations so order queries are O(1).
    """

    m: int
    orders: tuple
    signs: tuple

    def __post_init__(self):
        orders = tuple(tuple(int(v) for v in order) for order in self.orders)
        signs = tuple(int(v) for v in self.signs)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "signs", signs)
        if self.m < 1:
            raise ValueError("pattern size must be >= 1")
        if len(signs) != self.m or any(v not in (-1, 1) for v in signs):
            raise ValueError("need one +-1 sign per element")
        if not orders:
            raise ValueError("need one order per axis")
        for order in orders:
            if sorted(order) != list(range(1, self.m + 1)):
                raise ValueError(f"order {order} is not a permutation of 1..{self.m}")

    @property
    def dimension(self) -> int:
        return len(self.orders)

    def ranks(self) -> list:
        """ranks[k][i] = position of element i+1 in the k-th order."""
        out = []
        for order in self.orders:
            rank = [0] * self.m
            for pos, element in enumerate(order):
                rank[element - 1] = pos
            out.append(rank)
        return out

    @classmethod
    def ne_chain(cls, m: int, d: int = 2) -> "GlobalPattern":
        """All-plus chain increasing along every axis."""
        natural = tuple(range(1, m + 1))
        return cls(m, (natural,) * d, (1,) * m)


@dataclass(frozen=True)
class PatternCount:
    value: int
    box: Box
    pattern: object


# ---------------------------------------------------------------------------
# JSON declarations

def parse_pattern(obj: dict):
    """Parse {"local": {...}} or {"global": {...}} pattern declarations."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError("pattern document must have a single 'local'/'global' key")
    kind, body = next(iter(obj.items()))
    if kind == "local":
        signs = tuple(_SIGN_CHARS[c] for c in body["signs"])
        return LocalPattern(tuple(tuple(s) for s in body["shape"]), signs)
    if kind == "global":
        signs = tuple(_SIGN_CHARS[c] for c in body["signs"])
        return GlobalPattern(int(body["m"]),
                             tuple(tuple(o) for o in body["orders"]), signs)
    raise ValueError(f"unknown pattern kind {kind!r}")


def pattern_to_json(pattern) -> dict:
    if isinstance(pattern, LocalPattern):
        return {"local": {"shape": [list(s) for s in pattern.shape],
                          "signs": "".join(_SIGN_TEXT[v] for v in pattern.signs)}}
    if isinstance(pattern, GlobalPattern):
        return {"global": {"m": pattern.m,
                           "orders": [list(o) for o in pattern.orders],
                           "signs": "".join(_SIGN_TEXT[v] for v in pattern.signs)}}
    raise TypeError(f"not a pattern: {pattern!r}")


# ---------------------------------------------------------------------------
# local patterns

def local_indicator(cfg: SpinConfiguration, pattern: LocalPattern, position: Site) -> int:
    """1 iff every translated shape site carries the pattern's sign.

    Exterior reads resolve through the boundary condition and raise under
    free bc.
    """
    for offset, sign in zip(pattern.shape, pattern.signs):
        site = tuple(p + o for p, o in zip(position, offset))
        if cfg.spin_at(site) != sign:
            return 0
    return 1


def local_indicator_field(cfg: SpinConfiguration, pattern: LocalPattern,
                          box: Box | None = None):
    """(0/1 array of indicators, window box of the positions it covers).

    Positions range over ``box`` (default: the configuration's box). Under
    +/- bc, occurrences may poke outside and read the frozen exterior spin;
    under free bc, positions whose shape leaves the configuration box are
    excluded, which shrinks the window.
    """
    if box is None:
        box = cfg.box
    d = cfg.box.dimension
    min_off = [min(s[k] for s in pattern.shape) for k in range(d)]
    max_off = [max(s[k] for s in pattern.shape) for k in range(d)]

    eta = cfg.bc.spin_value
    if eta is None:
        win_lo = tuple(max(box.lo[k], cfg.box.lo[k] - min_off[k]) for k in range(d))
        win_hi = tuple(min(box.hi[k], cfg.box.hi[k] - max_off[k]) for k in range(d))
        if any(l > h for l, h in zip(win_lo, win_hi)):
            return np.zeros((0,) * d, dtype=np.int8), None
        grid = cfg.as_array()
        grid_lo = cfg.box.lo
    else:
        win_lo, win_hi = box.lo, box.hi
        pad = [(max(0, cfg.box.lo[k] - (win_lo[k] + min_off[k])),
                max(0, (win_hi[k] + max_off[k]) - cfg.box.hi[k]))
               for k in range(d)]
        grid = np.pad(cfg.as_array(), pad, constant_values=eta)
        grid_lo = tuple(cfg.box.lo[k] - pad[k][0] for k in range(d))

    window = Box(win_lo, win_hi)
    shape = window.side_lengths
    field = np.ones(shape, dtype=bool)
    for offset, sign in zip(pattern.shape, pattern.signs):
        start = tuple(win_lo[k] + offset[k] - grid_lo[k] for k in range(d))
        sl = tuple(slice(start[k], start[k] + shape[k]) for k in range(d))
        field &= grid[sl] == sign
    return field.astype(np.int8), window


def count_local(cfg: SpinConfiguration, pattern: LocalPattern,
                box: Box | None = None) -> PatternCount:
    """Number of occurrence positions inside the box."""
    field, window = local_indicator_field(cfg, pattern, box)
    return PatternCount(int(field.sum()), box if box is not None else cfg.box,
                        pattern)


# ---------------------------------------------------------------------------
# global patterns

def global_indicator(cfg: SpinConfiguration, pattern: GlobalPattern, sites) -> int:
    """1 iff some ordering of the m-site set realizes all rankings and signs."""
    sites = [tuple(s) for s in sites]
    if len(sites) != pattern.m or len(set(sites)) != pattern.m:
        raise ValueError(f"need {pattern.m} distinct sites")
    ranks = pattern.ranks()
    d = pattern.dimension
    spins = [cfg.spin_at(s) for s in sites]
    for perm in permutations(range(pattern.m)):
        if any(spins[perm[i]] != pattern.signs[i] for i in range(pattern.m)):
            continue
        ok = True
        for i in range(pattern.m):
            for j in range(pattern.m):
                for k in range(d):
                    le_coord = sites[perm[i]][k] <= sites[perm[j]][k]
                    le_order = ranks[k][i] <= ranks[k][j]
                    if le_coord != le_order:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return 1
    return 0


def count_global(cfg: SpinConfiguration, pattern: GlobalPattern,
                 box: Box | None = None,
                 budget: int = DEFAULT_GLOBAL_BUDGET) -> PatternCount:
    """Number of m-subsets of the box that are occurrences of the pattern.

    Naive enumeration over sign-matching tuples (vectorized for m = 2); a
    prefix-sum O(n^d) scheme for monotone m = 2 patterns would be the next
    step if larger boxes are ever needed.
    """
    if box is None:
        box = cfg.box
    if math.comb(box.n_sites, pattern.m) > budget:
        raise ResourceCapError(
            f"C({box.n_sites}, {pattern.m}) exceeds the counting budget {budget}"
        )
    sites = box.sites()
    spins = np.array([cfg.spin_at(s) for s in sites], dtype=np.int8)
    coords = np.asarray(sites, dtype=np.int64)
    ranks = pattern.ranks()
    d = pattern.dimension

    if pattern.m == 1:
        return PatternCount(int((spins == pattern.signs[0]).sum()), box, pattern)

    if pattern.m == 2:
        p_coords = coords[spins == pattern.signs[0]]
        q_coords = coords[spins == pattern.signs[1]]
        if len(p_coords) == 0 or len(q_coords) == 0:
            return PatternCount(0, box, pattern)
        cond = np.ones((p_coords.shape[0], q_coords.shape[0]), dtype=bool)
        for k in range(d):
            if ranks[k][0] < ranks[k][1]:
                cond &= p_coords[:, k, None] < q_coords[None, :, k]
            else:
                cond &= p_coords[:, k, None] > q_coords[None, :, k]
        return PatternCount(int(cond.sum()), box, pattern)

    # generic fallback: subsets of sign-compatible sites
    wanted = set(pattern.signs)
    candidates = [s for s, v in zip(sites, spins) if v in wanted]
    total = 0
    for subset in combinations(candidates, pattern.m):
        total += global_indicator(cfg, pattern, subset)
    return PatternCount(total, box, pattern)


# ---------------------------------------------------------------------------
# dependency-graph weights of occurrences

def pattern_weight(pattern, spec: IsingWdgSpec, a, b) -> float:
    """Power-graph weight between two occurrences.

    For a local pattern, a and b are positions and the weight is the maximum
    base weight over the two translated shapes; for a global pattern, a and b
    are site collections and the weight is eps^(min cross distance / 2). The
    sign channel never affects weights.
    """
    if isinstance(pattern, LocalPattern):
        i_set = tuple(tuple(p + o for p, o in zip(a, off)) for off in pattern.shape)
        j_set = tuple(tuple(p + o for p, o in zip(b, off)) for off in pattern.shape)
        size = pattern.size
    elif isinstance(pattern, GlobalPattern):
        i_set = tuple(tuple(s) for s in a)
        j_set = tuple(tuple(s) for s in b)
        size = pattern.m
    else:
        raise TypeError(f"not a pattern: {pattern!r}")
    graph = power_graph(ising_spin_graph(spec), size)
    return graph.weight(i_set, j_set)
