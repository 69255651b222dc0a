"""Exact verification of three combinatorial rewritings of finite-volume
Ising sums: even-subgraph (high temperature), contour (low temperature,
plus bc), and minus-island (strong field, plus bc) representations. Each is
computed from its own geometric objects and compared against direct
enumeration, so a representation bug cannot hide.

Contours are maximal connected components of the boundary of the union of
unit cubes around minus sites; two boundary faces are adjacent when they
share a (d-2)-cell. Cells of every dimension are identified by their doubled
integer center coordinates: odd coordinates are pinned (half-integer) axes,
even ones are spanned axes. Admissible contour families are enumerated
through spin configurations, which realize exactly the admissible families.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ResourceCapError
from .gibbs_exact import (DEFAULT_ENUMERATION_CAP, BoundaryCondition,
                          ExactGibbs, IsingParams, SpinConfiguration)
from .lattice import Box, Site, crossing_edges, interior_edges

HT_EDGE_CAP = 24


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    detail: dict

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return abs(self.lhs - self.rhs) / scale

    def ok(self, tol: float = 1e-10) -> bool:
        return self.rel_err <= tol


# ---------------------------------------------------------------------------
# high-temperature representation: even subgraphs

@dataclass(frozen=True)
class EvenSubgraphTerm:
    edges: tuple
    marked: tuple  # the odd-degree sites; must be a subset of A
    weight: float


def _degree_parities(box: Box, edges, edge_subset_mask: int) -> dict:
    deg: dict = {}
    for t, (a, b) in enumerate(edges):
        if edge_subset_mask >> t & 1:
            deg[a] = deg.get(a, 0) ^ 1
            deg[b] = deg.get(b, 0) ^ 1
    return {s for s, parity in deg.items() if parity}


def iter_even_subgraph_terms(box: Box, marked_sites, beta: float, t_values):
    """Yield every (E, B) term; constructive, for small boxes and validation."""
    edges = interior_edges(box)
    marked = [tuple(s) for s in marked_sites]
    t_by_site = dict(zip(marked, t_values))
    tanh_beta = math.tanh(beta)
    for mask in range(1 << len(edges)):
        odd = _degree_parities(box, edges, mask)
        if not odd.issubset(marked):
            continue
        weight = tanh_beta ** bin(mask).count("1")
        for s in odd:
            weight *= math.tanh(t_by_site[s])
        chosen = tuple(e for t_, e in enumerate(edges) if mask >> t_ & 1)
        yield EvenSubgraphTerm(chosen, tuple(sorted(odd)), weight)


def validate_even_subgraph_term(box: Box, term: EvenSubgraphTerm) -> bool:
    """Re-check the odd-degree-iff-marked invariant of a generated term."""
    deg: dict = {}
    for a, b in term.edges:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    odd = {s for s, c in deg.items() if c % 2 == 1}
    return odd == set(term.marked)


def even_subgraph_sum(box: Box, marked_sites, beta: float, t_values=(),
                      edge_cap: int = HT_EDGE_CAP) -> float:
    """Sum of (tanh beta)^|E| prod tanh(t_j) over edge sets whose odd-degree
    vertices are exactly a subset of the marked sites (vectorized over edge
    subsets)."""
    edges = interior_edges(box)
    m = len(edges)
    if m > edge_cap:
        raise ResourceCapError(f"{m} edges exceed the 2^edges cap {edge_cap}")
    marked = [tuple(s) for s in marked_sites]
    if len(marked) != len(tuple(t_values)):
        raise ValueError("need one t value per marked site")
    t_by_site = dict(zip(marked, t_values))

    subsets = np.arange(1 << m, dtype=np.uint64)
    one = np.uint64(1)
    incident = {}
    for t, (a, b) in enumerate(edges):
        for s in (a, b):
            incident[s] = incident.get(s, np.uint64(0)) | (one << np.uint64(t))

    weight = np.power(math.tanh(beta), np.bitwise_count(subsets).astype(np.float64))
    valid = np.ones(subsets.shape[0], dtype=bool)
    for site in box.sites():
        mask = incident.get(site)
        if mask is None:
            continue  # isolated site always has even (zero) degree
        parity = (np.bitwise_count(subsets & mask) & np.uint8(1)).astype(bool)
        if site in t_by_site:
            weight = np.where(parity, weight * math.tanh(t_by_site[site]), weight)
        else:
            valid &= ~parity
    return float(weight[valid].sum())


def high_temperature_prefactor(box: Box, beta: float, t_values=()) -> float:
    value = (2.0 ** box.n_sites) * math.cosh(beta) ** len(interior_edges(box))
    for t in t_values:
        value *= math.cosh(t)
    return value


def high_temperature_identity(box: Box, beta: float, marked_sites=(),
                              t_values=()) -> IdentityCheck:
    """Direct field-inserted partition sum vs prefactor * even-subgraph sum
    (free boundary conditions, h = 0)."""
    params = IsingParams(box.dimension, beta, 0.0, BoundaryCondition.FREE)
    system = ExactGibbs(box, params)
    marked = [tuple(s) for s in marked_sites]
    lhs = system.generating_value(dict(zip(marked, t_values)))
    xi = even_subgraph_sum(box, marked, beta, t_values)
    rhs = high_temperature_prefactor(box, beta, t_values) * xi
    return IdentityCheck("high-temperature", lhs, rhs,
                         {"beta": beta, "marked": marked, "xi": xi})


# ---------------------------------------------------------------------------
# contour representation (plus boundary conditions)

@dataclass(frozen=True)
class Contour:
    faces: frozenset  # doubled-coordinate face centers
    length: int
    interior: frozenset  # sites of the box enclosed by the contour


def _face_center(a: Site, b: Site) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def _face_subcells(center: tuple) -> list:
    d = len(center)
    cells = []
    for axis in range(d):
        if center[axis] % 2 == 0:  # spanned axis: pin it at either side
            for step in (-1, 1):
                cells.append(center[:axis] + (center[axis] + step,)
                             + center[axis + 1:])
    return cells


def extract_contours(cfg: SpinConfiguration) -> list:
    """Decompose the minus-phase boundary of a plus-bc configuration."""
    if cfg.bc is not BoundaryCondition.PLUS:
        raise ValueError("contours are defined under plus boundary conditions")
    box = cfg.box
    faces = []
    for i, site in enumerate(box.sites()):
        if cfg.spins[i] != -1:
            continue
        for nb in box.neighbors(site):
            if cfg.spin_at(nb) == 1:
                faces.append(_face_center(site, nb))
    if not faces:
        return []

    by_subcell: dict = {}
    for f in faces:
        for cell in _face_subcells(f):
            by_subcell.setdefault(cell, []).append(f)

    seen = set()
    contours = []
    for start in faces:
        if start in seen:
            continue
        component = []
        stack = [start]
        seen.add(start)
        while stack:
            f = stack.pop()
            component.append(f)
            for cell in _face_subcells(f):
                for g in by_subcell[cell]:
                    if g not in seen:
                        seen.add(g)
                        stack.append(g)
        contours.append(Contour(frozenset(component), len(component),
                                frozenset(_contour_interior(component, box))))
    return contours


def _contour_interior(faces, box: Box) -> list:
    """Sites enclosed by the closed face set, by parity ray-casting along
    the first axis."""
    crossings: dict = {}
    for f in faces:
        if f[0] % 2 == 1:  # face pinned in axis 0: the ray crosses it
            crossings.setdefault(f[1:], []).append(f[0])
    interior = []
    for transverse, pinned in crossings.items():
        site_rest = tuple(c // 2 for c in transverse)
        pinned = sorted(pinned)
        for lo, hi in zip(pinned[0::2], pinned[1::2]):
            for x0 in range((lo + 1) // 2, (hi - 1) // 2 + 1):
                site = (x0,) + site_rest
                if box.contains(site):
                    interior.append(site)
    return interior


def contour_partition_sum(box: Box, beta: float,
                          cap_sites: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Sum over admissible contour families of prod e^{-2 beta |gamma|}."""
    n = box.n_sites
    if n > cap_sites:
        raise ResourceCapError(f"box has {n} sites; cap is {cap_sites}")
    total = 0.0
    for state in range(1 << n):
        cfg = _config_from_state(box, state)
        total += math.exp(-2.0 * beta * sum(c.length
                                            for c in extract_contours(cfg)))
    return total


def sigma_contour_expectation(box: Box, beta: float, sites,
                              cap_sites: int = DEFAULT_ENUMERATION_CAP) -> float:
    """<sigma_A>^+ from contour interiors: the signed contour sum over the
    plain one."""
    n = box.n_sites
    if n > cap_sites:
        raise ResourceCapError(f"box has {n} sites; cap is {cap_sites}")
    marked = {tuple(s) for s in sites}
    num = 0.0
    den = 0.0
    for state in range(1 << n):
        cfg = _config_from_state(box, state)
        contours = extract_contours(cfg)
        weight = math.exp(-2.0 * beta * sum(c.length for c in contours))
        sign = 1.0
        for c in contours:
            if len(marked & c.interior) % 2 == 1:
                sign = -sign
        num += sign * weight
        den += weight
    return num / den


def _config_from_state(box: Box, state: int) -> SpinConfiguration:
    n = box.n_sites
    bits = (state >> np.arange(n)) & 1
    return SpinConfiguration(box, (2 * bits - 1).astype(np.int8),
                             BoundaryCondition.PLUS)


def contour_identity(box: Box, beta: float) -> IdentityCheck:
    """Z^+ vs e^{beta |boundary edges|} * contour sum at h = 0."""
    params = IsingParams(box.dimension, beta, 0.0, BoundaryCondition.PLUS)
    system = ExactGibbs(box, params)
    n_bedges = len(interior_edges(box)) + len(crossing_edges(box))
    xi_plus = contour_partition_sum(box, beta)
    return IdentityCheck("contour", system.z,
                         math.exp(beta * n_bedges) * xi_plus,
                         {"beta": beta, "xi_plus": xi_plus})


def sigma_contour_identity(box: Box, beta: float, sites) -> IdentityCheck:
    params = IsingParams(box.dimension, beta, 0.0, BoundaryCondition.PLUS)
    system = ExactGibbs(box, params)
    lhs = system.spin_product_mean(sites)
    rhs = sigma_contour_expectation(box, beta, sites)
    return IdentityCheck("contour-sigmaA", lhs, rhs,
                         {"beta": beta, "sites": [list(s) for s in sites]})


# ---------------------------------------------------------------------------
# strong-field representation (plus boundary conditions)

@dataclass(frozen=True)
class MinusIsland:
    sites: tuple
    boundary_edge_count: int
    weight: float


def iter_minus_islands(box: Box, beta: float, h: float,
                       cap_sites: int = 20):
    """Yield every minus set with its boundary edge count and weight."""
    n = box.n_sites
    if n > cap_sites:
        raise ResourceCapError(f"box has {n} sites; cap is {cap_sites}")
    sites = box.sites()
    idx = box.site_index
    in_edges = [(idx[a], idx[b]) for a, b in interior_edges(box)]
    ext = [0] * n
    for a, b in crossing_edges(box):
        ext[idx[a]] += 1
    for mask in range(1 << n):
        cut = sum(1 for a, b in in_edges if (mask >> a & 1) != (mask >> b & 1))
        cut += sum(ext[i] for i in range(n) if mask >> i & 1)
        size = bin(mask).count("1")
        chosen = tuple(sites[i] for i in range(n) if mask >> i & 1)
        yield MinusIsland(chosen, cut,
                          math.exp(-2.0 * beta * cut - 2.0 * h * size))


def minus_island_sum(box: Box, beta: float, h: float, sites=(),
                     t_values=None,
                     cap_sites: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Sum over minus sets of exp(-2 beta |boundary| - 2h |set|), with an
    optional (-1)^{|A inter set|} sign (t_values None, sites nonempty) or
    prod exp(-2 t_i) insertion (t_values given), vectorized over subsets."""
    n = box.n_sites
    if n > cap_sites:
        raise ResourceCapError(f"box has {n} sites; cap is {cap_sites}")
    idx = box.site_index
    one = np.uint64(1)
    masks = np.arange(1 << n, dtype=np.uint64)

    cut = np.zeros(masks.shape[0])
    for a, b in interior_edges(box):
        ia, ib = np.uint64(idx[a]), np.uint64(idx[b])
        cut += ((masks >> ia) ^ (masks >> ib)) & one
    ext = [0] * n
    for a, b in crossing_edges(box):
        ext[idx[a]] += 1
    for c in sorted(set(ext) - {0}):
        bitmask = np.uint64(0)
        for i, ci in enumerate(ext):
            if ci == c:
                bitmask |= one << np.uint64(i)
        cut += c * np.bitwise_count(masks & bitmask).astype(np.float64)

    size = np.bitwise_count(masks).astype(np.float64)
    log_wt = -2.0 * beta * cut - 2.0 * h * size

    marked = [tuple(s) for s in sites]
    if t_values is not None:
        if len(t_values) != len(marked):
            raise ValueError("need one t value per marked site")
        for site, t in zip(marked, t_values):
            bit = ((masks >> np.uint64(idx[site])) & one).astype(np.float64)
            log_wt += -2.0 * t * bit
        return float(np.exp(log_wt).sum())
    if marked:
        amask = np.uint64(0)
        for site in marked:
            amask |= one << np.uint64(idx[site])
        parity = (np.bitwise_count(masks & amask) & np.uint8(1)).astype(np.float64)
        return float((np.exp(log_wt) * (1.0 - 2.0 * parity)).sum())
    return float(np.exp(log_wt).sum())


def strong_field_prefactor(box: Box, beta: float, h: float) -> float:
    n_bedges = len(interior_edges(box)) + len(crossing_edges(box))
    return math.exp(beta * n_bedges + h * box.n_sites)


def strong_field_identity(box: Box, beta: float, h: float) -> IdentityCheck:
    """Z^+ vs prefactor * plain minus-island sum."""
    params = IsingParams(box.dimension, beta, h, BoundaryCondition.PLUS)
    system = ExactGibbs(box, params)
    rhs = strong_field_prefactor(box, beta, h) * minus_island_sum(box, beta, h)
    return IdentityCheck("strong-field", system.z, rhs, {"beta": beta, "h": h})


def strong_field_sigma_identity(box: Box, beta: float, h: float,
                                sites) -> IdentityCheck:
    """Signed-variant check: numerator of <sigma_A>^+ via minus islands."""
    params = IsingParams(box.dimension, beta, h, BoundaryCondition.PLUS)
    system = ExactGibbs(box, params)
    lhs = system.spin_product_mean(sites) * system.z
    rhs = strong_field_prefactor(box, beta, h) * minus_island_sum(
        box, beta, h, sites=sites)
    return IdentityCheck("strong-field-sigmaA", lhs, rhs,
                         {"beta": beta, "h": h,
                          "sites": [list(s) for s in sites]})


def strong_field_generating_identity(box: Box, beta: float, h: float,
                                     sites, t_values) -> IdentityCheck:
    """Field-inserted variant: sum_omega exp(sum t_i sigma_i) e^{-H} via
    minus islands with exp(-2 t_i) insertions."""
    params = IsingParams(box.dimension, beta, h, BoundaryCondition.PLUS)
    system = ExactGibbs(box, params)
    marked = [tuple(s) for s in sites]
    lhs = system.generating_value(dict(zip(marked, t_values)))
    rhs = (strong_field_prefactor(box, beta, h) * math.exp(sum(t_values))
           * minus_island_sum(box, beta, h, sites=marked, t_values=t_values))
    return IdentityCheck("strong-field-mgf", lhs, rhs,
                         {"beta": beta, "h": h, "t": list(t_values)})


# ---------------------------------------------------------------------------
# suite runner

def verify_representations(boxes, betas, hs, marked_picker=None) -> list:
    """Run the three identity families over a parameter grid.

    High-temperature and contour identities run at h = 0 only; the strong
    field identity runs at every (beta, h). ``marked_picker(box)`` may supply
    a site set for the sigma_A variants (default: first two sites).
    """
    checks = []
    for box in boxes:
        sites = box.sites()
        marked = (marked_picker(box) if marked_picker is not None
                  else list(sites[: min(2, len(sites))]))
        for beta in betas:
            checks.append(high_temperature_identity(box, beta))
            checks.append(high_temperature_identity(
                box, beta, marked, [0.3 + 0.1 * k for k in range(len(marked))]))
            checks.append(contour_identity(box, beta))
            checks.append(sigma_contour_identity(box, beta, marked))
            for h in hs:
                checks.append(strong_field_identity(box, beta, h))
                checks.append(strong_field_sigma_identity(box, beta, h, marked))
                checks.append(strong_field_generating_identity(
                    box, beta, h, marked,
                    [0.2 + 0.1 * k for k in range(len(marked))]))
    return checks
