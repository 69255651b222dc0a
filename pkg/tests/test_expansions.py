import math
from itertools import combinations

import numpy as np
import pytest

from conftest import BruteForceGibbs
from isingwdg.errors import ResourceCapError
from isingwdg.expansions import (contour_identity, contour_partition_sum,
                                 even_subgraph_sum, extract_contours,
                                 high_temperature_identity,
                                 iter_even_subgraph_terms, iter_minus_islands,
                                 minus_island_sum, sigma_contour_expectation,
                                 sigma_contour_identity,
                                 strong_field_generating_identity,
                                 strong_field_identity,
                                 strong_field_sigma_identity,
                                 validate_even_subgraph_term,
                                 verify_representations)
from isingwdg.gibbs_exact import (BoundaryCondition, ExactGibbs, IsingParams,
                                  SpinConfiguration)
from isingwdg.lattice import Box, boundary_edges, interior_edges

PLUS = BoundaryCondition.PLUS


def plus_config(box, minus_sites):
    spins = {s: (-1 if s in set(minus_sites) else 1) for s in box.sites()}
    return SpinConfiguration.from_mapping(box, spins, PLUS)


# ---------------------------------------------------------------------------
# even subgraphs

def test_even_subgraph_examples():
    two = Box((0,), (1,))
    assert even_subgraph_sum(two, [], 0.5) == pytest.approx(1.0)

    sq = Box((0, 0), (1, 1))
    assert even_subgraph_sum(sq, [], 0.0) == pytest.approx(1.0)
    assert even_subgraph_sum(sq, [], 0.3) == \
        pytest.approx(1 + math.tanh(0.3) ** 4)


def test_even_subgraph_terms_validator_and_sum():
    box = Box((0, 0), (1, 1))
    marked = [(0, 0), (1, 1)]
    t_values = [0.3, 0.7]
    terms = list(iter_even_subgraph_terms(box, marked, 0.4, t_values))
    assert all(validate_even_subgraph_term(box, t) for t in terms)
    assert sum(t.weight for t in terms) == \
        pytest.approx(even_subgraph_sum(box, marked, 0.4, t_values))
    # odd-degree sets always land inside the marked set
    assert all(set(t.marked) <= set(marked) for t in terms)


def test_high_temperature_identity_examples():
    two = Box((0,), (1,))
    chk = high_temperature_identity(two, 0.5)
    assert chk.lhs == pytest.approx(2 * math.exp(0.5) + 2 * math.exp(-0.5))
    assert chk.ok(1e-12)

    sq = Box((0, 0), (1, 1))
    chk2 = high_temperature_identity(sq, 0.3)
    want = 16 * math.cosh(0.3) ** 4 * (1 + math.tanh(0.3) ** 4)
    assert chk2.rhs == pytest.approx(want)
    assert chk2.ok(1e-12)

    chk3 = high_temperature_identity(sq, 0.4, [(0, 0), (1, 0)], [0.2, 0.5])
    assert chk3.ok(1e-12)


def test_even_subgraph_edge_cap():
    with pytest.raises(ResourceCapError):
        even_subgraph_sum(Box.centered(2, 2), [], 0.1, edge_cap=24)


# ---------------------------------------------------------------------------
# contours

def test_extract_contours_examples():
    box = Box.centered(1, 2)
    assert extract_contours(plus_config(box, [])) == []

    single = extract_contours(plus_config(box, [(0, 0)]))
    assert len(single) == 1
    assert single[0].length == 4
    assert set(single[0].interior) == {(0, 0)}


def test_contours_require_plus_bc():
    cfg = SpinConfiguration.constant(Box.centered(1, 2), 1,
                                     BoundaryCondition.FREE)
    with pytest.raises(ValueError):
        extract_contours(cfg)


def test_two_separated_minuses_give_two_contours():
    box = Box.centered(2, 2)
    contours = extract_contours(plus_config(box, [(-2, -2), (2, 2)]))
    assert len(contours) == 2
    assert all(c.length == 4 for c in contours)


def test_nested_contours_interior():
    # a 3x3 minus block with a plus hole in the middle: two nested contours
    box = Box.centered(2, 2)
    minus = [s for s in box.sites() if max(abs(s[0]), abs(s[1])) <= 1
             and s != (0, 0)]
    contours = extract_contours(plus_config(box, minus))
    assert len(contours) == 2
    lengths = sorted(c.length for c in contours)
    assert lengths == [4, 12]
    inner = min(contours, key=lambda c: c.length)
    outer = max(contours, key=lambda c: c.length)
    assert set(inner.interior) == {(0, 0)}
    assert set(outer.interior) == set(minus) | {(0, 0)}


def test_reconstruction_property_exhaustive():
    box = Box.centered(1, 2)
    n = box.n_sites
    for state in range(1 << n):
        bits = (state >> np.arange(n)) & 1
        cfg = SpinConfiguration(box, (2 * bits - 1).astype(np.int8), PLUS)
        contours = extract_contours(cfg)
        for i, site in enumerate(box.sites()):
            parity = sum(1 for c in contours if site in c.interior) % 2
            assert int(cfg.spins[i]) == (1 if parity == 0 else -1)


def test_contour_map_injective_and_face_count():
    box = Box((0, 0), (2, 2))
    n = box.n_sites
    seen = {}
    for state in range(1 << n):
        bits = (state >> np.arange(n)) & 1
        cfg = SpinConfiguration(box, (2 * bits - 1).astype(np.int8), PLUS)
        contours = frozenset(c.faces for c in extract_contours(cfg))
        assert contours not in seen
        seen[contours] = state
        # total face count = +- disagreements of the +1-extended configuration
        disagreements = sum(
            1 for a, b in boundary_edges(box)
            if cfg.spin_at(a) != cfg.spin_at(b))
        total = sum(len(f) for f in contours)
        assert total == disagreements


def test_contour_partition_examples():
    one = Box((0, 0), (0, 0))
    beta = 0.5
    assert contour_partition_sum(one, beta) == \
        pytest.approx(1 + math.exp(-8 * beta))
    chk = contour_identity(one, beta)
    assert chk.lhs == pytest.approx(math.exp(4 * beta) + math.exp(-4 * beta))
    assert chk.ok(1e-12)

    assert contour_partition_sum(one, 10.0) == pytest.approx(1.0, abs=1e-15)

    assert contour_identity(Box((0, 0), (1, 1)), 0.7).ok(1e-10)


def test_sigma_contour_examples():
    one = Box((0, 0), (0, 0))
    beta = 0.5
    assert sigma_contour_expectation(one, beta, []) == pytest.approx(1.0)
    assert sigma_contour_expectation(one, beta, [(0, 0)]) == \
        pytest.approx(math.tanh(4 * beta))

    box = Box.centered(1, 2)
    chk = sigma_contour_identity(box, 1.2, [(0, 0), (1, 0)])
    assert chk.ok(1e-10)


def test_contour_partition_one_dimensional():
    # d=1 faces are isolated points; the identity must still close
    assert contour_identity(Box((0,), (2,)), 0.8).ok(1e-12)


# ---------------------------------------------------------------------------
# minus islands

def test_minus_island_examples():
    one = Box((0, 0), (0, 0))
    beta, h = 0.3, 0.4
    assert minus_island_sum(one, beta, h) == \
        pytest.approx(1 + math.exp(-8 * beta - 2 * h))
    assert minus_island_sum(one, beta, 20.0) == pytest.approx(1.0, abs=1e-15)

    signed = minus_island_sum(one, beta, h, sites=[(0, 0)])
    want = (1 - math.exp(-8 * beta - 2 * h))
    assert signed == pytest.approx(want)
    system = ExactGibbs(one, IsingParams(2, beta, h, PLUS))
    assert signed / minus_island_sum(one, beta, h) == \
        pytest.approx(system.spin_product_mean([(0, 0)]))


def test_minus_island_iterator_consistency():
    box = Box((0, 0), (1, 1))
    beta, h = 0.4, 0.6
    islands = list(iter_minus_islands(box, beta, h))
    assert len(islands) == 16
    assert sum(i.weight for i in islands) == \
        pytest.approx(minus_island_sum(box, beta, h))
    # boundary edge counts: exactly-one-endpoint rule, checked by hand for
    # the single-site island
    lone = [i for i in islands if i.sites == ((0, 0),)]
    assert lone[0].boundary_edge_count == 4


def test_strong_field_identities():
    sq = Box((0, 0), (1, 1))
    assert strong_field_identity(sq, 0.5, 1.5).ok(1e-12)
    assert strong_field_sigma_identity(sq, 0.5, 0.7, [(0, 0)]).ok(1e-12)
    assert strong_field_generating_identity(
        sq, 0.5, 0.7, [(0, 0), (1, 1)], [0.3, 0.2]).ok(1e-12)


def test_strong_field_against_brute_force():
    oracle = BruteForceGibbs((0, 0), (1, 1), 0.6, 0.9, "plus")
    box = Box((0, 0), (1, 1))
    n_bedges = len(boundary_edges(box))
    total = math.exp(0.6 * n_bedges + 0.9 * box.n_sites) * \
        minus_island_sum(box, 0.6, 0.9)
    assert total == pytest.approx(oracle.z, rel=1e-12)


# ---------------------------------------------------------------------------
# the grid suite

def test_verify_representations_grid():
    boxes = [Box((0, 0), (0, 0)), Box((0, 0), (1, 1))]
    checks = verify_representations(boxes, [0.0, 0.5], [0.0, 1.5])
    assert all(c.ok(1e-10) for c in checks)
    names = {c.name for c in checks}
    assert {"high-temperature", "contour", "contour-sigmaA", "strong-field",
            "strong-field-sigmaA", "strong-field-mgf"} <= names
