from itertools import combinations

import pytest

from isingwdg.errors import ResourceCapError
from isingwdg.lattice import l1_distance
from isingwdg.treelen import (check_two_factor, hanan_grid, mst_tree_length,
                              steiner_tree_length)


def brute_force_steiner(terminals):
    """min over Hanan-point subsets of the terminal+extras MST length."""
    terminals = [tuple(t) for t in terminals]
    extras = [p for p in hanan_grid(terminals) if p not in terminals]
    best = mst_tree_length(terminals)
    for r in range(1, len(extras) + 1):
        for chosen in combinations(extras, r):
            best = min(best, mst_tree_length(terminals + list(chosen)))
    return best


def test_mst_examples():
    assert mst_tree_length([(3, 4)]) == 0
    assert mst_tree_length([(0, 0), (2, 3)]) == 5
    assert mst_tree_length([(0, 0), (2, 0), (1, 2)]) == 5


def test_steiner_examples():
    assert steiner_tree_length([(0, 0), (2, 3)]) == 5
    assert steiner_tree_length([(0, 0), (2, 0), (1, 2)]) == 4
    assert steiner_tree_length([(0, 0), (3, 0), (7, 0)]) == 7


def test_steiner_terminal_cap():
    pts = [(k, k % 3) for k in range(9)]
    with pytest.raises(ResourceCapError):
        steiner_tree_length(pts)


def test_check_two_factor_examples():
    d = l1_distance((0, 0), (4, 1))
    assert check_two_factor([(0, 0), (4, 1)]) == (d, d, True)
    assert check_two_factor([(0, 0), (2, 0), (1, 2)]) == (4, 5, True)


def test_two_factor_random_sets(rng):
    for _ in range(100):
        k = int(rng.integers(1, 5))
        pts = {tuple(int(v) for v in rng.integers(-5, 6, size=2))
               for _ in range(k)}
        lt, lt_prime, ok = check_two_factor(sorted(pts))
        assert ok
        assert lt <= lt_prime <= 2 * lt


def test_steiner_matches_brute_force(rng):
    for _ in range(40):
        k = int(rng.integers(2, 5))
        pts = sorted({tuple(int(v) for v in rng.integers(0, 6, size=2))
                      for _ in range(k)})
        assert steiner_tree_length(pts) == brute_force_steiner(pts)


def test_steiner_three_dimensional():
    # corner of a unit cube plus opposite corners; brute force stays feasible
    pts = [(0, 0, 0), (2, 0, 0), (0, 2, 0), (1, 1, 2)]
    assert steiner_tree_length(pts) == brute_force_steiner(pts)


def test_monotone_in_terminals(rng):
    for _ in range(50):
        pts = sorted({tuple(int(v) for v in rng.integers(-4, 5, size=2))
                      for _ in range(4)})
        extra = tuple(int(v) for v in rng.integers(-4, 5, size=2))
        if extra in pts:
            continue
        assert steiner_tree_length(pts + [extra]) >= steiner_tree_length(pts)


def test_translation_invariance(rng):
    for _ in range(50):
        pts = [tuple(int(v) for v in rng.integers(-5, 6, size=2))
               for _ in range(4)]
        shift = tuple(int(v) for v in rng.integers(-9, 10, size=2))
        moved = [tuple(c + s for c, s in zip(p, shift)) for p in pts]
        assert mst_tree_length(moved) == mst_tree_length(pts)
        assert steiner_tree_length(moved) == steiner_tree_length(pts)


def test_duplicates_collapse():
    assert steiner_tree_length([(0, 0), (0, 0), (1, 1)]) == 2
    assert mst_tree_length([(2, 2), (2, 2)]) == 0
