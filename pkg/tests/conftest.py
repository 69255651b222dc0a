"""Shared independent oracles for the test suite.

The brute-force Gibbs oracle below recomputes everything from first
principles with dictionaries and nested loops: no bit tricks, no shared edge
enumeration, no log-sum-exp. It is deliberately slow and only used on tiny
boxes, so a bug in the fast paths cannot cancel against itself.
"""
import math
from itertools import product

import numpy as np
import pytest


def all_box_sites(lo, hi):
    return [tuple(p) for p in product(*[range(a, b + 1) for a, b in zip(lo, hi)])]


class BruteForceGibbs:
    """Dictionary-based exhaustive Gibbs measure on a tiny box."""

    def __init__(self, lo, hi, beta, h, bc="free"):
        self.sites = all_box_sites(lo, hi)
        self.lo, self.hi = tuple(lo), tuple(hi)
        self.beta, self.h, self.bc = beta, h, bc
        self.weights = {}
        z = 0.0
        for values in product((-1, 1), repeat=len(self.sites)):
            config = dict(zip(self.sites, values))
            w = math.exp(-self._energy(config))
            self.weights[values] = w
            z += w
        self.z = z

    def _inside(self, s):
        return all(a <= c <= b for c, a, b in zip(s, self.lo, self.hi))

    def _energy(self, config):
        pair = 0.0
        # every unordered nearest-neighbor pair touching the box
        seen = set()
        for s in self.sites:
            for k in range(len(s)):
                for step in (-1, 1):
                    t = s[:k] + (s[k] + step,) + s[k + 1:]
                    key = frozenset((s, t))
                    if key in seen:
                        continue
                    seen.add(key)
                    if self._inside(t):
                        pair += config[s] * config[t]
                    elif self.bc == "plus":
                        pair += config[s] * 1
                    elif self.bc == "minus":
                        pair += config[s] * -1
        return -self.beta * pair - self.h * sum(config.values())

    def mean(self, f):
        total = 0.0
        for values, w in self.weights.items():
            total += w * f(dict(zip(self.sites, values)))
        return total / self.z

    def spin_product(self, sites):
        def f(config):
            out = 1
            for s in sites:
                out *= config[tuple(s)]
            return out

        return self.mean(f)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
