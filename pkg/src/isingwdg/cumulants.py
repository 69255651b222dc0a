"""Joint cumulants from moments, plug-in estimation from samples, and the
alternating subset-product quantity used for low-temperature decay checks.

The moment-to-cumulant conversion is the classical Moebius sum over set
partitions, kappa = sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_B E[prod_{i in B} X_i].
Partitions of {1..r} are generated once per r and cached (B_6 = 203, trivially
cacheable).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Site

MAX_EXACT_ORDER = 6
MAX_ESTIMATED_ORDER = 4


def set_partitions(r: int) -> tuple:
    """All partitions of {0..r-1} as tuples of sorted blocks (cached per r)."""
    if r < 0:
        raise ValueError("order must be >= 0")
    return _set_partitions_cached(r)


_PARTITION_CACHE: dict = {}


def _set_partitions_cached(r: int) -> tuple:
    hit = _PARTITION_CACHE.get(r)
    if hit is not None:
        return hit
    parts = []

    def grow(k: int, blocks: list):
        if k == r:
            parts.append(tuple(tuple(b) for b in blocks))
            return
        for b in blocks:
            b.append(k)
            grow(k + 1, blocks)
            b.pop()
        blocks.append([k])
        grow(k + 1, blocks)
        blocks.pop()

    grow(0, [])
    result = tuple(parts)
    _PARTITION_CACHE[r] = result
    return result


def cumulant_from_moments(moment_oracle, labels, max_order: int = MAX_EXACT_ORDER) -> float:
    """Joint cumulant of the variables with the given labels.

    ``moment_oracle`` maps a sorted tuple of labels (a sub-multiset of
    ``labels``) to the joint moment E[prod X]. Orders above ``max_order``
    are refused because the partition count explodes.
    """
    labels = list(labels)
    r = len(labels)
    if r == 0:
        raise ValueError("need at least one variable")
    if r > max_order:
        raise ValueError(f"cumulant order {r} exceeds cap {max_order}")
    total = 0.0
    for blocks in set_partitions(r):
        term = (-1.0) ** (len(blocks) - 1) * math.factorial(len(blocks) - 1)
        for block in blocks:
            term *= moment_oracle(tuple(sorted(labels[i] for i in block)))
        total += term
    return total


def q_quantity(expectation_oracle, sites, zero_tol: float = 1e-12) -> float:
    """prod over nonempty subsets delta of <prod_{j in delta} Y_j>^{(-1)^{|delta|}}.

    For two sites this is <Y1 Y2> / (<Y1><Y2>). A (near-)vanishing
    sub-expectation signals a symmetric phase where the quantity is undefined.
    """
    sites = [tuple(s) for s in sites]
    if len(set(sites)) != len(sites):
        raise ValueError("sites must be distinct")
    if len(sites) > MAX_EXACT_ORDER:
        raise ValueError(f"set size {len(sites)} exceeds cap {MAX_EXACT_ORDER}")
    value = 1.0
    for mask in range(1, 1 << len(sites)):
        subset = tuple(sorted(s for k, s in enumerate(sites) if mask >> k & 1))
        m = float(expectation_oracle(subset))
        if abs(m) <= zero_tol:
            raise ValueError(
                f"sub-expectation for {subset} vanishes; quantity undefined"
            )
        if len(subset) % 2 == 0:
            value *= m
        else:
            value /= m
    return value


def spin_to_indicator_cumulant(kappa_sigma: float, r: int) -> float:
    """Convert a spin cumulant to the (sigma+1)/2 indicator cumulant: value / 2^r.

    Only valid for r >= 2; the affine shift changes the mean.
    """
    if r < 2:
        raise ValueError("indicator conversion needs order >= 2")
    return kappa_sigma / (2.0 ** r)


# ---------------------------------------------------------------------------
# estimation from Monte Carlo samples

def _empirical_moment(spins: np.ndarray, columns) -> float:
    if not columns:
        return 1.0
    prod = spins[:, columns[0]].astype(np.float64)
    for c in columns[1:]:
        prod = prod * spins[:, c]
    return float(prod.mean())


def _plug_in_cumulant(spins: np.ndarray, site_index: dict, sites) -> float:
    def oracle(subset):
        counts: dict = {}
        for s in subset:
            counts[s] = counts.get(s, 0) + 1
        columns = [site_index[s] for s, c in counts.items() if c % 2 == 1]
        return _empirical_moment(spins, columns)

    return cumulant_from_moments(oracle, [tuple(s) for s in sites],
                                 max_order=MAX_ESTIMATED_ORDER)


def estimated_cumulant(batch, sites, n_batches: int = 10):
    """Plug-in joint cumulant from a sample batch, with batch-means std error.

    Plug-in (biased) estimators are used rather than k-statistics; the bias is
    O(1/n_samples), far below the acceptance tolerances here. The std error is
    the spread of per-batch plug-in values over >= 10 contiguous batches
    (fewer only when the batch has fewer samples than that).
    """
    spins = batch.spins
    n = spins.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    site_index = batch.box.site_index
    sites = [tuple(s) for s in sites]
    value = _plug_in_cumulant(spins, site_index, sites)
    k = min(n_batches, n)
    size = n // k
    per_batch = [
        _plug_in_cumulant(spins[i * size:(i + 1) * size], site_index, sites)
        for i in range(k)
    ]
    std_error = float(np.std(per_batch, ddof=1) / math.sqrt(k))
    return value, std_error


# ---------------------------------------------------------------------------
# cumulant tables

@dataclass
class CumulantEntry:
    value: float
    std_error: float | None = None


def canonical_multiset(sites) -> tuple:
    return tuple(sorted(tuple(int(c) for c in s) for s in sites))


@dataclass
class CumulantTable:
    """Joint cumulants indexed by site multisets.

    ``provenance`` is 'exact' or 'estimated'; estimated entries must carry a
    std error and exact entries must not.
    """

    provenance: str
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("exact", "estimated"):
            raise ValueError("provenance must be 'exact' or 'estimated'")

    def add(self, sites, value: float, std_error: float | None = None):
        if self.provenance == "estimated" and std_error is None:
            raise ValueError("estimated entries require a std error")
        if self.provenance == "exact" and std_error is not None:
            raise ValueError("exact entries must not carry a std error")
        self.entries[canonical_multiset(sites)] = CumulantEntry(value, std_error)

    def get(self, sites) -> CumulantEntry:
        return self.entries[canonical_multiset(sites)]

    def __len__(self):
        return len(self.entries)

    def multisets(self):
        return sorted(self.entries)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["multiset", "value", "std_error", "provenance"])
            for key in self.multisets():
                entry = self.entries[key]
                err = "" if entry.std_error is None else format(entry.std_error, ".17g")
                writer.writerow([format_multiset(key),
                                 format(entry.value, ".17g"), err, self.provenance])

    @classmethod
    def read_csv(cls, path) -> "CumulantTable":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["multiset", "value", "std_error", "provenance"]:
            raise ValueError("not a cumulant table CSV")
        provs = {row[3] for row in rows[1:]}
        if len(provs) > 1:
            raise ValueError(f"mixed provenance in table: {provs}")
        table = cls(provs.pop() if provs else "exact")
        for key_text, value, err, _ in rows[1:]:
            table.add(parse_multiset(key_text), float(value),
                      float(err) if err else None)
        return table


def format_multiset(key) -> str:
    """Sites joined by ';', coordinates inside a site joined by ','."""
    return ";".join(",".join(str(c) for c in site) for site in key)


def parse_multiset(text: str) -> tuple:
    return tuple(tuple(int(c) for c in part.split(",")) for part in text.split(";"))


def multisets_up_to(sites, r_max: int, include_duplicates: bool = True):
    """All site multisets of size 1..r_max drawn from the given sites."""
    from itertools import combinations, combinations_with_replacement

    combine = combinations_with_replacement if include_duplicates else combinations
    sites = [tuple(s) for s in sites]
    out = []
    for r in range(1, r_max + 1):
        out.extend(combine(sites, r))
    return out


def exact_cumulant_table(system, multisets) -> CumulantTable:
    """Exact cumulant table over the given multisets from an ExactGibbs system."""
    table = CumulantTable("exact")
    for ms in multisets:
        table.add(ms, system.joint_cumulant(ms))
    return table


def estimated_cumulant_table(batch, multisets, n_batches: int = 10) -> CumulantTable:
    table = CumulantTable("estimated")
    for ms in multisets:
        value, err = estimated_cumulant(batch, ms, n_batches=n_batches)
        table.add(ms, value, err)
    return table
