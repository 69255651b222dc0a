"""Monte Carlo generation of spin configurations with reproducible seeding.

The chain RNG is a counter-based Philox generator keyed by the spec's seed;
all randomness is drawn from that single stream in a fixed order, so an equal
ChainSpec yields a bit-identical SampleBatch regardless of how many chains run
concurrently. A sweep is |box| single-site Metropolis proposals in
lexicographic site order. Each proposal resamples the site's spin uniformly,
so a move happens with probability min(1, e^{-dH}) / 2; the acceptance ratio
is the usual Metropolis one, and the half keeps the kernel aperiodic even
when dH = 0 (a pure flip proposal at beta = h = 0 would deterministically
alternate between a configuration and its negation). Flip probabilities come
from a small lookup table indexed by (current spin, neighbor sum), and the
sweep loop itself is JIT-compiled. Plus/minus boundary conditions enter as
frozen ghost spins outside the box.

Cluster updates (h = 0 only) grow a single same-spin cluster with bond
probability 1 - e^{-2 beta}; under +/- bc the frozen exterior acts as a
pinned ghost vertex and any update whose cluster reaches it is rejected,
which preserves reversibility.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import ResourceCapError
from .gibbs_exact import (BoundaryCondition, ExactGibbs, IsingParams,
                          SpinConfiguration)
from .lattice import Box, exterior_neighbor_counts, interior_edges

SPOOL_MAGIC = b"IWDG"
SPOOL_VERSION = 1
_BC_CODES = {BoundaryCondition.FREE: 0, BoundaryCondition.PLUS: 1,
             BoundaryCondition.MINUS: 2}
_BC_FROM_CODE = {v: k for k, v in _BC_CODES.items()}

_MAX_DRAWS_PER_BLOCK = 1 << 22


class UpdateKind(enum.Enum):
    SINGLE_FLIP = "single-flip"
    CLUSTER_ZERO_FIELD = "cluster-zero-field"

    @classmethod
    def parse(cls, text: str) -> "UpdateKind":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(f"unknown update kind {text!r}") from None


@dataclass(frozen=True)
class ChainSpec:
    """Chain parameters. burn_in and thinning count sweeps for single-flip
    updates and whole cluster updates for the cluster kind. The defaults suit
    far-subcritical runs (beta <= 0.3), where chains mix in O(1) sweeps."""

    params: IsingParams
    box: Box
    seed: int
    burn_in: int = 1000
    thinning: int = 10
    n_samples: int = 1
    update: UpdateKind = UpdateKind.SINGLE_FLIP

    def __post_init__(self):
        if self.params.d != self.box.dimension:
            raise ValueError("params dimension does not match box")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.burn_in < 0 or self.thinning < 1 or self.n_samples < 1:
            raise ValueError("need burn_in >= 0, thinning >= 1, n_samples >= 1")
        if self.update is UpdateKind.CLUSTER_ZERO_FIELD and self.params.h != 0.0:
            raise ValueError("cluster updates require h = 0")


@dataclass
class SampleBatch:
    """Configurations produced by one chain; immutable once returned."""

    spec: ChainSpec | None
    box: Box
    bc: BoundaryCondition
    spins: np.ndarray  # (n_samples, n_sites) int8

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.ndim != 2 or self.spins.shape[1] != self.box.n_sites:
            raise ValueError("spins must be (n_samples, n_sites)")

    @property
    def n_samples(self) -> int:
        return self.spins.shape[0]

    def configurations(self):
        for row in self.spins:
            yield SpinConfiguration(self.box, row, self.bc)

    def magnetization(self) -> np.ndarray:
        return self.spins.sum(axis=1, dtype=np.int64)


def _neighbor_tables(box: Box, bc: BoundaryCondition):
    """(interior neighbor index table padded with -1, ghost neighbor-spin sum)."""
    d = box.dimension
    idx = box.site_index
    n = box.n_sites
    nbr = np.full((n, 2 * d), -1, dtype=np.int64)
    for i, site in enumerate(box.sites()):
        col = 0
        for nb in box.neighbors(site):
            if box.contains(nb):
                nbr[i, col] = idx[nb]
                col += 1
    eta = bc.spin_value
    if eta is None:
        ghost = np.zeros(n, dtype=np.int64)
    else:
        ghost = eta * np.asarray(exterior_neighbor_counts(box), dtype=np.int64)
    return nbr, ghost


def _flip_probability_table(params: IsingParams) -> np.ndarray:
    """min(1, e^{-dH}) / 2 for dH = 2 beta s k + 2 h s, indexed [s01, k + 2d].

    The factor 1/2 is the uniform-resample proposal hitting the opposite spin.
    """
    d = params.d
    table = np.empty((2, 4 * d + 1))
    for s01, s in ((0, -1), (1, 1)):
        for k in range(-2 * d, 2 * d + 1):
            dh = 2.0 * params.beta * s * k + 2.0 * params.h * s
            table[s01, k + 2 * d] = 0.5 * min(1.0, math.exp(-dh))
    return table


@njit(cache=True, nogil=True)
def _sweep_kernel(spins, nbr, ghost, flip, uniforms, n_sweeps, offset):
    n = spins.shape[0]
    degree = nbr.shape[1]
    u = 0
    for _ in range(n_sweeps):
        for i in range(n):
            k = ghost[i]
            for t in range(degree):
                j = nbr[i, t]
                if j >= 0:
                    k += spins[j]
            s = spins[i]
            if uniforms[u] < flip[(s + 1) // 2, k + offset]:
                spins[i] = -s
            u += 1


class _SingleFlipDriver:
    def __init__(self, spec: ChainSpec, rng):
        self.rng = rng
        self.spins = _initial_state(spec, rng)
        self.nbr, self.ghost = _neighbor_tables(spec.box, spec.params.bc)
        self.flip = _flip_probability_table(spec.params)
        self.offset = 2 * spec.params.d
        self.n = spec.box.n_sites

    def advance(self, n_sweeps: int):
        per_block = max(1, _MAX_DRAWS_PER_BLOCK // self.n)
        done = 0
        while done < n_sweeps:
            block = min(per_block, n_sweeps - done)
            uniforms = self.rng.random(block * self.n)
            _sweep_kernel(self.spins, self.nbr, self.ghost, self.flip,
                          uniforms, block, self.offset)
            done += block


class _ClusterDriver:
    def __init__(self, spec: ChainSpec, rng):
        self.rng = rng
        self.spins = _initial_state(spec, rng)
        self.nbr, ghost = _neighbor_tables(spec.box, spec.params.bc)
        self.ghost_bonds = np.abs(ghost)  # bonds to the pinned exterior spin
        self.eta = spec.params.bc.spin_value
        self.p_bond = 1.0 - math.exp(-2.0 * spec.params.beta)
        self.n = spec.box.n_sites

    def advance(self, n_steps: int):
        for _ in range(n_steps):
            self._one_cluster()

    def _one_cluster(self):
        rng, spins = self.rng, self.spins
        seed_site = int(rng.integers(self.n))
        s0 = int(spins[seed_site])
        in_cluster = np.zeros(self.n, dtype=bool)
        in_cluster[seed_site] = True
        stack = [seed_site]
        cluster = [seed_site]
        while stack:
            u = stack.pop()
            for j in self.nbr[u]:
                if j >= 0 and not in_cluster[j] and spins[j] == s0:
                    if rng.random() < self.p_bond:
                        in_cluster[j] = True
                        stack.append(j)
                        cluster.append(j)
            if self.eta is not None and s0 == self.eta:
                for _ in range(self.ghost_bonds[u]):
                    if rng.random() < self.p_bond:
                        return  # cluster grabbed the pinned exterior: reject
        for i in cluster:
            spins[i] = -spins[i]


def _initial_state(spec: ChainSpec, rng) -> np.ndarray:
    eta = spec.params.bc.spin_value
    if eta is not None:
        # start in the boundary-favored state; low-temperature chains
        # otherwise waste the burn-in melting random domains
        return np.full(spec.box.n_sites, eta, dtype=np.int8)
    bits = rng.integers(0, 2, size=spec.box.n_sites)
    return (2 * bits - 1).astype(np.int8)


def chain_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def run_chain(spec: ChainSpec) -> SampleBatch:
    """Run the chain and collect n_samples configurations.

    Identical specs produce bit-identical batches: the Philox stream is keyed
    by the seed and consumed in a fixed order (initial state first, then one
    uniform per proposal / bond attempt).
    """
    rng = chain_rng(spec.seed)
    if spec.update is UpdateKind.SINGLE_FLIP:
        driver = _SingleFlipDriver(spec, rng)
    else:
        driver = _ClusterDriver(spec, rng)
    out = np.empty((spec.n_samples, spec.box.n_sites), dtype=np.int8)
    driver.advance(spec.burn_in)
    for k in range(spec.n_samples):
        driver.advance(spec.thinning)
        out[k] = driver.spins
    return SampleBatch(spec, spec.box, spec.params.bc, out)


def estimate_observable(batch: SampleBatch, f, n_batches: int = 10):
    """(sample mean, batch-means std error) of a configuration observable.

    Uses >= 10 contiguous batches when the sample count allows; below that,
    every sample is its own batch.
    """
    if batch.n_samples < 2:
        raise ValueError("need at least 2 samples")
    values = np.array([f(c) for c in batch.configurations()], dtype=np.float64)
    mean = float(values.mean())
    k = min(n_batches, len(values))
    size = len(values) // k
    batch_means = values[: k * size].reshape(k, size).mean(axis=1)
    std_error = float(np.std(batch_means, ddof=1) / math.sqrt(k))
    return mean, std_error


# ---------------------------------------------------------------------------
# exact transition matrices on enumerable systems (validation tooling)

def site_flip_kernels(box: Box, params: IsingParams, cap_states: int = 1 << 12):
    """One Metropolis kernel matrix per site, in lexicographic order."""
    n = box.n_sites
    if (1 << n) > cap_states:
        raise ResourceCapError(f"2^{n} states exceed the matrix cap {cap_states}")
    nbr, ghost = _neighbor_tables(box, params.bc)
    flip = _flip_probability_table(params)
    offset = 2 * params.d
    kernels = []
    n_states = 1 << n
    for i in range(n):
        kernel = np.zeros((n_states, n_states))
        for state in range(n_states):
            spins = 2 * ((state >> np.arange(n)) & 1) - 1
            k = ghost[i] + sum(spins[j] for j in nbr[i] if j >= 0)
            a = flip[(spins[i] + 1) // 2, k + offset]
            kernel[state, state ^ (1 << i)] = a
            kernel[state, state] = 1.0 - a
        kernels.append(kernel)
    return kernels


def sweep_transition_matrix(box: Box, params: IsingParams,
                            cap_states: int = 1 << 12) -> np.ndarray:
    """Row-stochastic matrix of one lexicographic single-flip sweep."""
    kernels = site_flip_kernels(box, params, cap_states)
    matrix = kernels[0]
    for kernel in kernels[1:]:
        matrix = matrix @ kernel
    return matrix


def cluster_transition_matrix(box: Box, params: IsingParams,
                              cap_bonds: int = 16) -> np.ndarray:
    """Exact one-step cluster-update matrix by bond-subset enumeration.

    The grown cluster equals the connected component of the seed site in the
    graph of independently activated same-spin bonds, so the transition law
    is a sum over activation subsets; components containing the pinned
    exterior reject.
    """
    if params.h != 0.0:
        raise ValueError("cluster updates require h = 0")
    n = box.n_sites
    n_states = 1 << n
    idx = box.site_index
    edges = [(idx[a], idx[b]) for a, b in interior_edges(box)]
    ext = exterior_neighbor_counts(box)
    eta = params.bc.spin_value
    ghost = n  # virtual vertex index for the frozen exterior
    bonds_all = list(edges)
    if eta is not None:
        bonds_all += [(i, ghost) for i in range(n) for _ in range(ext[i])]
    p = 1.0 - math.exp(-2.0 * params.beta)

    matrix = np.zeros((n_states, n_states))
    for state in range(n_states):
        spins = 2 * ((state >> np.arange(n)) & 1) - 1
        aligned = [(a, b) for a, b in bonds_all
                   if (spins[a] if a < n else eta) == (spins[b] if b < n else eta)]
        m = len(aligned)
        if m > cap_bonds:
            raise ResourceCapError(f"{m} aligned bonds exceed cap {cap_bonds}")
        for subset in range(1 << m):
            open_bonds = [aligned[t] for t in range(m) if subset >> t & 1]
            prob = p ** len(open_bonds) * (1.0 - p) ** (m - len(open_bonds))
            parent = list(range(n + 1))

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for a, b in open_bonds:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
            for seed_site in range(n):
                root = find(seed_site)
                if eta is not None and root == find(ghost):
                    matrix[state, state] += prob / n
                    continue
                flip_mask = 0
                for i in range(n):
                    if find(i) == root:
                        flip_mask |= 1 << i
                matrix[state, state ^ flip_mask] += prob / n
    return matrix


# ---------------------------------------------------------------------------
# binary sample spool

def write_spool(batch: SampleBatch, path):
    """Write samples as packed sign bits (bit 1 = spin +1, lexicographic
    site order, little-endian bit order) behind a fixed 32-byte header."""
    box, d = batch.box, batch.box.dimension
    if d > 5:
        raise ValueError("spool header supports dimensions up to 5")
    header = struct.pack("<4sBBHI", SPOOL_MAGIC, SPOOL_VERSION, d,
                         _BC_CODES[batch.bc], batch.n_samples)
    header += struct.pack(f"<{d}h", *box.lo) + struct.pack(f"<{d}h", *box.hi)
    header += b"\x00" * (32 - len(header))
    bits = (batch.spins > 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(header)
        for row in bits:
            fh.write(np.packbits(row, bitorder="little").tobytes())


def read_spool(path) -> SampleBatch:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) < 32 or header[:4] != SPOOL_MAGIC:
            raise ValueError("not a sample spool file")
        _, version, d, bc_code, count = struct.unpack("<4sBBHI", header[:12])
        if version != SPOOL_VERSION:
            raise ValueError(f"unsupported spool version {version}")
        lo = struct.unpack(f"<{d}h", header[12:12 + 2 * d])
        hi = struct.unpack(f"<{d}h", header[12 + 2 * d:12 + 4 * d])
        box = Box(lo, hi)
        n = box.n_sites
        record = (n + 7) // 8
        rows = np.empty((count, n), dtype=np.int8)
        for k in range(count):
            payload = fh.read(record)
            if len(payload) != record:
                raise ValueError("truncated spool file")
            bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8),
                                 count=n, bitorder="little")
            rows[k] = 2 * bits.astype(np.int8) - 1
    return SampleBatch(None, box, _BC_FROM_CODE[bc_code], rows)
