"""Site percolation on an L x L square lattice.

Sites are indexed row-major, ``i = row * L + col``. Two occupied sites belong
to the same cluster when they share a lattice edge (4-neighbourhood). Borders
are open unless the lattice is built with ``periodic=True``.

Two ways of producing configurations are offered:

* :func:`generate_reshuffled` draws every site independently (a fresh network
  for each value of the occupancy fraction);
* :class:`IncrementalLattice` / :func:`add_random_site` add traders one at a
  time to a growing network, so clusters only ever merge.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError, NormalizationError
from .rng import as_generator

__all__ = [
    "LatticeSpec",
    "OccupancyMask",
    "ClusterLabeling",
    "ClusterSizeHistogram",
    "IncrementalLattice",
    "generate_reshuffled",
    "add_random_site",
    "label_clusters",
    "cluster_histogram",
    "normalized_numbers",
    "mask_from_grid",
]


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    periodic: bool = False

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise DomainError(f"lattice side must be an integer >= 2, got {self.L}")

    @property
    def N(self) -> int:
        return self.L * self.L


@dataclass
class OccupancyMask:
    spec: LatticeSpec
    occupied: np.ndarray  # flat bool array, row-major
    occupied_count: int = field(init=False)

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=bool).reshape(-1)
        if self.occupied.size != self.spec.N:
            raise DomainError(f"mask has {self.occupied.size} sites, lattice needs {self.spec.N}")
        self.occupied_count = int(np.count_nonzero(self.occupied))

    @property
    def fraction(self) -> float:
        return self.occupied_count / self.spec.N

    @property
    def grid(self) -> np.ndarray:
        return self.occupied.reshape(self.spec.L, self.spec.L)


def mask_from_grid(grid, periodic: bool = False) -> OccupancyMask:
    grid = np.asarray(grid, dtype=bool)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise DomainError(f"expected a square 2D array, got shape {grid.shape}")
    return OccupancyMask(LatticeSpec(grid.shape[0], periodic), grid.reshape(-1))


@dataclass
class ClusterLabeling:
    labels: np.ndarray  # cluster id per site, -1 on empty sites
    sizes: np.ndarray  # size of cluster k at index k
    occupied_count: int
    spec: LatticeSpec | None = None

    EMPTY = -1

    @property
    def cluster_count(self) -> int:
        return int(self.sizes.size)


@dataclass
class ClusterSizeHistogram:
    """Number of clusters of each size.

    ``sizes`` is sorted ascending and ``counts[k]`` clusters have size
    ``sizes[k]``; only sizes that occur are stored.
    """

    sizes: np.ndarray
    counts: np.ndarray
    occupied_count: int
    site_count: int | None = None

    def as_dict(self) -> dict[int, int]:
        return {int(s): int(c) for s, c in zip(self.sizes, self.counts)}

    @property
    def cluster_count(self) -> int:
        return int(self.counts.sum())

    @property
    def largest(self) -> int:
        return int(self.sizes[-1]) if self.sizes.size else 0


# ---------------------------------------------------------------------------
# union-find kernels


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    # the smaller index always wins, so a root is the first site of its cluster
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@njit(cache=True)
def _label_kernel(occ, L, periodic):
    n = L * L
    parent = np.empty(n, np.int64)
    for i in range(n):
        parent[i] = i
    for r in range(L):
        for c in range(L):
            i = r * L + c
            if not occ[i]:
                continue
            # hang the new site directly below an existing root
            left = c > 0 and occ[i - 1]
            up = r > 0 and occ[i - L]
            if left:
                parent[i] = _find(parent, i - 1)
                if up:
                    _union(parent, i, i - L)
            elif up:
                parent[i] = _find(parent, i - L)
    if periodic:
        for r in range(L):
            i = r * L
            j = i + L - 1
            if occ[i] and occ[j]:
                _union(parent, i, j)
        for c in range(L):
            j = (L - 1) * L + c
            if occ[c] and occ[j]:
                _union(parent, c, j)

    labels = np.full(n, -1, np.int32)
    sizes = np.zeros(n, np.int64)
    k = 0
    for i in range(n):
        if occ[i]:
            root = _find(parent, i)
            if root == i:
                labels[i] = k
                k += 1
            else:
                labels[i] = labels[root]
            sizes[labels[i]] += 1
    return labels, sizes[:k].copy()


# ---------------------------------------------------------------------------
# operations


def generate_reshuffled(spec: LatticeSpec, p: float, seed=None) -> OccupancyMask:
    """Occupy each site independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"occupation probability must lie in [0, 1], got {p}")
    rng = as_generator(seed)
    return OccupancyMask(spec, rng.random(spec.N) < p)


def add_random_site(mask: OccupancyMask, seed=None) -> OccupancyMask:
    """Return a copy of ``mask`` with one uniformly chosen empty site filled."""
    empty = np.flatnonzero(~mask.occupied)
    if empty.size == 0:
        raise CapacityError("lattice is fully occupied")
    rng = as_generator(seed)
    occ = mask.occupied.copy()
    occ[empty[rng.integers(empty.size)]] = True
    return OccupancyMask(mask.spec, occ)


def label_clusters(mask: OccupancyMask) -> ClusterLabeling:
    labels, sizes = _label_kernel(mask.occupied, mask.spec.L, mask.spec.periodic)
    return ClusterLabeling(labels, sizes, mask.occupied_count, mask.spec)


def _histogram_from_sizes(sizes, occupied_count, site_count=None) -> ClusterSizeHistogram:
    s, c = np.unique(np.asarray(sizes, dtype=np.int64), return_counts=True)
    return ClusterSizeHistogram(s, c.astype(np.int64), int(occupied_count), site_count)


def cluster_histogram(labeling: ClusterLabeling) -> ClusterSizeHistogram:
    n_sites = labeling.spec.N if labeling.spec is not None else None
    return _histogram_from_sizes(labeling.sizes, labeling.occupied_count, n_sites)


def normalized_numbers(hist: ClusterSizeHistogram, per_site: bool = False) -> dict[int, float]:
    """Cluster numbers n(s).

    By default counts are divided by the number of occupied sites, so that
    ``sum(s * n(s)) == 1``. With ``per_site=True`` they are divided by the
    total number of lattice sites instead and the sum equals the occupied
    fraction.
    """
    if hist.occupied_count <= 0:
        raise NormalizationError("cluster numbers are undefined on an empty lattice")
    if per_site:
        if hist.site_count is None:
            raise NormalizationError("histogram does not carry the lattice size")
        denom = hist.site_count
    else:
        denom = hist.occupied_count
    return {int(s): c / denom for s, c in zip(hist.sizes, hist.counts)}


# ---------------------------------------------------------------------------
# incremental construction


class IncrementalLattice:
    """A lattice filled site by site in a random order.

    Sites are added following a uniformly random permutation, which is the
    same as repeatedly picking a uniform empty site. Clusters are maintained
    with a union-find structure and a running size histogram, so the hazard
    can be read off after every addition without relabelling.

    :meth:`fill_to` with a smaller count removes the most recently added
    sites (the permutation prefix is relabelled); :meth:`reset` draws a new
    permutation, i.e. a freshly fragmented network.
    """

    def __init__(self, spec: LatticeSpec, seed=None):
        self.spec = spec
        self.rng = as_generator(seed)
        self.reset(0)

    def reset(self, count: int = 0):
        self.order = self.rng.permutation(self.spec.N)
        self._clear()
        self.fill_to(count)

    def _clear(self):
        N = self.spec.N
        self.filled = 0
        self.occupied = np.zeros(N, dtype=bool)
        self._parent = list(range(N))
        self._size = [0] * N
        self.size_counts: Counter = Counter()
        self.merges: list[int] = []  # distinct neighbouring clusters merged per addition

    @property
    def occupied_count(self) -> int:
        return self.filled

    def _find(self, i):
        parent = self._parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def _neighbours(self, i):
        L = self.spec.L
        r, c = divmod(i, L)
        out = []
        if c > 0:
            out.append(i - 1)
        elif self.spec.periodic:
            out.append(i + L - 1)
        if c < L - 1:
            out.append(i + 1)
        elif self.spec.periodic:
            out.append(i - L + 1)
        if r > 0:
            out.append(i - L)
        elif self.spec.periodic:
            out.append(i + (L - 1) * L)
        if r < L - 1:
            out.append(i + L)
        elif self.spec.periodic:
            out.append(i - (L - 1) * L)
        return out

    def add_next(self) -> int:
        """Occupy the next site of the permutation; return its index."""
        if self.filled >= self.spec.N:
            raise CapacityError("lattice is fully occupied")
        site = int(self.order[self.filled])
        self.filled += 1
        self.occupied[site] = True
        roots = set()
        for j in self._neighbours(site):
            if self.occupied[j]:
                roots.add(self._find(j))
        size = self._size
        counts = self.size_counts
        total = 1
        for r in roots:
            s = size[r]
            counts[s] -= 1
            if counts[s] == 0:
                del counts[s]
            total += s
            self._parent[r] = site
        size[site] = total
        counts[total] += 1
        self.merges.append(len(roots))
        return site

    def fill_to(self, count: int):
        count = int(count)
        if not 0 <= count <= self.spec.N:
            raise DomainError(f"occupied count must lie in [0, {self.spec.N}], got {count}")
        if count < self.filled:
            self._rebuild(count)
        while self.filled < count:
            self.add_next()

    def _rebuild(self, count):
        self._clear()
        if count == 0:
            return
        idx = self.order[:count]
        self.occupied[idx] = True
        labels, sizes = _label_kernel(self.occupied, self.spec.L, self.spec.periodic)
        occ_idx = np.flatnonzero(self.occupied)
        lab = labels[occ_idx]
        _, first = np.unique(lab, return_index=True)
        roots = occ_idx[first]
        parent = np.arange(self.spec.N)
        parent[occ_idx] = roots[lab]
        size = np.zeros(self.spec.N, dtype=np.int64)
        size[roots] = sizes
        self._parent = parent.tolist()
        self._size = size.tolist()
        self.size_counts = Counter(sizes.tolist())
        self.filled = count

    def mask(self) -> OccupancyMask:
        return OccupancyMask(self.spec, self.occupied.copy())

    def histogram(self) -> ClusterSizeHistogram:
        items = sorted(self.size_counts.items())
        sizes = np.array([s for s, _ in items], dtype=np.int64)
        counts = np.array([c for _, c in items], dtype=np.int64)
        return ClusterSizeHistogram(sizes, counts, self.filled, self.spec.N)

    def cluster_of(self, site: int) -> int:
        """Root site of the cluster containing ``site`` (which must be occupied)."""
        if not self.occupied[site]:
            raise DomainError(f"site {site} is empty")
        return self._find(site)
