import math

import numpy as np
import pytest
from conftest import bfs_cluster_sizes, size_counts
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from perchazard.errors import CapacityError, DomainError, NormalizationError
from perchazard.percolation import (
    ClusterSizeHistogram,
    IncrementalLattice,
    LatticeSpec,
    OccupancyMask,
    add_random_site,
    cluster_histogram,
    generate_reshuffled,
    label_clusters,
    mask_from_grid,
    normalized_numbers,
)

masks = st.integers(2, 12).flatmap(lambda L: arrays(bool, (L, L)))


def test_lattice_spec_validation():
    assert LatticeSpec(7).N == 49
    with pytest.raises(DomainError):
        LatticeSpec(1)
    with pytest.raises(DomainError):
        OccupancyMask(LatticeSpec(3), np.zeros(8, bool))


def test_reshuffled_extremes():
    spec = LatticeSpec(10)
    assert generate_reshuffled(spec, 0.0, 1).occupied_count == 0
    assert generate_reshuffled(spec, 1.0, 1).occupied_count == 100
    for p in (-0.1, 1.1):
        with pytest.raises(DomainError):
            generate_reshuffled(spec, p, 1)


def test_reshuffled_is_deterministic_per_seed():
    spec = LatticeSpec(30)
    a = generate_reshuffled(spec, 0.4, 11).occupied
    b = generate_reshuffled(spec, 0.4, 11).occupied
    c = generate_reshuffled(spec, 0.4, 12).occupied
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_reshuffled_counts_are_binomial():
    # chi-square of standardized occupied counts over 1000 seeds
    spec = LatticeSpec(100)
    counts = np.array([generate_reshuffled(spec, 0.5, s).occupied_count for s in range(1000)])
    z = (counts - 5000) / 50.0
    assert abs(z.mean()) < 3 / math.sqrt(1000)
    from scipy import stats
    chi2 = float(np.sum(z**2))
    assert stats.chi2.sf(chi2, 1000) > 1e-3
    assert stats.chi2.cdf(chi2, 1000) > 1e-3


def test_occupied_fraction_unbiased():
    spec = LatticeSpec(100)
    frac = [cluster_histogram(label_clusters(generate_reshuffled(spec, 0.3, s))) for s in range(1000)]
    x = np.array([float(np.sum(h.sizes * h.counts)) / spec.N for h in frac])
    se = math.sqrt(0.3 * 0.7 / spec.N / 1000)
    assert abs(x.mean() - 0.3) < 3 * se


def test_add_random_site():
    spec = LatticeSpec(10)
    m = add_random_site(OccupancyMask(spec, np.zeros(100, bool)), 3)
    assert m.occupied_count == 1
    occ = np.ones(100, bool)
    occ[57] = False
    full = add_random_site(OccupancyMask(spec, occ), 3)
    assert full.occupied.all()
    with pytest.raises(CapacityError):
        add_random_site(full, 3)


def test_add_random_site_keeps_memory_and_is_uniform():
    spec = LatticeSpec(3)
    base = np.zeros(9, bool)
    base[[0, 4]] = True
    mask = OccupancyMask(spec, base)
    rng = np.random.default_rng(5)
    hits = np.zeros(9)
    for _ in range(7000):
        new = add_random_site(mask, rng)
        assert new.occupied[[0, 4]].all()
        assert new.occupied_count == 3
        hits += new.occupied & ~base
    assert hits[[0, 4]].sum() == 0
    from scipy import stats
    assert stats.chisquare(hits[~base]).pvalue > 1e-3


def test_label_small_example():
    grid = np.zeros((3, 3), bool)
    for r, c in [(0, 0), (0, 1), (1, 1), (2, 2)]:
        grid[r, c] = True
    lab = label_clusters(mask_from_grid(grid))
    assert sorted(lab.sizes.tolist()) == [1, 3]
    assert lab.labels[0] == lab.labels[1] == lab.labels[4]
    assert lab.labels[8] != lab.labels[0]
    assert (lab.labels[~grid.reshape(-1)] == -1).all()
    hist = cluster_histogram(lab)
    assert hist.as_dict() == {1: 1, 3: 1}
    n = normalized_numbers(hist)
    assert n == {1: 0.25, 3: 0.25}


def test_full_and_empty_lattices():
    full = label_clusters(mask_from_grid(np.ones((20, 20), bool)))
    assert full.sizes.tolist() == [400]
    empty = cluster_histogram(label_clusters(mask_from_grid(np.zeros((5, 5), bool))))
    assert empty.as_dict() == {}
    assert empty.largest == 0
    with pytest.raises(NormalizationError):
        normalized_numbers(empty)


def test_single_site_normalization():
    grid = np.zeros((4, 4), bool)
    grid[2, 1] = True
    assert normalized_numbers(cluster_histogram(label_clusters(mask_from_grid(grid)))) == {1: 1.0}


def test_periodic_wraps():
    grid = np.zeros((4, 4), bool)
    grid[1, 0] = grid[1, 3] = True
    assert sorted(label_clusters(mask_from_grid(grid)).sizes.tolist()) == [1, 1]
    assert label_clusters(mask_from_grid(grid, periodic=True)).sizes.tolist() == [2]


@settings(max_examples=200, deadline=None)
@given(masks)
def test_labels_match_bfs(grid):
    lab = label_clusters(mask_from_grid(grid))
    assert size_counts(lab.sizes) == size_counts(bfs_cluster_sizes(grid))
    assert int(lab.sizes.sum()) == int(grid.sum())


@settings(max_examples=100, deadline=None)
@given(masks)
def test_periodic_labels_match_bfs(grid):
    lab = label_clusters(mask_from_grid(grid, periodic=True))
    assert size_counts(lab.sizes) == size_counts(bfs_cluster_sizes(grid, periodic=True))


@settings(max_examples=200, deadline=None)
@given(masks)
def test_labeling_is_a_valid_partition(grid):
    L = grid.shape[0]
    lab = label_clusters(mask_from_grid(grid))
    labels = lab.labels.reshape(L, L)
    assert ((labels >= 0) == grid).all()
    # neighbours share labels
    both = grid[:, 1:] & grid[:, :-1]
    assert (labels[:, 1:][both] == labels[:, :-1][both]).all()
    both = grid[1:, :] & grid[:-1, :]
    assert (labels[1:, :][both] == labels[:-1, :][both]).all()
    # sizes agree with label multiplicities
    ids, mult = np.unique(labels[grid], return_counts=True)
    assert np.array_equal(lab.sizes[ids], mult)


@settings(max_examples=200, deadline=None)
@given(masks)
def test_normalization_identity(grid):
    if not grid.any():
        return
    hist = cluster_histogram(label_clusters(mask_from_grid(grid)))
    assert int(np.sum(hist.sizes * hist.counts)) == hist.occupied_count
    n = normalized_numbers(hist)
    assert math.fsum(s * v for s, v in n.items()) == pytest.approx(1.0, abs=1e-15)
    n_site = normalized_numbers(hist, per_site=True)
    assert math.fsum(s * v for s, v in n_site.items()) == pytest.approx(grid.mean(), abs=1e-15)


def test_histogram_sorted_and_positive():
    hist = cluster_histogram(label_clusters(generate_reshuffled(LatticeSpec(50), 0.45, 2)))
    assert isinstance(hist, ClusterSizeHistogram)
    assert np.all(np.diff(hist.sizes) > 0)
    assert (hist.counts > 0).all()


# ---------------------------------------------------------------------------
# incremental construction


def test_incremental_fill_visits_every_fraction_and_only_merges():
    spec = LatticeSpec(10)
    inc = IncrementalLattice(spec, 4)
    prev_clusters = 0
    members = {}
    for k in range(1, 101):
        site = inc.add_next()
        assert inc.occupied_count == k
        hist = inc.histogram()
        assert hist.cluster_count == prev_clusters + 1 - inc.merges[-1]
        prev_clusters = hist.cluster_count
        # a site's cluster only ever grows
        root = inc.cluster_of(site)
        for s in list(members):
            r = inc.cluster_of(s)
            cur = {x for x in range(100) if inc.occupied[x] and inc.cluster_of(x) == r}
            assert members[s] <= cur
            members[s] = cur
        members[site] = {x for x in range(100) if inc.occupied[x] and inc.cluster_of(x) == root}
    assert inc.histogram().as_dict() == {100: 1}
    with pytest.raises(CapacityError):
        inc.add_next()


def test_incremental_histogram_matches_relabelling():
    spec = LatticeSpec(16)
    inc = IncrementalLattice(spec, 9)
    for count in (10, 60, 140, 200, 90, 256, 30):
        inc.fill_to(count)
        ref = cluster_histogram(label_clusters(inc.mask()))
        assert inc.histogram().as_dict() == ref.as_dict()
        assert inc.occupied_count == count


def test_incremental_shrink_keeps_prefix_and_reset_redraws():
    inc = IncrementalLattice(LatticeSpec(12), 1)
    inc.fill_to(100)
    order = inc.order.copy()
    inc.fill_to(40)
    assert inc.occupied[order[:40]].all() and inc.occupied.sum() == 40
    inc.fill_to(70)
    assert inc.occupied[order[:70]].all()
    inc.reset(20)
    assert inc.occupied_count == 20
    assert not np.array_equal(inc.order, order)
    with pytest.raises(DomainError):
        inc.fill_to(145)
