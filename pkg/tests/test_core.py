import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpexplain.core import (
    ClusteringParams,
    Dataset,
    WeightedPointSet,
    assign,
    brute_force_opt,
    cost_p,
    exact_partition_opt,
    normalize_to_unit_ball,
)
from dpexplain.errors import (
    DimensionMismatch,
    EmptyCenters,
    EmptyInput,
    InvalidFixed,
    NonFiniteCoordinate,
    TooLarge,
)


def test_cost_zero_distance():
    pts = np.array([[0.3, 0.1]] * 3)
    assert cost_p(pts, [[0.3, 0.1]], 2) == 0.0


@pytest.mark.parametrize("p,expected", [(2, 0.5), (1, 1.0)])
def test_cost_two_points_line(p, expected):
    assert cost_p([0.0, 1.0], [0.5], p) == pytest.approx(expected, abs=1e-15)


def test_cost_errors():
    with pytest.raises(DimensionMismatch):
        cost_p(np.zeros((2, 2)), np.zeros((1, 3)), 2)
    with pytest.raises(EmptyCenters):
        cost_p(np.zeros((2, 2)), np.zeros((0, 2)), 2)


def test_assign_ties_lowest_index():
    owner = assign([[0.0]], [[1.0], [-1.0]])
    assert owner.tolist() == [0]


def test_normalize_single_point():
    ds, scale = normalize_to_unit_ball([[0.0, 0.0]])
    assert scale == 1.0
    np.testing.assert_array_equal(ds.points, [[0.0, 0.0]])


def test_normalize_symmetric_pair():
    ds, scale = normalize_to_unit_ball([[-2.0, 0.0], [2.0, 0.0]])
    assert scale == 2.0
    np.testing.assert_allclose(ds.points, [[-1.0, 0.0], [1.0, 0.0]])


def test_normalize_arbitrary_rows():
    ds, _ = normalize_to_unit_ball([[3.0, -7.5], [100.0, 2.0], [-4.0, 0.25]])
    assert (ds.n, ds.d) == (3, 2)
    assert np.all(np.linalg.norm(ds.points, axis=1) <= 1.0 + 1e-12)


def test_normalize_errors():
    with pytest.raises(EmptyInput):
        normalize_to_unit_ball([])
    with pytest.raises(NonFiniteCoordinate):
        normalize_to_unit_ball([[0.0, np.nan]])


def test_dataset_is_immutable():
    ds = Dataset([[0.1, 0.2]])
    with pytest.raises(ValueError):
        ds.points[0, 0] = 1.0


def test_brute_force_tie_break():
    res = brute_force_opt([0.0, 1.0], [0.0, 1.0], ClusteringParams(1, 2))
    assert res.cost == 1.0
    assert res.centers.tolist() == [[0.0]]


def test_brute_force_fixed():
    X = [0.0, 0.5, 1.0]
    res = brute_force_opt(X, X, ClusteringParams(2, 1), fixed=[0.0])
    assert res.cost == pytest.approx(0.5)
    assert [0.0] in res.centers.tolist()


def test_brute_force_k_equals_n():
    rng = np.random.default_rng(1)
    X = rng.uniform(-0.5, 0.5, (5, 2))
    res = brute_force_opt(X, X, ClusteringParams(5, 2), fixed=X[3])
    assert res.cost == 0.0


def test_brute_force_errors():
    X = np.arange(20, dtype=float).reshape(-1, 1) / 20
    with pytest.raises(InvalidFixed):
        brute_force_opt(X, X, ClusteringParams(2, 1), fixed=[0.77])
    with pytest.raises(TooLarge):
        brute_force_opt(X, X, ClusteringParams(4, 1), max_subsets=100)


def _rand_instance(rng, n=7, d=2):
    return rng.uniform(-0.6, 0.6, (n, d))


@pytest.mark.parametrize("seed", range(6))
def test_brute_force_monotone_in_k_and_fixed(seed):
    rng = np.random.default_rng(seed)
    X = _rand_instance(rng)
    for p in (1, 2):
        costs = [brute_force_opt(X, X, ClusteringParams(k, p)).cost for k in (1, 2, 3)]
        assert costs[0] >= costs[1] >= costs[2]
        free = brute_force_opt(X, X, ClusteringParams(2, p)).cost
        for i in range(len(X)):
            assert brute_force_opt(X, X, ClusteringParams(2, p), fixed=X[i]).cost >= free - 1e-15


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.sampled_from([1, 2]))
def test_cost_permutation_invariance(seed, p):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.5, 0.5, (9, 3))
    C = rng.uniform(-0.5, 0.5, (3, 3))
    w = rng.uniform(0, 2, 9)
    base = cost_p(X, C, p, w)
    perm = rng.permutation(9)
    assert cost_p(X[perm], C[rng.permutation(3)], p, w[perm]) == pytest.approx(base, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), mult=st.integers(1, 6))
def test_cost_weight_equals_duplication(seed, mult):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.5, 0.5, (4, 2))
    C = rng.uniform(-0.5, 0.5, (2, 2))
    w = np.ones(4)
    w[0] = mult
    dup = np.vstack([X, np.repeat(X[:1], mult - 1, axis=0)])
    for p in (1, 2):
        assert cost_p(X, C, p, w) == pytest.approx(cost_p(dup, C, p), rel=1e-12)


def test_weighted_point_set_validation():
    with pytest.raises(ValueError):
        WeightedPointSet([[0.0]], [-1.0])
    wps = WeightedPointSet([[0.0], [0.5]], [1.0, 2.0])
    assert wps.total_weight == 3.0


@pytest.mark.parametrize("seed", range(8))
def test_partition_oracle_matches_subset_enumeration(seed):
    rng = np.random.default_rng(seed)
    X = _rand_instance(rng, n=6)
    w = rng.integers(1, 4, 6).astype(float)
    cand = np.vstack([X, rng.uniform(-0.6, 0.6, (5, 2))])
    for p in (1, 2):
        for k in (1, 2, 3):
            a = brute_force_opt(X, cand, ClusteringParams(k, p), weights=w)
            b = exact_partition_opt(X, k, p, weights=w, candidates=cand)
            assert b.cost == pytest.approx(a.cost, rel=1e-9, abs=1e-12)
            af = brute_force_opt(X, cand, ClusteringParams(k, p), fixed=X[2], weights=w)
            bf = exact_partition_opt(X, k, p, fixed=X[2], weights=w, candidates=cand)
            assert bf.cost == pytest.approx(af.cost, rel=1e-9, abs=1e-12)
            assert len(bf.centers) == k


def test_continuous_oracle_against_all_labelings():
    # independent route: enumerate every labeling and use centroids
    rng = np.random.default_rng(3)
    X = _rand_instance(rng, n=6)
    sigma = X[1]
    for k in (1, 2, 3):
        best = np.inf
        for lab in itertools.product(range(k), repeat=len(X)):
            lab = np.array(lab)
            c = 0.0
            for g in range(k):
                m = X[lab == g]
                if g == 0:
                    c += ((m - sigma) ** 2).sum()
                elif len(m):
                    c += ((m - m.mean(0)) ** 2).sum()
            best = min(best, c)
        got = exact_partition_opt(X, k, 2, fixed=sigma)
        assert got.cost == pytest.approx(best, rel=1e-10, abs=1e-14)
        np.testing.assert_allclose(got.centers[0], sigma)
