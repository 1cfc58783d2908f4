import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpexplain.core import (
    ClusteringParams,
    brute_force_opt,
    cost_p,
    exact_partition_opt,
    pairwise_dist,
)
from dpexplain.errors import TooManyCandidates
from dpexplain.kmeans import (
    CandidateSet,
    SwapState,
    _distortion,
    _farthest_first,
    candidate_centers,
    improving_swap,
    kmeans,
    kmeans_fixed_center,
    swap_pair_mapping,
)


def contains(cands, q, tol=1e-12):
    return bool(np.any(np.linalg.norm(cands - np.asarray(q), axis=1) <= tol))


def tolerance_misses(X, w, cands, gamma):
    """Nonempty subsets whose tolerance ball holds no candidate."""
    misses = []
    n = len(X)
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            idx = list(sub)
            W = w[idx].sum()
            c = (w[idx, None] * X[idx]).sum(0) / W
            rho = np.sqrt((w[idx] * ((X[idx] - c) ** 2).sum(1)).sum() / W)
            dist = np.linalg.norm(cands - c, axis=1).min()
            if dist > gamma / 3 * rho + 1e-12:
                misses.append(sub)
    return misses


def test_singleton_and_coincident():
    x = np.array([0.3, -0.1])
    sig = np.array([0.0, 0.5])
    for X in ([x], [x, x]):
        cs = candidate_centers(X, sig, 0.5)
        assert contains(cs.candidates, x) and contains(cs.candidates, sig)
        assert np.allclose(cs.candidates[cs.sigma_index], sig)


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_tolerance_ball_contract(gamma):
    rng = np.random.default_rng(int(gamma * 100))
    for _ in range(5):
        X = rng.uniform(-0.7, 0.7, (8, 2))
        cs = candidate_centers(X, X[0], gamma)
        assert tolerance_misses(X, np.ones(8), cs.candidates, gamma) == []


def test_tolerance_ball_contract_weighted_and_clustered():
    rng = np.random.default_rng(3)
    for _ in range(5):
        X = np.vstack([rng.normal(0.3, 0.01, (4, 2)), rng.uniform(-0.7, 0.7, (3, 2))])
        w = rng.uniform(0.5, 20.0, 7)
        cs = candidate_centers(X, None, 0.5, weights=w)
        assert tolerance_misses(X, w, cs.candidates, 0.5) == []


def test_candidate_cap():
    X = np.random.default_rng(0).uniform(-0.5, 0.5, (6, 2))
    with pytest.raises(TooManyCandidates):
        candidate_centers(X, None, 0.5, cap=50)


def test_candidates_start_with_inputs():
    X = np.random.default_rng(1).uniform(-0.5, 0.5, (5, 3))
    cs = candidate_centers(X, None, 0.5)
    np.testing.assert_array_equal(cs.candidates[:5], X)
    assert len(np.unique(cs.candidates, axis=0)) == len(cs)


def line_candidates(vals, sigma_index):
    c = np.array(vals, dtype=float).reshape(-1, 1)
    return CandidateSet(c, c[sigma_index], 0.5, sigma_index)


def test_worked_swap():
    X = np.array([[0.0], [1.0]])
    cand = line_candidates([0.0, 0.4, 1.0], 0)
    state = SwapState((0, 1), cost_p(X, [[0.0], [0.4]], 2))
    assert state.distortion == pytest.approx(0.36)
    nxt = improving_swap(state, cand, X)
    assert nxt.indices == (0, 2) and nxt.distortion == pytest.approx(0.0)
    assert improving_swap(nxt, cand, X) is None


def test_k1_is_immediately_stable():
    X = np.array([[0.0], [1.0]])
    cand = line_candidates([0.0, 0.4, 1.0], 0)
    assert improving_swap(SwapState((0,), 1.0), cand, X) is None


def test_optimum_over_candidates_is_stable():
    rng = np.random.default_rng(5)
    X = rng.uniform(-0.5, 0.5, (6, 2))
    C = np.vstack([X, rng.uniform(-0.5, 0.5, (6, 2))])
    cand = CandidateSet(C, X[0], 0.5, 0)
    opt = brute_force_opt(X, C, ClusteringParams(3, 2), fixed=X[0])
    idx = (0,) + tuple(i for i in opt.indices if i != 0)
    assert improving_swap(SwapState(idx, opt.cost), cand, X) is None


def test_four_corners_zero():
    X = np.array([[0.5, 0.5], [0.5, -0.5], [-0.5, 0.5], [-0.5, -0.5]])
    cs = kmeans_fixed_center(X, 4, X[1])
    assert cs.cost == 0.0
    assert kmeans(X, 4).cost == 0.0


def test_two_point_line():
    cs = kmeans_fixed_center(np.array([[0.0], [1.0]]) * 0.9, 2, [0.0])
    assert cs.cost == pytest.approx(0.0)
    assert sorted(cs.centers.ravel().tolist()) == pytest.approx([0.0, 0.9])


def test_descent_sigma_membership_and_stability():
    rng = np.random.default_rng(6)
    for _ in range(10):
        X = rng.uniform(-0.7, 0.7, (9, 2))
        sig = rng.uniform(-0.7, 0.7, 2)
        cand = candidate_centers(X, sig, 0.5)
        cs = kmeans_fixed_center(X, 3, sig, candidates=cand)
        assert cand.sigma_index in cs.indices
        assert improving_swap(SwapState(cs.indices, cs.cost), cand, X) is None
        # replay the search and watch the distortion
        D = pairwise_dist(cand.candidates, X, 2)
        S = _farthest_first(cand.candidates, X, 3, cand.sigma_index, None)
        state = SwapState(tuple(S), _distortion(D, S, np.ones(9)))
        while True:
            nxt = improving_swap(state, cand, X, dist=D)
            if nxt is None:
                break
            assert nxt.distortion < state.distortion
            assert cand.sigma_index in nxt.indices
            state = nxt
        assert state.indices == cs.indices


def test_ratio_sweep_small():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(3, n) + 1))
        X = rng.uniform(-0.7, 0.7, (n, 2))
        sig = X[rng.integers(n)]
        cand = candidate_centers(X, sig, 0.5)
        cs = kmeans_fixed_center(X, k, sig, candidates=cand)
        opt = exact_partition_opt(X, k, 2, fixed=sig, candidates=cand.candidates)
        assert cs.cost <= 25 * opt.cost + 1e-12
        assert opt.cost <= cs.cost + 1e-12


def test_plain_kmeans_close_to_continuous_optimum():
    rng = np.random.default_rng(8)
    for _ in range(10):
        X = rng.uniform(-0.7, 0.7, (8, 2))
        cs = kmeans(X, 2)
        opt = exact_partition_opt(X, 2, 2)
        assert opt.cost <= cs.cost + 1e-12
        assert cs.cost <= 26 * opt.cost + 1e-12


def test_centroidal_identity():
    rng = np.random.default_rng(9)
    for _ in range(50):
        S = rng.normal(size=(int(rng.integers(1, 10)), 3))
        c = S.mean(0)
        c2 = rng.normal(size=3)
        lhs = cost_p(S, [c2], 2)
        rhs = cost_p(S, [c], 2) + len(S) * np.sum((c - c2) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-9)


def swap_quantities(X, S, O):
    dS = ((X[:, None] - S[None]) ** 2).sum(-1)
    dO = ((X[:, None] - O[None]) ** 2).sum(-1)
    return dS.min(1).sum(), dO.min(1).sum(), dO.argmin(1)


def test_swap_pairs_and_bounds():
    rng = np.random.default_rng(10)
    checked = 0
    for _ in range(20):
        n = int(rng.integers(3, 10))
        k = int(rng.integers(2, 4))
        X = rng.uniform(-0.7, 0.7, (n, 2))
        sig = X[rng.integers(n)]
        O = exact_partition_opt(X, k, 2, fixed=sig).centers
        base = candidate_centers(X, sig, 0.5)
        C = np.vstack([base.candidates, O[1:]])
        cand = CandidateSet(C, sig, 0.5, base.sigma_index)
        cs = kmeans_fixed_center(X, k, sig, candidates=cand)
        S = cs.centers
        mp = swap_pair_mapping(S, O, sigma_pos=0)
        o_seen = [o for _, o in mp.pairs]
        assert sorted(o_seen) == list(range(k))
        counts = np.bincount([s for s, _ in mp.pairs], minlength=k)
        assert counts.max() <= 2
        for s, o in mp.pairs:
            assert set(np.flatnonzero(mp.capture == s)) <= {o}
        assert 0 not in [s for s, o in mp.pairs if o != 0]
        dS, dO, o_of = swap_quantities(X, S, O)
        s_of_o = mp.capture
        R = sum(np.sum((X[q] - S[s_of_o[o_of[q]]]) ** 2) for q in range(n))
        scale = max(dO, dS, 1e-300)
        assert dO - 3 * dS + 2 * R >= -1e-9 * scale
        assert R <= 2 * dO + dS + 2 * np.sqrt(dS * dO) + 1e-9 * scale
        checked += 1
    assert checked == 20


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_output_is_k_candidates_with_sigma(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    k = int(rng.integers(1, 4))
    X = rng.uniform(-0.6, 0.6, (n, 2))
    sig = rng.uniform(-0.6, 0.6, 2)
    cs = kmeans_fixed_center(X, k, sig, weights=rng.uniform(0.5, 2, n))
    assert cs.k == k
    assert contains(cs.centers, sig)
    assert len(set(cs.indices)) == min(k, len(candidate_centers(X, sig, 0.5)))
