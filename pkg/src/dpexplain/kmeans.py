"""k-means with an optional fixed center, by single-swap local search.

Centers are drawn from a finite candidate set that meets every
``gamma``-tolerance ball of the input: for each subset ``S`` with weighted
centroid ``c(S)`` and RMS radius ``rho(S) = sqrt(cost(S) / |S|)``, some
candidate lies within ``(gamma / 3) rho(S)`` of ``c(S)``. Local search stops
at a 1-stable set, one that no single swap (never removing the fixed center
``sigma``) improves by more than a relative ``1e-9``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .core import CenterSet, _locate, as_weighted, pairwise_dist
from .errors import NonTermination, TooManyCandidates

log = logging.getLogger(__name__)

MAX_CANDIDATES = 10**5
MAX_SWAPS = 10**5
REL_IMPROVEMENT = 1e-9


@dataclass(frozen=True)
class CandidateSet:
    candidates: np.ndarray
    sigma: Optional[np.ndarray]
    gamma: float
    sigma_index: Optional[int] = None

    def __len__(self) -> int:
        return self.candidates.shape[0]


@dataclass(frozen=True)
class SwapState:
    indices: tuple      # candidate indices, sigma first when present
    distortion: float


@dataclass(frozen=True)
class SwapPairMapping:
    """Pairs ``(s, o)`` of indices into ``S`` and ``O`` with their groups."""

    pairs: list
    capture: np.ndarray     # capture[o] = index of the S center nearest to o
    groups: list            # (S indices, O indices) per group


def _lattice_ball(x: np.ndarray, radius: float, h: float) -> np.ndarray:
    """Integer coordinates of the origin-anchored lattice ``h Z^d`` within ``radius`` of ``x``."""
    lo = np.ceil((x - radius) / h).astype(np.int64)
    hi = np.floor((x + radius) / h).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(x))
    keep = np.sum((grid * h - x) ** 2, axis=1) <= radius * radius
    return grid[keep]


def candidate_centers(
    X,
    sigma=None,
    gamma: float = 0.5,
    weights=None,
    cap: int = MAX_CANDIDATES,
) -> CandidateSet:
    """Input points, ``sigma`` and multiscale lattices around each input point.

    Around point ``x`` the scales are ``r_j = diam 2^-j`` with lattice
    spacing ``gamma r_j / (3 sqrt(d))``, so any location within ``r_j`` of
    ``x`` has a lattice point within ``gamma r_j / 6``. Take ``x`` to be the
    member of ``S`` nearest to ``c(S)``: then ``|x - c(S)| <= rho(S)``, and a
    scale with ``rho <= r_j < 2 rho`` gives the required hit. Scales stop at
    the smallest ``rho`` any subset whose nearest member is ``x`` can have,
    ``g_x / (1 + sqrt(w_x / w_min + 1))`` for nearest-neighbour gap ``g_x``;
    subsets with one distinct location are hit by ``x`` itself.
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    pts, w = as_weighted(X, weights)
    uniq, first, inv = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    distinct = uniq[order]
    wd = np.zeros(len(uniq))
    np.add.at(wd, inv.reshape(-1), w)
    wd = wd[order]
    m, d = distinct.shape

    blocks = [distinct]
    sig = None
    if sigma is not None:
        sig = np.asarray(sigma, dtype=float).reshape(1, d)
        if _locate(distinct, sig[0]) < 0:
            blocks.append(sig)
    total = sum(b.shape[0] for b in blocks)

    if m > 1:
        diam = float(pdist(distinct).max())
        gap = cKDTree(distinct).query(distinct, k=2)[0][:, 1]
        # a subset may hold a single copy of a repeated location
        wmin = float(w[w > 0].min()) if np.any(w > 0) else 1.0
        rho_min = gap / (1.0 + np.sqrt(np.maximum(wd, 0.0) / wmin + 1.0))
        depth = np.floor(np.log2(diam / rho_min)).astype(int)
        for j in range(int(depth.max()) + 1):
            r = diam * 2.0**-j
            h = gamma * r / (3.0 * math.sqrt(d))
            reach = r + h * math.sqrt(d) / 2.0
            coords = [_lattice_ball(x, reach, h) for x in distinct[depth >= j]]
            coords = np.unique(np.vstack(coords), axis=0)
            total += coords.shape[0]
            if total > cap:
                raise TooManyCandidates(
                    f"candidate set exceeds {cap} at scale {j} (gamma={gamma})"
                )
            blocks.append(coords * h)
    cand = np.vstack(blocks)
    # coarse lattices are sublattices of finer ones; drop repeats after the inputs
    _, keep = np.unique(cand, axis=0, return_index=True)
    keep = np.sort(keep)
    cand = cand[keep]
    sig_idx = None if sig is None else _locate(cand, sig[0])
    cand.setflags(write=False)
    return CandidateSet(cand, None if sig is None else sig[0], gamma, sig_idx)


def _distortion(D: np.ndarray, idx, w: np.ndarray) -> float:
    return float(D[list(idx)].min(axis=0) @ w)


def improving_swap(
    state: SwapState,
    cand: CandidateSet,
    X,
    weights=None,
    dist: Optional[np.ndarray] = None,
) -> Optional[SwapState]:
    """First improving swap in lexicographic (s, s') candidate-index order, or None.

    ``dist`` is the optional ``(len(cand), n)`` squared-distance matrix.
    """
    pts, w = as_weighted(X, weights)
    D = pairwise_dist(cand.candidates, pts, 2) if dist is None else dist
    S = list(state.indices)
    threshold = state.distortion * (1.0 - REL_IMPROVEMENT)
    in_S = np.zeros(D.shape[0], dtype=bool)
    in_S[S] = True
    for pos in sorted(range(len(S)), key=lambda t: S[t]):
        s = S[pos]
        if s == cand.sigma_index:
            continue
        rest = S[:pos] + S[pos + 1:]
        base = D[rest].min(axis=0) if rest else np.full(D.shape[1], np.inf)
        new = np.minimum(D, base[None, :]) @ w
        ok = np.flatnonzero((new < threshold) & ~in_S)
        if ok.size:
            t = int(ok[0])
            S2 = list(S)
            S2[pos] = t
            return SwapState(tuple(S2), float(new[t]))
    return None


def kmeans_fixed_center(
    X,
    k: int,
    sigma=None,
    gamma: float = 0.5,
    weights=None,
    init_rng: Optional[np.random.Generator] = None,
    candidates: Optional[CandidateSet] = None,
) -> CenterSet:
    """1-stable ``k`` centers from the candidate set, one of them at ``sigma``.

    With ``sigma=None`` this is plain single-swap k-means. The candidate set
    is built from ``X`` unless given.
    """
    if k < 1:
        raise ValueError("k must be positive")
    pts, w = as_weighted(X, weights)
    cand = candidates if candidates is not None else candidate_centers(pts, sigma, gamma, w)
    if sigma is not None and cand.sigma_index is None:
        raise ValueError("candidate set was built without sigma")
    C = cand.candidates
    D = pairwise_dist(C, pts, 2)
    S = _farthest_first(C, pts, k, cand.sigma_index, init_rng)
    state = SwapState(tuple(S), _distortion(D, S, w))
    for _ in range(MAX_SWAPS):
        nxt = improving_swap(state, cand, pts, w, dist=D)
        if nxt is None:
            break
        state = nxt
    else:
        raise NonTermination(f"no 1-stable set after {MAX_SWAPS} swaps")
    centers = C[list(state.indices)]
    return CenterSet(centers, _distortion(D, state.indices, w), indices=state.indices)


def _farthest_first(C: np.ndarray, pts: np.ndarray, k: int, sigma_index, rng) -> list:
    """Sigma (or a start point), then repeatedly the input point farthest from the chosen set.

    Returns candidate indices; once every input location is chosen the
    remaining slots take the lowest-index unused candidates.
    """
    n_cand = C.shape[0]
    inputs = np.array([_locate(C, p) for p in pts])
    if sigma_index is not None:
        S = [int(sigma_index)]
    else:
        S = [int(inputs[rng.integers(len(inputs))]) if rng is not None else int(inputs[0])]
    near = pairwise_dist(pts, C[S], 2)[:, 0]
    while len(S) < k:
        j = int(np.argmax(near))
        if near[j] <= 0:
            break
        S.append(int(inputs[j]))
        near = np.minimum(near, pairwise_dist(pts, C[[inputs[j]]], 2)[:, 0])
    used = set(S)
    for i in range(n_cand):
        if len(S) >= k:
            break
        if i not in used:
            S.append(i)
            used.add(i)
    # more slots than candidates: repeat the first center
    S.extend([S[0]] * (k - len(S)))
    return S


def kmeans(X, k: int, gamma: float = 0.5, weights=None, init_rng=None) -> CenterSet:
    """Plain k-means through the same swap search (no fixed center)."""
    return kmeans_fixed_center(X, k, None, gamma, weights, init_rng)


def swap_pair_mapping(S: np.ndarray, O: np.ndarray, sigma_pos: Optional[int] = None) -> SwapPairMapping:
    """Swap pairs between a local optimum ``S`` and a reference solution ``O``.

    Each ``o`` is captured by its nearest ``s`` (``S[sigma_pos]`` captures
    ``O[sigma_pos]``). A center capturing ``m >= 1`` of ``O`` forms a group
    with ``m - 1`` centers that capture nothing. A singleton group gives the
    pair ``(s, o)``; otherwise each ``o`` pairs with a non-capturing member,
    the first of them used twice, so the capturing center is never swapped out.
    """
    S = np.atleast_2d(S)
    O = np.atleast_2d(O)
    k = S.shape[0]
    capture = np.argmin(pairwise_dist(O, S, 2), axis=1)
    if sigma_pos is not None:
        capture[sigma_pos] = sigma_pos
    captured_by = {s: [int(o) for o in np.flatnonzero(capture == s)] for s in range(k)}
    lonely = [s for s in range(k) if not captured_by[s]]
    pairs, groups = [], []
    for s in range(k):
        mine = captured_by[s]
        if not mine:
            continue
        if len(mine) == 1:
            pairs.append((s, mine[0]))
            groups.append(([s], mine))
            continue
        helpers = [lonely.pop(0) for _ in range(len(mine) - 1)]
        for h, o in zip(helpers, mine[:-1]):
            pairs.append((h, o))
        pairs.append((helpers[0], mine[-1]))
        groups.append(([s] + helpers, mine))
    return SwapPairMapping(pairs, capture, groups)
