"""Geometry, cost evaluation and exact oracles for (k, p)-clustering.

Every point collection is handled as an ``(n, d)`` float array, optionally
paired with a length-``n`` weight vector. ``Dataset`` and ``WeightedPointSet``
are thin immutable wrappers that validate those arrays once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import (
    DimensionMismatch,
    EmptyCenters,
    EmptyInput,
    InvalidFixed,
    NonFiniteCoordinate,
    TooLarge,
)

UNIT_BALL_TOL = 1e-9
MAX_SUBSETS = 10**7
MAX_PARTITION_POINTS = 16


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable multiset of ``n`` points in the ``d``-dimensional unit ball."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0 or pts.shape[0] == 0:
            raise EmptyInput("dataset must contain at least one point")
        if pts.ndim != 2:
            raise DimensionMismatch(f"expected a 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteCoordinate("dataset contains non-finite coordinates")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(norms > 1.0 + UNIT_BALL_TOL):
            raise ValueError(
                f"points must lie in the unit ball (max norm {norms.max():.6g})"
            )
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class WeightedPointSet:
    """Points with nonnegative weights, e.g. a private coreset."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise DimensionMismatch(
                f"{pts.shape[0]} points but {w.shape[0]} weights"
            )
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteCoordinate("weighted point set has non-finite coordinates")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def unweighted(cls, points) -> "WeightedPointSet":
        pts = as_points(points)
        return cls(pts, np.ones(pts.shape[0]))


@dataclass(frozen=True)
class ClusteringParams:
    k: int
    p: int = 2

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 (k-median) or 2 (k-means), got {self.p}")

    def check(self, n: int) -> None:
        if self.k > n:
            raise ValueError(f"k={self.k} exceeds the number of points n={n}")


@dataclass(frozen=True)
class CenterSet:
    """``k`` centers together with the cost they were evaluated at."""

    centers: np.ndarray
    cost: float
    indices: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "centers", _frozen(np.atleast_2d(self.centers)))
        object.__setattr__(self, "cost", float(self.cost))

    @property
    def k(self) -> int:
        return self.centers.shape[0]


PointsLike = Union[np.ndarray, Sequence, Dataset, WeightedPointSet]


def as_points(obj: PointsLike) -> np.ndarray:
    """Return the ``(n, d)`` coordinate array behind ``obj``."""
    if isinstance(obj, (Dataset, WeightedPointSet)):
        return obj.points
    a = np.asarray(obj, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    return a


def as_weighted(obj: PointsLike, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Split ``obj`` into ``(points, weights)``; unweighted inputs get weight 1."""
    pts = as_points(obj)
    if weights is None:
        if isinstance(obj, WeightedPointSet):
            weights = obj.weights
        else:
            weights = np.ones(pts.shape[0])
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != pts.shape[0]:
        raise DimensionMismatch(f"{pts.shape[0]} points but {w.shape[0]} weights")
    return pts, w


def _as_centers(centers) -> np.ndarray:
    if isinstance(centers, CenterSet):
        return centers.centers
    c = np.asarray(centers, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1, 1)
    elif c.ndim == 1:
        c = c.reshape(-1, 1)
    return c


def pairwise_dist(a: np.ndarray, b: np.ndarray, p: int = 1) -> np.ndarray:
    """Matrix of ``||a_i - b_j||^p`` for ``p`` in {1, 2}."""
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    metric = "euclidean" if p == 1 else "sqeuclidean"
    return cdist(a, b, metric=metric)


def assign(points: PointsLike, centers) -> np.ndarray:
    """Index of the nearest center for every point, ties to the lowest index."""
    pts = as_points(points)
    c = _as_centers(centers)
    if c.shape[0] == 0:
        raise EmptyCenters("center list is empty")
    return np.argmin(pairwise_dist(pts, c, 2), axis=1)


def cost_p(points: PointsLike, centers, p: int, weights=None) -> float:
    """Weighted clustering cost ``sum_i w_i * min_j ||x_i - c_j||^p``."""
    pts, w = as_weighted(points, weights)
    c = _as_centers(centers)
    if c.shape[0] == 0:
        raise EmptyCenters("center list is empty")
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    if pts.shape[0] == 0:
        return 0.0
    dmin = pairwise_dist(pts, c, p).min(axis=1)
    return float(np.dot(w, dmin))


def normalize_to_unit_ball(raw) -> tuple[Dataset, float]:
    """Center on the bounding-box midpoint and scale by the largest norm.

    Costs on the returned dataset convert back to original units by
    multiplying with ``scale ** p``.
    """
    a = np.asarray(raw, dtype=float)
    if a.size == 0:
        raise EmptyInput("no points to normalize")
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if not np.all(np.isfinite(a)):
        raise NonFiniteCoordinate("input contains non-finite coordinates")
    mid = (a.min(axis=0) + a.max(axis=0)) / 2.0
    shifted = a - mid
    scale = float(np.linalg.norm(shifted, axis=1).max())
    if scale == 0.0:
        scale = 1.0
    out = shifted / scale
    # guard against 1 + ulp after division
    norms = np.linalg.norm(out, axis=1)
    over = norms > 1.0
    out[over] /= norms[over, None]
    return Dataset(out), scale


def _locate(candidates: np.ndarray, point, atol: float = 1e-12) -> int:
    q = np.asarray(point, dtype=float).reshape(-1)
    if q.shape[0] != candidates.shape[1]:
        raise DimensionMismatch(f"fixed point has dimension {q.shape[0]}")
    hits = np.flatnonzero(np.all(np.abs(candidates - q) <= atol, axis=1))
    return int(hits[0]) if hits.size else -1


def brute_force_opt(
    points: PointsLike,
    candidates,
    params: ClusteringParams,
    fixed=None,
    weights=None,
    max_subsets: int = MAX_SUBSETS,
) -> CenterSet:
    """Exact optimum over all ``k``-subsets of ``candidates``.

    When ``fixed`` is given only subsets containing it are considered. Ties
    go to the lexicographically first subset of candidate indices.
    """
    pts, w = as_weighted(points, weights)
    cand = _as_centers(candidates)
    k, p = params.k, params.p
    m = cand.shape[0]
    if m < k:
        raise ValueError(f"need at least k={k} candidates, got {m}")
    if cand.shape[1] != pts.shape[1]:
        raise DimensionMismatch(f"candidates have dimension {cand.shape[1]}")

    fixed_idx = None
    if fixed is not None:
        fixed_idx = _locate(cand, fixed)
        if fixed_idx < 0:
            raise InvalidFixed("fixed point is not among the candidates")
        others = [i for i in range(m) if i != fixed_idx]
        total = math.comb(m - 1, k - 1)
        combos = (
            tuple(sorted(c + (fixed_idx,)))
            for c in itertools.combinations(others, k - 1)
        )
    else:
        total = math.comb(m, k)
        combos = itertools.combinations(range(m), k)
    if total > max_subsets:
        raise TooLarge(f"{total} subsets exceed the bound {max_subsets}")

    D = pairwise_dist(cand, pts, p)  # (m, n)
    best_cost, best = math.inf, None
    chunk = 1 << 14
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block, dtype=np.intp)
        costs = D[idx].min(axis=1) @ w
        j = int(np.argmin(costs))
        if costs[j] < best_cost:
            best_cost, best = float(costs[j]), tuple(int(i) for i in idx[j])
    return CenterSet(cand[list(best)], best_cost, indices=best)


def _group_tables(pts, w, p, candidates):
    """Cost and center of every subset of points, as a free cluster."""
    n, d = pts.shape
    size = 1 << n
    bits = ((np.arange(size)[:, None] >> np.arange(n)) & 1).astype(float)
    W = bits @ w
    if candidates is None:
        if p != 2:
            raise ValueError("continuous optimum is only available for p=2")
        sums = bits @ (w[:, None] * pts)
        safe = np.where(W > 0, W, 1.0)
        cent = sums / safe[:, None]
        cost = np.empty(size)
        for mask in range(size):
            members = bits[mask].astype(bool)
            diff = pts[members] - cent[mask]
            cost[mask] = float(w[members] @ np.einsum("ij,ij->i", diff, diff))
        return cost, cent
    cand = candidates
    if p == 2:
        sums = bits @ (w[:, None] * pts)
        safe = np.where(W > 0, W, 1.0)
        cent = sums / safe[:, None]
        _, nearest = cKDTree(cand).query(cent)
        D = pairwise_dist(cand, pts, 2)
        cost = np.einsum("ij,ij->i", bits * w, D[nearest])
        return cost, cand[nearest]
    D = pairwise_dist(cand, pts, p)
    G = (bits * w) @ D.T  # (size, m)
    best = np.argmin(G, axis=1)
    return G[np.arange(size), best], cand[best]


def exact_partition_opt(
    points: PointsLike,
    k: int,
    p: int = 2,
    fixed=None,
    weights=None,
    candidates=None,
) -> CenterSet:
    """Exact optimum by enumerating partitions of the points.

    With ``candidates=None`` the free centers range over all of R^d (p=2 only;
    each cluster sits at its weighted centroid). Otherwise free centers are
    restricted to ``candidates``; the optimum then equals the best ``k``-subset
    of candidates (plus ``fixed``), which makes this an exhaustive oracle for
    candidate sets far too large for ``brute_force_opt``.
    """
    pts, w = as_weighted(points, weights)
    n = pts.shape[0]
    if n > MAX_PARTITION_POINTS:
        raise TooLarge(f"partition enumeration limited to {MAX_PARTITION_POINTS} points")
    cand = None if candidates is None else _as_centers(candidates)
    group_cost, group_center = _group_tables(pts, w, p, cand)
    size = 1 << n
    full = size - 1
    free = k - 1 if fixed is not None else k

    inf = math.inf
    # f[m][mask]: best cost covering mask with at most m free clusters
    f = [np.full(size, inf)]
    f[0][0] = 0.0
    choice = [None]
    for m in range(1, free + 1):
        prev = f[-1]
        cur = prev.copy()
        ch = np.zeros(size, dtype=np.int64)
        for mask in range(1, size):
            low = mask & -mask
            rest = mask ^ low
            sub = rest
            best = cur[mask]
            arg = 0
            while True:
                s = sub | low
                v = group_cost[s] + prev[mask ^ s]
                if v < best:
                    best, arg = v, s
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            cur[mask] = best
            ch[mask] = arg
        f.append(cur)
        choice.append(ch)

    groups = []
    if fixed is not None:
        sigma = np.asarray(fixed, dtype=float).reshape(1, -1)
        sig_cost = pairwise_dist(pts, sigma, p)[:, 0]
        bits = (np.arange(size)[:, None] >> np.arange(n)) & 1
        sig_tab = bits @ (w * sig_cost)
        tail = f[free][full ^ np.arange(size)] if free > 0 else np.where(
            np.arange(size) == full, 0.0, inf
        )
        totals = sig_tab + tail
        T = int(np.argmin(totals))
        remaining = full ^ T
    else:
        remaining = full
    m = free
    while remaining and m > 0:
        s = int(choice[m][remaining])
        if s == 0:
            m -= 1
            continue
        groups.append(s)
        remaining ^= s
        m -= 1

    centers = [] if fixed is None else [np.asarray(fixed, dtype=float).reshape(-1)]
    taken = {tuple(c) for c in centers}
    # two clusters sharing a best candidate collapse into one center
    for s in groups:
        c = group_center[s]
        if tuple(c) not in taken:
            centers.append(c)
            taken.add(tuple(c))
    pool = pts if cand is None else cand
    for c in pool:
        if len(centers) >= k:
            break
        if tuple(c) not in taken:
            centers.append(c)
            taken.add(tuple(c))
    while len(centers) < k:
        centers.append(centers[0])
    centers = np.array(centers[:k])
    return CenterSet(centers, cost_p(pts, centers, p, w))
