"""k-median with an optional fixed center, by LP relaxation and rounding.

The chain is: solve the relaxation, consolidate demands so that surviving
locations are far apart relative to their fractional costs, round to a
{1/2, 1}-integral center vector, then to an integral one. With a fixed
location ``C`` the relaxation carries ``y_C >= 1`` and ``x_CC >= 1``, which
forces ``C`` through every step; the final cost is at most eight times the
LP objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .core import CenterSet, _locate, as_weighted, pairwise_dist
from .errors import SolverFailure

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6


@dataclass(frozen=True)
class LpInstance:
    """Weighted locations, pairwise distances, ``k`` and an optional fixed index."""

    locations: np.ndarray
    demands: np.ndarray
    k: int
    fixed: Optional[int] = None

    def __post_init__(self):
        if np.any(self.demands < 0):
            raise ValueError("demands must be nonnegative")
        if self.fixed is not None and not 0 <= self.fixed < len(self.demands):
            raise ValueError(f"fixed index {self.fixed} out of range")
        object.__setattr__(self, "_cost", pairwise_dist(self.locations, self.locations, 1))

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def cost(self) -> np.ndarray:
        """``cost[i, j]``: distance between locations ``i`` and ``j``."""
        return self._cost

    @classmethod
    def from_points(cls, points, k: int, weights=None, fixed_point=None) -> "LpInstance":
        """Locations are the points; ``fixed_point`` joins them with zero demand if new."""
        pts, w = as_weighted(points, weights)
        fixed = None
        if fixed_point is not None:
            fixed = _locate(pts, fixed_point)
            if fixed < 0:
                pts = np.vstack([pts, np.asarray(fixed_point, dtype=float).reshape(1, -1)])
                w = np.append(w, 0.0)
                fixed = pts.shape[0] - 1
        return cls(pts, w, int(k), fixed)


@dataclass(frozen=True)
class FractionalSolution:
    x: np.ndarray       # x[i, j]: fraction of j served by i
    y: np.ndarray
    C_bar: np.ndarray   # fractional service cost of each location
    objective: float


@dataclass(frozen=True)
class ConsolidatedInstance:
    instance: LpInstance
    demands: np.ndarray        # modified demands d'
    order: np.ndarray          # processing order, fixed location first
    survivors: np.ndarray      # N' in processing order


@dataclass(frozen=True)
class HalfIntegralSolution:
    survivors: np.ndarray
    y_hat: np.ndarray          # aligned with survivors, values in {0.5, 1} (0 only after round-off)
    nearest: np.ndarray        # s(j) as a location index, -1 when alone
    weight: np.ndarray         # d'_j * c_{s(j) j}
    cost: float


@dataclass(frozen=True)
class IntegralSolution:
    centers: tuple
    cost: float


def solve_relaxation(inst: LpInstance) -> FractionalSolution:
    """Optimal solution of the k-median LP relaxation (HiGHS dual simplex)."""
    n, k = inst.n, inst.k
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    c = inst.cost
    nx = n * n
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    obj = np.concatenate([(c * inst.demands[None, :]).ravel(), np.zeros(n)])

    a_eq = sp.vstack([
        sp.coo_matrix((np.ones(nx), (jj, ii * n + jj)), shape=(n, nx + n)),
        sp.coo_matrix((np.ones(n), (np.zeros(n, dtype=int), nx + np.arange(n))), shape=(1, nx + n)),
    ]).tocsr()
    b_eq = np.append(np.ones(n), float(k))
    r = np.arange(nx)
    a_ub = sp.coo_matrix(
        (np.r_[np.ones(nx), -np.ones(nx)], (np.r_[r, r], np.r_[r, nx + ii])),
        shape=(nx, nx + n),
    ).tocsr()
    lower = np.zeros(nx + n)
    if inst.fixed is not None:
        C = inst.fixed
        lower[nx + C] = 1.0
        lower[C * n + C] = 1.0
    bounds = np.column_stack([lower, np.ones(nx + n)])

    res = linprog(obj, A_ub=a_ub, b_ub=np.zeros(nx), A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise SolverFailure(f"LP relaxation failed: {res.message}")
    x = np.clip(res.x[:nx].reshape(n, n), 0.0, 1.0)
    y = np.clip(res.x[nx:], 0.0, 1.0)
    C_bar = (c * x).sum(axis=0)
    if inst.fixed is not None:
        C_bar[inst.fixed] = 0.0
    return FractionalSolution(x, y, C_bar, float(res.fun))


def consolidate_demands(inst: LpInstance, frac: FractionalSolution) -> ConsolidatedInstance:
    """Move each location's demand onto an earlier, cheaper nearby location.

    Locations are scanned by increasing fractional cost (the fixed location,
    whose cost is zero, first). Demand of ``j`` moves to the first earlier
    location ``i`` still holding demand with ``c_ij <= 4 C_bar_j``.
    """
    n = inst.n
    C = inst.fixed
    rest = np.array([j for j in range(n) if j != C], dtype=int)
    rest = rest[np.argsort(frac.C_bar[rest], kind="stable")]
    order = rest if C is None else np.concatenate([[C], rest])

    d = inst.demands.astype(float).copy()
    # the fixed location always counts as holding demand, even at zero weight
    active = np.zeros(n, dtype=bool)
    cost = inst.cost
    for t, j in enumerate(order):
        if j == C:
            active[j] = True
            continue
        if d[j] <= 0:
            continue
        earlier = order[:t]
        ok = active[earlier] & (cost[earlier, j] <= 4.0 * frac.C_bar[j])
        hit = np.flatnonzero(ok)
        if hit.size:
            i = earlier[hit[0]]
            d[i] += d[j]
            d[j] = 0.0
        else:
            active[j] = True
    survivors = np.array([j for j in order if active[j]], dtype=int)
    return ConsolidatedInstance(inst, d, order, survivors)


def _nearest_survivor(cons: ConsolidatedInstance) -> np.ndarray:
    surv = np.sort(cons.survivors)
    cost = cons.instance.cost
    out = np.full(cons.instance.n, -1, dtype=int)
    if surv.size < 2:
        return out
    sub = cost[np.ix_(surv, surv)].copy()
    np.fill_diagonal(sub, np.inf)
    nn = np.argmin(sub, axis=1)
    out[surv] = surv[nn]
    return out


def round_to_half_integral(cons: ConsolidatedInstance, frac: FractionalSolution) -> HalfIntegralSolution:
    """{1/2, 1}-integral center vector over the surviving locations.

    Survivors other than the fixed one are ranked by ``d'_j c_{s(j) j}``
    (heaviest first, the fixed location ahead of all); the first ``2k - n'``
    get 1 and the rest 1/2.
    """
    inst = cons.instance
    k, C = inst.k, inst.fixed
    surv = cons.survivors
    nearest = _nearest_survivor(cons)
    cost = inst.cost
    weight = np.array([
        cons.demands[j] * cost[nearest[j], j] if nearest[j] >= 0 else 0.0 for j in surv
    ])
    pos = np.arange(len(surv))
    if C is not None:
        others = pos[surv != C]
        others = others[np.argsort(-weight[others], kind="stable")]
        ranked = np.concatenate([pos[surv == C], others])
    else:
        ranked = pos[np.argsort(-weight, kind="stable")]
    n_prime = len(surv)
    n_ones = min(max(2 * k - n_prime, 1 if C is not None else 0), k, n_prime)
    n_halves = min(2 * (k - n_ones), n_prime - n_ones)
    if n_ones + n_halves < n_prime:
        # cannot happen for an exact LP optimum; round-off can leave extra survivors
        log.warning("%d survivors exceed the %d a half-integral solution can hold",
                    n_prime, n_ones + n_halves)
    y_hat = np.zeros(n_prime)
    y_hat[ranked[:n_ones]] = 1.0
    y_hat[ranked[n_ones:n_ones + n_halves]] = 0.5
    half_cost = float(np.sum(weight * (1.0 - y_hat)))
    return HalfIntegralSolution(surv, y_hat, nearest[surv], weight, half_cost)


def _depths(nodes: list[int], parent: dict[int, int]) -> dict[int, tuple[int, int]]:
    """(tree id, depth) for every node of the forest ``j -> parent[j]``.

    Nodes whose parent lies outside ``nodes`` are roots. Nearest-neighbour
    pointers with index tie-breaks only form 2-cycles; each is cut at its
    lower-index node.
    """
    node_set = set(nodes)
    children: dict[int, list[int]] = {j: [] for j in nodes}
    roots = []
    for j in nodes:
        pj = parent.get(j, -1)
        if pj in node_set:
            children[pj].append(j)
        else:
            roots.append(j)
    out: dict[int, tuple[int, int]] = {}

    def walk(root: int, tree: int):
        stack = [(root, 0)]
        while stack:
            j, dep = stack.pop()
            if j in out:
                continue
            out[j] = (tree, dep)
            for ch in sorted(children[j]):
                if ch not in out:
                    stack.append((ch, dep + 1))

    tree = 0
    for r in sorted(roots):
        walk(r, tree)
        tree += 1
    for j in sorted(nodes):
        if j in out:
            continue
        # j sits on a cycle or hangs below one; locate the cycle from j
        seen = []
        cur = j
        while cur not in seen:
            seen.append(cur)
            cur = parent[cur]
        cycle = seen[seen.index(cur):]
        root = min(cycle)
        children[parent[root]] = [c for c in children[parent[root]] if c != root]
        walk(root, tree)
        tree += 1
    return out


def round_to_integral(half: HalfIntegralSolution, cons: ConsolidatedInstance) -> IntegralSolution:
    """Exactly ``k`` centers from a {1/2, 1}-integral solution.

    Centers at 1 are kept. The half centers form a forest under
    ``j -> s(j)``; in each tree one depth-parity class is opened (the smaller
    one, ties to the cheaper removal), so every closed half center has its
    nearest survivor open and the cost at most doubles. Remaining slots go to
    the closed half centers with the largest ``d'_j c_{s(j) j}``.
    """
    inst = cons.instance
    k, C = inst.k, inst.fixed
    surv = half.survivors
    w = dict(zip(surv.tolist(), half.weight.tolist()))
    ones = [int(j) for j, y in zip(surv, half.y_hat) if y == 1.0]
    halves = [int(j) for j, y in zip(surv, half.y_hat) if y == 0.5]
    if len(ones) > k:
        ones.sort(key=lambda j: (j != C, -w[j]))
        ones = ones[:k]
    parent = {int(j): int(s) for j, s in zip(surv, half.nearest)}

    chosen = list(ones)
    depth = _depths(halves, parent)
    trees: dict[int, dict[int, list[int]]] = {}
    for j in halves:
        t, dep = depth[j]
        trees.setdefault(t, {0: [], 1: []})[dep % 2].append(j)
    for t in sorted(trees):
        even, odd = trees[t][0], trees[t][1]
        cost_if_even = sum(w[j] for j in odd)
        cost_if_odd = sum(w[j] for j in even)
        if len(even) != len(odd):
            pick = even if len(even) < len(odd) else odd
        else:
            pick = even if cost_if_even <= cost_if_odd else odd
        chosen.extend(pick)

    if len(chosen) > k:
        # only reachable through LP round-off; keep the fixed center and the heaviest
        keep = [C] if C is not None else []
        rest = sorted((j for j in chosen if j != C), key=lambda j: -w.get(j, 0.0))
        chosen = keep + rest[: k - len(keep)]
    taken = set(chosen)
    for j in sorted((j for j in halves if j not in taken), key=lambda j: -w[j]):
        if len(chosen) >= k:
            break
        chosen.append(j)
        taken.add(j)
    if len(chosen) < k:
        for j in np.argsort(-inst.demands, kind="stable"):
            if len(chosen) >= k:
                break
            if int(j) not in taken:
                chosen.append(int(j))
                taken.add(int(j))
    while len(chosen) < k:
        chosen.append(C if C is not None else chosen[0])
    cost = float(inst.demands @ inst.cost[chosen].min(axis=0))
    return IntegralSolution(tuple(chosen), cost)


@dataclass(frozen=True)
class KMedianResult:
    center_set: CenterSet
    instance: LpInstance
    fractional: Optional[FractionalSolution]
    consolidated: Optional[ConsolidatedInstance]
    half: Optional[HalfIntegralSolution]
    integral: IntegralSolution

    @property
    def lp_objective(self) -> float:
        return 0.0 if self.fractional is None else self.fractional.objective


def solve_kmedian(points, k: int, weights=None, fixed=None) -> KMedianResult:
    """Run the whole rounding chain and keep every intermediate state."""
    pts, w = as_weighted(points, weights)
    inst = LpInstance.from_points(pts, k, w, fixed_point=fixed)
    if inst.n <= k:
        chosen = list(range(inst.n))
        while len(chosen) < k:
            chosen.append(inst.fixed if inst.fixed is not None else 0)
        integral = IntegralSolution(tuple(chosen), 0.0)
        frac = cons = half = None
    else:
        frac = solve_relaxation(inst)
        cons = consolidate_demands(inst, frac)
        half = round_to_half_integral(cons, frac)
        integral = round_to_integral(half, cons)
    centers = inst.locations[list(integral.centers)]
    cs = CenterSet(centers, float(w @ pairwise_dist(pts, centers, 1).min(axis=1)),
                   indices=integral.centers)
    return KMedianResult(cs, inst, frac, cons, half, integral)


def kmedian_fixed_center(points, k: int, fixed, weights=None) -> CenterSet:
    """k centers among the locations, one of them at ``fixed``."""
    return solve_kmedian(points, k, weights, fixed=fixed).center_set


def kmedian(points, k: int, weights=None) -> CenterSet:
    """Plain k-median through the same LP rounding chain."""
    return solve_kmedian(points, k, weights).center_set
