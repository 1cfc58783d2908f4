"""Private clustering and contrastive explanations on top of it.

``private_clustering`` spends the budget: half on the coreset of the
projected data, half on recovering centers in the original space.
``private_explanations`` then works from the released coreset, the released
cost and each agent's own projected point only, so it spends nothing.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CenterSet, Dataset, WeightedPointSet
from .errors import ClusteringError, TooManyCandidates
from .kmeans import kmeans_fixed_center
from .kmedian import kmedian, kmedian_fixed_center
from .privacy import CoresetConfig, PrivacyBudget, private_coreset
from .reduction import Projection, ProjectionConfig, dim_reduce, dim_reverse, sample_projection, scale_cost

log = logging.getLogger(__name__)

LABEL_CORESET = "coreset"
LABEL_REVERSE = "dim_reverse"
LABEL_EXPLAIN = "explanations"


@dataclass(frozen=True)
class PipelineConfig:
    """Parameters of one private run. ``d_prime=None`` keeps the full dimension."""

    k: int
    p: int = 1
    epsilon: float = 1.0
    beta: float = 0.1
    alpha: float = 1.0
    d_prime: Optional[int] = None
    lambda_p_alpha: float = 1.0
    gamma: float = 0.5
    weight_floor: float = 0.5
    seed: Optional[int] = 0
    noise_disabled: bool = False
    lambda_scale: Optional[float] = None  # override of the projection scale, tests only

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be a positive finite number, got {self.epsilon}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


@dataclass(frozen=True)
class PrivateClusteringResult:
    centers: np.ndarray         # k centers in the original space
    cost_S_eps: float           # released cost, on the original scale
    coreset: WeightedPointSet
    X_low: Dataset
    projection: Projection
    centers_low: np.ndarray
    ledger: dict


@dataclass(frozen=True)
class ExplanationRecord:
    agent_index: int
    fixed_point_low: np.ndarray
    cost_S_i_eps: float
    explanation: float          # cost_S_i_eps - cost_S_eps
    error: Optional[str] = None


Approx = Callable[[WeightedPointSet, int, int, float], CenterSet]
ApproxFC = Callable[[WeightedPointSet, int, int, float, np.ndarray], CenterSet]


def _kmeans_coarsening(points, k, sigma, gamma, weights) -> CenterSet:
    g = gamma
    while True:
        try:
            return kmeans_fixed_center(points, k, sigma, g, weights)
        except TooManyCandidates:
            if g >= 1.0:
                raise
            g = min(1.0, 2.0 * g)
            log.warning("candidate set too large; coarsening gamma to %g", g)


def default_approx(Y: WeightedPointSet, k: int, p: int, gamma: float) -> CenterSet:
    """Non-private clustering of a weighted set: LP rounding (p=1) or swap search (p=2)."""
    if p == 1:
        return kmedian(Y.points, k, Y.weights)
    return _kmeans_coarsening(Y.points, k, None, gamma, Y.weights)


def default_approx_fc(Y: WeightedPointSet, k: int, p: int, gamma: float, fixed) -> CenterSet:
    """Fixed-center counterpart of ``default_approx``."""
    if p == 1:
        return kmedian_fixed_center(Y.points, k, fixed, Y.weights)
    return _kmeans_coarsening(Y.points, k, fixed, gamma, Y.weights)


def project(X: Dataset, cfg: PipelineConfig):
    """Projection, its config and the projected data for ``cfg.seed``."""
    d_prime = X.d if cfg.d_prime is None else cfg.d_prime
    streams = np.random.default_rng(cfg.seed).spawn(3)
    proj = sample_projection(X.d, d_prime, streams[0])
    pcfg = ProjectionConfig(X.d, d_prime, X.n, cfg.beta, cfg.lambda_scale)
    return proj, pcfg, dim_reduce(X, pcfg, proj), streams


def private_clustering(X: Dataset, cfg: PipelineConfig, approx: Optional[Approx] = None) -> PrivateClusteringResult:
    """Private centers and cost for ``X``, spending exactly ``cfg.epsilon``."""
    if not isinstance(X, Dataset):
        X = Dataset(X)
    if cfg.k > X.n:
        raise ValueError(f"k={cfg.k} exceeds n={X.n}")
    approx = approx or default_approx
    proj, _, X_low, streams = project(X, cfg)
    ledger = PrivacyBudget(cfg.epsilon)

    core_cfg = CoresetConfig.from_alpha(cfg.alpha, cfg.p, cfg.lambda_p_alpha, cfg.weight_floor)
    Y = private_coreset(X_low, core_cfg, cfg.epsilon / 2, streams[1], cfg.noise_disabled)
    ledger.spend(LABEL_CORESET, cfg.epsilon / 2)
    log.info("coreset: %d cells, total weight %.3f", len(Y), Y.total_weight)

    S = approx(Y, cfg.k, cfg.p, cfg.gamma)
    cost = scale_cost(S.cost, X.n, cfg.beta, cfg.p)
    centers = dim_reverse(S.centers, X_low, X, cfg.epsilon / 2, streams[2], cfg.noise_disabled)
    ledger.spend(LABEL_REVERSE, cfg.epsilon / 2)
    return PrivateClusteringResult(centers, cost, Y, X_low, proj, np.array(S.centers), ledger.snapshot())


def private_explanations(
    Y: WeightedPointSet,
    cost_S_eps: float,
    requests: Sequence[tuple],
    cfg: PipelineConfig,
    n: int,
    approx_fc: Optional[ApproxFC] = None,
    ledger: Optional[PrivacyBudget] = None,
    workers: Optional[int] = None,
) -> list[ExplanationRecord]:
    """Explanation ``cost(S_i) - cost(S)`` for each request ``(i, x'_i)``.

    Reads the released coreset ``Y``, the released cost and each agent's
    projected point; ``n``, ``k``, ``p``, ``beta`` and ``gamma`` are public.
    A failing request yields a record carrying the error, not an exception.
    """
    approx_fc = approx_fc or default_approx_fc
    k, p, beta, gamma = cfg.k, cfg.p, cfg.beta, cfg.gamma

    def one(req) -> ExplanationRecord:
        i, x = req
        x = np.asarray(x, dtype=float)
        try:
            S_i = approx_fc(Y, k, p, gamma, x)
            c_i = scale_cost(S_i.cost, n, beta, p)
            return ExplanationRecord(int(i), x, c_i, c_i - cost_S_eps)
        except (ClusteringError, ValueError) as exc:
            log.warning("explanation for agent %s failed: %s", i, exc)
            return ExplanationRecord(int(i), x, math.nan, math.nan, f"{type(exc).__name__}: {exc}")

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, requests))
    else:
        records = [one(r) for r in requests]
    if ledger is not None:
        ledger.spend(LABEL_EXPLAIN, 0.0)
    return records


def w_double_prime(p: int, gamma: float = 0.0) -> float:
    """Approximation factor of the fixed-center solver: 8 (p=1) or 25 + gamma (p=2)."""
    return 8.0 if p == 1 else 25.0 + gamma


def check_valid_explanation(opt_i: float, opt: float, w_pp: float, alpha: float, t_i: float) -> bool:
    """Whether ``opt_i`` is far enough above ``opt`` for the sign to be guaranteed."""
    return opt_i >= w_pp * (1.0 + alpha) * opt + t_i
