"""Noise primitives, the grid coreset, private centers and budget accounting."""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass

import numpy as np

from .core import WeightedPointSet, as_points
from .errors import BudgetExceeded, EmptyCoreset

NOISE_OFF = math.inf
MIN_GRID_SIDE = 2.0 / 2**20


def sample_noise(scale: float, rng: np.random.Generator, size=None, integer: bool = False):
    """Zero-mean Laplace noise, or its integer analogue (two-sided geometric).

    ``scale=inf`` switches noise off and returns exact zeros. The integer
    variant has ``P[o] proportional to exp(-|o| / scale)``.
    """
    if scale == NOISE_OFF or scale is None:
        return 0 if size is None else np.zeros(size, dtype=int if integer else float)
    if not scale > 0:
        raise ValueError(f"noise scale must be positive, got {scale}")
    if not integer:
        return rng.laplace(0.0, scale, size)
    q = -math.expm1(-1.0 / scale)  # success probability 1 - e^{-1/scale}
    g = rng.geometric(q, size=size) - rng.geometric(q, size=size)
    return int(g) if size is None else g.astype(int)


class PrivacyBudget:
    """Ledger of epsilon spent per labelled step; refuses to overspend."""

    def __init__(self, epsilon_total: float):
        if not epsilon_total > 0:
            raise ValueError("epsilon_total must be positive")
        self.epsilon_total = float(epsilon_total)
        self._entries: list[tuple[str, float]] = []
        self._lock = threading.Lock()

    def spend(self, label: str, epsilon: float) -> None:
        if epsilon < 0:
            raise ValueError("cannot spend a negative budget")
        with self._lock:
            total = self._spent() + epsilon
            if total > self.epsilon_total * (1 + 1e-12):
                raise BudgetExceeded(
                    f"spending {epsilon} on {label!r} exceeds the budget "
                    f"({self._spent()} of {self.epsilon_total} used)"
                )
            self._entries.append((label, float(epsilon)))

    def _spent(self) -> float:
        return math.fsum(e for _, e in self._entries)

    @property
    def spent(self) -> float:
        with self._lock:
            return self._spent()

    @property
    def entries(self) -> list[tuple[str, float]]:
        with self._lock:
            return list(self._entries)

    def by_label(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for label, e in self.entries:
            out[label] = out.get(label, 0.0) + e
        return out

    def snapshot(self) -> dict:
        return {"epsilon_total": self.epsilon_total, "spent": self.spent, "entries": self.by_label()}


def compute_zeta(alpha: float, p: int, lambda_p_alpha: float = 1.0) -> float:
    """Grid granularity ``0.01 * (alpha / (10 * lambda)) ** (p / 2)``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not lambda_p_alpha > 0:
        raise ValueError("lambda_p_alpha must be positive")
    return 0.01 * (alpha / (10.0 * lambda_p_alpha)) ** (p / 2.0)


@dataclass(frozen=True)
class CoresetConfig:
    zeta: float
    alpha: float = 1.0
    lambda_p_alpha: float = 1.0
    weight_floor: float = 0.5

    @classmethod
    def from_alpha(cls, alpha: float, p: int, lambda_p_alpha: float = 1.0, weight_floor: float = 0.5):
        return cls(compute_zeta(alpha, p, lambda_p_alpha), alpha, lambda_p_alpha, weight_floor)

    @property
    def grid_side(self) -> float:
        return max(self.zeta, MIN_GRID_SIDE)

    def snap_radius(self, d: int) -> float:
        """Largest distance between a point and the center of its cell."""
        return self.grid_side * math.sqrt(d) / 2.0


def private_coreset(
    X_low,
    config: CoresetConfig,
    epsilon: float,
    rng: np.random.Generator,
    noise_disabled: bool = False,
) -> WeightedPointSet:
    """Noisy histogram of the points on a grid over ``[-1, 1]^d``.

    Every occupied cell and each of its ``3^d - 1`` neighbours receives an
    independent integer noise draw of scale ``2 / epsilon``. Negative counts
    clamp to zero and cells lighter than ``config.weight_floor`` are dropped.
    """
    pts = as_points(X_low)
    n, d = pts.shape
    side = config.grid_side
    ncell = int(math.ceil(2.0 / side))
    idx = np.clip(np.floor((pts + 1.0) / side).astype(np.int64), 0, ncell - 1)
    occupied, counts = np.unique(idx, axis=0, return_counts=True)

    if noise_disabled:
        cells, true_counts = occupied, counts.astype(float)
        noisy = true_counts
    else:
        if not epsilon > 0:
            raise ValueError("epsilon must be positive unless noise is disabled")
        offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
        cand = (occupied[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        cand = cand[np.all((cand >= 0) & (cand < ncell), axis=1)]
        cells = np.unique(cand, axis=0)
        true_counts = np.zeros(len(cells))
        pos = {tuple(c): i for i, c in enumerate(cells)}
        for c, cnt in zip(occupied, counts):
            true_counts[pos[tuple(c)]] = cnt
        noise = sample_noise(2.0 / epsilon, rng, size=len(cells), integer=True)
        noisy = np.maximum(true_counts + noise, 0.0)

    keep = noisy >= config.weight_floor
    if not np.any(keep):
        raise EmptyCoreset("all noisy cell counts fell below the weight floor")
    centers = -1.0 + (cells[keep] + 0.5) * side
    norms = np.linalg.norm(centers, axis=1)
    outside = norms > 1.0
    centers[outside] /= norms[outside, None]
    return WeightedPointSet(centers, noisy[keep])


def find_center(
    cluster,
    epsilon_part: float,
    rng: np.random.Generator,
    noise_disabled: bool = False,
) -> np.ndarray:
    """Private mean of points in the unit ball, clipped back into the ball.

    Half of ``epsilon_part`` goes to the coordinate sums (Laplace, L1 scale
    ``2 sqrt(d)``), half to the count.
    """
    pts = as_points(cluster)
    d = pts.shape[1]
    total = pts.sum(axis=0)
    count = float(pts.shape[0])
    if not noise_disabled:
        if not epsilon_part > 0:
            raise ValueError("epsilon_part must be positive unless noise is disabled")
        half = epsilon_part / 2.0
        total = total + sample_noise(2.0 * math.sqrt(d) / half, rng, size=d)
        count = count + sample_noise(2.0 / half, rng)
    c = total / max(1.0, count)
    norm = np.linalg.norm(c)
    if norm > 1.0:
        c = c / norm
    return c
