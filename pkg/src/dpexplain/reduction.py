"""Random-subspace projection and center recovery in the original space."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, as_points, assign
from .errors import BadDimension, DimensionMismatch
from .privacy import find_center


@dataclass(frozen=True)
class ProjectionConfig:
    """Dimensions, failure probability and the resulting scale factor.

    ``lambda_scale`` defaults to ``sqrt(0.01 d / (ln(n / beta) d'))``; pass it
    explicitly only to override in tests.
    """

    d: int
    d_prime: int
    n: int
    beta: float = 0.1
    lambda_scale: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.d_prime <= self.d:
            raise BadDimension(f"need 1 <= d' <= d, got d'={self.d_prime}, d={self.d}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.lambda_scale is None:
            lam = math.sqrt(0.01 * self.d / (math.log(self.n / self.beta) * self.d_prime))
            object.__setattr__(self, "lambda_scale", lam)


@dataclass(frozen=True)
class Projection:
    """Orthonormal rows spanning a d'-dimensional subspace of R^d."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        gram = b @ b.T
        if not np.allclose(gram, np.eye(b.shape[0]), atol=1e-8):
            raise ValueError("projection rows are not orthonormal")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def d_prime(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def __call__(self, points) -> np.ndarray:
        pts = as_points(points)
        if pts.shape[1] != self.d:
            raise DimensionMismatch(f"projection expects dimension {self.d}")
        return pts @ self.basis.T


def sample_projection(d: int, d_prime: int, rng: np.random.Generator) -> Projection:
    """Uniformly random d'-dimensional subspace via QR of a Gaussian matrix."""
    if not 1 <= d_prime <= d:
        raise BadDimension(f"need 1 <= d' <= d, got d'={d_prime}, d={d}")
    g = rng.standard_normal((d, d_prime))
    q, r = np.linalg.qr(g)
    # sign convention makes the factorization unique, hence the subspace uniform
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    return Projection(q.T)


def dim_reduce(X: Dataset, config: ProjectionConfig, proj: Projection) -> Dataset:
    """Project, scale by lambda, and zero out points that would leave the ball."""
    if X.d != config.d or proj.d != config.d or proj.d_prime != config.d_prime:
        raise DimensionMismatch("dataset, config and projection dimensions disagree")
    lam = config.lambda_scale
    tilde = proj(X.points)
    norms = np.linalg.norm(tilde, axis=1)
    out = np.where((norms <= 1.0 / lam)[:, None], lam * tilde, 0.0)
    # lambda * ||x~|| <= 1 holds up to rounding
    n_out = np.linalg.norm(out, axis=1)
    over = n_out > 1.0
    out[over] /= n_out[over, None]
    return Dataset(out)


def scale_cost(cost_low: float, n: int, beta: float, p: int) -> float:
    """Map a low-dimensional clustering cost back to the original scale."""
    if cost_low < 0:
        raise ValueError("cost must be nonnegative")
    return cost_low * (math.log(n / beta) / 0.01) ** (p / 2.0)


def dim_reverse(
    low_centers,
    X_low: Dataset,
    X_high: Dataset,
    epsilon: float,
    rng: np.random.Generator,
    noise_disabled: bool = False,
) -> np.ndarray:
    """Private centers in the original space for the low-dimensional partition.

    ``epsilon`` is the budget of the whole step. One point moving between
    parts touches at most two of them, so each part runs at ``epsilon / 2``.
    Empty parts get the origin.
    """
    c_low = as_points(low_centers)
    if X_low.n != X_high.n:
        raise DimensionMismatch("low and high dimensional datasets are not index-aligned")
    k = c_low.shape[0]
    owner = assign(X_low.points, c_low)
    streams = rng.spawn(k)
    eps_part = epsilon / 2.0
    centers = np.zeros((k, X_high.d))
    for j in range(k):
        part = X_high.points[owner == j]
        if part.shape[0] == 0:
            continue
        centers[j] = find_center(part, eps_part, streams[j], noise_disabled=noise_disabled)
    return centers
