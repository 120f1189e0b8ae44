"""k-nearest-neighbor sets and simplex-constrained reconstruction weights.

Each point is written as a convex combination of its k nearest neighbors in
the raw feature space. The combination weights minimize the squared
reconstruction error over the probability simplex, solved as a tiny
box-plus-sum QP on the neighbor Gram matrix. A small ridge on the Gram
diagonal keeps duplicate or collinear neighbors from making the problem
degenerate. Graphs are built once before training and held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import ValidationError
from .qp_solver import QpProblem, solve

GRAM_RIDGE = 1e-8


@dataclass(frozen=True)
class NeighborGraph:
    """Per-point neighbor indices (n x k) and simplex coefficients (n x k)."""

    indices: np.ndarray
    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def dense_coefficients(self) -> np.ndarray:
        """The n x n matrix W with W[i, j] = coefficient of neighbor j for point i."""
        w = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), self.k)
        w[rows, self.indices.ravel()] = self.coeffs.ravel()
        return w

    def residual_vectors(self, points: np.ndarray) -> np.ndarray:
        """points[i] minus its coefficient-weighted neighbor combination."""
        points = np.asarray(points, dtype=float)
        recon = np.einsum("ik,ikm->im", self.coeffs, points[self.indices])
        return points - recon


def build_knn(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest neighbors of each point, self excluded.

    Neighbors are ordered by ascending Euclidean distance; exact distance
    ties break toward the smaller index.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValidationError("points must be a 2-d matrix")
    if not np.all(np.isfinite(points)):
        raise ValidationError("non-finite feature value")
    n = points.shape[0]
    if not 1 <= k <= n - 1:
        raise ValidationError(f"k must satisfy 1 <= k <= n - 1, got k = {k}, n = {n}")
    indices = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d = ((points - points[i]) ** 2).sum(axis=1)
        d[i] = np.inf
        indices[i] = np.argsort(d, kind="stable")[:k]
    return indices


def solve_reconstruction(x: np.ndarray, neighbors: np.ndarray) -> np.ndarray:
    """Simplex weights minimizing ||x - weights @ neighbors||^2."""
    x = np.asarray(x, dtype=float)
    neighbors = np.asarray(neighbors, dtype=float)
    if neighbors.ndim != 2 or x.shape != (neighbors.shape[1],):
        raise ValidationError("neighbor matrix must be k x m with m matching x")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(neighbors))):
        raise ValidationError("non-finite feature value")
    k = neighbors.shape[0]
    gram = neighbors @ neighbors.T
    problem = QpProblem(
        h=2.0 * (gram + GRAM_RIDGE * np.eye(k)),
        c=-2.0 * (neighbors @ x),
        lower=np.zeros(k),
        upper=np.ones(k),
        eq_sum=1.0,
    )
    return solve(problem)


def build_graph(points: np.ndarray, k: int) -> NeighborGraph:
    """Neighbor sets plus reconstruction coefficients for every point."""
    points = np.asarray(points, dtype=float)
    indices = build_knn(points, k)
    coeffs = np.empty_like(indices, dtype=float)
    for i in range(points.shape[0]):
        coeffs[i] = solve_reconstruction(points[i], points[indices[i]])
    return NeighborGraph(indices=indices, coeffs=coeffs)
