"""Reference recoveries for sanity ordering: softmax of the logical vector and kNN label propagation."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import LeDataset, softmax_rows


def baseline_softmax(dataset: LeDataset) -> np.ndarray:
    return softmax_rows(np.asarray(dataset.logical, dtype=float))


def knn_affinity(X: np.ndarray, k: int) -> np.ndarray:
    """Row-stochastic kNN graph with Gaussian weights (self excluded).

    Bandwidth is the mean squared distance to the k nearest neighbours.
    """
    n = X.shape[0]
    d2 = cdist(X, X, "sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k]
    nd2 = np.take_along_axis(d2, nbrs, axis=1)
    sigma2 = max(float(np.mean(nd2)), 1e-12)
    w = np.exp(-nd2 / (2 * sigma2))
    W = np.zeros((n, n))
    np.put_along_axis(W, nbrs, w, axis=1)
    rs = W.sum(axis=1, keepdims=True)
    return W / np.where(rs > 0, rs, 1.0)


def _row_normalize(F: np.ndarray) -> np.ndarray:
    s = F.sum(axis=1, keepdims=True)
    return F / np.where(s > 0, s, 1.0)


def baseline_lp(dataset: LeDataset, k_neighbors: int = 10, alpha: float = 0.5,
                iterations: int = 100, tol: float = 1e-8) -> np.ndarray:
    """Iterate ``F <- alpha * P F + (1 - alpha) * L`` from ``F = L`` and row-normalise."""
    n = dataset.n
    if not 1 <= k_neighbors < n:
        raise ValueError(f"k_neighbors must satisfy 1 <= k < n={n}")
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    L = np.asarray(dataset.logical, dtype=float)
    F = L.copy()
    if iterations and alpha > 0:
        P = knn_affinity(np.asarray(dataset.features, dtype=float), k_neighbors)
        for _ in range(iterations):
            nxt = alpha * (P @ F) + (1 - alpha) * L
            done = np.max(np.abs(nxt - F)) < tol
            F = nxt
            if done:
                break
    return _row_normalize(F)
