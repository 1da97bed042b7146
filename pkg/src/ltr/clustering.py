"""Seeded k-means with k-means++ initialization.

Randomness comes from :class:`Lcg64`, a 64-bit linear congruential generator
(Knuth's MMIX constants)::

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64
    uniform = (state >> 11) * 2**-53        # in [0, 1)

seeded with ``state = seed mod 2**64``. Each uniform draw advances the state
once. Given the same seed and data the fitted model is bit-identical across
runs: distances use a fixed blocked matrix product, ties in the nearest
centre go to the lowest index, and centroid sums are reduced in a fixed
row order.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

_MASK64 = (1 << 64) - 1
_BLOCK_ROWS = 8192


class Lcg64:
    MULTIPLIER = 6364136223846793005
    INCREMENT = 1442695040888963407

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.MULTIPLIER * self.state + self.INCREMENT) & _MASK64
        return self.state

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def _sq_distances(X: np.ndarray, x_sq: np.ndarray, centers: np.ndarray) -> np.ndarray:
    c_sq = np.einsum("ij,ij->i", centers, centers)
    out = np.empty((X.shape[0], centers.shape[0]))
    for start in range(0, X.shape[0], _BLOCK_ROWS):
        block = X[start : start + _BLOCK_ROWS]
        d = x_sq[start : start + block.shape[0], None] - 2.0 * (block @ centers.T) + c_sq[None, :]
        out[start : start + block.shape[0]] = np.maximum(d, 0.0)
    return out


def kmeans_plusplus(X: np.ndarray, k: int, rng: Lcg64) -> np.ndarray:
    """Indices of ``k`` seed rows chosen by D^2 sampling."""
    n = X.shape[0]
    first = min(int(rng.uniform() * n), n - 1)
    chosen = [first]
    closest = np.sum((X - X[first]) ** 2, axis=1)
    for _ in range(1, k):
        cum = np.cumsum(closest)
        target = rng.uniform() * cum[-1]
        idx = int(np.searchsorted(cum, target, side="right"))
        idx = min(idx, n - 1)
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return np.asarray(chosen, dtype=np.int64)


class DeterministicKMeans(ClusterMixin, BaseEstimator):
    """Lloyd's k-means on Euclidean distance with reproducible seeding.

    Parameters
    ----------
    n_clusters : int
        Number of clusters; must not exceed the number of distinct rows.
    random_state : int
        Seed for :class:`Lcg64`.
    max_iter : int
        Upper bound on Lloyd iterations; iteration stops earlier once the
        assignment no longer changes.

    Attributes
    ----------
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    labels_ : ndarray of shape (n_samples,)
    inertia_ : float
        Within-cluster sum of squared distances.
    n_iter_ : int
    """

    def __init__(self, n_clusters: int = 200, random_state: int = 0, max_iter: int = 100):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        k = self.n_clusters
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValueError(f"n_clusters must be a positive integer, got {k!r}")
        distinct = np.unique(X, axis=0).shape[0]
        if k > distinct:
            raise ValueError(f"n_clusters={k} exceeds the {distinct} distinct rows")
        rng = Lcg64(self.random_state)
        x_sq = np.einsum("ij,ij->i", X, X)
        centers = X[kmeans_plusplus(X, k, rng)].copy()

        prev = None
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            d2 = _sq_distances(X, x_sq, centers)
            labels = np.argmin(d2, axis=1)
            if prev is not None and np.array_equal(labels, prev):
                break
            centers = self._update(X, labels, d2[np.arange(X.shape[0]), labels], k, centers)
            prev = labels
        else:
            d2 = _sq_distances(X, x_sq, centers)
            labels = np.argmin(d2, axis=1)

        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = float(np.sum(d2[np.arange(X.shape[0]), labels]))
        self.n_iter_ = n_iter
        return self

    @staticmethod
    def _update(X, labels, own_d2, k, old_centers):
        order = np.argsort(labels, kind="stable")
        sorted_labels = labels[order]
        counts = np.bincount(labels, minlength=k)
        present = np.flatnonzero(counts)
        starts = np.searchsorted(sorted_labels, present)
        sums = np.add.reduceat(X[order], starts, axis=0)
        centers = old_centers.copy()
        centers[present] = sums / counts[present][:, None]
        # empty clusters restart at the points farthest from their centre
        far = own_d2.copy()
        for j in np.flatnonzero(counts == 0):
            idx = int(np.argmax(far))
            centers[j] = X[idx]
            far[idx] = -1.0
        return centers

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        d2 = _sq_distances(X, np.einsum("ij,ij->i", X, X), self.cluster_centers_)
        return np.argmin(d2, axis=1)


class ClusterModel:
    """Fitted k-means plus the chunk id of every clustered row."""

    def __init__(self, kmeans: DeterministicKMeans, chunk_ids: Iterable[str]):
        self.kmeans = kmeans
        self.assignments: dict[str, int] = dict(zip(chunk_ids, kmeans.labels_.tolist()))

    @property
    def k(self) -> int:
        return self.kmeans.n_clusters

    @property
    def seed(self) -> int:
        return self.kmeans.random_state

    @property
    def centroids(self) -> np.ndarray:
        return self.kmeans.cluster_centers_


def fit_kmeans(matrix, k: int, seed: int, chunk_ids: Iterable[str] | None = None) -> ClusterModel:
    """Cluster embedding rows. ``matrix`` may be an EmbeddingMatrix or an array."""
    if hasattr(matrix, "ids") and hasattr(matrix, "values"):
        chunk_ids = matrix.ids if chunk_ids is None else chunk_ids
        matrix = matrix.values
    values = np.asarray(matrix)
    ids = list(chunk_ids) if chunk_ids is not None else [str(i) for i in range(values.shape[0])]
    return ClusterModel(DeterministicKMeans(k, seed).fit(values), ids)


def cluster_coverage(model: ClusterModel | Mapping[str, int], chunk_ids: Iterable[str]) -> int:
    """Number of distinct clusters among ``chunk_ids``."""
    assignments = model.assignments if isinstance(model, ClusterModel) else model
    hit = set()
    for cid in chunk_ids:
        if cid not in assignments:
            raise KeyError(f"chunk {cid!r} has no cluster assignment")
        hit.add(assignments[cid])
    return len(hit)
