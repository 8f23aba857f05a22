"""K-means (Lloyd iterations, k-means++ seeding) and cluster validity indices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vmfs.errors import DegenerateClusteringError, DimensionError, TooFewPointsError


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    # inertia after every update step, first entry is the seeded partition
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "labels": [int(v) for v in self.labels],
            "centroids": self.centroids.tolist(),
            "inertia": float(self.inertia),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, d) -> ClusterAssignment:
        return cls(
            labels=np.asarray(d["labels"], dtype=np.int64),
            centroids=np.asarray(d["centroids"], dtype=float).reshape(int(d["k"]), -1),
            inertia=float(d["inertia"]),
            iterations=int(d["iterations"]),
        )


@dataclass(frozen=True)
class ValidityScores:
    davies_bouldin: float
    dunn: float


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError("points must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise DimensionError("points contain non-finite values")
    return X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _inertia(X, labels, C) -> float:
    return float(((X - C[labels]) ** 2).sum())


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), centers)
            nxt = int(free[rng.integers(len(free))])
        centers.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[centers].copy()


def _repair_empty(X, labels, C, k) -> np.ndarray:
    """Give every empty cluster the point farthest from its own centroid."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        sizes = np.bincount(labels, minlength=k)
        d2 = ((X - C[labels]) ** 2).sum(axis=1)
        d2[sizes[labels] < 2] = -1.0
        labels[int(np.argmax(d2))] = c
    return labels


def _update(X, labels, k) -> np.ndarray:
    # Mean taken relative to one member of each cluster, so a cluster of
    # identical points gets that point back exactly.
    ref = X[np.unique(labels, return_index=True)[1]]
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X - ref[labels])
    return ref + sums / np.bincount(labels, minlength=k)[:, None]


def _lloyd(X, k, rng, max_iter, tol):
    C = kmeans_pp_init(X, k, rng)
    labels = _repair_empty(X, np.argmin(_sq_dists(X, C), axis=1), C, k)
    C = _update(X, labels, k)
    inertia = _inertia(X, labels, C)
    history = [inertia]
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        new = _repair_empty(X, np.argmin(_sq_dists(X, C), axis=1), C, k)
        if np.array_equal(new, labels):
            break
        labels = new
        C = _update(X, labels, k)
        prev, inertia = inertia, _inertia(X, labels, C)
        history.append(inertia)
        if prev == 0 or (prev - inertia) / prev < tol:
            break
    return labels, C, inertia, iterations, history


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-6, n_init: int = 10) -> ClusterAssignment:
    """Lloyd's algorithm from k-means++ starts.

    ``n_init`` independent starts are drawn from one generator seeded with
    ``seed``; the run with the lowest final inertia is returned (earliest
    run on ties). Points are visited in a canonical (sorted) order, so the
    result depends on the point set and ``seed`` but not on row order.
    Assignment ties go to the lowest cluster id.
    """
    X0 = _as_points(points)
    n = X0.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    if n < k:
        raise TooFewPointsError(f"{n} points cannot form {k} clusters")
    order = np.lexsort(X0.T[::-1])
    X = X0[order]
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(X, k, rng, max_iter, tol)
        if best is None or run[2] < best[2]:
            best = run
    labels, C, inertia, iterations, history = best
    out = np.empty(n, dtype=np.int64)
    out[order] = labels
    return ClusterAssignment(out, C, inertia, iterations, tuple(history))


def _labels_of(assignment) -> np.ndarray:
    if isinstance(assignment, ClusterAssignment):
        return np.asarray(assignment.labels)
    return np.asarray(assignment)


def _groups(points, assignment):
    X = _as_points(points)
    labels = _labels_of(assignment)
    if labels.shape[0] != X.shape[0]:
        raise DimensionError("one label per point required")
    ids = np.unique(labels)
    if len(ids) < 2:
        raise DegenerateClusteringError("validity indices need at least 2 clusters")
    groups = [X[labels == c] for c in ids]
    centroids = np.array([g.mean(axis=0) for g in groups])
    return groups, centroids


def _centroid_distances(centroids) -> np.ndarray:
    diff = centroids[:, None, :] - centroids[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    off = ~np.eye(len(centroids), dtype=bool)
    if np.any(d[off] == 0):
        raise DegenerateClusteringError("two clusters share a centroid")
    return d


def davies_bouldin(points, assignment) -> float:
    """Mean over clusters of the worst (scatter_i + scatter_j) / centroid gap.

    Scatter is the mean Euclidean distance of a cluster's points to its
    centroid. Centroids are recomputed from ``points``.
    """
    groups, C = _groups(points, assignment)
    d = _centroid_distances(C)
    scatter = np.array([np.sqrt(((g - c) ** 2).sum(axis=1)).mean() for g, c in zip(groups, C)])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (scatter[:, None] + scatter[None, :]) / d
    np.fill_diagonal(ratio, -np.inf)
    return float(ratio.max(axis=1).mean())


def _diameter(g: np.ndarray) -> float:
    if len(g) < 2:
        return 0.0
    diff = g[:, None, :] - g[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2).max()))


def dunn_index(points, assignment) -> float:
    """Smallest centroid gap over the largest cluster diameter."""
    groups, C = _groups(points, assignment)
    d = _centroid_distances(C)
    diam = max(_diameter(g) for g in groups)
    if diam == 0:
        raise DegenerateClusteringError("all clusters have zero diameter")
    return float(d[~np.eye(len(C), dtype=bool)].min() / diam)


def validity(points, assignment) -> ValidityScores:
    return ValidityScores(davies_bouldin(points, assignment), dunn_index(points, assignment))
