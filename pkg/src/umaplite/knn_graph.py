"""Exact Euclidean k-nearest-neighbor graphs with incremental insertion.

Ties in distance are broken by the lower point index so that every
construction path (full build, incremental insert) produces the same graph.
"""

from dataclasses import dataclass

import numpy as np

from .dataio import as_array
from .errors import DimensionError, ParameterError


@dataclass
class NeighborGraph:
    """Per-point ordered neighbor lists.

    ``indices[i]`` holds the k neighbors of point i by ascending distance
    and ``distances[i]`` the matching Euclidean distances.
    """

    k: int
    indices: np.ndarray
    distances: np.ndarray

    @property
    def n(self):
        return self.indices.shape[0]

    def copy(self):
        return NeighborGraph(self.k, self.indices.copy(), self.distances.copy())


def row_distances(x, Y):
    """Euclidean distances from one point to every row of ``Y``.

    Every distance in the package is computed through this function so
    that different code paths agree bit for bit.
    """
    diff = x - Y
    return np.sqrt(np.sum(diff * diff, axis=1))


def _select(dist, idx, k):
    # stable sort on distance keeps ascending-index order among ties
    order = np.argsort(dist, kind="stable")[:k]
    return idx[order], dist[order]


def exact_knn(X, k, query=None):
    """k nearest rows of ``X`` for each row of ``query`` (default: X itself).

    When ``query`` is None a point never lists itself.  ``k = 1`` is
    allowed here; the graph builder enforces its own lower bound.
    """
    X = as_array(X)
    self_query = query is None
    Q = X if self_query else as_array(query)
    n = X.shape[0]
    limit = n - 1 if self_query else n
    if not 1 <= k <= limit:
        raise ParameterError(f"k={k} out of range for {n} points")
    indices = np.empty((Q.shape[0], k), dtype=np.int64)
    distances = np.empty((Q.shape[0], k), dtype=np.float64)
    all_idx = np.arange(n)
    for i in range(Q.shape[0]):
        dist = row_distances(Q[i], X)
        if self_query:
            keep = all_idx != i
            indices[i], distances[i] = _select(dist[keep], all_idx[keep], k)
        else:
            indices[i], distances[i] = _select(dist, all_idx, k)
    return indices, distances


def build(data, k):
    """Exact kNN graph of ``data`` under the Euclidean metric.

    Parameters
    ----------
    data : DataMatrix or array of shape (n, d)
    k : int
        Neighbor count, ``2 <= k < n``.
    """
    X = as_array(data)
    n = X.shape[0]
    if k < 2 or k >= n:
        raise ParameterError(f"need 2 <= k < n, got k={k}, n={n}")
    indices, distances = exact_knn(X, k)
    return NeighborGraph(k, indices, distances)


def insert_batch(graph, data, new_points):
    """Add ``new_points`` to an exact kNN graph built over ``data``.

    Returns the graph over the concatenated dataset and the sorted array
    of indices whose neighbor list is new or changed: every new point plus
    each existing point that gained a closer neighbor.
    """
    X_old = as_array(data)
    X_new = as_array(new_points)
    if X_new.ndim != 2:
        raise DimensionError(f"new points must be a 2-D matrix, got shape {X_new.shape}")
    if X_new.shape[0] and X_new.shape[1] != X_old.shape[1]:
        raise ParameterError(
            f"dimension mismatch: graph has d={X_old.shape[1]}, batch has d={X_new.shape[1]}"
        )
    n_old = X_old.shape[0]
    n_new = X_new.shape[0]
    k = graph.k
    if graph.n != n_old:
        raise ParameterError(f"graph covers {graph.n} points but data has {n_old}")
    if n_new == 0:
        return graph.copy(), np.empty(0, dtype=np.int64)

    X_all = np.vstack([X_old, X_new])
    new_idx = np.arange(n_old, n_old + n_new)

    indices = np.empty((n_old + n_new, k), dtype=np.int64)
    distances = np.empty((n_old + n_new, k), dtype=np.float64)
    changed = []
    for i in range(n_old):
        cand = row_distances(X_old[i], X_new)
        if not np.any(cand <= graph.distances[i, -1]):
            indices[i] = graph.indices[i]
            distances[i] = graph.distances[i]
            continue
        # old neighbor indices are all < n_old, so concatenation keeps index order among ties
        merged_idx = np.concatenate([graph.indices[i], new_idx])
        merged_dist = np.concatenate([graph.distances[i], cand])
        order = np.lexsort((merged_idx, merged_dist))[:k]
        indices[i] = merged_idx[order]
        distances[i] = merged_dist[order]
        if not np.array_equal(indices[i], graph.indices[i]):
            changed.append(i)

    all_idx = np.arange(n_old + n_new)
    for r, i in enumerate(new_idx):
        dist = row_distances(X_new[r], X_all)
        keep = all_idx != i
        indices[i], distances[i] = _select(dist[keep], all_idx[keep], k)

    updated = np.concatenate([np.array(changed, dtype=np.int64), new_idx])
    return NeighborGraph(k, indices, distances), updated
