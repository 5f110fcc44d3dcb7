"""Neighborhood-fidelity measures for embeddings."""

from dataclasses import dataclass

import numpy as np

from .dataio import as_array
from .errors import ParameterError
from .knn_graph import exact_knn


@dataclass
class QualityReport:
    knn_preservation: float
    label_agreement: float | None = None
    loss_initial: float | None = None
    loss_final: float | None = None


def knn_preservation(data, emb, k):
    """Mean fraction of each point's k input-space neighbors kept in the embedding."""
    X = as_array(data)
    Y = as_array(emb)
    if X.shape[0] != Y.shape[0]:
        raise ParameterError("data and embedding have different numbers of points")
    if not 1 <= k < X.shape[0]:
        raise ParameterError(f"need 1 <= k < n, got k={k}")
    nx, _ = exact_knn(X, k)
    ny, _ = exact_knn(Y, k)
    overlap = [np.intersect1d(nx[i], ny[i]).size for i in range(X.shape[0])]
    return float(np.mean(overlap) / k)


def label_agreement(emb, labels, k, queries=None):
    """Mean fraction of embedding-space neighbors that share the point's label.

    ``queries`` restricts the average to a subset of points (their
    neighbors are still searched among all points).
    """
    if labels is None:
        raise ParameterError("label_agreement needs labels")
    Y = as_array(emb)
    labels = np.asarray(labels)
    if labels.shape[0] != Y.shape[0]:
        raise ParameterError("labels length does not match number of points")
    if not 1 <= k < Y.shape[0]:
        raise ParameterError(f"need 1 <= k < n, got k={k}")
    nbrs, _ = exact_knn(Y, k)
    rows = np.arange(Y.shape[0]) if queries is None else np.asarray(queries)
    if rows.size == 0:
        raise ParameterError("no query points")
    same = labels[nbrs[rows]] == labels[rows, None]
    return float(same.mean())
