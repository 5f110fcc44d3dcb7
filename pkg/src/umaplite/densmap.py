"""Density-preserving regularizer.

The local radius of a point is the membership-weighted mean squared
distance to its graph neighbors, in input space (weights p) and in the
embedding (weights q, same edge set).  The regularizer rewards Pearson
correlation between the two log-radius vectors.

Gradient of the correlation with respect to the embedding, with
``s_ij = ||y_i - y_j||^2`` and ``Z_i = sum_j q_ij``::

    dr_i/ds_ij   = (q'(s_ij) (s_ij - R_i) + q(s_ij)) / (Z_i R_i)
    dCorr/dr_i   = (Var_q (r_p,i - mu_p) - Cov (r_q,i - mu_q))
                   / ((n - 1) sqrt(Var_p) Var_q^(3/2))
    dCorr/dy_i   = sum_j 2 (y_i - y_j) (dCorr/dr_i dr_i/ds_ij + dCorr/dr_j dr_j/ds_ij)

where ``q'(s) = -a b s^(b-1) q(s)^2``.

The optimizer weights the correlation by ``lam * W`` where ``W`` is the
total membership weight of the graph (sum of p_ij over unordered pairs).
The cross-entropy grows with the number of edges while the correlation
stays in [-1, 1]; measuring lambda in units of W keeps its effect
independent of dataset size.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dataio import as_array
from .errors import DegenerateDensityError, IsolatedPointError, ParameterError
from .low_dim_kernel import q_from_sq_dist
from .sgd_optimizer import exact_loss

DEFAULT_LAMBDA = 2.0


@dataclass
class DensityState:
    r_p: np.ndarray
    r_q: np.ndarray
    mu_p: float
    mu_q: float
    lam: float


def _edges(fg):
    P = fg.p.tocsr()
    rows = np.repeat(np.arange(P.shape[0]), np.diff(P.indptr))
    return P, rows, P.indices, P.data


def _sq(A, rows, cols):
    diff = A[rows] - A[cols]
    return np.sum(diff * diff, axis=1)


def _weighted_mean(weights, values, rows, n):
    num = np.bincount(rows, weights=weights * values, minlength=n)
    den = np.bincount(rows, weights=weights, minlength=n)
    return num, den


def radii_p(fg, data):
    """Input-space local radius of every point."""
    X = as_array(data)
    P, rows, cols, w = _edges(fg)
    num, den = _weighted_mean(w, _sq(X, rows, cols), rows, P.shape[0])
    if np.any(den <= 0):
        bad = int(np.flatnonzero(den <= 0)[0])
        raise IsolatedPointError(f"point {bad} has zero total membership")
    return num / den


def radii_q(embedding, fg, kp):
    """Embedding-space local radius of every point over the stored edges."""
    Y = as_array(embedding)
    P, rows, cols, _ = _edges(fg)
    d2 = _sq(Y, rows, cols)
    qv = q_from_sq_dist(d2, kp.a, kp.b)
    num, den = _weighted_mean(qv, d2, rows, P.shape[0])
    if np.any(den <= 0):
        bad = int(np.flatnonzero(den <= 0)[0])
        raise IsolatedPointError(f"point {bad} has no stored edges")
    return num / den


def local_radius_p(fg, data, i):
    return float(radii_p(fg, data)[i])


def local_radius_q(embedding, fg, kp, i):
    return float(radii_q(embedding, fg, kp)[i])


def correlation(r_q, r_p):
    """Pearson correlation with the 1/(n-1) convention."""
    r_q = np.asarray(r_q, dtype=np.float64)
    r_p = np.asarray(r_p, dtype=np.float64)
    if r_q.shape != r_p.shape or r_q.ndim != 1 or r_q.size < 2:
        raise ParameterError("correlation needs two vectors of equal length >= 2")
    if not (np.all(np.isfinite(r_q)) and np.all(np.isfinite(r_p))):
        raise DegenerateDensityError("log radii are not finite")
    n = r_q.size
    dq = r_q - r_q.mean()
    dp = r_p - r_p.mean()
    var_q = dq @ dq / (n - 1)
    var_p = dp @ dp / (n - 1)
    if var_q <= 0 or var_p <= 0:
        raise DegenerateDensityError("zero variance in log radii")
    corr = (dq @ dp / (n - 1)) / np.sqrt(var_q * var_p)
    return float(np.clip(corr, -1.0, 1.0))


def density_state(embedding, fg, data, kp, lam, r_p=None):
    r_p = np.log(radii_p(fg, data)) if r_p is None else r_p
    with np.errstate(divide="ignore"):
        r_q = np.log(radii_q(embedding, fg, kp))
    return DensityState(r_p, r_q, float(r_p.mean()), float(r_q.mean()), lam)


def densmap_loss(embedding, fg, data, kp, lam):
    """UMAP exact loss minus ``lam`` times the log-radius correlation."""
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    base = exact_loss(embedding, fg, kp)
    if lam == 0:
        return base
    st = density_state(embedding, fg, data, kp, lam)
    return base - lam * correlation(st.r_q, st.r_p)


def regularizer_weight(fg, lam):
    """Weight on the correlation term actually used by the optimizer."""
    return lam * float(fg.p.sum()) / 2.0


def correlation_gradient(embedding, fg, kp, r_p):
    """Full (n, p) gradient of Corr(r_q, r_p) with respect to the embedding.

    Returns ``(grad, corr)``.  Raises DegenerateDensityError when the
    correlation is undefined.
    """
    Y = as_array(embedding)
    n = Y.shape[0]
    P, rows, cols, _ = _edges(fg)
    d2 = _sq(Y, rows, cols)
    a, b = kp.a, kp.b
    qv = q_from_sq_dist(d2, a, b)
    num, Z = _weighted_mean(qv, d2, rows, n)
    if np.any(Z <= 0):
        raise IsolatedPointError("a point has no stored edges")
    R = num / Z
    if np.any(R <= 0):
        raise DegenerateDensityError("zero embedding radius")
    r_q = np.log(R)
    corr = correlation(r_q, r_p)

    dq = r_q - r_q.mean()
    dp = r_p - r_p.mean()
    var_q = dq @ dq / (n - 1)
    var_p = dp @ dp / (n - 1)
    cov = dq @ dp / (n - 1)
    g = (var_q * dp - cov * dq) / ((n - 1) * np.sqrt(var_p) * var_q ** 1.5)

    dq_ds = np.zeros_like(d2)
    pos = d2 > 0
    dq_ds[pos] = -a * b * np.exp((b - 1.0) * np.log(d2[pos])) * qv[pos] ** 2
    dr_ds = (dq_ds * (d2 - R[rows]) + qv) / (Z[rows] * R[rows])

    T = sp.csr_matrix((g[rows] * dr_ds, (rows, cols)), shape=(n, n))
    C = T + T.T
    grad = 2.0 * (np.asarray(C.sum(axis=1)).ravel()[:, None] * Y - C @ Y)
    return grad, corr


def densmap_gradient(embedding, fg, data, kp, lam, i=None):
    """Gradient of ``-lam * Corr`` with respect to y_i (all points if i is None).

    A degenerate correlation yields a zero gradient.
    """
    Y = as_array(embedding)
    if lam == 0:
        grad = np.zeros_like(Y)
    else:
        r_p = np.log(radii_p(fg, data))
        try:
            grad, _ = correlation_gradient(Y, fg, kp, r_p)
            grad = -lam * grad
        except DegenerateDensityError:
            grad = np.zeros_like(Y)
    return grad if i is None else grad[i]


def density_step(state, fg, kp):
    """Apply one regularizer step to the optimizer state before its SGD sweep.

    Returns the correlation measured before the step (NaN if degenerate).
    """
    cfg = state.config
    if state.log_radius_p is None:
        raise ParameterError("density regularizer needs input-space radii")
    coords = state.embedding.coords
    try:
        grad, corr = correlation_gradient(coords, fg, kp, state.log_radius_p)
    except DegenerateDensityError:
        return float("nan")
    step = -regularizer_weight(fg, cfg.densmap_lambda) * grad
    if cfg.grad_clip is not None:
        norms = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, cfg.grad_clip / np.maximum(norms, 1e-300))
        step = step * scale[:, None]
    coords -= state.eta * step
    return corr
