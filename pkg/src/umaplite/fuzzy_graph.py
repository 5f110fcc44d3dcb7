"""Fuzzy similarity graph over the kNN graph.

Each point gets a shift ``rho`` (distance to its nearest neighbor) and a
scale ``sigma`` found by bisection so its k shifted-exponential memberships
sum to log2(k).  Directional memberships are merged with the fuzzy union
``a + b - a*b``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dataio import as_array
from .errors import ParameterError

SIGMA_TOL = 1e-5
SIGMA_MAX_ITER = 100
BRACKET_LO = 1e-6
BRACKET_HI = 1e3


@dataclass
class FuzzyGraph:
    """Symmetric membership weights plus per-point calibration.

    ``p`` is a CSR matrix with sorted column indices and no diagonal.
    ``directional[i, t]`` is the membership of ``graph.indices[i, t]`` as
    seen from point i; it is absent for graphs built from a raw matrix.
    """

    rho: np.ndarray
    sigma: np.ndarray
    p: sp.csr_matrix
    degree: np.ndarray
    saturated: np.ndarray = field(default=None)
    residual: np.ndarray = field(default=None)
    directional: np.ndarray = field(default=None)

    @property
    def n(self):
        return self.p.shape[0]

    def dense(self):
        return self.p.toarray()

    @classmethod
    def from_matrix(cls, P):
        """Wrap an explicit symmetric weight matrix (tests, diagnostics)."""
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ParameterError("weight matrix must be square")
        if not np.allclose(P, P.T, atol=0, rtol=0):
            raise ParameterError("weight matrix must be symmetric")
        if np.any(P < 0) or np.any(P > 1):
            raise ParameterError("weights must lie in [0, 1]")
        P = P.copy()
        np.fill_diagonal(P, 0.0)
        csr = _canonical(sp.csr_matrix(P))
        n = P.shape[0]
        return cls(
            rho=np.zeros(n),
            sigma=np.ones(n),
            p=csr,
            degree=np.asarray(csr.sum(axis=1)).ravel(),
            saturated=np.zeros(n, dtype=bool),
        )


def _canonical(m):
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    m.sum_duplicates()
    m.sort_indices()
    return m


def compute_rho(graph, i):
    """Distance from point i to its nearest neighbor."""
    return float(np.min(graph.distances[i]))


def _membership_sum(shifted, sigma):
    # shifted: (..., k) nonnegative, sigma: (...,)
    return np.exp(-shifted / sigma[..., None]).sum(axis=-1)


def calibrate_all(distances, rho, k, lo, hi, tol=SIGMA_TOL, max_iter=SIGMA_MAX_ITER):
    """Vectorized bisection for sigma over many points.

    Returns ``(sigma, residual, saturated)``.  A point is saturated when no
    sigma inside ``[lo, hi]`` reaches the target; sigma is then clamped to
    the nearer bracket end.
    """
    if k < 2:
        raise ParameterError("k must be >= 2: the log2(k) target is unreachable for k = 1")
    distances = np.atleast_2d(np.asarray(distances, dtype=np.float64))
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    target = np.log2(k)
    shifted = np.maximum(distances - rho[:, None], 0.0)
    m = distances.shape[0]
    lo_arr = np.full(m, float(lo))
    hi_arr = np.full(m, float(hi))

    f_lo = _membership_sum(shifted, lo_arr) - target
    f_hi = _membership_sum(shifted, hi_arr) - target
    sigma = np.empty(m)
    residual = np.empty(m)
    saturated = np.zeros(m, dtype=bool)

    too_big = f_lo >= -tol  # even the smallest scale overshoots
    too_small = f_hi <= tol  # even the largest scale undershoots
    done = np.zeros(m, dtype=bool)
    for mask, val, f in ((too_big, lo_arr, f_lo), (too_small & ~too_big, hi_arr, f_hi)):
        sigma[mask] = val[mask]
        residual[mask] = np.abs(f[mask])
        saturated[mask] = np.abs(f[mask]) > tol
        done |= mask

    active = ~done
    for _ in range(max_iter):
        if not active.any():
            break
        mid = 0.5 * (lo_arr[active] + hi_arr[active])
        f_mid = _membership_sum(shifted[active], mid) - target
        idx = np.flatnonzero(active)
        hit = np.abs(f_mid) <= tol
        sigma[idx[hit]] = mid[hit]
        residual[idx[hit]] = np.abs(f_mid[hit])
        up = f_mid < 0
        lo_arr[idx[up & ~hit]] = mid[up & ~hit]
        hi_arr[idx[~up & ~hit]] = mid[~up & ~hit]
        active[idx[hit]] = False
    if active.any():
        # iteration budget exhausted: keep the final midpoint
        idx = np.flatnonzero(active)
        mid = 0.5 * (lo_arr[idx] + hi_arr[idx])
        sigma[idx] = mid
        residual[idx] = np.abs(_membership_sum(shifted[idx], mid) - target)
    return sigma, residual, saturated


def default_bracket(distances):
    """Search interval for sigma scaled by the mean nonzero neighbor distance."""
    d = np.asarray(distances, dtype=np.float64)
    nz = d[d > 0]
    scale = float(nz.mean()) if nz.size else 1.0
    return BRACKET_LO * scale, BRACKET_HI * scale


def calibrate_sigma(distances, rho, k, tol=SIGMA_TOL, bracket=None):
    """Scale sigma with ``sum_j exp(-max(d_j - rho, 0) / sigma) = log2(k)``.

    Parameters
    ----------
    distances : sequence of k ascending neighbor distances
    rho : float
        Shift, normally ``distances[0]``.
    k : int
    tol : float
        Allowed absolute residual on the membership sum.
    bracket : (lo, hi), optional
        Search interval; defaults to ``default_bracket(distances)``.
    """
    if k < 2:
        raise ParameterError("k must be >= 2: the log2(k) target is unreachable for k = 1")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    distances = np.asarray(distances, dtype=np.float64)
    if distances.shape != (k,):
        raise ParameterError(f"expected {k} distances, got shape {distances.shape}")
    lo, hi = bracket if bracket is not None else default_bracket(distances)
    sigma, _, _ = calibrate_all(distances[None, :], [rho], k, lo, hi, tol=tol)
    return float(sigma[0])


def directional_p(graph, rho, sigma, i, j):
    """Membership of j in the neighborhood of i (0 if j is not a neighbor)."""
    hits = np.flatnonzero(graph.indices[i] == j)
    if hits.size == 0:
        return 0.0
    d = graph.distances[i, hits[0]]
    return float(min(np.exp(-max(d - rho[i], 0.0) / sigma[i]), 1.0))


def symmetrize(p_ji, p_ij):
    """Fuzzy union of the two directional memberships.

    Evaluated as ``hi + lo * (1 - hi)``: algebraically ``a + b - ab``, but
    exactly commutative, exactly ``a`` when ``b = 0`` and exactly 1 when
    either input is 1.
    """
    hi = np.maximum(p_ji, p_ij)
    lo = np.minimum(p_ji, p_ij)
    return hi + lo * (1.0 - hi)


def directional_rows(graph, rho, sigma, rows=None):
    """Directional memberships for the given rows of the neighbor graph."""
    if rows is None:
        rows = np.arange(graph.n)
    shifted = np.maximum(graph.distances[rows] - rho[rows, None], 0.0)
    return np.minimum(np.exp(-shifted / sigma[rows, None]), 1.0)


def assemble(graph, directional):
    """Symmetrized sparse graph from per-row directional memberships."""
    n, k = graph.indices.shape
    rows = np.repeat(np.arange(n), k)
    D = sp.csr_matrix((directional.ravel(), (rows, graph.indices.ravel())), shape=(n, n))
    D.sum_duplicates()
    Dt = D.T.tocsr()
    P = _canonical(D.maximum(Dt))
    rows = np.repeat(np.arange(n), np.diff(P.indptr))
    lo = np.asarray(D.minimum(Dt)[rows, P.indices]).ravel()
    P.data = symmetrize(P.data, lo)
    return P


def build_fuzzy(graph, data=None, k=None):
    """Fuzzy graph from a kNN graph.

    ``data`` is accepted for interface symmetry; distances come from the
    graph itself.
    """
    k = graph.k if k is None else k
    if k != graph.k:
        raise ParameterError(f"graph was built with k={graph.k}, not {k}")
    if data is not None and as_array(data).shape[0] != graph.n:
        raise ParameterError("data and graph disagree on the number of points")
    rho = graph.distances.min(axis=1)
    lo, hi = default_bracket(graph.distances)
    sigma, residual, saturated = calibrate_all(graph.distances, rho, k, lo, hi)
    directional = directional_rows(graph, rho, sigma)
    P = assemble(graph, directional)
    return FuzzyGraph(
        rho=rho,
        sigma=sigma,
        p=P,
        degree=np.asarray(P.sum(axis=1)).ravel(),
        saturated=saturated,
        residual=residual,
        directional=directional,
    )
