"""Laplacian-eigenmap initialization from the fuzzy graph."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from .dataio import Embedding
from .errors import IsolatedPointError, ParameterError

INIT_STD = 1e-2
DENSE_LIMIT = 1000
COMPONENT_GAP = 10.0
_TIE_TOL = 1e-10


def normalized_laplacian(P):
    """``I - D^-1/2 P D^-1/2`` for a symmetric sparse weight matrix."""
    P = sp.csr_matrix(P)
    deg = np.asarray(P.sum(axis=1)).ravel()
    if np.any(deg <= 0):
        bad = int(np.flatnonzero(deg <= 0)[0])
        raise IsolatedPointError(f"point {bad} has zero degree")
    inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    return sp.identity(P.shape[0], format="csr") - inv_sqrt @ P @ inv_sqrt


def _eigenpairs(L, count, rng):
    """Smallest ``count`` eigenpairs of a symmetric PSD Laplacian, ascending."""
    n = L.shape[0]
    if n <= DENSE_LIMIT or count >= n - 1:
        vals, vecs = np.linalg.eigh(L.toarray())
        return vals[:count], vecs[:, :count]
    # eigenvalues of L lie in [0, 2]; the smallest of L are the largest of 2I - L
    shifted = 2.0 * sp.identity(n, format="csr") - L
    v0 = rng.standard_normal(n)
    vals, vecs = eigsh(shifted, k=count, which="LA", v0=v0, tol=1e-10)
    vals = 2.0 - vals
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def _peak(col):
    # first index of the largest magnitude; near-equal magnitudes count as ties
    mag = np.abs(col)
    return int(np.flatnonzero(mag >= mag.max() * (1.0 - 1e-9))[0])


def _order_ties(vals, vecs):
    # within a group of equal eigenvalues, order by position of the largest entry
    keys = [_peak(vecs[:, c]) for c in range(vecs.shape[1])]
    order = list(range(len(vals)))
    groups = []
    start = 0
    for t in range(1, len(vals) + 1):
        if t == len(vals) or vals[t] - vals[start] > _TIE_TOL:
            groups.append(order[start:t])
            start = t
    out = []
    for g in groups:
        out.extend(sorted(g, key=lambda c: keys[c]))
    return vals[out], vecs[:, out]


def _fix_signs(vecs):
    for c in range(vecs.shape[1]):
        col = vecs[:, c]
        if col[_peak(col)] < 0:
            vecs[:, c] = -col
    return vecs


def _component_coords(P_sub, p, rng):
    s = P_sub.shape[0]
    L = normalized_laplacian(P_sub)
    usable = min(p, s - 1)
    vals, vecs = _eigenpairs(L, usable + 1, rng)
    vals, vecs = _order_ties(vals[1:], vecs[:, 1:])
    coords = np.zeros((s, p))
    coords[:, :usable] = _fix_signs(vecs.copy())
    return coords


def _scale_columns(coords, rng):
    # no centering: a scaled eigenvector stays an eigenvector
    coords = coords.copy()
    std = coords.std(axis=0)
    for c in range(coords.shape[1]):
        if std[c] == 0:
            # every component too small to supply this axis
            coords[:, c] = rng.standard_normal(coords.shape[0])
            coords[:, c] -= coords[:, c].mean()
            std[c] = coords[:, c].std()
    return coords * (INIT_STD / std)


def spectral_embed(fg, p, seed=0):
    """Initial embedding from eigenvectors of the normalized Laplacian.

    Columns are the eigenvectors of the p smallest nonzero eigenvalues,
    signed so that their largest-magnitude entry is positive, then scaled
    to standard deviation 1e-2.  Disconnected components are
    embedded separately and laid out along the first axis.
    """
    n = fg.n
    if p < 1 or p >= n:
        raise ParameterError(f"need 1 <= p < n, got p={p}, n={n}")
    P = sp.csr_matrix(fg.p)
    rng = np.random.default_rng(seed)
    n_comp, labels = connected_components(P, directed=False)
    if n_comp == 1:
        coords = _component_coords(P, p, rng)
        return Embedding(_scale_columns(coords, rng))

    # components ordered by their smallest point index (labels already follow that order)
    blocks = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        sub = P[members][:, members]
        block = _component_coords(sub, p, rng)
        block = block - block.mean(axis=0)
        std = block.std(axis=0)
        std[std == 0] = 1.0
        blocks.append((members, block * (INIT_STD / std)))
    extent = max(float(np.ptp(b, axis=0).max()) for _, b in blocks)
    extent = extent if extent > 0 else INIT_STD
    coords = np.zeros((n, p))
    for c, (members, block) in enumerate(blocks):
        block = block.copy()
        block[:, 0] += c * COMPONENT_GAP * extent
        coords[members] = block
    # centering here puts the component split at the origin of axis 0
    return Embedding(_scale_columns(coords - coords.mean(axis=0), rng))
