"""Independent slow reference implementations used as test oracles.

Each oracle is written directly from the defining formulas with plain
loops or dense matrices and shares no code with the library beyond the
counter-based RNG, whose key layout is itself part of the contract.
"""

import math

import numpy as np

from umaplite import _rng


def brute_knn(X, k):
    """Sort every row of the full distance matrix; ties by index."""
    n = X.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for i in range(n):
        cand = []
        for j in range(n):
            if j != i:
                cand.append((math.sqrt(float(np.sum((X[i] - X[j]) ** 2))), j))
        cand.sort()
        idx[i] = [j for _, j in cand[:k]]
        dist[i] = [d for d, _ in cand[:k]]
    return idx, dist


def bisect_sigma(d, rho, k, iters=200):
    target = math.log2(k)
    lo, hi = 1e-12, 1e6
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        s = sum(math.exp(-max(x - rho, 0.0) / mid) for x in d)
        if s > target:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def dense_fuzzy(X, k, sigma=None):
    """Dense p matrix straight from the membership and union formulas."""
    n = X.shape[0]
    idx, dist = brute_knn(X, k)
    rho = dist.min(axis=1)
    if sigma is None:
        sigma = np.array([bisect_sigma(dist[i], rho[i], k) for i in range(n)])
    D = np.zeros((n, n))
    for i in range(n):
        for t in range(k):
            j = idx[i, t]
            D[i, j] = math.exp(-max(dist[i, t] - rho[i], 0.0) / sigma[i])
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            P[i, j] = D[i, j] + D[j, i] - D[i, j] * D[j, i]
    return P, rho, sigma


def q_scalar(d2, a, b):
    return 1.0 / (1.0 + a * d2 ** b)


def dense_loss(Y, P, a, b):
    """Cross-entropy over ordered pairs, double loop."""
    n = Y.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            qv = q_scalar(float(np.sum((Y[i] - Y[j]) ** 2)), a, b)
            if P[i, j] > 0:
                total -= P[i, j] * math.log(qv)
            total -= (1.0 - P[i, j]) * math.log(max(1.0 - qv, 1e-12))
    return total


def _attr(d2, a, b):
    if d2 <= 0:
        return 0.0
    return 2 * a * b * d2 ** (b - 1) / (1 + a * d2 ** b)


def _rep(d2, a, b, eps):
    if d2 <= 0:
        return 0.0
    return -2 * b / ((eps + d2) * (1 + a * d2 ** b))


def _clip(vec, limit):
    norm = math.sqrt(float(vec @ vec))
    if limit and norm > limit:
        return vec * (limit / norm)
    return vec


def literal_epoch(Y, P, *, eta, a, b, eps, m, seed, stream, epoch,
                  update_negatives=False, clip=4.0, degree=None, effective=False):
    """One epoch of the full n x n pair loop, every pair drawing its own u.

    Mutates ``Y``; returns (attractive, repulsive) counts.
    """
    n, _ = Y.shape
    seed = np.uint64(_rng.normalize_seed(seed))
    n_att = n_rep = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            # numba hands uint64 back as a Python int; re-wrap it before the next call
            key = np.uint64(_rng.pair_key(seed, np.uint64(stream), np.uint64(epoch), i, j))
            u = _rng.unit(np.uint64(_rng.draw(key, 0)))
            if not u <= P[i, j]:
                continue
            n_att += 1
            delta = Y[i] - Y[j]
            g = _clip(_attr(float(delta @ delta), a, b) * delta, clip)
            Y[i] -= eta * g
            Y[j] += eta * g
            for s in range(m):
                l = _rng.index(np.uint64(_rng.draw(key, s + 1)), n)
                n_rep += 1
                delta = Y[i] - Y[l]
                g = _clip(_rep(float(delta @ delta), a, b, eps) * delta, clip)
                if effective:
                    w = (degree[i] + degree[l]) * m / (2.0 * n)
                    w = w / (1.0 - P[i, l]) if P[i, l] < 1 else 1.0
                    g = g * min(max(w, 0.0), 1.0)
                Y[i] -= eta * g
                if update_negatives and l != i:
                    Y[l] += eta * g
    return n_att, n_rep


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        fp = f(x)
        x[idx] = orig - h
        fm = f(x)
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))
