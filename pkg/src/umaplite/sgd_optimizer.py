"""Sampling-based SGD over the fuzzy graph, plus loss and weighting diagnostics.

One epoch visits ordered pairs (i, j) in row-major order.  A pair fires
with probability p_ij; a firing pair pulls i and j together and then
pushes i away from m uniformly drawn points.  Random draws are keyed per
(epoch, i, j), so iterating only stored edges consumes randomness exactly
as the full n x n double loop would.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _rng
from .config import RunConfig
from .dataio import Embedding, as_array
from .errors import NumericalDivergenceError, ParameterError
from .low_dim_kernel import ONE_MINUS_Q_FLOOR, KernelParams, q_from_sq_dist

EXACT_LOSS_MAX_N = 2000

# stream ids keep batch-mode and streaming draws disjoint
STREAM_BATCH = 0
STREAM_PROGRESSIVE = 1


@dataclass
class EpochReport:
    epoch: int
    exact_loss: float
    attractive_updates: int
    repulsive_updates: int
    correlation: float | None = None

    def csv_line(self):
        fields = [str(self.epoch), repr(self.exact_loss), str(self.attractive_updates),
                  str(self.repulsive_updates)]
        if self.correlation is not None:
            fields.append(repr(self.correlation))
        return ",".join(fields)


@dataclass
class OptimizerState:
    """Mutable optimizer state; ``embedding.coords`` is updated in place."""

    embedding: Embedding
    config: RunConfig
    epoch: int = 0
    eta: float = 1.0
    log_radius_p: np.ndarray | None = None
    history: list = field(default_factory=list)

    @property
    def seed(self):
        return _rng.normalize_seed(self.config.seed)


# --------------------------------------------------------------------------
# numba kernels

@njit(cache=True)
def _attr_coeff(d2, a, b):
    if d2 <= 0.0:
        return 0.0
    return 2.0 * a * b * math.exp((b - 1.0) * math.log(d2)) / (1.0 + a * math.exp(b * math.log(d2)))


@njit(cache=True)
def _rep_coeff(d2, a, b, eps):
    if d2 <= 0.0:
        return 0.0
    return -2.0 * b / ((eps + d2) * (1.0 + a * math.exp(b * math.log(d2))))


@njit(cache=True)
def _clip_scale(coeff, d2, clip):
    # factor that caps ||coeff * diff|| at clip
    if clip <= 0.0:
        return 1.0
    norm = abs(coeff) * math.sqrt(d2)
    if norm > clip:
        return clip / norm
    return 1.0


@njit(cache=True)
def _lookup(indptr, indices, data, i, l):
    lo = indptr[i]
    hi = indptr[i + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        c = indices[mid]
        if c == l:
            return data[mid]
        if c < l:
            lo = mid + 1
        else:
            hi = mid
    return 0.0


@njit(cache=True)
def _finite_row(Y, r):
    for c in range(Y.shape[1]):
        if not math.isfinite(Y[r, c]):
            return False
    return True


@njit(cache=True)
def _sgd_pass(Y, indptr, indices, data, anchors, movable, degree, eta, a, b, eps, m,
              move_positive, update_negatives, effective, clip, seed, stream, epoch):
    """One pass over ``anchors``.  Returns (attractive, repulsive, bad_i, bad_j)."""
    n = Y.shape[0]
    p = Y.shape[1]
    n_att = 0
    n_rep = 0
    diff = np.empty(p)
    for t in range(anchors.shape[0]):
        i = anchors[t]
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            pij = data[e]
            key = _rng.pair_key(seed, stream, epoch, i, j)
            u = _rng.unit(_rng.draw(key, 0))
            if u > pij:
                continue
            n_att += 1
            d2 = 0.0
            for c in range(p):
                diff[c] = Y[i, c] - Y[j, c]
                d2 += diff[c] * diff[c]
            coeff = _attr_coeff(d2, a, b)
            coeff *= _clip_scale(coeff, d2, clip)
            step = eta * coeff
            for c in range(p):
                Y[i, c] -= step * diff[c]
            if move_positive and movable[j]:
                for c in range(p):
                    Y[j, c] += step * diff[c]
            if not (_finite_row(Y, i) and _finite_row(Y, j)):
                return n_att, n_rep, i, j
            for s in range(m):
                l = _rng.index(_rng.draw(key, s + 1), n)
                n_rep += 1
                d2 = 0.0
                for c in range(p):
                    diff[c] = Y[i, c] - Y[l, c]
                    d2 += diff[c] * diff[c]
                coeff = _rep_coeff(d2, a, b, eps)
                coeff *= _clip_scale(coeff, d2, clip)
                if effective:
                    p_il = _lookup(indptr, indices, data, i, l)
                    w = (degree[i] + degree[l]) * m / (2.0 * n)
                    if p_il < 1.0:
                        w = w / (1.0 - p_il)
                    else:
                        w = 1.0
                    coeff *= min(max(w, 0.0), 1.0)
                step = eta * coeff
                for c in range(p):
                    Y[i, c] -= step * diff[c]
                if update_negatives and l != i and movable[l]:
                    for c in range(p):
                        Y[l, c] += step * diff[c]
                if not (_finite_row(Y, i) and _finite_row(Y, l)):
                    return n_att, n_rep, i, l
    return n_att, n_rep, -1, -1


@njit(cache=True)
def _count_pass(indptr, indices, data, n, m, seed, stream, epochs, att_sum, att_sq, rep_sum, rep_sq,
                tot_sum, tot_sq):
    att = np.zeros((n, n))
    rep = np.zeros((n, n))
    for epoch in range(1, epochs + 1):
        att[:, :] = 0.0
        rep[:, :] = 0.0
        for i in range(n):
            for e in range(indptr[i], indptr[i + 1]):
                j = indices[e]
                key = _rng.pair_key(seed, stream, epoch, i, j)
                if _rng.unit(_rng.draw(key, 0)) > data[e]:
                    continue
                att[i, j] += 1.0
                att[j, i] += 1.0
                for s in range(m):
                    l = _rng.index(_rng.draw(key, s + 1), n)
                    rep[i, l] += 1.0
        att_sum += att
        att_sq += att * att
        rep_sum += rep
        rep_sq += rep * rep
        for i in range(n):
            t = 0.0
            for l in range(n):
                t += rep[i, l]
            tot_sum[i] += t
            tot_sq[i] += t * t


# --------------------------------------------------------------------------
# public API

def _csr_arrays(fg):
    P = fg.p
    return (P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data.astype(np.float64))


def sgd_pass(coords, fg, anchors, *, eta, kp, m, seed, stream, epoch, move_positive=True,
             update_negatives=False, effective=False, clip=4.0, movable=None):
    """Run one sweep of the update loop over ``anchors``; returns update counts."""
    indptr, indices, data = _csr_arrays(fg)
    n = coords.shape[0]
    if movable is None:
        movable = np.ones(n, dtype=np.bool_)
    anchors = np.ascontiguousarray(anchors, dtype=np.int64)
    n_att, n_rep, bad_i, bad_j = _sgd_pass(
        coords, indptr, indices, data, anchors, movable,
        np.ascontiguousarray(fg.degree, dtype=np.float64),
        float(eta), float(kp.a), float(kp.b), float(kp.eps), int(m),
        bool(move_positive), bool(update_negatives), bool(effective),
        0.0 if clip is None else float(clip),
        np.uint64(_rng.normalize_seed(seed)), np.uint64(stream), np.uint64(epoch),
    )
    if bad_i >= 0:
        raise NumericalDivergenceError(
            f"non-finite coordinate at epoch {epoch}, pair ({bad_i}, {bad_j})",
            epoch=epoch, pair=(bad_i, bad_j),
        )
    return n_att, n_rep


def run_epoch(state, fg):
    """Advance the optimizer by one epoch and return its report."""
    cfg = state.config
    coords = state.embedding.coords
    kp = KernelParams.from_config(cfg)
    state.epoch += 1
    correlation = None
    if cfg.densmap_lambda > 0:
        from .densmap import density_step

        correlation = density_step(state, fg, kp)
    n_att, n_rep = sgd_pass(
        coords, fg, np.arange(coords.shape[0]), eta=state.eta, kp=kp, m=cfg.m,
        seed=cfg.seed, stream=STREAM_BATCH, epoch=state.epoch,
        update_negatives=cfg.update_negatives, effective=cfg.effective_weights,
        clip=cfg.grad_clip,
    )
    state.eta = 1.0 - state.epoch / cfg.epochs
    loss = exact_loss(coords, fg, kp) if _track(cfg, coords.shape[0]) else float("nan")
    report = EpochReport(state.epoch, loss, n_att, n_rep, correlation)
    state.history.append(report)
    return report


def _track(cfg, n):
    return cfg.track_loss and n <= EXACT_LOSS_MAX_N


def optimize(embedding, fg, config, log_radius_p=None, callback=None):
    """Run the full epoch budget; returns the list of epoch reports."""
    state = OptimizerState(embedding, config, log_radius_p=log_radius_p)
    for _ in range(config.epochs):
        report = run_epoch(state, fg)
        if callback is not None:
            callback(report)
    return state.history


def pairwise_sq_dists(Y):
    diff = Y[:, None, :] - Y[None, :, :]
    return np.sum(diff * diff, axis=-1)


def exact_loss(embedding, fg, kp):
    """Fuzzy cross-entropy without the constant terms, over all ordered pairs.

    Quadratic in n; intended for diagnostics only.
    """
    Y = as_array(embedding)
    n = Y.shape[0]
    if n > EXACT_LOSS_MAX_N:
        raise ParameterError(f"exact_loss is O(n^2); refusing n={n} > {EXACT_LOSS_MAX_N}")
    P = fg.p.toarray()
    Q = q_from_sq_dist(pairwise_sq_dists(Y), kp.a, kp.b)
    off = ~np.eye(n, dtype=bool)
    attract = np.zeros_like(Q)
    pos = (P > 0) & off
    attract[pos] = P[pos] * np.log(Q[pos])
    repel = (1.0 - P) * np.log(np.maximum(1.0 - Q, ONE_MINUS_Q_FLOOR))
    return float(-(attract[off].sum() + repel[off].sum()))


def effective_repulsive_weight(d_i, d_j, m, n):
    """Expected repulsive weight of a pair when negatives are also updated."""
    if n <= 0:
        raise ParameterError("n must be positive")
    return (d_i + d_j) * m / (2.0 * n)


def expected_gradient_weights(fg, m):
    """Per-ordered-pair expected weights of the sampled updates.

    Returns ``(attractive, repulsive)``: ``attractive`` is the sparse p
    matrix itself and ``repulsive[i] = d_i m / (2n)`` is the weight of every
    repulsive pair anchored at i.  Each unordered interaction is visited
    from both ends, so the per-epoch update frequency on y_i is twice
    these weights.
    """
    n = fg.n
    return fg.p.copy(), fg.degree * m / (2.0 * n)


@dataclass
class UpdateCounts:
    """Per-epoch mean and standard error of the sampled update indicators."""

    epochs: int
    attractive_mean: np.ndarray
    attractive_se: np.ndarray
    repulsive_mean: np.ndarray
    repulsive_se: np.ndarray
    anchor_repulsive_mean: np.ndarray
    anchor_repulsive_se: np.ndarray


def sample_update_counts(fg, m, seed, epochs, stream=STREAM_BATCH):
    """Replay the optimizer's firing and negative-sampling draws without geometry.

    ``attractive_mean[i, j]`` is the mean number of attractive updates per
    epoch that y_i receives from partner j; ``repulsive_mean[i, l]`` the
    mean number of repulsive updates with anchor i and negative l, and
    ``anchor_repulsive_mean[i]`` its sum over l.
    """
    indptr, indices, data = _csr_arrays(fg)
    n = fg.n
    sums = [np.zeros((n, n)) for _ in range(4)] + [np.zeros(n) for _ in range(2)]
    _count_pass(indptr, indices, data, n, int(m), np.uint64(_rng.normalize_seed(seed)),
                np.uint64(stream), int(epochs), *sums)
    att_sum, att_sq, rep_sum, rep_sq, tot_sum, tot_sq = sums

    def stats(s, sq):
        mean = s / epochs
        var = np.maximum(sq / epochs - mean * mean, 0.0) * epochs / max(epochs - 1, 1)
        return mean, np.sqrt(var / epochs)

    am, ase = stats(att_sum, att_sq)
    rm, rse = stats(rep_sum, rep_sq)
    tm, tse = stats(tot_sum, tot_sq)
    return UpdateCounts(epochs, am, ase, rm, rse, tm, tse)
