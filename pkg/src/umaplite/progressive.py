"""Streaming and out-of-sample embedding.

Each ingested batch updates the exact kNN graph, re-calibrates every point
whose neighbor list changed, seeds new points at the embedding of their
nearest previously seen point plus Gaussian noise, and then runs a
localized SGD over the new and updated points only.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import fuzzy_graph, knn_graph, spectral_init
from .dataio import Embedding, as_array
from .errors import DimensionError, ParameterError
from .fuzzy_graph import FuzzyGraph
from .low_dim_kernel import KernelParams
from .sgd_optimizer import STREAM_PROGRESSIVE, sgd_pass


@dataclass
class StreamState:
    accumulated: np.ndarray
    graph: knn_graph.NeighborGraph
    fuzzy: FuzzyGraph
    embedding: Embedding
    batch_counter: int = 0
    last_updated: np.ndarray | None = None
    epoch_counts: list | None = None  # (attractive, repulsive) per local epoch of the last batch

    @property
    def n(self):
        return self.accumulated.shape[0]

    def copy(self):
        fz = self.fuzzy
        fuzzy = FuzzyGraph(
            rho=fz.rho.copy(), sigma=fz.sigma.copy(), p=fz.p.copy(), degree=fz.degree.copy(),
            saturated=fz.saturated.copy(), residual=fz.residual.copy(),
            directional=fz.directional.copy(),
        )
        return replace(
            self,
            accumulated=self.accumulated.copy(),
            graph=self.graph.copy(),
            fuzzy=fuzzy,
            embedding=Embedding(self.embedding.coords.copy()),
        )


def _batch_rng(config, batch_counter):
    return np.random.default_rng([config.seed & 0xFFFFFFFF, batch_counter])


def nearest_neighbor_init(accumulated, coords, batch, noise, rng):
    """Initial coordinates for new points: nearest seen point plus N(0, noise^2)."""
    nn, _ = knn_graph.exact_knn(accumulated, 1, query=batch)
    base = coords[nn[:, 0]]
    return base + noise * rng.standard_normal(base.shape)


def _recalibrate(fz, graph, rows):
    """Recompute rho, sigma and directional memberships for ``rows`` only."""
    n = graph.n
    rho = np.empty(n)
    sigma = np.empty(n)
    saturated = np.zeros(n, dtype=bool)
    residual = np.zeros(n)
    directional = np.empty((n, graph.k))
    n_old = fz.rho.shape[0]
    rho[:n_old] = fz.rho
    sigma[:n_old] = fz.sigma
    saturated[:n_old] = fz.saturated
    residual[:n_old] = fz.residual
    directional[:n_old] = fz.directional
    if rows.size:
        lo, hi = fuzzy_graph.default_bracket(graph.distances)
        rho[rows] = graph.distances[rows].min(axis=1)
        s, res, sat = fuzzy_graph.calibrate_all(graph.distances[rows], rho[rows], graph.k, lo, hi)
        sigma[rows] = s
        residual[rows] = res
        saturated[rows] = sat
        directional[rows] = fuzzy_graph.directional_rows(graph, rho, sigma, rows)
    P = fuzzy_graph.assemble(graph, directional)
    return FuzzyGraph(
        rho=rho, sigma=sigma, p=P, degree=np.asarray(P.sum(axis=1)).ravel(),
        saturated=saturated, residual=residual, directional=directional,
    )


def _optimize_local(state, anchors, config, movable):
    kp = KernelParams.from_config(config)
    coords = state.embedding.coords
    counts = []
    for epoch in range(1, config.stream_epochs + 1):
        a, r = sgd_pass(
            coords, state.fuzzy, anchors, eta=config.stream_lr, kp=kp, m=config.m,
            seed=config.seed, stream=STREAM_PROGRESSIVE + state.batch_counter, epoch=epoch,
            move_positive=config.stream_update_positives, update_negatives=False,
            clip=config.grad_clip, movable=movable,
        )
        counts.append((a, r))
    state.epoch_counts = counts


def start_stream(batch, config):
    """Initialize a stream from its first batch (spectral initialization)."""
    config.validate()
    X = as_array(batch)
    if X.ndim != 2 or X.shape[0] <= config.k:
        raise ParameterError(
            f"first batch needs more than k={config.k} points, got {X.shape[0] if X.ndim == 2 else 0}"
        )
    graph = knn_graph.build(X, config.k)
    fz = fuzzy_graph.build_fuzzy(graph, X, config.k)
    emb = spectral_init.spectral_embed(fz, config.dim, config.seed)
    state = StreamState(X.copy(), graph, fz, emb, batch_counter=1,
                        last_updated=np.arange(X.shape[0]))
    _optimize_local(state, state.last_updated, config, np.ones(X.shape[0], dtype=bool))
    return state


def _extend(state, batch, config, frozen_existing):
    X_new = as_array(batch)
    if X_new.ndim != 2 or (X_new.shape[0] and X_new.shape[1] != state.accumulated.shape[1]):
        raise DimensionError(
            f"batch dimension {X_new.shape} does not match d={state.accumulated.shape[1]}"
        )
    n_old = state.n
    graph, updated = knn_graph.insert_batch(state.graph, state.accumulated, X_new)
    rng = _batch_rng(config, state.batch_counter)
    init = nearest_neighbor_init(state.accumulated, state.embedding.coords, X_new,
                                 config.init_noise, rng)
    state.accumulated = np.vstack([state.accumulated, X_new])
    state.graph = graph
    state.fuzzy = _recalibrate(state.fuzzy, graph, updated)
    state.embedding = Embedding(np.vstack([state.embedding.coords, init]))
    state.last_updated = updated
    movable = np.ones(state.n, dtype=bool)
    anchors = updated
    if frozen_existing:
        movable[:n_old] = False
        anchors = np.arange(n_old, state.n)
    _optimize_local(state, anchors, config, movable)
    state.batch_counter += 1
    return state


def ingest_batch(state, batch, config):
    """Add a batch to the stream; returns the updated state.

    ``state`` may be None for the first batch.  The input state is not
    modified.
    """
    if state is None:
        return start_stream(batch, config)
    config.validate()
    return _extend(state.copy(), batch, config, frozen_existing=False)


def embed_out_of_sample(state, points, config):
    """Embed unseen points against a trained stream without moving it.

    Returns an Embedding holding the coordinates of ``points`` only.
    """
    config.validate()
    X = as_array(points)
    if X.size == 0:
        return Embedding(np.empty((0, state.embedding.p)))
    out = _extend(state.copy(), X, config, frozen_existing=True)
    return Embedding(out.embedding.coords[state.n:].copy())
