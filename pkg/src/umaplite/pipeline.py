"""End-to-end orchestration of the three embedding modes."""

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import densmap, fuzzy_graph, knn_graph, metrics, parametric, progressive, spectral_init
from .config import RunConfig
from .dataio import DataMatrix, Embedding
from .errors import ParameterError, StageError, UmapError
from .low_dim_kernel import KernelParams
from .sgd_optimizer import EXACT_LOSS_MAX_N, EpochReport, exact_loss, optimize


@dataclass
class RunResult:
    embedding: Embedding
    reports: list
    quality: metrics.QualityReport
    config_echo: RunConfig
    net: parametric.EncoderNet | None = None
    extras: dict = field(default_factory=dict)


@contextmanager
def stage(name):
    """Re-raise any library or numerical error tagged with the stage name."""
    try:
        yield
    except StageError:
        raise
    except (UmapError, ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _loss_or_nan(coords, fg, kp, config):
    if config.track_loss and coords.shape[0] <= EXACT_LOSS_MAX_N:
        return exact_loss(coords, fg, kp)
    return float("nan")


def _run_batch(config, X, on_report):
    with stage("knn_graph"):
        graph = knn_graph.build(X, config.k)
    with stage("fuzzy_graph"):
        fg = fuzzy_graph.build_fuzzy(graph, X, config.k)
    with stage("spectral_init"):
        emb = spectral_init.spectral_embed(fg, config.dim, config.seed)
    kp = KernelParams.from_config(config)
    log_rp = None
    if config.densmap_lambda > 0:
        with stage("densmap"):
            log_rp = np.log(densmap.radii_p(fg, X))
    loss0 = _loss_or_nan(emb.coords, fg, kp, config)
    with stage("optimizer"):
        reports = optimize(emb, fg, config, log_radius_p=log_rp, callback=on_report)
    return emb, reports, loss0, {"fuzzy": fg}


def _run_progressive(config, X, on_report, on_batch):
    n = X.shape[0]
    bs = config.batch_size
    if bs <= config.k:
        raise StageError("progressive", ParameterError(
            f"batch size {bs} must exceed k={config.k} so the first batch has a full kNN graph"))
    kp = KernelParams.from_config(config)
    reports = []
    state = None
    epoch = 0
    for b, start in enumerate(range(0, n, bs)):
        with stage("progressive"):
            state = progressive.ingest_batch(state, X[start:start + bs], config)
        last = len(state.epoch_counts)
        for t, (n_att, n_rep) in enumerate(state.epoch_counts, start=1):
            epoch += 1
            # the O(n^2) loss is only evaluated once the batch has settled
            loss = _loss_or_nan(state.embedding.coords, state.fuzzy, kp, config) if t == last \
                else float("nan")
            rep = EpochReport(epoch, loss, int(n_att), int(n_rep))
            reports.append(rep)
            if on_report is not None:
                on_report(rep)
        if on_batch is not None:
            on_batch(b + 1, state.embedding)
    # no single pre-optimization embedding exists for a stream
    return state.embedding, reports, float("nan"), {"stream": state}


def _run_parametric(config, X, on_report, net=None):
    with stage("knn_graph"):
        graph = knn_graph.build(X, config.k)
    with stage("fuzzy_graph"):
        fg = fuzzy_graph.build_fuzzy(graph, X, config.k)
    kp = KernelParams.from_config(config)
    reports = []
    if net is not None:
        with stage("parametric"):
            emb = parametric.transform(net, X)
        return emb, reports, float("nan"), {"fuzzy": fg, "net": net}

    rng = np.random.default_rng(config.seed)
    trainer = parametric.ParametricTrainer(
        parametric.init_encoder(X.shape[1], config.hidden, config.dim, rng), config, rng)
    loss0 = _loss_or_nan(parametric.forward(trainer.net, X), fg, kp, config)
    for _ in range(config.epochs):
        with stage("parametric"):
            ep = parametric.train_epoch(trainer, X, fg)
        rep = EpochReport(
            epoch=ep.epoch,
            exact_loss=_loss_or_nan(parametric.forward(trainer.net, X), fg, kp, config),
            attractive_updates=ep.firing_pairs,
            repulsive_updates=ep.firing_pairs * config.m,
        )
        reports.append(rep)
        if on_report is not None:
            on_report(rep)
    emb = parametric.transform(trainer.net, X)
    return emb, reports, loss0, {"fuzzy": fg, "net": trainer.net}


def run(config, data, labels=None, on_report=None, on_batch=None, net=None):
    """Run the configured mode end to end.

    ``on_report`` receives each EpochReport as it is produced;
    ``on_batch(index, embedding)`` is called after every streamed batch.
    ``net`` (parametric mode) skips training and embeds with a given encoder.
    """
    with stage("config"):
        config.validate()
        if not isinstance(data, DataMatrix):
            data = DataMatrix(data)
        config.check_data(data.n, data.d)
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape[0] != data.n:
                raise ParameterError(f"{labels.shape[0]} labels for {data.n} points")
        if net is not None and config.mode != "parametric":
            raise ParameterError("a pretrained encoder is only used in parametric mode")
    X = data.values

    if config.mode == "batch":
        emb, reports, loss0, extras = _run_batch(config, X, on_report)
    elif config.mode == "progressive":
        emb, reports, loss0, extras = _run_progressive(config, X, on_report, on_batch)
    else:
        emb, reports, loss0, extras = _run_parametric(config, X, on_report, net=net)

    with stage("metrics"):
        k = min(config.k, data.n - 1)
        quality = metrics.QualityReport(
            knn_preservation=metrics.knn_preservation(X, emb, k),
            label_agreement=None if labels is None else metrics.label_agreement(emb, labels, k),
            loss_initial=loss0,
            loss_final=reports[-1].exact_loss if reports else float("nan"),
        )
    return RunResult(emb, reports, quality, config, net=extras.pop("net", None), extras=extras)
