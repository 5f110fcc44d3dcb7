"""One-hidden-layer encoder trained on the sampled UMAP loss.

The network is ``y = relu(x W1 + b1) W2 + b2``.  Each epoch walks over
contiguous mini-batches; inside a batch, ordered pairs fire with
probability p_ij (global memberships), contribute ``-ln q_ij``, and draw m
in-batch negatives contributing ``-ln(1 - q_il)``.  The summed batch loss
is backpropagated by hand and the weights take a momentum step.
"""

from dataclasses import dataclass

import numpy as np

from .dataio import Embedding, as_array
from .errors import DimensionError, NumericalDivergenceError, ParameterError
from .low_dim_kernel import (
    ONE_MINUS_Q_FLOOR,
    KernelParams,
    attractive_coeff,
    q_from_sq_dist,
    repulsive_coeff,
)

FORMAT_TAG = "umaplite-encoder"
FORMAT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass
class EncoderNet:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self):
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    @property
    def n_params(self):
        d, h, p = self.dims
        return d * h + h + h * p + p

    def params(self):
        return [getattr(self, name) for name in PARAM_NAMES]

    def copy(self):
        return EncoderNet(*(w.copy() for w in self.params()))


def init_encoder(d, h, p, rng):
    """Glorot-uniform weights, zero biases."""
    lim1 = np.sqrt(6.0 / (d + h))
    lim2 = np.sqrt(6.0 / (h + p))
    return EncoderNet(
        W1=rng.uniform(-lim1, lim1, size=(d, h)),
        b1=np.zeros(h),
        W2=rng.uniform(-lim2, lim2, size=(h, p)),
        b2=np.zeros(p),
    )


def forward(net, x):
    """Embed one input vector (d,) or a batch (b, d)."""
    x = np.asarray(x, dtype=np.float64)
    d = net.dims[0]
    if x.shape[-1] != d:
        raise ParameterError(f"input has dimension {x.shape[-1]}, network expects {d}")
    return np.maximum(x @ net.W1 + net.b1, 0.0) @ net.W2 + net.b2


def make_batches(n, b):
    """Contiguous index slices; a trailing remainder smaller than b is dropped."""
    if not 1 <= b <= n:
        raise ParameterError(f"batch size must lie in [1, n={n}], got {b}")
    return [np.arange(s * b, (s + 1) * b) for s in range(n // b)]


def sample_batch_pairs(P_batch, m, rng):
    """Firing pairs and their in-batch negatives for one mini-batch.

    Returns ``(pairs, negatives)`` with shapes (F, 2) and (F, m), in batch
    coordinates.
    """
    b = P_batch.shape[0]
    u = 1.0 - rng.random((b, b))  # (0, 1]: zero weights never fire
    fire = u <= P_batch
    pairs = np.argwhere(fire)
    negatives = rng.integers(0, b, size=(pairs.shape[0], m))
    return pairs, negatives


def batch_loss_and_grad(net, Xb, pairs, negatives, kp):
    """Summed attractive + repulsive loss of a batch and its parameter gradients."""
    Z1 = Xb @ net.W1 + net.b1
    H = np.maximum(Z1, 0.0)
    Y = H @ net.W2 + net.b2
    gY = np.zeros_like(Y)
    loss = 0.0

    if pairs.shape[0]:
        i, j = pairs[:, 0], pairs[:, 1]
        diff = Y[i] - Y[j]
        d2 = np.sum(diff * diff, axis=1)
        loss += float(-np.log(q_from_sq_dist(d2, kp.a, kp.b)).sum())
        g = attractive_coeff(d2, kp.a, kp.b)[:, None] * diff
        np.add.at(gY, i, g)
        np.add.at(gY, j, -g)

        if negatives.size:
            ii = np.repeat(i, negatives.shape[1])
            ll = negatives.ravel()
            diff = Y[ii] - Y[ll]
            d2 = np.sum(diff * diff, axis=1)
            qv = q_from_sq_dist(d2, kp.a, kp.b)
            one_minus = 1.0 - qv
            loss += float(-np.log(np.maximum(one_minus, ONE_MINUS_Q_FLOOR)).sum())
            # exact derivative of the loss as evaluated: no eps, flat where the floor is active
            coeff = repulsive_coeff(d2, kp.a, kp.b, 0.0)
            coeff[one_minus < ONE_MINUS_Q_FLOOR] = 0.0
            g = coeff[:, None] * diff
            np.add.at(gY, ii, g)
            np.add.at(gY, ll, -g)

    grads = EncoderNet(
        W1=np.zeros_like(net.W1), b1=np.zeros_like(net.b1),
        W2=H.T @ gY, b2=gY.sum(axis=0),
    )
    gZ1 = (gY @ net.W2.T) * (Z1 > 0)
    grads.W1 = Xb.T @ gZ1
    grads.b1 = gZ1.sum(axis=0)
    return loss, grads


@dataclass
class EpochLoss:
    epoch: int
    mean_batch_loss: float
    batches: int
    firing_pairs: int


@dataclass
class ParametricTrainer:
    """Training state: network, momentum buffers and the sampling generator."""

    net: EncoderNet
    config: object
    rng: np.random.Generator
    velocity: EncoderNet = None
    epoch: int = 0

    def __post_init__(self):
        if self.velocity is None:
            self.velocity = EncoderNet(*(np.zeros_like(w) for w in self.net.params()))


def train_epoch(trainer, data, fg):
    """One pass over all mini-batches; returns the epoch's loss summary."""
    X = as_array(data)
    cfg = trainer.config
    kp = KernelParams.from_config(cfg)
    net = trainer.net
    if X.shape[1] != net.dims[0]:
        raise DimensionError(f"data has d={X.shape[1]}, network expects {net.dims[0]}")
    P = fg.p.tocsr()
    trainer.epoch += 1
    losses = []
    fired = 0
    for idx in make_batches(X.shape[0], cfg.param_batch):
        Pb = P[idx][:, idx].toarray()
        pairs, negatives = sample_batch_pairs(Pb, cfg.m, trainer.rng)
        loss, grads = batch_loss_and_grad(net, X[idx], pairs, negatives, kp)
        fired += pairs.shape[0]
        losses.append(loss)
        for name in PARAM_NAMES:
            v = getattr(trainer.velocity, name)
            v *= cfg.momentum
            v -= cfg.lr * getattr(grads, name)
            getattr(net, name)[...] += v
        if not all(np.all(np.isfinite(w)) for w in net.params()):
            raise NumericalDivergenceError(
                f"non-finite encoder weights at epoch {trainer.epoch}", epoch=trainer.epoch
            )
    return EpochLoss(trainer.epoch, float(np.mean(losses)), len(losses), fired)


def fit_parametric(data, fg, config, callback=None):
    """Train an encoder for ``config.epochs`` epochs; returns (net, epoch losses)."""
    X = as_array(data)
    rng = np.random.default_rng(config.seed)
    net = init_encoder(X.shape[1], config.hidden, config.dim, rng)
    trainer = ParametricTrainer(net, config, rng)
    history = []
    for _ in range(config.epochs):
        rep = train_epoch(trainer, X, fg)
        history.append(rep)
        if callback is not None:
            callback(rep)
    return net, history


def transform(net, data):
    return Embedding(forward(net, as_array(data)))


def _fmt(x):
    return repr(float(x))


def save_encoder(net, path):
    """Flat text format: tag/version line, dims line, then one row per matrix row."""
    d, h, p = net.dims
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"{d} {h} {p}"]
    for w in net.params():
        for row in np.atleast_2d(w):
            lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_encoder(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].split()[0] != FORMAT_TAG:
        raise ParameterError(f"{path} is not an encoder file")
    version = int(lines[0].split()[1])
    if version != FORMAT_VERSION:
        raise ParameterError(f"unsupported encoder format version {version}")
    d, h, p = (int(v) for v in lines[1].split())
    rows = [np.array([float(v) for v in ln.split()]) for ln in lines[2:]]
    if len(rows) != d + 1 + h + 1:
        raise ParameterError(f"{path}: expected {d + h + 2} weight rows, found {len(rows)}")
    W1 = np.vstack(rows[:d])
    b1 = rows[d]
    W2 = np.vstack(rows[d + 1:d + 1 + h])
    b2 = rows[d + 1 + h]
    net = EncoderNet(W1, b1, W2, b2)
    if W1.shape != (d, h) or b1.shape != (h,) or W2.shape != (h, p) or b2.shape != (p,):
        raise ParameterError(f"{path}: weight shapes do not match header {d} {h} {p}")
    return net
