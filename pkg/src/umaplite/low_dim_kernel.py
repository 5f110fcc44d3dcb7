"""Embedding-space similarity and the attractive/repulsive edge costs.

All functions broadcast over leading axes: ``yi`` and ``yj`` may be single
points of shape (p,) or stacks of shape (..., p).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

ONE_MINUS_Q_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelParams:
    a: float = 1.929
    b: float = 0.7915
    eps: float = 0.001

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.eps > 0):
            raise ParameterError(
                f"kernel needs a, b, eps > 0; got a={self.a}, b={self.b}, eps={self.eps}"
            )

    @classmethod
    def from_config(cls, config):
        return cls(config.a, config.b, config.eps)


def _sq_dist(yi, yj):
    diff = np.asarray(yi, dtype=np.float64) - np.asarray(yj, dtype=np.float64)
    return diff, np.sum(diff * diff, axis=-1)


def _pow_b(d2, b):
    # ||d||^(2b) = exp(b ln ||d||^2), with the zero-distance branch short-circuited
    d2 = np.asarray(d2, dtype=np.float64)
    out = np.zeros_like(d2)
    pos = d2 > 0
    out[pos] = np.exp(b * np.log(d2[pos]))
    return out


def q_from_sq_dist(d2, a, b):
    return 1.0 / (1.0 + a * _pow_b(d2, b))


def q(yi, yj, kp):
    """Low-dimensional similarity ``(1 + a ||yi - yj||^(2b))^-1``."""
    _, d2 = _sq_dist(yi, yj)
    return _scalar(q_from_sq_dist(d2, kp.a, kp.b))


def cost_attractive(yi, yj, kp):
    """``-ln q``."""
    return _scalar(-np.log(q(yi, yj, kp)))


def cost_repulsive(yi, yj, kp):
    """``-ln(1 - q)`` with ``1 - q`` floored at 1e-12."""
    one_minus = np.maximum(1.0 - np.asarray(q(yi, yj, kp)), ONE_MINUS_Q_FLOOR)
    return _scalar(-np.log(one_minus))


def attractive_coeff(d2, a, b):
    """Scalar factor c with grad_attractive = c * (yi - yj); zero at d2 = 0."""
    d2 = np.asarray(d2, dtype=np.float64)
    out = np.zeros_like(d2)
    pos = d2 > 0
    d2p = d2[pos]
    out[pos] = 2.0 * a * b * np.exp((b - 1.0) * np.log(d2p)) / (1.0 + a * np.exp(b * np.log(d2p)))
    return out


def repulsive_coeff(d2, a, b, eps):
    """Scalar factor c with grad_repulsive = c * (yi - yj); zero at d2 = 0."""
    d2 = np.asarray(d2, dtype=np.float64)
    out = np.zeros_like(d2)
    pos = d2 > 0
    d2p = d2[pos]
    out[pos] = -2.0 * b / ((eps + d2p) * (1.0 + a * np.exp(b * np.log(d2p))))
    return out


def grad_attractive(yi, yj, kp):
    """Gradient of ``-ln q`` with respect to ``yi``.

    The gradient with respect to ``yj`` is the negation.  Coincident
    points get a zero gradient.
    """
    diff, d2 = _sq_dist(yi, yj)
    return attractive_coeff(d2, kp.a, kp.b)[..., None] * diff


def grad_repulsive(yi, yj, kp, eps=None):
    """Gradient of ``-ln(1 - q)`` with respect to ``yi``, stabilized by eps.

    ``eps`` overrides ``kp.eps``; pass ``eps=0`` for the exact derivative.
    """
    eps = kp.eps if eps is None else eps
    diff, d2 = _sq_dist(yi, yj)
    return repulsive_coeff(d2, kp.a, kp.b, eps)[..., None] * diff


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x
