"""
The vertical minimal surface operator of Nil3(tau).

Strong (non-divergence) form::

    D(u) = (1 + (u2 - tau x1)^2) u11 - 2 (u1 + tau x2)(u2 - tau x1) u12
           + (1 + (u1 + tau x2)^2) u22

Divergence form: div(q / W) = 0 with the shifted gradient
``q = (u1 + tau x2, u2 - tau x1)`` and ``W = sqrt(1 + |q|^2)``.
The two are related by ``W^3 div(q/W) = D(u)``.

All functions are vectorized over leading axes.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Jet2(NamedTuple):
    """Value, gradient and Hessian of a function at base points."""

    u: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u11: np.ndarray
    u12: np.ndarray
    u22: np.ndarray

    @property
    def grad(self) -> np.ndarray:
        return np.stack([np.asarray(self.u1), np.asarray(self.u2)], axis=-1)


def shifted_gradient(grad, p, tau) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.empty(np.broadcast_shapes(grad.shape, p.shape))
    q[..., 0] = grad[..., 0] + tau * p[..., 1]
    q[..., 1] = grad[..., 1] - tau * p[..., 0]
    return q


def strong_residual(jet: Jet2, p, tau) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    x1, x2 = p[..., 0], p[..., 1]
    a = jet.u1 + tau * x2
    b = jet.u2 - tau * x1
    return (1.0 + b * b) * jet.u11 - 2.0 * a * b * jet.u12 + (1.0 + a * a) * jet.u22


def area_density(grad, p, tau) -> np.ndarray:
    """W_u >= 1."""
    q = shifted_gradient(grad, p, tau)
    return np.sqrt(1.0 + np.sum(q * q, axis=-1))


def flux(grad, p, tau) -> np.ndarray:
    """The divergence-form field q / W; its Euclidean norm is < 1."""
    q = shifted_gradient(grad, p, tau)
    w = np.sqrt(1.0 + np.sum(q * q, axis=-1))
    return q / w[..., None]


def flux_jacobian(grad, p, tau) -> np.ndarray:
    """d flux / d grad = (I - q q^T / W^2) / W, symmetric with eigenvalues 1/W^3 and 1/W."""
    q = shifted_gradient(grad, p, tau)
    w2 = 1.0 + np.sum(q * q, axis=-1)
    w = np.sqrt(w2)
    eye = np.eye(2)
    outer = q[..., :, None] * q[..., None, :]
    return (eye - outer / w2[..., None, None]) / w[..., None, None]
