"""
Ambient geometry of the Heisenberg space Nil3(tau).

Points are written in the global coordinate model (x1, x2, x3) with metric

    ds^2 = dx1^2 + dx2^2 + (tau*(x2 dx1 - x1 dx2) + dx3)^2 .

The left-invariant frame is only provided for verification purposes; every
other part of the package works in coordinates.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


def as_tau(tau) -> float:
    """Validate the ambient parameter (tau >= 0 and finite) and return it as float."""
    tau = float(tau)
    if not math.isfinite(tau) or tau < 0.0:
        raise ValueError(f"tau must be finite and non-negative, got {tau!r}")
    return tau


def metric_at(tau, p) -> np.ndarray:
    """Coordinate metric matrix of Nil3(tau) above the planar point ``p``.

    The metric does not depend on x3. Equals ``diag(1, 1, 0) + v v^T`` with
    ``v = (tau*x2, -tau*x1, 1)``.
    """
    tau = as_tau(tau)
    x1, x2 = float(p[0]), float(p[1])
    v = np.array([tau * x2, -tau * x1, 1.0])
    return np.diag([1.0, 1.0, 0.0]) + np.outer(v, v)


def frame_at(tau, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Left-invariant orthonormal frame (E1, E2, E3) in coordinates."""
    tau = as_tau(tau)
    x1, x2 = float(p[0]), float(p[1])
    e1 = np.array([1.0, 0.0, -tau * x2])
    e2 = np.array([0.0, 1.0, tau * x1])
    e3 = np.array([0.0, 0.0, 1.0])
    return e1, e2, e3


@dataclass(frozen=True)
class IsometryNil:
    """Isometry of Nil3(tau) in complex form.

    ``kind="direct"``:   (z, x3) -> (e^{i theta} z + z0, x3 + tau Im(conj(z0) e^{i theta} z))
    ``kind="mirrored"``: (z, x3) -> (e^{i theta} conj(z) + z0, -x3 + tau Im(conj(z0) e^{i theta} conj(z)))
    """

    kind: str = "direct"
    theta: float = 0.0
    z0: complex = 0j

    def __post_init__(self):
        if self.kind not in ("direct", "mirrored"):
            raise ValueError(f"unknown isometry kind {self.kind!r}")
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "z0", complex(self.z0))

    @property
    def mirrored(self) -> bool:
        return self.kind == "mirrored"

    def _rot(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def linear_part(self) -> np.ndarray:
        """2x2 matrix of the planar trace (without translation)."""
        rot = self._rot()
        if self.mirrored:
            return rot @ np.diag([1.0, -1.0])
        return rot

    def plane_map(self, p) -> np.ndarray:
        """Planar trace psi applied to points of shape (..., 2)."""
        p = np.asarray(p, dtype=float)
        return p @ self.linear_part().T + np.array([self.z0.real, self.z0.imag])

    def plane_inverse(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        shifted = p - np.array([self.z0.real, self.z0.imag])
        # linear part is orthogonal
        return shifted @ self.linear_part()

    def height_shift(self, tau, p) -> np.ndarray:
        """The term tau*Im(conj(z0) e^{i theta} w) with w = z or conj(z) at source points."""
        p = np.asarray(p, dtype=float)
        w = p[..., 0] + 1j * p[..., 1]
        if self.mirrored:
            w = np.conj(w)
        return as_tau(tau) * np.imag(np.conj(self.z0) * cmath.exp(1j * self.theta) * w)

    def apply(self, tau, pts3) -> np.ndarray:
        """Apply the isometry to 3D points of shape (..., 3)."""
        pts3 = np.asarray(pts3, dtype=float)
        out = np.empty_like(pts3)
        out[..., :2] = self.plane_map(pts3[..., :2])
        sign = -1.0 if self.mirrored else 1.0
        out[..., 2] = sign * pts3[..., 2] + self.height_shift(tau, pts3[..., :2])
        return out

    def inverse(self) -> "IsometryNil":
        e = cmath.exp(1j * self.theta)
        if self.mirrored:
            return IsometryNil("mirrored", self.theta, -e * self.z0.conjugate())
        return IsometryNil("direct", -self.theta, -self.z0 / e)

    def graph_offset_gradient(self, tau) -> np.ndarray:
        """Gradient of the linear term added to a transported graph.

        In target coordinates the added term is tau*Im(conj(z0) * z_target) up to a
        constant, i.e. tau*(a*x2 - b*x1) for z0 = a + ib.
        """
        return as_tau(tau) * np.array([-self.z0.imag, self.z0.real])


class Graph:
    """A function u(x1, x2) whose graph lives in Nil3(tau).

    Subclasses implement ``__call__`` on point arrays of shape (..., 2) and,
    when derivatives are available in closed form, ``jet`` returning a
    :class:`nil3msq.msq.Jet2`.
    """

    def __call__(self, p):
        raise NotImplementedError

    def jet(self, p):
        raise NotImplementedError(f"{type(self).__name__} has no analytic jet")


class CallableGraph(Graph):
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, p):
        return self.fn(np.asarray(p, dtype=float))


def _as_graph(v) -> Graph:
    return v if isinstance(v, Graph) else CallableGraph(v)


class TransportedGraph(Graph):
    """Image of the graph of ``base`` under an isometry, as a graph over psi(domain)."""

    def __init__(self, base, iso: IsometryNil, tau):
        self.base = _as_graph(base)
        self.iso = iso
        self.tau = as_tau(tau)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        src = self.iso.plane_inverse(p)
        sign = -1.0 if self.iso.mirrored else 1.0
        return sign * self.base(src) + self.iso.height_shift(self.tau, src)

    def jet(self, p):
        from .msq import Jet2

        p = np.asarray(p, dtype=float)
        src = self.iso.plane_inverse(p)
        j = self.base.jet(src)
        sign = -1.0 if self.iso.mirrored else 1.0
        # source = A (target - z0) with A = L^T
        a = self.iso.linear_part().T
        g = np.stack([j.u1, j.u2], axis=-1)
        grad = sign * g @ a + self.iso.graph_offset_gradient(self.tau)
        hess = np.stack([np.stack([j.u11, j.u12], -1), np.stack([j.u12, j.u22], -1)], -2)
        h = sign * np.einsum("ki,...kl,lj->...ij", a, hess, a)
        return Jet2(self(p), grad[..., 0], grad[..., 1], h[..., 0, 0], h[..., 0, 1], h[..., 1, 1])


def transform_graph(iso: IsometryNil, tau, v, dom=None):
    """Transport the graph of ``v`` over ``dom`` by ``iso``.

    Returns ``(v_tilde, dom_tilde)`` where ``v_tilde`` is a :class:`Graph` on
    the image domain. ``dom`` may be ``None`` when only the function matters.
    """
    new_dom = None if dom is None else dom.transformed(iso)
    return TransportedGraph(v, iso, tau), new_dom


class RescaledGraph(Graph):
    """v(y) = u(2 tau y) / (2 tau): carries a tau=1/2 solution to a tau solution."""

    def __init__(self, base, tau_target):
        tau_target = as_tau(tau_target)
        if tau_target == 0.0:
            raise ValueError("rescaling to tau = 0 is degenerate")
        self.base = _as_graph(base)
        self.tau = tau_target
        self.lam = 2.0 * tau_target

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return self.base(self.lam * p) / self.lam

    def jet(self, p):
        from .msq import Jet2

        p = np.asarray(p, dtype=float)
        j = self.base.jet(self.lam * p)
        lam = self.lam
        return Jet2(j.u / lam, j.u1, j.u2, lam * j.u11, lam * j.u12, lam * j.u22)


def rescale_solution(u, tau_target) -> RescaledGraph:
    """Map a solution of the tau=1/2 equation to a solution for ``tau_target``."""
    return RescaledGraph(u, tau_target)
