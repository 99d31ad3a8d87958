"""Discrete isometry invariance and the tau-scaling law on the unit square.

Both checks compare two independent solves whose continuous solutions
coincide, so their difference is pure discretization error. The tolerance
is calibrated on the FMP member with a = 1, whose exact solution is known.
"""
from __future__ import annotations

import numpy as np

from ..domain import BoundaryData, Domain2D
from ..exact import FmpSol
from ..fem import ScalarField, SolverOptions, newton_solve
from ..geometry import IsometryNil, as_tau, transform_graph
from ..mesh import triangulate
from .bounded import InvariantViolation

UNIT_SQUARE = (0.0, 0.0, 1.0, 1.0)


def unit_square_probe(n: int = 9, margin: float = 0.1) -> np.ndarray:
    t = np.linspace(margin, 1.0 - margin, n)
    return np.stack(np.meshgrid(t, t), axis=-1).reshape(-1, 2)


def _solve(dom: Domain2D, f, tau, h: float, opts: SolverOptions | None) -> ScalarField:
    u, rep = newton_solve(triangulate(dom, h), BoundaryData.from_function(dom, f), tau, opts)
    if not rep.converged:
        raise InvariantViolation(f"symmetry solve did not converge: {rep.message}")
    return u


def fmp_constant(h: float, tau=0.5, a: float = 1.0, opts: SolverOptions | None = None) -> float:
    """C = max nodal error / h^2 for the FMP member on the unit square."""
    dom = Domain2D.rectangle(*UNIT_SQUARE)
    exact = FmpSol(a, tau)
    u = _solve(dom, exact, tau, h, opts)
    return float(np.max(np.abs(u.values - exact(u.mesh.vertices)))) / h**2


def isometry_defect(phi, iso: IsometryNil, tau, h: float, probe=None, opts: SolverOptions | None = None) -> float:
    """max over probe points p of |u~(psi(p)) - (transported u)(psi(p))|.

    u solves the Dirichlet problem on the unit square with data ``phi``;
    u~ solves it on the image square with the transported data. Both are
    meshed independently at the same h.
    """
    tau = as_tau(tau)
    dom = Domain2D.rectangle(*UNIT_SQUARE)
    probe = unit_square_probe() if probe is None else np.asarray(probe, dtype=float)
    u = _solve(dom, phi, tau, h, opts)
    phi_t, dom_t = transform_graph(iso, tau, phi, dom)
    u_t = _solve(dom_t, phi_t, tau, h, opts)
    sign = -1.0 if iso.mirrored else 1.0
    pulled = sign * u(probe) + iso.height_shift(tau, probe)
    return float(np.max(np.abs(u_t(iso.plane_map(probe)) - pulled)))


def scaling_defect(phi, tau_target, h: float, probe=None, opts: SolverOptions | None = None) -> float:
    """max over probe points of |v - w| in the tau = 1/2 frame.

    u solves the tau = 1/2 problem on the unit square with data ``phi``;
    v(y) = u(2 tau y) / (2 tau) is its rescaling. w solves the tau problem
    on the square of side 1/(2 tau) with data phi(2 tau y)/(2 tau) at mesh
    size h/(2 tau). The difference is multiplied by 2 tau so that it is
    measured on the scale of u.
    """
    tau = as_tau(tau_target)
    if tau == 0.0:
        raise ValueError("rescaling to tau = 0 is degenerate")
    lam = 2.0 * tau
    probe = unit_square_probe() if probe is None else np.asarray(probe, dtype=float)
    u = _solve(Domain2D.rectangle(*UNIT_SQUARE), phi, 0.5, h, opts)
    small = Domain2D.rectangle(0.0, 0.0, 1.0 / lam, 1.0 / lam)
    w = _solve(small, lambda y: np.asarray(phi(lam * np.asarray(y)), dtype=float) / lam, tau, h / lam, opts)
    return float(np.max(np.abs(lam * w(probe / lam) - u(probe))))
