"""
Closed-form and ODE/quadrature-defined minimal graphs.

These families serve as exact oracles for the discrete solver and as
comparison surfaces in the experiment drivers:

* planes ``a x1 + b x2 + c``
* the one-parameter-group invariant family ``u_a`` (``a = 0`` gives ``tau x1 x2``)
* the rotational (vertical) catenoid over an exterior disk, tau = 1/2
* graphs ``x1 g(x2)`` obtained by integrating an ODE for ``g``
* planar shadows ``|x1| <= alpha cosh(x2/alpha)`` of horizontal catenoids
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev
from scipy import integrate, optimize

from .geometry import Graph, as_tau
from .msq import Jet2


class OutOfDomainError(ValueError):
    pass


class DanielBlowUp(RuntimeError):
    """Raised when the ODE integration for g collapses its step size."""


class NoRootError(ValueError):
    pass


def _split(p):
    p = np.asarray(p, dtype=float)
    return p, p[..., 0], p[..., 1]


@dataclass(frozen=True)
class PlaneSol(Graph):
    a: float
    b: float
    c: float = 0.0

    def __call__(self, p):
        _, x1, x2 = _split(p)
        return self.a * x1 + self.b * x2 + self.c

    def jet(self, p):
        _, x1, _ = _split(p)
        z = np.zeros_like(x1)
        return Jet2(self(p), z + self.a, z + self.b, z, z, z)


@dataclass(frozen=True)
class FmpSol(Graph):
    """u_a = tau x1 x2 + a [2 tau x2 sqrt(1 + 4 tau^2 x2^2) + asinh(2 tau x2)]."""

    a: float
    tau: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "tau", as_tau(self.tau))

    def __call__(self, p):
        _, x1, x2 = _split(p)
        s = 2.0 * self.tau * x2
        return self.tau * x1 * x2 + self.a * (s * np.sqrt(1.0 + s * s) + np.arcsinh(s))

    def jet(self, p):
        _, x1, x2 = _split(p)
        t = self.tau
        root = np.sqrt(1.0 + 4.0 * t * t * x2 * x2)
        u1 = t * x2
        u2 = t * x1 + 4.0 * self.a * t * root
        u22 = 16.0 * self.a * t**3 * x2 / root
        return Jet2(self(p), u1, u2, np.zeros_like(x1), np.full_like(x1, t), u22)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _catenoid_integrand_t(t, r0):
    c = np.cosh(t)
    return 0.5 * r0 * np.sqrt(r0 * r0 * c * c + 4.0)


@dataclass(frozen=True)
class VerticalCatenoidProfile:
    """Profile h(r), r >= r0, of the rotational catenoid of Nil3(1/2)."""

    r0: float

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("waist radius must be positive")

    def slope(self, r):
        r = np.asarray(r, dtype=float)
        return self.r0 * np.sqrt(r * r + 4.0) / (2.0 * np.sqrt(r * r - self.r0**2))

    def curvature(self, r):
        r = np.asarray(r, dtype=float)
        r0 = self.r0
        return -(r0 * r / 2.0) * (r0 * r0 + 4.0) / (np.sqrt(r * r + 4.0) * (r * r - r0 * r0) ** 1.5)


def catenoid_height(profile: VerticalCatenoidProfile, r, panel: float = 0.05):
    """h(r) = int_{r0}^{r} r0 sqrt(s^2+4) / (2 sqrt(s^2 - r0^2)) ds.

    The substitution s = r0 cosh(t) removes the endpoint singularity and leaves
    a smooth integrand on [0, acosh(r/r0)], which is integrated by composite
    12-point Gauss-Legendre on panels of width at most ``panel``. All
    requested radii share one cumulative sum.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < profile.r0) or not np.all(np.isfinite(r_arr)):
        raise OutOfDomainError(f"catenoid profile is defined for finite r >= r0 = {profile.r0}")
    t = np.arccosh(r_arr / profile.r0)
    tmax = float(t.max(initial=0.0))
    grid = np.linspace(0.0, tmax, max(1, int(math.ceil(tmax / panel))) + 1)
    knots, inverse = np.unique(np.concatenate([grid, t.ravel()]), return_inverse=True)
    lo, hi = knots[:-1], knots[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    vals = _catenoid_integrand_t(mid[:, None] + half[:, None] * _GL_X[None, :], profile.r0)
    cum = np.concatenate([[0.0], np.cumsum(half * (vals @ _GL_W))])
    out = cum[inverse[len(grid):]].reshape(r_arr.shape)
    return out if out.ndim else float(out)


class CatenoidGraph(Graph):
    """The rotational graph u(x) = h(|x|) over the exterior domain |x| >= r0 (tau = 1/2)."""

    def __init__(self, profile: VerticalCatenoidProfile):
        self.profile = profile

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        r = np.hypot(p[..., 0], p[..., 1])
        # boundary nodes of polygonal annuli can sit a hair inside r0
        r = np.where((r < self.profile.r0) & (r > self.profile.r0 * (1 - 1e-12)), self.profile.r0, r)
        return catenoid_height(self.profile, r)

    def jet(self, p):
        p = np.asarray(p, dtype=float)
        x1, x2 = p[..., 0], p[..., 1]
        r = np.hypot(x1, x2)
        if np.any(r <= self.profile.r0):
            raise OutOfDomainError("jet requires r > r0")
        hp = self.profile.slope(r)
        hpp = self.profile.curvature(r)
        n1, n2 = x1 / r, x2 / r
        u11 = hpp * n1 * n1 + hp / r * (1 - n1 * n1)
        u22 = hpp * n2 * n2 + hp / r * (1 - n2 * n2)
        u12 = (hpp - hp / r) * n1 * n2
        return Jet2(self(p), hp * n1, hp * n2, u11, u12, u22)


@dataclass(frozen=True)
class HorizontalCatenoidShadow:
    """Planar projection {|x1| <= alpha cosh(x2/alpha)} of a horizontal catenoid."""

    alpha: float

    def halfwidth(self, x2):
        return self.alpha * np.cosh(np.asarray(x2, dtype=float) / self.alpha)

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.abs(p[..., 0]) <= self.halfwidth(p[..., 1])


def shadow_halfwidth(shadow: HorizontalCatenoidShadow, x2):
    return shadow.halfwidth(x2)


def _waist_gap(mu, B, eps):
    # mu (cosh(B/mu) - 1) - eps/4, written with sinh to avoid cancellation
    x = B / (2.0 * mu)
    if x > 350.0:
        return math.inf
    return 2.0 * mu * math.sinh(x) ** 2 - eps / 4.0


def waist_residual(mu: float, B: float, eps: float) -> float:
    return abs(mu + eps / 4.0 - mu * math.cosh(B / mu))


def solve_waist_equation(B: float, eps: float, bracket: tuple[float, float] | None = None) -> float:
    """Return mu > 0 with mu + eps/4 = mu cosh(B/mu).

    mu (cosh(B/mu) - 1) decreases from +inf to 0 on (0, inf), so the root is
    unique. When ``bracket`` is given the search is restricted to it and a
    :class:`NoRootError` is raised if the bracket does not enclose the root.
    """
    B, eps = float(B), float(eps)
    if not (B > 0 and eps > 0 and math.isfinite(B) and math.isfinite(eps)):
        raise ValueError("B and eps must be positive and finite")
    if bracket is None:
        lo = hi = B
        while _waist_gap(lo, B, eps) <= 0:
            lo *= 0.5
        while _waist_gap(hi, B, eps) >= 0:
            hi *= 2.0
            if hi > 1e300:
                raise NoRootError("no upper bracket found")
    else:
        lo, hi = bracket
        if not (_waist_gap(lo, B, eps) > 0 > _waist_gap(hi, B, eps)):
            raise NoRootError(
                f"eps/4 = {eps / 4} is not attained by mu(cosh(B/mu)-1) on [{lo}, {hi}]; "
                "the construction needs a different eps"
            )
    mu = optimize.brentq(_waist_gap, lo, hi, args=(B, eps), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                         maxiter=500)
    # one Newton polish on the original form
    for _ in range(3):
        x = B / mu
        f = mu + eps / 4.0 - mu * math.cosh(x)
        df = 1.0 - math.cosh(x) + x * math.sinh(x)
        if df == 0.0:
            break
        step = f / df
        if not math.isfinite(step):
            break
        cand = mu - step
        if cand > 0 and waist_residual(cand, B, eps) < waist_residual(mu, B, eps):
            mu = cand
        else:
            break
    return mu


def daniel_rhs(x2, y, tau):
    """y = (g, g'); (1 + (g + tau x2)^2) g'' = 2 (g + tau x2)(g' - tau) g'."""
    g, gp = y
    s = g + tau * x2
    return np.array([gp, 2.0 * s * (gp - tau) * gp / (1.0 + s * s)])


@dataclass
class DanielFamily(Graph):
    """u = x1 g(x2) with g stored as Chebyshev series on the integration interval."""

    tau: float
    interval: tuple[float, float]
    g: Chebyshev
    gp: Chebyshev
    gpp: Chebyshev = field(init=False)

    def __post_init__(self):
        self.gpp = self.gp.deriv()

    def _check(self, x2):
        lo, hi = self.interval
        span = hi - lo
        if np.any((x2 < lo - 1e-12 * span) | (x2 > hi + 1e-12 * span)):
            raise OutOfDomainError(f"x2 outside integration strip {self.interval}")

    def __call__(self, p):
        _, x1, x2 = _split(p)
        self._check(x2)
        return x1 * self.g(x2)

    def jet(self, p):
        _, x1, x2 = _split(p)
        self._check(x2)
        g, gp, gpp = self.g(x2), self.gp(x2), self.gpp(x2)
        return Jet2(x1 * g, g, x1 * gp, np.zeros_like(x1), gp, x1 * gpp)


def integrate_daniel(g0: float, g1: float, interval, tau=0.5, rtol=1e-13) -> DanielFamily:
    """Integrate the ODE for g with g(lo) = g0, g'(lo) = g1 and return the family member."""
    tau = as_tau(tau)
    lo, hi = map(float, interval)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ValueError("interval must be finite with hi > lo")
    sol = integrate.solve_ivp(daniel_rhs, (lo, hi), [g0, g1], method="DOP853", args=(tau,),
                              rtol=rtol, atol=rtol * 1e-1, dense_output=True)
    if sol.status != 0:
        raise DanielBlowUp(f"integration stopped at x2 = {sol.t[-1]:.6g}: {sol.message}")

    def series(component):
        f = lambda x: sol.sol(x)[component]  # noqa: E731
        c = Chebyshev.interpolate(f, 160, domain=[lo, hi])
        # chop at the integrator noise plateau so that differentiation stays accurate
        noise = np.max(np.abs(c.coef[80:]))
        above = np.nonzero(np.abs(c.coef) > 10.0 * noise)[0]
        keep = int(above[-1]) + 1 if above.size else 1
        return c.truncate(keep + 1)

    return DanielFamily(tau, (lo, hi), series(0), series(1))


def eval_family(sol, p) -> Jet2:
    """Value, gradient and Hessian of any family member at ``p``."""
    return sol.jet(p)
