"""Running costs on arcs, their Legendre transforms and the junction operator.

Every Lagrangian here has the form ``L(s, alpha) = base(alpha) + c(s)`` with
``s`` the arc coordinate.  ``alpha`` is a velocity along the arc; the sign
convention (towards increasing ``s`` is positive) is the caller's business.
"""

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .kernels import prims


@dataclass(frozen=True)
class Quadratic:
    """``alpha**2 / 2 + c``."""

    c: float = 0.0
    kind = prims.QUAD
    lam = 1.0
    table = None

    def offset(self, s):
        return np.full(np.shape(s), float(self.c))


@dataclass(frozen=True)
class QuadraticX:
    """``alpha**2 / 2 + c(s)`` with ``c`` a polynomial, coefficients lowest degree first."""

    coeffs: tuple = (0.0,)
    kind = prims.QUAD
    lam = 1.0
    table = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(x) for x in self.coeffs))
        if not self.coeffs:
            raise ValueError("quadratic_x needs at least one coefficient")

    def offset(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, float), self.coeffs)


@dataclass(frozen=True)
class FluxCapacity:
    """``lam / 4 * (|alpha| + 1)**2``, conjugate to the convex hull of ``p**2/lam - |p|``."""

    lam: float = 1.0
    kind = prims.FLUX
    table = None

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValueError(f"flux capacity lambda must lie in (0, 1], got {self.lam}")

    def offset(self, s):
        return np.zeros(np.shape(s))


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear convex cost through ``(alphas, values)``; ``+inf`` outside the range.

    The bounded support is what makes the cost coercive.  The range must
    contain ``alpha = 0`` so that standing still is always admissible.
    """

    alphas: tuple
    values: tuple
    kind = prims.TABLE
    lam = 1.0

    def __post_init__(self):
        a = np.asarray(self.alphas, float)
        v = np.asarray(self.values, float)
        if a.ndim != 1 or a.shape != v.shape or a.size < 2:
            raise ValueError("table needs matching alphas/values with at least two points")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(v)):
            raise ValueError("table entries must be finite")
        if np.any(np.diff(a) <= 0):
            raise ValueError("table alphas must be strictly increasing")
        if not (a[0] <= 0.0 <= a[-1]):
            raise ValueError("table alpha range must contain 0")
        slopes = np.diff(v) / np.diff(a)
        if np.any(np.diff(slopes) < -1e-12 * (1 + np.abs(slopes[1:]))):
            raise ValueError("tabulated Lagrangian is not convex")
        object.__setattr__(self, "alphas", tuple(a.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    @property
    def table(self):
        return np.asarray(self.alphas), np.asarray(self.values)

    def offset(self, s):
        return np.zeros(np.shape(s))


LagrangianSpec = Union[Quadratic, QuadraticX, FluxCapacity, Tabulated]


def lagrangian_from_dict(doc: dict) -> LagrangianSpec:
    """Build a spec from its scenario-file fragment."""
    kind = doc.get("type")
    if kind == "quadratic":
        return Quadratic(float(doc.get("c", 0.0)))
    if kind == "quadratic_x":
        return QuadraticX(tuple(doc["coeffs"]))
    if kind == "flux":
        return FluxCapacity(float(doc["lambda"]))
    if kind == "table":
        return Tabulated(tuple(doc["alphas"]), tuple(doc["values"]))
    raise ValueError(f"unknown lagrangian type {kind!r}")


def lagrangian_to_dict(spec: LagrangianSpec) -> dict:
    if isinstance(spec, Quadratic):
        return {"type": "quadratic", "c": spec.c}
    if isinstance(spec, QuadraticX):
        return {"type": "quadratic_x", "coeffs": list(spec.coeffs)}
    if isinstance(spec, FluxCapacity):
        return {"type": "flux", "lambda": spec.lam}
    return {"type": "table", "alphas": list(spec.alphas), "values": list(spec.values)}


def _tabs(spec):
    if spec.table is None:
        return prims._EMPTY_TABS
    a, v = spec.table
    return a, v, np.array([0, a.size])


def cost(spec: LagrangianSpec, s, alpha):
    """``L(s, alpha)``."""
    return prims.lag(spec.kind, spec.offset(s), spec.lam, 0, alpha, _tabs(spec))


def optimal_control(spec: LagrangianSpec, p):
    """Maximiser of ``alpha p - L``; the smallest one for tables."""
    return prims.argmax(spec.kind, spec.lam, 0, p, _tabs(spec))


def legendre(spec: LagrangianSpec, s, p):
    """``H(s, p) = sup_alpha (alpha p - L(s, alpha))``, exact for every variant."""
    return prims.ham(spec.kind, spec.offset(s), spec.lam, 0, p, _tabs(spec))


def p_hat(spec: LagrangianSpec, s=0.0):
    """A minimiser of ``H(s, .)``: any subgradient of ``L(s, .)`` at 0; the one nearest 0."""
    if spec.table is None:
        return np.zeros(np.shape(s))
    a, v = spec.table
    slopes = np.diff(v) / np.diff(a)
    k = np.searchsorted(a, 0.0)
    if a[k] == 0.0:
        left = slopes[k - 1] if k > 0 else -np.inf
        right = slopes[k] if k < slopes.size else np.inf
    else:
        left = right = slopes[k - 1]
    return np.full(np.shape(s), float(np.clip(0.0, left, right)))


def h_minus(spec: LagrangianSpec, s, p):
    """Non-increasing part: ``H(min(p, p_hat))``, equal to ``sup_{alpha <= 0}``."""
    return legendre(spec, s, np.minimum(p, p_hat(spec, s)))


def h_plus(spec: LagrangianSpec, s, p):
    """Non-decreasing part: ``H(max(p, p_hat))``, equal to ``sup_{alpha >= 0}``."""
    return legendre(spec, s, np.maximum(p, p_hat(spec, s)))


@dataclass(frozen=True)
class HamiltonianSpec:
    """The transform of a Lagrangian, evaluated at a fixed arc position."""

    lagrangian: LagrangianSpec
    s: float = 0.0

    def __call__(self, p):
        return legendre(self.lagrangian, self.s, p)

    def minus(self, p):
        return h_minus(self.lagrangian, self.s, p)

    def plus(self, p):
        return h_plus(self.lagrangian, self.s, p)

    @property
    def p_hat(self) -> float:
        return float(p_hat(self.lagrangian, self.s))


MINUS_INFINITY = float("-inf")


@dataclass(frozen=True)
class JunctionCost:
    """Flux limiter ``A`` and the matching cost of staying at the node, ``-A``."""

    A: float = MINUS_INFINITY

    @property
    def staying_cost(self) -> float:
        return -self.A


def flux_limiter_F(A: float, p: Sequence[float], specs: Sequence[Union[HamiltonianSpec, LagrangianSpec]]) -> float:
    """``max(A, max_i H_i^-(0, p_i))`` with one gradient entry per incident arc."""
    if len(p) != len(specs):
        raise ValueError(f"got {len(p)} gradient components for {len(specs)} arcs")
    best = A
    for pi, sp in zip(p, specs):
        if isinstance(sp, HamiltonianSpec):
            best = max(best, float(sp.minus(pi)))
        else:
            best = max(best, float(h_minus(sp, 0.0, pi)))
    return best


def control_bound(specs: Sequence[LagrangianSpec], gradient_bound: float) -> float:
    """Bound on ``|alpha*|`` over all arcs once slopes are bounded by ``gradient_bound``.

    ``alpha*(p)`` is monotone in ``p``, so the extreme controls occur at
    ``p = +-gradient_bound``.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("control bound of an empty network")
    mu = 0.0
    for sp in specs:
        mu = max(mu, float(abs(optimal_control(sp, gradient_bound))), float(abs(optimal_control(sp, -gradient_bound))))
    return mu
