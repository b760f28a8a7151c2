"""Hermite-Birkhoff quadrature on the ordered simplex h >= eta_1 >= ... >= eta_d >= 0.

The rule for dimension d combines point values at all node tuples built from
(tau h, h/2, (1 - tau) h) with directional derivatives at the tuples that
contain h/2 at least twice (d = 2, 3 only):

    int f ~ h^d sum_{j in P_d} b_j f(alpha_j) + h^{d+1} sum_{j in Q_d} c_j v_j . grad f(alpha_j)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import OracleFailure, ParameterError
from .splitting import coefficients

# j = (j1, j2, j3) counts of (alpha_1, alpha_2, alpha_3) in the node tuple.
_DERIVATIVE_DIRECTIONS = {
    (0, 2, 0): (1, -1),
    (1, 2, 0): (1, -1, 0),
    (0, 3, 0): (1, 0, -1),
    (0, 2, 1): (0, 1, -1),
}


@dataclass(frozen=True)
class NodeSet:
    alpha: tuple[float, float, float]
    v: tuple[float, float, float]


def node_set(tau: float, h: float) -> NodeSet:
    c = coefficients(tau)
    return NodeSet(alpha=(tau * h, 0.5 * h, (1.0 - tau) * h), v=(c.p, c.q, c.p))


@dataclass(frozen=True)
class PointTerm:
    j: tuple[int, int, int]
    weight: float
    nodes: tuple[float, ...]


@dataclass(frozen=True)
class DerivTerm:
    j: tuple[int, int, int]
    weight: float
    direction: tuple[int, ...]
    nodes: tuple[float, ...]


@dataclass(frozen=True)
class HBRule:
    d: int
    tau: float
    h: float
    point_terms: tuple[PointTerm, ...]
    deriv_terms: tuple[DerivTerm, ...]


def multi_indices(d: int):
    """P_d = {j in Z_+^3 : j1 + j2 + j3 = d}, ordered lexicographically."""
    return [j for j in itertools.product(range(d + 1), repeat=3) if sum(j) == d]


def node_tuple(j, alpha) -> tuple[float, ...]:
    """(alpha_3 x j3, alpha_2 x j2, alpha_1 x j1): decreasing, hence time-ordered."""
    j1, j2, j3 = j
    return (alpha[2],) * j3 + (alpha[1],) * j2 + (alpha[0],) * j1


def build_rule(d: int, tau: float, h: float) -> HBRule:
    if d not in (1, 2, 3, 4):
        raise ParameterError(f"rules exist for d in 1..4, got {d}")
    ns = node_set(tau, h)
    v1, v2, v3 = ns.v
    r = coefficients(tau).r
    points = []
    for j in multi_indices(d):
        j1, j2, j3 = j
        b = v1 ** j1 * v2 ** j2 * v3 ** j3 / (math.factorial(j1) * math.factorial(j2) * math.factorial(j3))
        points.append(PointTerm(j, b, node_tuple(j, ns.alpha)))
    c_weights = {
        2: {(0, 2, 0): r},
        3: {(0, 2, 1): v3 * r, (0, 3, 0): v2 * r / 2.0, (1, 2, 0): v1 * r},
    }.get(d, {})
    derivs = [
        DerivTerm(j, c, _DERIVATIVE_DIRECTIONS[j], node_tuple(j, ns.alpha)) for j, c in c_weights.items()
    ]
    return HBRule(d, float(tau), float(h), tuple(points), tuple(derivs))


class SimplexFunction:
    """Integrand on the d-simplex with optional native directional derivatives.

    Without ``directional`` the derivative falls back to a central difference
    with step ``fd_rel * h``.
    """

    def __init__(self, value: Callable, directional: Callable | None = None, fd_rel: float = 1e-5):
        self.value = value
        self.directional = directional
        self.fd_rel = fd_rel

    def __call__(self, eta):
        return self.value(tuple(eta))

    def derivative(self, eta, direction, h):
        if self.directional is not None:
            return self.directional(tuple(eta), tuple(direction))
        eta = np.asarray(eta, dtype=float)
        vec = np.asarray(direction, dtype=float)
        step = self.fd_rel * h
        return (self.value(tuple(eta + step * vec)) - self.value(tuple(eta - step * vec))) / (2.0 * step)


def apply_rule(rule: HBRule, f) -> Any:
    if not isinstance(f, SimplexFunction):
        f = SimplexFunction(f)
    h, d = rule.h, rule.d
    total = sum(t.weight * f(t.nodes) for t in rule.point_terms) * h ** d
    if rule.deriv_terms:
        total = total + h ** (d + 1) * sum(
            t.weight * f.derivative(t.nodes, t.direction, h) for t in rule.deriv_terms
        )
    return total


def _gauss_panels(order: int, panels: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def simplex_cubature(d: int, h: float, order: int = 12, panels: int = 1):
    """Points (N, d) and weights (N,) of a conical product Gauss rule on the simplex.

    Uses eta_1 = h s_1, eta_k = eta_{k-1} s_k, which maps [0, 1]^d onto the
    ordered simplex with Jacobian h^d prod_k s_k^{d-k}.
    """
    s, w = _gauss_panels(order, panels)
    grids = np.meshgrid(*([s] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    S = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    eta = h * np.cumprod(S, axis=1)
    jac = np.ones(len(W))
    for k in range(d - 1):
        jac *= S[:, k] ** (d - 1 - k)
    return eta, W * jac * h ** d


def simplex_integrate_oracle(
    d: int,
    f: Callable,
    h: float = 1.0,
    rel_tol: float = 1e-13,
    *,
    order: int = 12,
    vectorized: bool = False,
    max_panels: int = 16,
):
    """Brute-force integral of f over the ordered d-simplex of size h.

    Panels are doubled until two successive results agree to ``rel_tol``.
    With ``vectorized`` f receives an (N, d) array and returns an array whose
    leading axis is N; otherwise it is called once per point with a tuple.
    """
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if rel_tol < 1e-13:
        raise ParameterError(f"rel_tol must be >= 1e-13, got {rel_tol}")

    def integrate(panels):
        eta, w = simplex_cubature(d, h, order, panels)
        if vectorized:
            vals = np.asarray(f(eta))
        else:
            vals = np.asarray([f(tuple(e)) for e in eta])
        return np.tensordot(w, vals, axes=(0, 0))

    panels = 1
    prev = integrate(panels)
    while panels < max_panels:
        panels *= 2
        cur = integrate(panels)
        scale = max(np.linalg.norm(np.atleast_1d(cur)), np.finfo(float).tiny)
        if np.linalg.norm(np.atleast_1d(cur - prev)) <= rel_tol * scale or np.all(cur == prev):
            return cur[()] if np.ndim(cur) == 0 else cur
        prev = cur
    raise OracleFailure(f"simplex oracle did not reach rel_tol={rel_tol} with {max_panels} panels per axis")


def monomial(exponents):
    exps = tuple(exponents)

    def f(eta):
        return float(np.prod([e ** a for e, a in zip(eta, exps)]))

    def grad(eta, direction):
        total = 0.0
        for i, (vi, ai) in enumerate(zip(direction, exps)):
            if vi == 0 or ai == 0:
                continue
            term = ai * eta[i] ** (ai - 1)
            for k, (e, a) in enumerate(zip(eta, exps)):
                if k != i:
                    term *= e ** a
            total += vi * term
        return total

    return SimplexFunction(f, grad)


def monomial_exponents(d: int, degree: int):
    return [m for m in itertools.product(range(degree + 1), repeat=d) if sum(m) == degree]


def monomial_defect(d: int, tau: float, exponents, h: float = 1.0):
    """(rule - exact integral) of one monomial, exact integral from the oracle."""
    exact = _monomial_oracle(d, exponents, h)
    return apply_rule(build_rule(d, tau, h), monomial(exponents)) - exact, exact


def _monomial_oracle(d, exponents, h):
    exps = np.asarray(exponents)

    def fv(eta):
        return np.prod(eta ** exps, axis=1)

    return float(simplex_integrate_oracle(d, fv, h, vectorized=True, rel_tol=1e-13))


@dataclass
class ExactnessReport:
    d: int
    tau: float
    max_rel_error: float  # over total degrees <= 4 - d
    first_failing_degree: int | None
    defects: dict  # exponents -> (rule - exact)


def polynomial_exactness_report(d: int, tau: float, *, max_degree: int = 7, rel_tol: float = 1e-12):
    """Check the rule on every monomial up to ``max_degree`` against the oracle."""
    if d not in (1, 2, 3, 4):
        raise ParameterError(f"rules exist for d in 1..4, got {d}")
    rule = build_rule(d, tau, 1.0)
    worst = 0.0
    first_fail = None
    defects = {}
    for degree in range(0, max_degree + 1):
        failed = False
        for m in monomial_exponents(d, degree):
            exact = _monomial_oracle(d, m, 1.0)
            defect = apply_rule(rule, monomial(m)) - exact
            defects[m] = defect
            ok = abs(defect) <= rel_tol * abs(exact) if exact != 0 else abs(defect) <= 1e-14
            if degree <= 4 - d:
                worst = max(worst, abs(defect) / abs(exact) if exact else abs(defect))
            failed = failed or not ok
        if failed and first_fail is None:
            first_fail = degree
            if degree > 4 - d:
                break
    return ExactnessReport(d, float(tau), worst, first_fail, defects)
