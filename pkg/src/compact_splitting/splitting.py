"""The tau-family of fourth-order compact splittings and its time stepper.

One step of length h starting at t_n applies, right to left,

    e^{tau h A} e^{p h B(t_n+(1-tau)h)} e^{(1/2-tau) h A} e^{h Bt(t_n+h/2)}
        e^{(1/2-tau) h A} e^{p h B(t_n+tau h)} e^{tau h A}

with Bt = q B + r h^2 [B, [A, B]].
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidInputError, ParameterError
from .operators import (
    Grid1D,
    PotentialSpec,
    State,
    _potential_values,
    btilde_exponent,
    free_propagate,
)

log = logging.getLogger(__name__)

TAU_OPT = 0.5 - math.sqrt(15.0) / 10.0
TAU_MAX = 0.5 - 1e-6


@dataclass(frozen=True)
class SplittingCoefficients:
    tau: float
    p: float
    q: float
    r: float


def coefficients(tau: float) -> SplittingCoefficients:
    """Coefficients (p, q, r) of the family member with parameter tau.

    >>> c = coefficients(0.0)
    >>> round(c.p * 6, 12), round(c.q * 3 / 2, 12), round(c.r * 72, 12)
    (1.0, 1.0, 1.0)
    """
    if not np.isfinite(tau) or tau < 0.0 or tau >= TAU_MAX:
        raise ParameterError(f"tau must lie in [0, 1/2 - 1e-6), got {tau}")
    z = 1.0 / (1.0 - 2.0 * tau)
    p = z * z / 6.0
    q = 1.0 - 2.0 * p
    r = (1.0 - z + z ** 3 / 6.0) / 12.0
    return SplittingCoefficients(tau=float(tau), p=p, q=q, r=r)


def _step_values(u, grid: Grid1D, t_n, h, coeffs: SplittingCoefficients, pot, skip_identity=True, sign=None):
    tau, p = coeffs.tau, coeffs.p
    x = grid.points
    outer = tau * h
    inner = (0.5 - tau) * h
    if outer != 0.0 or not skip_identity:
        u = free_propagate(u, grid, outer)
    u = u * np.exp(-1j * p * h * _potential_values(pot, x, t_n + tau * h))
    u = free_propagate(u, grid, inner)
    u = u * np.exp(btilde_exponent(grid, t_n + 0.5 * h, h, coeffs.q, coeffs.r, pot, sign))
    u = free_propagate(u, grid, inner)
    u = u * np.exp(-1j * p * h * _potential_values(pot, x, t_n + (1.0 - tau) * h))
    if outer != 0.0 or not skip_identity:
        u = free_propagate(u, grid, outer)
    return u


def step_tacb4(
    state: State,
    t_n: float,
    h: float,
    coeffs: SplittingCoefficients,
    pot: PotentialSpec,
    *,
    skip_identity: bool = True,
) -> State:
    """Advance ``state`` from t_n to t_n + h with one seven-exponential step.

    At tau = 0 the two outer free factors are identities and are skipped
    unless ``skip_identity`` is False.
    """
    if not (np.isfinite(h) and h > 0):
        raise InvalidInputError(f"step size must be positive and finite, got {h}")
    return State(_step_values(state.values, state.grid, t_n, h, coeffs, pot, skip_identity), state.grid)


@dataclass
class EvolutionReport:
    state: State
    steps: int
    wall_time: float
    norm_drift: float  # max over steps of |norm_{k+1} - norm_k| / norm_k


def step_schedule(t0: float, T: float, h: float):
    """Number of steps and size of the final (possibly shrunk) step.

    >>> step_schedule(0.0, 1.0, 0.1)
    (10, 0.1)
    >>> n, last = step_schedule(0.0, 0.95, 0.1); n, round(last, 12)
    (10, 0.05)
    """
    span = T - t0
    if not span > 0:
        raise ParameterError(f"need T > t0, got t0={t0}, T={T}")
    if not (np.isfinite(h) and h > 0):
        raise ParameterError(f"step size must be positive and finite, got {h}")
    if h >= span:
        return 1, span
    ratio = span / h
    steps = math.ceil(ratio - 1e-9 * ratio)
    last = span - (steps - 1) * h
    return steps, last


def evolve(
    state: State,
    t0: float,
    T: float,
    h: float,
    coeffs: SplittingCoefficients,
    pot: PotentialSpec,
    *,
    skip_identity: bool = True,
) -> EvolutionReport:
    """Integrate from t0 to T with constant steps h, shrinking the last one."""
    steps, last = step_schedule(t0, T, h)
    grid = state.grid
    u = state.values
    nrm = grid.norm(u)
    drift = 0.0
    start = time.perf_counter()
    for k in range(steps):
        hk = last if k == steps - 1 else h
        u = _step_values(u, grid, t0 + k * h, hk, coeffs, pot, skip_identity)
        if not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite state after step {k}", step=k)
        new = grid.norm(u)
        if nrm > 0:
            drift = max(drift, abs(new - nrm) / nrm)
        nrm = new
    elapsed = time.perf_counter() - start
    if drift > 1e-10:
        log.warning("per-step norm drift %.3e exceeds 1e-10", drift)
    return EvolutionReport(State(u, grid), steps, elapsed, drift)


@dataclass(frozen=True)
class ErrorBudget:
    rv_bound: float
    r_e: float
    c_R1: float
    P_a: float
    P_b: float
    Q_a: float
    Q_b: float
    R_a: float
    R_b: float


def error_budget(
    h: float, tau: float, norm_B: float, norm_Btilde: float, C_h: float, norm_u0: float
) -> ErrorBudget:
    """A-priori one-step error ingredients.

    Both closed-form bounds take the operator norms from the caller. The
    semigroup norms inside r_E are bounded by C_h. Coefficient magnitudes are
    absolute values of the dominant quadrature error coefficients at tau and
    multiply h^5 times the matching derivative combinations.
    """
    from .kernels import coefficient_set

    if min(norm_B, norm_Btilde, norm_u0) < 0:
        raise ParameterError("operator and state norms must be non-negative")
    if C_h < 1:
        raise ParameterError(f"C_h must be >= 1, got {C_h}")
    c = coefficients(tau)
    x = h * C_h * norm_B
    rv = math.exp(x) * x ** 5 / 120.0 * C_h * norm_u0
    r_e = h ** 5 / 120.0 * (2.0 * c.p ** 5 * norm_B ** 5 + norm_Btilde ** 5) * C_h ** 3 * norm_u0
    cs = coefficient_set(tau)
    return ErrorBudget(
        rv_bound=rv,
        r_e=r_e,
        c_R1=abs(cs.c_R1),
        P_a=abs(cs.P_a),
        P_b=abs(cs.P_b),
        Q_a=abs(cs.Q_a),
        Q_b=abs(cs.Q_b),
        R_a=abs(cs.R_a),
        R_b=abs(cs.R_b),
    )
