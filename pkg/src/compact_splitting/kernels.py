"""Peano and Sard kernels of the low-dimensional rules, dominant error
coefficients as functions of tau, and tau-optimisers for the kernel norms.

Every kernel is normalised by h^5 and represents the remainder
``rule - integral`` so that, for the 1D rule,

    Q(f) - int_0^h f = h^5 int_0^1 K(s; tau) f''''(h s) ds,
    int_0^1 K(s; tau) ds = (10 tau^2 - 10 tau + 1) / 2880.

The 2D Sard kernels K_30, K_03 carry the same orientation:
int K_30 = P_a(tau), int K_03 = -P_a(tau). The coefficient functions P, Q, R
are the dominant coefficients of ``integral - rule`` on the derivative
combinations of the 2D, 3D and 4D remainders.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from .errors import ParameterError
from .splitting import coefficients


class KernelId(enum.Enum):
    PEANO_1D = "Peano1D"
    SARD_30 = "Sard30"
    SARD_03 = "Sard03"
    SARD_DELTA_21 = "SardDelta21"
    SARD_DELTA_12 = "SardDelta12"


_S = Polynomial([0.0, 1.0])

# int_0^{1/2} |(2s - 1)(1/2 - s)| ds and (int_0^{1/2} ((2s - 1)(1/2 - s))^2 ds)^(1/2)
DELTA_L1_CONSTANT = 1.0 / 12.0
DELTA_L2_CONSTANT = math.sqrt(1.0 / 40.0)


def _check_tau(tau):
    if not (0.0 <= tau < 0.5):
        raise ParameterError(f"tau must lie in [0, 1/2), got {tau}")


def _pieces(kernel: KernelId, tau: float):
    """Kernel as a list of (a, b, Polynomial) on consecutive subintervals of [0, 1]."""
    _check_tau(tau)
    c = coefficients(tau)
    p, q, r = c.p, c.q, c.r
    v1, v2, v3 = p, q, p
    s = _S
    one = Polynomial([1.0])
    brk = [0.0, tau, 0.5, 1.0 - tau, 1.0]
    if kernel is KernelId.PEANO_1D:
        polys = [
            s ** 4,
            s ** 4 - 4 * p * (s - tau) ** 3,
            (1 - s) ** 4 + 4 * p * (s - 1 + tau) ** 3,
            (1 - s) ** 4,
        ]
        polys = [-P / 24.0 for P in polys]
    elif kernel is KernelId.SARD_30:
        base = (s - 1) ** 3 * (s + 3) / 24.0
        a3 = (v3 ** 2 / 2 + v3 * v2 + v3 * v1) * (s + tau - 1) ** 2
        a2 = (v2 ** 2 / 2 + v2 * v1) * (s - 0.5) ** 2 - r * (2 * s - 1)
        a1 = v1 ** 2 / 2 * (s - tau) ** 2
        polys = [base + (a3 + a2 + a1) / 2, base + (a3 + a2) / 2, base + a3 / 2, base]
    elif kernel is KernelId.SARD_03:
        base = -((s - 1) ** 4) / 24.0
        a3 = v3 ** 2 / 2 * (s + tau - 1) ** 2
        a2 = (v3 * v2 + v2 ** 2 / 2) * (s - 0.5) ** 2 + r * (2 * s - 1)
        a1 = (v3 * v1 + v2 * v1 + v1 ** 2 / 2) * (s - tau) ** 2
        polys = [base + (a3 + a2 + a1) / 2, base + (a3 + a2) / 2, base + a3 / 2, base]
    else:
        # The delta factor collapses the second variable; what remains is
        # r (2s - 1)(1/2 - s)_+ on [0, 1].
        return [(0.0, 0.5, r * (2 * s - 1) * (0.5 - s)), (0.5, 1.0, 0.0 * one)]
    return [(a, b, P) for a, b, P in zip(brk[:-1], brk[1:], polys) if b > a]


def _evaluate(pieces, s):
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ParameterError("kernel argument must lie in [0, 1]")
    out = np.zeros_like(s)
    for a, b, P in pieces:
        mask = (s >= a) & (s <= b)
        out[mask] = P(s[mask])
    return out if out.ndim else float(out)


def peano_kernel(s, tau: float):
    """1D Peano kernel K(s; tau) / h^5 (orientation: rule minus integral)."""
    return _evaluate(_pieces(KernelId.PEANO_1D, tau), s)


def sard_kernel(kernel: KernelId, s, tau: float):
    if kernel not in (KernelId.SARD_30, KernelId.SARD_03):
        raise ParameterError(f"sard_kernel evaluates Sard30/Sard03, got {kernel}")
    return _evaluate(_pieces(kernel, tau), s)


def delta_kernel_profile(s, tau: float):
    """r(tau) (2s - 1)(1/2 - s)_+ : the delta kernels after integrating out the delta."""
    return _evaluate(_pieces(KernelId.SARD_DELTA_21, tau), s)


def kernel(kernel_id: KernelId, s, tau: float):
    return _evaluate(_pieces(kernel_id, tau), s)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _gl(P, a, b):
    x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return 0.5 * (b - a) * float(np.dot(_GL_W, P(x)))


def _sign_splits(P, a, b):
    pts = [a, b]
    if P.degree() > 0:
        for z in P.roots():
            if abs(z.imag) < 1e-12 and a < z.real < b:
                pts.append(z.real)
    return sorted(pts)


def kernel_integral(kernel_id: KernelId, tau: float) -> float:
    """int_0^1 K(s; tau) ds by Gauss-Legendre on each polynomial piece."""
    if kernel_id is KernelId.SARD_DELTA_12:
        kernel_id = KernelId.SARD_DELTA_21
    return sum(_gl(P, a, b) for a, b, P in _pieces(kernel_id, tau))


def kernel_norm(kernel_id: KernelId, tau: float, p_norm: int = 2) -> float:
    """L_p[0, 1] norm (p in {1, 2}) of the kernel, normalised by h^5.

    Panels split at the kernel breakpoints and, for p = 1, at the sign changes
    of each piece, so the Gauss rule integrates every panel exactly.
    """
    if p_norm not in (1, 2):
        raise ParameterError(f"p_norm must be 1 or 2, got {p_norm}")
    if kernel_id is KernelId.SARD_DELTA_12:
        kernel_id = KernelId.SARD_DELTA_21
    total = 0.0
    for a, b, P in _pieces(kernel_id, tau):
        if p_norm == 1:
            pts = _sign_splits(P, a, b)
            total += sum(abs(_gl(P, lo, hi)) for lo, hi in zip(pts[:-1], pts[1:]))
        else:
            total += _gl(P * P, a, b)
    return total if p_norm == 1 else math.sqrt(total)


def optimal_tau(kernel_id: KernelId, p_norm: int = 2, *, tau_max: float = 0.49, grid_step: float = 1e-3) -> float:
    """Minimiser of kernel_norm over [0, tau_max]: grid scan, then golden section."""
    taus = np.arange(0.0, tau_max + 0.5 * grid_step, grid_step)
    vals = np.array([kernel_norm(kernel_id, t, p_norm) for t in taus])
    i = int(np.argmin(vals))
    if vals.max() - vals.min() <= 1e-15 * max(vals.max(), 1e-300):
        warnings.warn(f"flat objective for {kernel_id.value} L{p_norm}; minimiser is degenerate")
        return float(taus[i])
    lo, hi = taus[max(i - 1, 0)], taus[min(i + 1, len(taus) - 1)]
    res = minimize_scalar(
        lambda t: kernel_norm(kernel_id, t, p_norm),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x) if res.fun <= vals[i] else float(taus[i])


@dataclass(frozen=True)
class CoefficientSet:
    c_R1: float
    P_a: float
    P_b: float
    Q_a: float
    Q_b: float
    R_a: float
    R_b: float


def c_R1(tau):
    return (10 * tau ** 2 - 10 * tau + 1) / 2880


def P_a(tau):
    return -(120 * tau ** 2 - 84 * tau + 7) / (8640 * (2 * tau - 1))


def P_b(tau):
    return (36 * tau - 3) / (8640 * (2 * tau - 1))


def Q_a(tau):
    return -(432 * tau ** 4 - 864 * tau ** 3 + 558 * tau ** 2 - 126 * tau + 7) / (12960 * (1 - 2 * tau) ** 4)


def Q_b(tau):
    return (216 * tau ** 4 - 252 * tau ** 3 + 99 * tau ** 2 - 18 * tau + 1) / (3240 * (1 - 2 * tau) ** 4)


def R_a(tau):
    num = np.polyval([248832, -732672, 891648, -578880, 216000, -46416, 5376, -269], tau)
    return num / (155520 * (2 * tau - 1) ** 7)


def R_b(tau):
    num = np.polyval([27648, -96768, 145152, -118080, 54720, -14064, 1824, -91], tau)
    return num / (51840 * (2 * tau - 1) ** 7)


def coefficient_set(tau: float) -> CoefficientSet:
    _check_tau(tau)
    return CoefficientSet(
        c_R1=c_R1(tau),
        P_a=P_a(tau),
        P_b=P_b(tau),
        Q_a=Q_a(tau),
        Q_b=Q_b(tau),
        R_a=float(R_a(tau)),
        R_b=float(R_b(tau)),
    )


def peano_remainder_bound(tau: float, p_norm: int, f4_norm: float, h: float = 1.0) -> float:
    """Hoelder bound h^5 ||K||_p ||f''''||_q on the 1D remainder; f4_norm is caller supplied."""
    if f4_norm < 0:
        raise ParameterError("f4_norm must be non-negative")
    return h ** 5 * kernel_norm(KernelId.PEANO_1D, tau, p_norm) * f4_norm
