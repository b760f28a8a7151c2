"""Oracle checks shared by ``verify``, the test-suite and the acceptance run.

Each check returns a :class:`CheckResult`; none of them raise on a numerical
miss, so a suite can list every failure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .duhamel import (
    DenseBackend,
    commutator_check,
    f_derivative,
    reconstruction_check,
    smooth_state,
)
from .kernels import KernelId, c_R1, kernel_integral
from .operators import COMMUTATOR_SIGN, Grid1D, State, moving_quadratic, sine_packet
from .quadrature import polynomial_exactness_report
from .splitting import TAU_OPT, coefficients, evolve


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: value={self.value:.3e} tol={self.tol:.1e} {self.detail}".rstrip()


def dense_grid(n: int, half_width: float = 10.0) -> Grid1D:
    return Grid1D(n, -half_width, half_width)


def slope(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(np.asarray(hs)), np.log(np.asarray(errs)), 1)[0])


def check_commutator(sign: int = COMMUTATOR_SIGN, n: int = 64, times=(0.0, 0.3), tol: float = 1e-8) -> CheckResult:
    """[B, [A, B]] is a multiplier with one sign, and [B, B'] = 0, on an n = 64 grid over [-8, 8]."""
    be = DenseBackend(Grid1D(n, -8.0, 8.0), moving_quadratic())
    worst, ok, notes = 0.0, True, []
    for t in times:
        rep = commutator_check(be, t)
        worst = max(worst, rep.off_diagonal_ratio)
        good = rep.sign_consistent and rep.sigma == sign and rep.b_bprime_norm == 0.0
        ok = ok and good
        notes.append(f"t={t:g}: sigma={rep.sigma:+d}")
    ok = ok and worst < tol
    return CheckResult(
        "commutator", ok, worst, tol, f"({', '.join(notes)}; expected sigma={sign:+d})"
    )


def key_identity_residual(n: int = 32, h: float = 0.1) -> float:
    """Relative gap between (d1 - d2) f_2 at (h/2, h/2) and e^{hA/2} [B, [A, B]] e^{hA/2} u0.

    alpha_2 = h/2 for every tau, so the identity does not depend on tau.
    """
    be = DenseBackend(dense_grid(n), moving_quadratic())
    u0 = smooth_state(be.grid)
    a2 = 0.5 * h
    lhs = f_derivative(be, 2, (a2, a2), (1, 0), u0, h) - f_derivative(be, 2, (a2, a2), (0, 1), u0, h)
    rhs = be.apply_expA(a2, be.commutator_matrix(a2) @ be.apply_expA(a2, u0))
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))


def check_key_identity(n: int = 32, tol: float = 1e-8) -> CheckResult:
    res = key_identity_residual(n)
    return CheckResult("key-identity", res < tol, res, tol, f"(n={n})")


def derivative_multi_indices(max_d: int = 3):
    """All derivative orders used by the remainder analysis: total 4, 3, 2, 1 for d = 1, 2, 3, 4."""
    out = []
    for d in range(1, max_d + 1):
        total = 5 - d
        for m in itertools.product(range(total + 1), repeat=d):
            if sum(m) == total:
                out.append((d, m))
    return out


def derivative_fd_error(be: DenseBackend, d: int, multi, u0, h: float, rel_step: float = 1e-4) -> float:
    """Relative gap between the closed-form derivative and a central difference of one order lower.

    The difference is taken in the last variable carrying a non-zero order, so
    repeated application covers every order up to ``multi``.
    """
    eta = tuple(h * c for c in (0.8, 0.55, 0.3, 0.1)[:d])
    i = max(k for k, m in enumerate(multi) if m)
    lower = tuple(m - (k == i) for k, m in enumerate(multi))
    step = rel_step * h
    plus = tuple(e + step * (k == i) for k, e in enumerate(eta))
    minus = tuple(e - step * (k == i) for k, e in enumerate(eta))
    fd = (
        f_derivative(be, d, plus, lower, u0, h, check_order=False)
        - f_derivative(be, d, minus, lower, u0, h, check_order=False)
    ) / (2 * step)
    exact = f_derivative(be, d, eta, multi, u0, h)
    return float(np.linalg.norm(fd - exact) / np.linalg.norm(exact))


def check_interaction_derivatives(n: int = 24, h: float = 0.1, tol: float = 1e-5, max_d: int = 3) -> CheckResult:
    be = DenseBackend(dense_grid(n), moving_quadratic())
    u0 = smooth_state(be.grid)
    worst, where = 0.0, None
    for d, m in derivative_multi_indices(max_d):
        err = derivative_fd_error(be, d, m, u0, h)
        if err >= worst:
            worst, where = err, (d, m)
    return CheckResult("derivative-fd", worst <= tol, worst, tol, f"(worst at d={where[0]}, m={where[1]})")


def check_exactness(taus=(0.0, 0.1127, 0.3), tol: float = 1e-12) -> CheckResult:
    """Exactness through total degree 4 - d, plus degree 5 for d = 1 at tau_opt."""
    worst, ok = 0.0, True
    for d in range(1, 5):
        for tau in taus:
            rep = polynomial_exactness_report(d, tau, max_degree=4 - d, rel_tol=tol)
            worst = max(worst, rep.max_rel_error)
            ok = ok and rep.first_failing_degree is None
    gl = polynomial_exactness_report(1, TAU_OPT, max_degree=5, rel_tol=tol)
    ok = ok and gl.first_failing_degree is None
    return CheckResult("quadrature-exactness", ok, worst, tol, "(d=1..4; d=1 at tau_opt to degree 5)")


RECONSTRUCTION_HS = tuple(0.1 * 2.0 ** -k for k in range(4, 9))


def reconstruction_slopes(n: int = 24, taus=(0.0, 0.3), hs=RECONSTRUCTION_HS):
    be = DenseBackend(dense_grid(n), moving_quadratic())
    u0 = smooth_state(be.grid)
    out = {}
    for tau in taus:
        errs = [reconstruction_check(be, u0, tau, h) for h in hs]
        out[tau] = (slope(hs, errs), errs)
    return out


def check_reconstruction(n: int = 24, min_slope: float = 4.7) -> CheckResult:
    res = reconstruction_slopes(n)
    worst = min(s for s, _ in res.values())
    detail = ", ".join(f"tau={t:g}: {s:.3f}" for t, (s, _) in res.items())
    return CheckResult("reconstruction-slope", worst >= min_slope, worst, min_slope, f"({detail}; passes if >= tol)")


def mass_drift(steps: int = 10_000, n: int = 2048, half_width: float = 20.0, T: float = 0.5) -> float:
    grid = Grid1D(n, -half_width, half_width)
    u0 = State(sine_packet(grid.points), grid)
    rep = evolve(u0, 0.0, T, T / steps, coefficients(TAU_OPT), moving_quadratic())
    return rep.norm_drift


def check_unitarity(steps: int = 10_000, tol: float = 1e-12) -> CheckResult:
    drift = mass_drift(steps)
    return CheckResult("mass-preservation", drift < tol, drift, tol, f"({steps} steps)")


def check_kernel_integral(taus=(0.0, 0.1, 0.1127, 0.25, 0.45), tol: float = 1e-12) -> CheckResult:
    worst = max(abs(kernel_integral(KernelId.PEANO_1D, t) - c_R1(t)) for t in taus)
    return CheckResult("peano-integral", worst < tol, worst, tol)


def run_suite(*, sign: int = COMMUTATOR_SIGN, fast: bool = False, n: int | None = None):
    """All oracle checks; ``fast`` shrinks dense grids to n = 16 and the drift run to 10^3 steps."""
    small = n or (16 if fast else 24)
    return [
        check_commutator(sign),
        check_key_identity(n or (16 if fast else 32)),
        check_interaction_derivatives(small),
        check_exactness(),
        check_reconstruction(small),
        check_unitarity(1_000 if fast else 10_000),
        check_kernel_integral(),
    ]
