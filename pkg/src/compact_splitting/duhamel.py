"""Dense-matrix oracles on small grids.

Everything here works with explicit n x n matrices: A = (i/2) D2 and the
diagonal B(t) = -i V(., t). That makes it possible to evaluate the iterated
Duhamel integrands

    f_d(eta_1, ..., eta_d) = e^{hA} prod_{i=1..d} [e^{-eta_i A} B(eta_i) e^{eta_i A}] u0,

their closed-form derivatives (nested ad_A stacks), commutators such as [B, [A, B]] and a high-order
reference propagator, all without any splitting or multiplier shortcut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CapabilityError, InvalidInputError, OracleFailure, OrderingError, ParameterError
from .operators import COMMUTATOR_SIGN, Grid1D, PotentialSpec
from .quadrature import SimplexFunction, apply_rule, build_rule, multi_indices
from .splitting import SplittingCoefficients, coefficients

MAX_DENSE_N = 128

_FD8 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def spectral_d2_matrix(grid: Grid1D) -> np.ndarray:
    """Fourier second-derivative matrix, consistent with the FFT multiplier -k^2."""
    k = grid.wavenumbers
    eye = np.eye(grid.n)
    return np.real(np.fft.ifft(-(k ** 2)[:, None] * np.fft.fft(eye, axis=0), axis=0))


def fd8_d2_matrix(grid: Grid1D) -> np.ndarray:
    """Periodic eighth-order centred second-derivative stencil."""
    n = grid.n
    if n < len(_FD8):
        raise ParameterError(f"eighth-order stencil needs n >= 9, got {n}")
    col = np.zeros(n)
    for off, c in zip(range(-4, 5), _FD8):
        col[off % n] += c
    return scipy.linalg.circulant(col) / grid.dx ** 2


def matrix_exponential(M: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """exp(scale * M) by scaling and squaring with a Pade core."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"need a square matrix, got shape {M.shape}")
    if M.shape[0] > MAX_DENSE_N:
        raise ParameterError(f"dense exponentials are limited to n <= {MAX_DENSE_N}")
    out = scipy.linalg.expm(scale * M)
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("matrix exponential overflowed")
    return out


def commutator(X, Y):
    return X @ Y - Y @ X


def ad_power(X: np.ndarray, A: np.ndarray, j: int) -> np.ndarray:
    """[[...[X, A], A]...], A] with A appearing j times."""
    for _ in range(j):
        X = X @ A - A @ X
    return X


@dataclass(frozen=True, eq=False)
class DenseBackend:
    """Explicit matrices for A and B(t) on a small periodic grid."""

    grid: Grid1D
    pot: PotentialSpec
    d2: str = "spectral"
    _lam: np.ndarray = field(init=False, repr=False)
    _Q: np.ndarray = field(init=False, repr=False)
    _D2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.grid.n > MAX_DENSE_N:
            raise ParameterError(f"dense backend is limited to n <= {MAX_DENSE_N}, got {self.grid.n}")
        if self.d2 == "spectral":
            D2 = spectral_d2_matrix(self.grid)
        elif self.d2 == "fd8":
            D2 = fd8_d2_matrix(self.grid)
        else:
            raise ParameterError(f"unknown second-derivative discretisation {self.d2!r}")
        D2 = 0.5 * (D2 + D2.T)
        lam, Q = np.linalg.eigh(D2)
        object.__setattr__(self, "_D2", D2)
        object.__setattr__(self, "_lam", lam)
        object.__setattr__(self, "_Q", Q)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @property
    def A_mat(self) -> np.ndarray:
        return 0.5j * self._D2

    def expA(self, c: float) -> np.ndarray:
        """exp(c A) from the eigendecomposition of the symmetric D2."""
        return (self._Q * np.exp(0.5j * c * self._lam)) @ self._Q.T

    def apply_expA(self, c: float, u: np.ndarray) -> np.ndarray:
        if c == 0.0:
            return np.array(u, dtype=complex)
        return self._Q @ (np.exp(0.5j * c * self._lam) * (self._Q.T @ u))

    def b_diag(self, t: float, k: int = 0) -> np.ndarray:
        """Diagonal of B^{(k)}(t) = -i d^k V / dt^k."""
        return -1j * np.asarray(self.pot.dt(k, self.x, t), dtype=float)

    def B_mat(self, t: float) -> np.ndarray:
        return np.diag(self.b_diag(t))

    def Bprime_mat(self, t: float) -> np.ndarray:
        return np.diag(self.b_diag(t, 1))

    def commutator_matrix(self, t: float) -> np.ndarray:
        """[B(t), [A, B(t)]] as an explicit matrix."""
        A, B = self.A_mat, self.B_mat(t)
        AB = commutator(A, B)
        return B @ AB - AB @ B

    def generator(self, t: float) -> np.ndarray:
        return self.A_mat + self.B_mat(t)


def dense_backend(grid: Grid1D, pot: PotentialSpec, d2: str = "spectral") -> DenseBackend:
    return DenseBackend(grid, pot, d2)


def smooth_state(grid: Grid1D) -> np.ndarray:
    """Normalised broad Gaussian with a small odd imaginary part; the standard oracle input."""
    x = grid.points
    mid = 0.5 * (grid.x_min + grid.x_max)
    half = 0.5 * grid.length
    u = np.exp(-(((x - mid) / (half / 3)) ** 2)) * (1 + 0.3j * (x - mid) / half)
    return u / grid.norm(u)


def _check_ordered(eta, h):
    eta = tuple(float(e) for e in eta)
    seq = (h,) + eta + (0.0,)
    tol = 1e-14 * max(abs(h), 1.0)
    if any(seq[i] < seq[i + 1] - tol for i in range(len(seq) - 1)):
        raise OrderingError(f"need h >= eta_1 >= ... >= eta_d >= 0, got eta={eta}, h={h}")
    return eta


def interaction_derivative(backend: DenseBackend, m: int, t: float) -> np.ndarray:
    """sum_k C(m, k) ad_A^{m-k} B^{(k)}(t): the conjugated m-th derivative of B."""
    A = backend.A_mat
    if m > backend.pot.max_time_derivative:
        raise CapabilityError(f"derivative order {m} exceeds the time derivatives of {backend.pot.name!r}")
    out = np.zeros((backend.n, backend.n), dtype=complex)
    for k in range(m + 1):
        out += math.comb(m, k) * ad_power(np.diag(backend.b_diag(t, k)), A, m - k)
    return out


def f_derivative(backend: DenseBackend, d: int, eta, multi, u0, h: float, t0: float = 0.0, check_order: bool = True):
    """Partial derivative d^{m_1}_{eta_1} ... d^{m_d}_{eta_d} f_d at eta.

    Factor i of the product becomes e^{-eta_i A} D_{m_i}(eta_i) e^{eta_i A}
    with D_m from :func:`interaction_derivative`; factors are applied in the written
    (time-ordered) order, which also fixes the value at coincident nodes.
    """
    if len(eta) != d or len(multi) != d:
        raise ParameterError(f"need {d} coordinates and {d} derivative orders")
    if check_order:
        eta = _check_ordered(eta, h)
    if sum(multi) > 4:
        raise ParameterError("derivative orders are limited to total degree 4")
    w = np.array(u0, dtype=complex)
    for e, m in zip(reversed(tuple(eta)), reversed(tuple(multi))):
        w = backend.apply_expA(e, w)
        if m == 0:
            w = backend.b_diag(t0 + e) * w
        else:
            w = interaction_derivative(backend, m, t0 + e) @ w
        w = backend.apply_expA(-e, w)
    return backend.apply_expA(h, w)


def f_eval(backend: DenseBackend, d: int, eta, u0, h: float, t0: float = 0.0, check_order: bool = True):
    return f_derivative(backend, d, eta, (0,) * d, u0, h, t0, check_order)


def f_eval_batch(backend: DenseBackend, etas: np.ndarray, u0, h: float, t0: float = 0.0) -> np.ndarray:
    """f_d at many points at once; etas has shape (N, d), result (N, n)."""
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    Q, lam = backend._Q, backend._lam
    pot, x = backend.pot, backend.x
    W = np.broadcast_to(np.asarray(u0, dtype=complex), (len(etas), backend.n)) @ Q
    for i in range(etas.shape[1] - 1, -1, -1):
        e = etas[:, i : i + 1]
        W = (np.exp(0.5j * e * lam) * W) @ Q.T
        W = -1j * pot.v(x[None, :], t0 + e) * W
        W = (np.exp(-0.5j * e * lam) * (W @ Q))
    W = np.exp(0.5j * h * lam) * W
    return W @ Q.T


def duhamel_integrand(backend: DenseBackend, d: int, u0, h: float, t0: float = 0.0) -> SimplexFunction:
    """f_d as a SimplexFunction with native directional derivatives."""

    def value(eta):
        return f_eval(backend, d, eta, u0, h, t0)

    def directional(eta, direction):
        total = np.zeros(backend.n, dtype=complex)
        for i, vi in enumerate(direction):
            if vi:
                multi = tuple(1 if k == i else 0 for k in range(d))
                total += vi * f_derivative(backend, d, eta, multi, u0, h, t0)
        return total

    return SimplexFunction(value, directional)


def quadrature_sum(backend: DenseBackend, u0, tau: float, h: float, t0: float = 0.0) -> np.ndarray:
    """e^{hA} u0 + sum_{d=1..4} HB-rule(f_d)."""
    total = backend.apply_expA(h, np.asarray(u0, dtype=complex))
    for d in range(1, 5):
        total = total + apply_rule(build_rule(d, tau, h), duhamel_integrand(backend, d, u0, h, t0))
    return total


def duhamel_truncation(backend: DenseBackend, u0, h: float, t0: float = 0.0, order: int = 8, rel_tol: float = 1e-11):
    """e^{hA} u0 + sum_{d=1..4} (oracle integral of f_d) -- the four-fold iterated Duhamel formula minus R_V."""
    from .quadrature import simplex_integrate_oracle

    total = backend.apply_expA(h, np.asarray(u0, dtype=complex))
    for d in range(1, 5):
        total = total + simplex_integrate_oracle(
            d, lambda e: f_eval_batch(backend, e, u0, h, t0), h, rel_tol, order=order, vectorized=True
        )
    return total


def dense_step_tacb4(backend: DenseBackend, u, t_n: float, h: float, coeffs: SplittingCoefficients) -> np.ndarray:
    """The seven-exponential step with the matrix commutator in the middle factor."""
    tau, p, q, r = coeffs.tau, coeffs.p, coeffs.q, coeffs.r
    t_mid = t_n + 0.5 * h
    Bt = q * backend.B_mat(t_mid) + r * h * h * backend.commutator_matrix(t_mid)
    u = backend.apply_expA(tau * h, np.asarray(u, dtype=complex))
    u = np.exp(p * h * backend.b_diag(t_n + tau * h)) * u
    u = backend.apply_expA((0.5 - tau) * h, u)
    u = matrix_exponential(Bt, h) @ u
    u = backend.apply_expA((0.5 - tau) * h, u)
    u = np.exp(p * h * backend.b_diag(t_n + (1 - tau) * h)) * u
    return backend.apply_expA(tau * h, u)


def reconstruction_check(backend: DenseBackend, u0, tau: float, h: float) -> float:
    """Grid L2 distance between one splitting step and the quadrature sum."""
    step = dense_step_tacb4(backend, u0, 0.0, h, coefficients(tau))
    return backend.grid.norm(step - quadrature_sum(backend, u0, tau, h))


def _middle_factor(backend: DenseBackend, power: int, h: float, q: float, r: float, t: float) -> np.ndarray:
    """Coefficient of h^power in exp(h (qB + r h^2 C)), times h^power."""
    B = backend.B_mat(t)
    C = backend.commutator_matrix(t)
    if power == 0:
        M = np.eye(backend.n, dtype=complex)
    elif power == 1:
        M = q * B
    elif power == 2:
        M = q * q * B @ B / 2
    elif power == 3:
        M = r * C + q ** 3 * B @ B @ B / 6
    else:
        M = q * r * (B @ C + C @ B) / 2 + q ** 4 * np.linalg.matrix_power(B, 4) / 24
    return h ** power * M


def expansion_index():
    """The 35 index triples (j1, j2, j3) of the expansion terms, numbered 1..35.

    j3, j2, j1 are the powers taken from the left outer, middle and right outer
    potential factors. Terms are numbered by total degree 0..4; within a degree
    larger j3 comes first, then larger j2. With this numbering term 1 is
    e^{hA} u0, terms 2-4 are the three O(h) terms (left, middle, right),
    and so on up to term 35 = h^4 tau-right factor B^4.
    """
    out = []
    for g in range(5):
        out += sorted(multi_indices(g), key=lambda j: (-j[2], -j[1]))
    return out


def expansion_term(backend: DenseBackend, u0, tau: float, h: float, index: int) -> np.ndarray:
    """One product e^{tau h A} V1 e^{(1/2-tau) h A} V2 e^{(1/2-tau) h A} V3 e^{tau h A} u0 (debug aid)."""
    table = expansion_index()
    if not 1 <= index <= len(table):
        raise ParameterError(f"term index must lie in 1..{len(table)}, got {index}")
    j1, j2, j3 = table[index - 1]
    c = coefficients(tau)
    hp = h * c.p
    u = backend.apply_expA(tau * h, np.asarray(u0, dtype=complex))
    u = (hp ** j1 / math.factorial(j1)) * backend.b_diag(tau * h) ** j1 * u
    u = backend.apply_expA((0.5 - tau) * h, u)
    u = _middle_factor(backend, j2, h, c.q, c.r, 0.5 * h) @ u
    u = backend.apply_expA((0.5 - tau) * h, u)
    u = (hp ** j3 / math.factorial(j3)) * backend.b_diag((1 - tau) * h) ** j3 * u
    return backend.apply_expA(tau * h, u)


def expansion_sum(backend: DenseBackend, u0, tau: float, h: float) -> np.ndarray:
    """Sum of all 35 terms of the splitting expanded through h^4."""
    return sum(expansion_term(backend, u0, tau, h, i) for i in range(1, 36))


_GAUSS3 = (0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10)


def magnus6_step(backend: DenseBackend, u, t: float, h: float) -> np.ndarray:
    """Sixth-order Magnus step for u' = (A + B(t)) u on three Gauss nodes."""
    A1, A2, A3 = (backend.generator(t + c * h) for c in _GAUSS3)
    a1 = h * A2
    a2 = math.sqrt(15) * h / 3 * (A3 - A1)
    a3 = 10 * h / 3 * (A3 - 2 * A2 + A1)
    C1 = commutator(a1, a2)
    C2 = -commutator(a1, 2 * a3 + C1) / 60
    omega = a1 + a3 / 12 + commutator(-20 * a1 - a3 + C1, a2 + C2) / 240
    return matrix_exponential(omega) @ u


def _magnus_run(backend, u0, t0, T, steps):
    h = (T - t0) / steps
    u = np.array(u0, dtype=complex)
    for k in range(steps):
        u = magnus6_step(backend, u, t0 + k * h, h)
    return u


def reference_solution(
    backend: DenseBackend, u0, t0: float, T: float, tol: float = 1e-11, *, start_steps: int = 4, max_steps: int = 1 << 15
) -> np.ndarray:
    """High-accuracy solution at T by step doubling of the sixth-order Magnus method.

    Stops when two successive refinements agree to ``tol`` relative to the
    grid norm of u0.
    """
    if not T > t0:
        raise ParameterError(f"need T > t0, got t0={t0}, T={T}")
    grid = backend.grid
    scale = max(grid.norm(u0), np.finfo(float).tiny)
    steps = start_steps
    prev = _magnus_run(backend, u0, t0, T, steps)
    while steps < max_steps:
        steps *= 2
        cur = _magnus_run(backend, u0, t0, T, steps)
        if grid.norm(cur - prev) <= tol * scale:
            return cur
        prev = cur
    raise OracleFailure(f"reference solution did not reach tol={tol} with {max_steps} steps")


def step_order2_dense(backend: DenseBackend, u, t_n: float, h: float, tau: float) -> np.ndarray:
    """Second-order family e^{h(1-tau)A} e^{h B + h^2 (1-2 tau)/2 C} e^{h tau A}, C = [B, A] + B'."""
    if not isinstance(backend, DenseBackend):
        raise CapabilityError("the second-order family needs a dense backend: its middle exponent is not a multiplier")
    if not 0.0 <= tau <= 1.0:
        raise ParameterError(f"tau must lie in [0, 1], got {tau}")
    t = t_n + h * tau
    B = backend.B_mat(t)
    C = commutator(B, backend.A_mat) + backend.Bprime_mat(t)
    u = backend.apply_expA(h * tau, np.asarray(u, dtype=complex))
    u = matrix_exponential(h * B + 0.5 * h * h * (1 - 2 * tau) * C) @ u
    return backend.apply_expA(h * (1 - tau), u)


@dataclass
class CommutatorReport:
    off_diagonal_ratio: float  # ||C U - m U|| / ||m U|| over the probe set
    sigma: int  # fitted sign: C ~ sigma * i * |V_x|^2
    sign_consistent: bool
    multiplier_deviation: float  # max |m - sigma i V_x^2| / max |V_x^2| on the probe support
    b_bprime_norm: float  # ||[B(t), B'(t)]||
    entrywise_diagonal_norm: float  # ||diag(C)||, zero for any nodal discretisation


def default_probes(grid: Grid1D) -> np.ndarray:
    """Three Gaussians near the domain centre, well resolved and negligible at the boundary."""
    x = grid.points
    mid = 0.5 * (grid.x_min + grid.x_max)
    L = grid.length
    width = L / 20
    centres = mid + np.array([-1.0, 0.0, 1.0]) * L / 16
    return np.stack([np.exp(-((x - c) ** 2) / (2 * width ** 2)) for c in centres], axis=1)


def commutator_check(backend: DenseBackend, t: float, probes: np.ndarray | None = None) -> CommutatorReport:
    """Test that [B, [A, B]] acts as a multiplication operator and fit its sign.

    The entrywise diagonal of the matrix commutator is identically zero (its
    (j, k) entry is (V_j - V_k)^2 A_jk), so the multiplication property is
    measured on smooth probe vectors U: the best pointwise multiplier m is
    fitted by least squares and the residual C U - m U plays the role of the
    off-diagonal part.
    """
    C = backend.commutator_matrix(t)
    U = default_probes(backend.grid) if probes is None else np.asarray(probes)
    if U.ndim == 1:
        U = U[:, None]
    CU = C @ U
    weight = np.sum(np.abs(U) ** 2, axis=1)
    m = np.sum(np.conj(U) * CU, axis=1) / np.where(weight > 0, weight, 1.0)
    fitted = m[:, None] * U
    denom = np.linalg.norm(fitted)
    resid = np.linalg.norm(CU - fitted)
    ratio = 0.0 if denom == 0 and resid == 0 else (resid / denom if denom > 0 else math.inf)

    vx2 = np.asarray(backend.pot.vx(backend.x, t), dtype=float) ** 2
    mask = (weight > 1e-6 * weight.max()) & (vx2 > 1e-3 * max(vx2.max(), np.finfo(float).tiny))
    if not np.any(mask) or vx2.max() == 0:
        sigma, consistent, dev = 0, True, float(np.abs(m).max()) if m.size else 0.0
    else:
        sigma = 1 if np.sum(m.imag[mask] * vx2[mask]) > 0 else -1
        consistent = bool(np.all(np.sign(m.imag[mask]) == sigma))
        dev = float(np.max(np.abs(m[mask] - sigma * 1j * vx2[mask])) / vx2.max())
    Bd, Bpd = backend.b_diag(t), backend.b_diag(t, 1)
    bbp = float(np.linalg.norm(np.diag(Bd) @ np.diag(Bpd) - np.diag(Bpd) @ np.diag(Bd)))
    return CommutatorReport(ratio, sigma, consistent, dev, bbp, float(np.linalg.norm(np.diag(C))))


def commutator_sign_agrees(report: CommutatorReport, sign: int = COMMUTATOR_SIGN) -> bool:
    return report.sigma == sign
