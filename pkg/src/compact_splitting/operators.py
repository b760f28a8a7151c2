"""Grid representation of A = (i/2) d^2/dx^2 and B(t) = -i V(x, t).

The free part is applied exactly as a Fourier multiplier on a periodic grid;
potential parts are pointwise phase multiplications. All propagators are
unitary in the discrete L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import CapabilityError, InvalidInputError, ParameterError

if TYPE_CHECKING:
    from .splitting import SplittingCoefficients

# Sign of (B [A, B] - [A, B] B) relative to i |dV/dx|^2 on smooth states.
# Fixed by the dense commutator oracle (duhamel.commutator_check); the direct
# computation [B, [A, B]] u = i |V_x|^2 u agrees.
COMMUTATOR_SIGN = 1


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid x_j = x_min + j dx, j = 0..n-1."""

    n: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ParameterError(f"grid size must be an even integer >= 4, got {self.n}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise ParameterError(f"need finite x_min < x_max, got [{self.x_min}, {self.x_max}]")
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """k = 2 pi m / L in FFT order, m in {-n/2, ..., n/2 - 1}."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def norm(self, values) -> float:
        """Grid L2 norm (sum |u_j|^2 dx)^(1/2)."""
        return float(np.sqrt(np.sum(np.abs(values) ** 2) * self.dx))


@dataclass(frozen=True)
class State:
    """Complex wavefunction sampled on a grid."""

    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n,):
            raise InvalidInputError(f"state has shape {vals.shape}, grid needs ({self.grid.n},)")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("state contains non-finite entries")
        object.__setattr__(self, "values", vals)

    def norm(self) -> float:
        return self.grid.norm(self.values)

    def with_values(self, values) -> "State":
        return State(values, self.grid)


Field = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class PotentialSpec:
    """V(x, t) together with its x- and t-derivatives.

    ``time_derivatives`` holds d^k V / dt^k for k = 2, 3, ... as far as the
    caller can supply them; the closed-form interaction derivatives need them.
    """

    name: str
    v: Field
    vx: Field
    vt: Field
    time_derivatives: Sequence[Field] = field(default=())

    @property
    def max_time_derivative(self) -> int:
        return 1 + len(self.time_derivatives)

    def dt(self, k: int, x, t: float) -> np.ndarray:
        """k-th time derivative of V at (x, t); k = 0 is V itself."""
        if k == 0:
            return self.v(x, t)
        if k == 1:
            return self.vt(x, t)
        if k - 2 < len(self.time_derivatives):
            return self.time_derivatives[k - 2](x, t)
        raise CapabilityError(
            f"potential {self.name!r} supplies time derivatives up to order "
            f"{self.max_time_derivative}, order {k} requested"
        )


def _const(c):
    return lambda x, t: np.full(np.shape(x), float(c))


def moving_quadratic() -> PotentialSpec:
    """V(x, t) = (x - t)^2."""
    return PotentialSpec(
        name="moving-quadratic",
        v=lambda x, t: (np.asarray(x) - t) ** 2,
        vx=lambda x, t: 2.0 * (np.asarray(x) - t),
        vt=lambda x, t: -2.0 * (np.asarray(x) - t),
        time_derivatives=(_const(2.0), _const(0.0), _const(0.0)),
    )


def constant_potential(value: float = 0.0) -> PotentialSpec:
    zero = _const(0.0)
    return PotentialSpec(
        name=f"constant({value:g})",
        v=_const(value),
        vx=zero,
        vt=zero,
        time_derivatives=(zero, zero, zero),
    )


POTENTIALS = {"moving-quadratic": moving_quadratic}


def sine_packet(x):
    """u(x, 0) = sin(20 (x - 3)) / (1 + x^10)."""
    x = np.asarray(x, dtype=float)
    return (np.sin(20.0 * (x - 3.0)) / (1.0 + x ** 10)).astype(complex)


def _check_real(name, value):
    if not np.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value}")


@lru_cache(maxsize=64)
def _free_multiplier(grid: Grid1D, ch: float) -> np.ndarray:
    k = grid.wavenumbers
    return np.exp(-0.5j * ch * k * k)


def free_propagate(values: np.ndarray, grid: Grid1D, ch: float) -> np.ndarray:
    """Array-level exp(ch A) on the periodic grid."""
    if ch == 0.0:
        return values.copy()
    return np.fft.ifft(_free_multiplier(grid, float(ch)) * np.fft.fft(values))


def apply_free_propagator(state: State, c: float, h: float) -> State:
    """exp(c h A) state, with A = (i/2) d^2/dx^2 applied as exp(-i c h k^2 / 2)."""
    _check_real("c", c)
    _check_real("h", h)
    return State(free_propagate(state.values, state.grid, c * h), state.grid)


def _potential_values(pot: PotentialSpec, x, t):
    vals = np.asarray(pot.v(x, t), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError(f"potential {pot.name!r} is non-finite at t={t}")
    return vals


def apply_potential_propagator(
    state: State, a: float, t_eval: float, h: float, pot: PotentialSpec
) -> State:
    """exp(a h B(t_eval)) state, i.e. pointwise multiplication by exp(-i a h V)."""
    _check_real("a", a)
    _check_real("h", h)
    v = _potential_values(pot, state.grid.points, t_eval)
    return State(state.values * np.exp(-1j * a * h * v), state.grid)


def commutator_multiplier(x, t: float, pot: PotentialSpec, sign: int | None = None):
    """Multiplication symbol of [B(t), [A, B(t)]]: sign * i * |V_x(x, t)|^2."""
    if sign is None:
        sign = COMMUTATOR_SIGN
    vx = np.asarray(pot.vx(x, t), dtype=float)
    if not np.all(np.isfinite(vx)):
        raise InvalidInputError(f"potential {pot.name!r} has non-finite V_x at t={t}")
    return sign * 1j * vx * vx


def btilde_exponent(grid: Grid1D, t_eval: float, h: float, q: float, r: float, pot, sign=None):
    """Pointwise exponent h (q B + r h^2 [B, [A, B]]) of the modified middle factor."""
    x = grid.points
    v = _potential_values(pot, x, t_eval)
    return -1j * h * q * v + h ** 3 * r * commutator_multiplier(x, t_eval, pot, sign)


def apply_btilde_propagator(
    state: State, t_eval: float, h: float, coeffs: "SplittingCoefficients", pot: PotentialSpec
) -> State:
    """exp(h B~(t_eval)) state with B~ = q B + r h^2 [B, [A, B]].

    The exponent is purely imaginary, so every entry keeps its modulus.
    """
    _check_real("h", h)
    expo = btilde_exponent(state.grid, t_eval, h, coeffs.q, coeffs.r, pot)
    return State(state.values * np.exp(expo), state.grid)
