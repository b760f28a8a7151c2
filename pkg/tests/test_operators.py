import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from compact_splitting.duhamel import DenseBackend, matrix_exponential
from compact_splitting.errors import CapabilityError, InvalidInputError, ParameterError
from compact_splitting.operators import (
    COMMUTATOR_SIGN,
    Grid1D,
    State,
    apply_btilde_propagator,
    apply_free_propagator,
    apply_potential_propagator,
    commutator_multiplier,
    constant_potential,
    moving_quadratic,
    sine_packet,
)
from compact_splitting.splitting import coefficients

from conftest import random_state


def test_grid_geometry():
    g = Grid1D(8, -2.0, 2.0)
    assert g.dx == 0.5
    assert g.points[0] == -2.0 and g.points[-1] == 1.5
    assert np.allclose(sorted(g.wavenumbers), 2 * np.pi / 4 * np.arange(-4, 4))


@pytest.mark.parametrize("n", [3, 7, 2, 0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ParameterError):
        Grid1D(n, 0.0, 1.0)


def test_grid_rejects_empty_interval():
    with pytest.raises(ParameterError):
        Grid1D(8, 1.0, 1.0)


def test_state_rejects_nan(grid16):
    vals = np.zeros(16, complex)
    vals[3] = np.nan
    with pytest.raises(InvalidInputError):
        State(vals, grid16)


def test_state_rejects_wrong_shape(grid16):
    with pytest.raises(InvalidInputError):
        State(np.zeros(15), grid16)


def test_free_propagator_identity_at_zero_step(grid16, rng):
    s = State(random_state(rng, 16), grid16)
    out = apply_free_propagator(s, 0.7, 0.0)
    assert np.array_equal(out.values, s.values)


def test_free_propagator_matches_dense_exponential(grid16, pot, rng):
    # exp(c h A) from the spectral differentiation matrix
    s = State(random_state(rng, 16), grid16)
    be = DenseBackend(grid16, pot)
    for c, h in [(0.5, 0.1), (0.11, 0.03), (1.0, 1.0)]:
        dense = matrix_exponential(be.A_mat, c * h) @ s.values
        assert np.linalg.norm(apply_free_propagator(s, c, h).values - dense) < 1e-12 * np.linalg.norm(dense)


def test_free_propagator_plane_wave(grid16):
    # a single Fourier mode only picks up the phase exp(-i k^2 t / 2)
    k = 2 * np.pi * 3 / grid16.length
    s = State(np.exp(1j * k * grid16.points), grid16)
    out = apply_free_propagator(s, 1.0, 0.2)
    assert np.allclose(out.values, s.values * np.exp(-0.5j * k * k * 0.2), atol=1e-13)


@given(c=st.floats(-3, 3), h=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_propagators_are_unitary(c, h, seed):
    g = Grid1D(32, -5.0, 5.0)
    rng = np.random.default_rng(seed)
    s = State(random_state(rng, 32), g)
    pot = moving_quadratic()
    free = apply_free_propagator(s, c, h)
    assert abs(free.norm() - s.norm()) <= 1e-12 * s.norm()
    mult = apply_potential_propagator(s, c, h, h, pot)
    assert abs(mult.norm() - s.norm()) <= 1e-12 * s.norm()
    mid = apply_btilde_propagator(s, 0.5 * h, h, coefficients(0.2), pot)
    assert abs(mid.norm() - s.norm()) <= 1e-12 * s.norm()


def test_free_propagator_group_property(grid16, rng):
    s = State(random_state(rng, 16), grid16)
    one = apply_free_propagator(apply_free_propagator(s, 0.3, 0.1), 0.2, 0.1)
    two = apply_free_propagator(s, 0.5, 0.1)
    assert np.allclose(one.values, two.values, atol=1e-13)


def test_potential_propagator_zero_potential(grid16, rng):
    s = State(random_state(rng, 16), grid16)
    out = apply_potential_propagator(s, 1.0, 0.3, 0.1, constant_potential(0.0))
    assert np.array_equal(out.values, s.values)


def test_potential_propagator_constant_potential_is_global_phase(grid16, rng):
    s = State(random_state(rng, 16), grid16)
    out = apply_potential_propagator(s, 0.5, 0.0, 0.2, constant_potential(3.0))
    assert np.allclose(out.values, s.values * np.exp(-0.3j))


def test_potential_propagator_rejects_nonfinite_potential(grid16):
    from compact_splitting.operators import PotentialSpec

    bad = PotentialSpec("bad", lambda x, t: np.full(np.shape(x), np.inf), lambda x, t: 0 * x, lambda x, t: 0 * x)
    with pytest.raises(InvalidInputError):
        apply_potential_propagator(State(np.ones(16), grid16), 1.0, 0.0, 0.1, bad)


def test_propagators_reject_nonfinite_coefficients(grid16):
    s = State(np.ones(16), grid16)
    with pytest.raises(InvalidInputError):
        apply_free_propagator(s, np.nan, 0.1)


def test_commutator_multiplier_quadratic(pot):
    x = np.linspace(-3, 3, 7)
    m = commutator_multiplier(x, 0.4, pot)
    assert np.allclose(m, COMMUTATOR_SIGN * 1j * (2 * (x - 0.4)) ** 2)
    assert np.all(m.real == 0)


def test_commutator_sign_matches_dense_oracle():
    from compact_splitting.duhamel import commutator_check

    be = DenseBackend(Grid1D(64, -8.0, 8.0), moving_quadratic())
    assert commutator_check(be, 0.0).sigma == COMMUTATOR_SIGN


def test_btilde_reduces_to_potential_when_r_vanishes(grid16, pot, rng):
    from compact_splitting.splitting import SplittingCoefficients

    s = State(random_state(rng, 16), grid16)
    c = SplittingCoefficients(tau=0.0, p=0.0, q=0.7, r=0.0)
    out = apply_btilde_propagator(s, 0.2, 0.1, c, pot)
    ref = apply_potential_propagator(s, 0.7, 0.2, 0.1, pot)
    assert np.allclose(out.values, ref.values)


def test_potential_time_derivatives(pot):
    x = np.array([0.0, 1.0])
    assert np.allclose(pot.dt(1, x, 0.5), -2 * (x - 0.5))
    assert np.allclose(pot.dt(2, x, 0.5), 2.0)
    assert np.allclose(pot.dt(4, x, 0.5), 0.0)
    with pytest.raises(CapabilityError):
        pot.dt(5, x, 0.5)


def test_sine_packet_values():
    x = np.array([3.0, 0.0])
    assert np.allclose(sine_packet(x), [0.0, np.sin(-60.0)])
