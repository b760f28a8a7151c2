import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from compact_splitting.errors import DivergenceError, InvalidInputError, ParameterError
from compact_splitting.operators import (
    Grid1D,
    PotentialSpec,
    State,
    apply_free_propagator,
    constant_potential,
    moving_quadratic,
    sine_packet,
)
from compact_splitting.splitting import (
    TAU_MAX,
    TAU_OPT,
    _step_values,
    coefficients,
    error_budget,
    evolve,
    step_schedule,
    step_tacb4,
)
from compact_splitting import kernels


def test_tau_opt_value():
    assert TAU_OPT == pytest.approx(0.1127016653792583, abs=1e-15)
    assert 10 * TAU_OPT**2 - 10 * TAU_OPT + 1 == pytest.approx(0.0, abs=1e-15)


def test_coefficients_at_zero():
    c = coefficients(0.0)
    assert c.p == pytest.approx(1 / 6, abs=1e-15)
    assert c.q == pytest.approx(2 / 3, abs=1e-15)
    assert c.r == pytest.approx(1 / 72, abs=1e-15)


def test_coefficients_at_tau_opt():
    # z = 1/(1 - 2 tau) = sqrt(15)/3 gives p = 5/18
    c = coefficients(TAU_OPT)
    assert c.p == pytest.approx(5 / 18, rel=1e-14)
    assert c.q == pytest.approx(4 / 9, rel=1e-14)


@given(st.floats(0.0, 0.49))
def test_coefficients_consistency(tau):
    c = coefficients(tau)
    assert 2 * c.p + c.q == pytest.approx(1.0, abs=1e-13)
    z = 1 / (1 - 2 * tau)
    assert c.r == pytest.approx((1 - z + z**3 / 6) / 12, rel=1e-12, abs=1e-15)
    assert c.p > 0


@pytest.mark.parametrize("tau", [-0.01, 0.5, TAU_MAX, 0.7, math.nan])
def test_coefficients_reject_bad_tau(tau):
    with pytest.raises(ParameterError):
        coefficients(tau)


def test_coefficients_accept_just_below_limit():
    assert np.isfinite(coefficients(TAU_MAX - 1e-9).r)


def _smooth(grid):
    x = grid.points
    u = np.exp(-(x**2)) * (1 + 0.4j * x)
    return State(u / grid.norm(u), grid)


def test_step_with_zero_potential_is_free_flow():
    g = Grid1D(64, -8, 8)
    s = _smooth(g)
    out = step_tacb4(s, 0.0, 0.1, coefficients(0.2), constant_potential(0.0))
    ref = apply_free_propagator(s, 1.0, 0.1)
    assert np.allclose(out.values, ref.values, atol=1e-13)


def test_tau_zero_skipping_identity_factors_changes_nothing():
    g = Grid1D(64, -8, 8)
    s = _smooth(g)
    pot = moving_quadratic()
    a = step_tacb4(s, 0.0, 0.05, coefficients(0.0), pot)
    b = step_tacb4(s, 0.0, 0.05, coefficients(0.0), pot, skip_identity=False)
    assert np.allclose(a.values, b.values, atol=1e-14)


def test_step_rejects_bad_step_size():
    g = Grid1D(16, -4, 4)
    with pytest.raises(InvalidInputError):
        step_tacb4(State(np.ones(16), g), 0.0, -0.1, coefficients(0.0), moving_quadratic())


@given(tau=st.floats(0.0, 0.45), h=st.floats(1e-4, 0.2))
def test_step_is_unitary(tau, h):
    g = Grid1D(64, -8, 8)
    s = _smooth(g)
    out = step_tacb4(s, 0.1, h, coefficients(tau), moving_quadratic())
    assert abs(out.norm() - s.norm()) < 1e-12


@given(t0=st.floats(-2, 2), span=st.floats(1e-3, 5), h=st.floats(1e-3, 1))
def test_step_schedule_covers_interval(t0, span, h):
    steps, last = step_schedule(t0, t0 + span, h)
    assert 0 < last <= h * (1 + 1e-9) or steps == 1
    assert (steps - 1) * h + last == pytest.approx(span, rel=1e-12, abs=1e-14)


def test_step_schedule_exact_multiple_has_no_sliver():
    assert step_schedule(0.0, 0.5, 1 / 640) == (320, pytest.approx(1 / 640))


def test_step_schedule_rejects_backwards_interval():
    with pytest.raises(ParameterError):
        step_schedule(1.0, 0.5, 0.1)


def test_evolve_reports_steps_and_drift():
    g = Grid1D(256, -20, 20)
    s = State(sine_packet(g.points), g)
    rep = evolve(s, 0.0, 0.1, 0.01, coefficients(TAU_OPT), moving_quadratic())
    assert rep.steps == 10
    assert rep.norm_drift < 1e-13
    assert rep.wall_time >= 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_evolve_raises_on_divergence():
    huge = PotentialSpec(
        "huge",
        v=lambda x, t: 0.0 * x,
        vx=lambda x, t: np.full(np.shape(x), 1e200),
        vt=lambda x, t: 0.0 * x,
    )
    g = Grid1D(16, -4, 4)
    with pytest.raises(DivergenceError) as info:
        evolve(State(np.ones(16), g), 0.0, 1.0, 0.5, coefficients(0.2), huge)
    assert info.value.step == 0


def _global_errors(sign, hs, tau=TAU_OPT):
    g = Grid1D(128, -10, 10)
    s = _smooth(g)
    pot = moving_quadratic()
    coeffs = coefficients(tau)

    def run(h):
        u = s.values
        steps = round(0.5 / h)
        for k in range(steps):
            u = _step_values(u, g, k * h, h, coeffs, pot, sign=sign)
        return u

    ref = run(1 / 2560)
    return [g.norm(run(h) - ref) for h in hs]


def test_global_order_four():
    hs = [1 / 20, 1 / 40, 1 / 80, 1 / 160]
    errs = _global_errors(+1, hs)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 3.8 < slope < 4.3


def test_wrong_commutator_sign_loses_order():
    hs = [1 / 20, 1 / 40, 1 / 80, 1 / 160]
    slope = np.polyfit(np.log(hs), np.log(_global_errors(-1, hs)), 1)[0]
    assert slope < 3.0


def test_error_budget_scaling():
    a = error_budget(1e-3, TAU_OPT, 2.0, 3.0, 1.0, 1.0)
    b = error_budget(5e-4, TAU_OPT, 2.0, 3.0, 1.0, 1.0)
    assert a.r_e / b.r_e == pytest.approx(32.0, rel=1e-12)
    assert a.rv_bound / b.rv_bound == pytest.approx(32.0, rel=1e-2)


def test_error_budget_closed_forms():
    h, nb, nbt, ch, nu = 0.1, 2.0, 1.5, 1.2, 0.9
    c = coefficients(0.0)
    eb = error_budget(h, 0.0, nb, nbt, ch, nu)
    x = h * ch * nb
    assert eb.rv_bound == pytest.approx(math.exp(x) * x**5 / 120 * ch * nu)
    assert eb.r_e == pytest.approx(h**5 / 120 * (2 * c.p**5 * nb**5 + nbt**5) * ch**3 * nu)
    cs = kernels.coefficient_set(0.0)
    assert eb.P_a == abs(cs.P_a) and eb.R_b == abs(cs.R_b)


def test_error_budget_rejects_bad_inputs():
    with pytest.raises(ParameterError):
        error_budget(0.1, 0.0, -1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        error_budget(0.1, 0.0, 1.0, 1.0, 0.5, 1.0)
