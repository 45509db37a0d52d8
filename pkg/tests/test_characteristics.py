"""Tests of the characteristics integrator: signs, closed forms, convergence."""

import numpy as np
import pytest

import marcus_transport as mt
from marcus_transport.characteristics import CoefficientSet

SINH = lambda x: np.sqrt(x ** 2 + 1.0)


def test_drift_sign_reverses_transport():
    # dx = -a dt with a = 0.5, so the characteristic moves left.
    coeffs = CoefficientSet.from_scalar(a=lambda x: np.full_like(x, 0.5))
    state = mt.CharacteristicState(x=[0.0], xi=1.0, zeta=0.0, t=0.0)
    for _ in range(100):
        state = mt.step_continuous(state, coeffs, 0.01, [0.0])
    assert state.x[0] == pytest.approx(-0.5, abs=1e-12)
    assert state.t == pytest.approx(1.0)


def test_xi_exponential_decay_in_b():
    coeffs = CoefficientSet.from_scalar(b=lambda x: np.full_like(x, 0.7))
    state = mt.CharacteristicState(x=[0.0], xi=1.0, zeta=0.0, t=0.0)
    n = 1000
    for _ in range(n):
        state = mt.step_continuous(state, coeffs, 1.0 / n, [0.0])
    assert state.xi == pytest.approx(np.exp(-0.7), rel=1e-6)


def test_zeta_source_accumulation():
    coeffs = CoefficientSet.from_scalar(c=lambda x: np.full_like(x, 0.4))
    state = mt.CharacteristicState(x=[0.0], xi=1.0, zeta=0.0, t=0.0)
    for _ in range(500):
        state = mt.step_continuous(state, coeffs, 1.0 / 500, [0.0])
    assert state.zeta == pytest.approx(-0.4, rel=1e-9)


def test_stratonovich_exponential():
    """dxi = -xi o dW integrates to xi = exp(-W_1) under the chain rule."""
    coeffs = CoefficientSet.from_scalar(B=lambda x: np.ones_like(x))
    drv = mt.make_realization(None, 1.0, 2.0 ** -12, seed=5, with_brownian=True,
                              output_times=[1.0])
    flow = mt.integrate_path(coeffs, drv, np.array([0.0]), [1.0])
    w1 = mt.brownian_path(drv)[-1, 0]
    assert flow.E[0, 0] == pytest.approx(np.exp(-w1), rel=1e-2)


def test_apply_jump_zero_is_identity():
    coeffs = CoefficientSet.from_scalar(alpha=SINH)
    state = mt.CharacteristicState(x=[0.4], xi=1.2, zeta=0.3, t=0.5)
    with pytest.raises(ValueError):
        mt.JumpEvent(0.5, [0.0])
    out = mt.apply_jump(state, coeffs, [1e-300])
    assert out.x[0] == pytest.approx(0.4, abs=1e-12)
    assert out.t == state.t


def test_apply_jump_linear_field():
    coeffs = CoefficientSet.from_scalar(alpha=lambda x: x,
                                        beta=lambda x: np.full_like(x, 0.5))
    state = mt.CharacteristicState(x=[2.0], xi=1.0, zeta=0.0, t=0.0)
    out = mt.apply_jump(state, coeffs, [0.3], substeps=64)
    assert out.x[0] == pytest.approx(2.0 * np.exp(-0.3), rel=1e-10)
    assert out.xi == pytest.approx(np.exp(-0.15), rel=1e-10)


def test_two_jump_sinh_composition():
    """Two jumps of the sinh transport compose through arcsinh coordinates."""
    spec = mt.LevyMeasureSpec(kind="finite_activity", intensity=2.0,
                              mark_distribution=mt.MarkDistribution("uniform", (-1.0, 1.0)))
    coeffs = CoefficientSet.from_scalar(alpha=SINH)
    drv = mt.make_realization(spec, 1.0, 1e-3, seed=12, with_brownian=False,
                              output_times=[1.0])
    x0 = np.array([-0.5, 0.0, 1.5])
    flow = mt.integrate_path(coeffs, drv, x0, [1.0])
    z1 = mt.jump_path_value(drv, 1.0)[0]
    np.testing.assert_allclose(flow.x[:, 0, 0], np.sinh(np.arcsinh(x0) - z1),
                               atol=1e-8)


def test_compensator_zero_cases():
    spec = mt.LevyMeasureSpec(kind="alpha_stable", alpha=1.5, scale=1.0,
                              truncation_epsilon=0.1)
    state = mt.CharacteristicState(x=[0.5], xi=1.0, zeta=0.0, t=0.0)
    # No jump coefficients: the Marcus correction vanishes identically.
    comp = mt.small_jump_compensator(CoefficientSet.from_scalar(), state, spec)
    np.testing.assert_allclose(comp, 0.0, atol=1e-14)
    # Linear-in-x jump field with symmetric measure: x-component integrand is
    # x*(e^{-z} - 1 + z), even part survives; just check convergence runs.
    coeffs = CoefficientSet.from_scalar(alpha=lambda x: x)
    comp = mt.small_jump_compensator(coeffs, state, spec)
    assert np.all(np.isfinite(comp))


def test_compensator_against_refined_quadrature():
    spec = mt.LevyMeasureSpec(kind="alpha_stable", alpha=1.2, scale=0.5,
                              truncation_epsilon=0.05)
    coeffs = CoefficientSet.from_scalar(alpha=SINH, beta=lambda x: 0.2 * np.cos(x))
    state = mt.CharacteristicState(x=[0.3], xi=1.1, zeta=0.1, t=0.0)
    base = mt.small_jump_compensator(coeffs, state, spec, n_nodes=32)
    fine = mt.small_jump_compensator(coeffs, state, spec, n_nodes=96)
    np.testing.assert_allclose(base, fine, atol=1e-4)


def test_integrate_path_requires_output_times_on_grid():
    drv = mt.make_realization(None, 1.0, 0.1, seed=0, output_times=[1.0])
    coeffs = CoefficientSet.from_scalar()
    with pytest.raises(ValueError):
        mt.integrate_path(coeffs, drv, np.array([0.0]), [0.333])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergent_trajectories_are_flagged_not_fatal():
    coeffs = CoefficientSet.from_scalar(a=lambda x: -x ** 3)
    drv = mt.make_realization(None, 1.0, 1e-3, seed=0, output_times=[1.0])
    x0 = np.array([-0.5, 0.0, 0.5, 40.0])
    flow = mt.integrate_path(coeffs, drv, x0, [1.0])
    assert flow.diverged[3]
    assert not flow.diverged[:3].any()
    assert np.isnan(flow.x[3, 0, 0])
    assert np.all(np.isfinite(flow.x[:3, 0, 0]))


def test_domain_box_freezes_escapees():
    coeffs = CoefficientSet.from_scalar(a=lambda x: -np.ones_like(x))
    drv = mt.make_realization(None, 1.0, 1e-2, seed=0, output_times=[1.0])
    flow = mt.integrate_path(coeffs, drv, np.array([0.0, 4.5]), [1.0],
                             domain_box=(-5.0, 5.0))
    assert not flow.diverged[0]
    assert flow.diverged[1]


def test_xi_positivity_along_flow():
    coeffs = CoefficientSet.from_scalar(b=lambda x: np.sin(x),
                                        B=lambda x: 0.2 * np.cos(x))
    drv = mt.make_realization(None, 1.0, 1e-3, seed=8, with_brownian=True,
                              output_times=[0.5, 1.0])
    flow = mt.integrate_path(coeffs, drv, np.linspace(-2, 2, 21), [0.5, 1.0])
    assert np.all(flow.E[~flow.diverged] > 0.0)


def test_xi_closed_form_check_zero_coefficients():
    drv = mt.make_realization(None, 1.0, 1e-2, seed=0, output_times=[1.0])
    coeffs = CoefficientSet.from_scalar()
    flow = mt.integrate_path(coeffs, drv, np.linspace(-1, 1, 5), [1.0],
                             keep_path=True)
    assert mt.xi_closed_form_check(flow) == 0.0


def test_xi_closed_form_check_drift_only():
    coeffs = CoefficientSet.from_scalar(b=lambda x: 0.5 + 0.1 * np.tanh(x))
    drv = mt.make_realization(None, 1.0, 1e-3, seed=0, output_times=[1.0])
    flow = mt.integrate_path(coeffs, drv, np.linspace(-1, 1, 9), [1.0],
                             keep_path=True)
    # The Heun update truncates the per-step exponential at second order, so
    # the replay agrees to O(dt**2) overall.
    assert mt.xi_closed_form_check(flow) <= 1e-7


def test_xi_closed_form_check_small_noise():
    # Small-amplitude B keeps the quadrature replay within the stated band.
    coeffs = CoefficientSet.from_scalar(b=lambda x: 0.3 * np.cos(x),
                                        B=lambda x: 0.05 * np.sin(x))
    drv = mt.make_realization(None, 1.0, 1e-3, seed=4, with_brownian=True,
                              output_times=[1.0])
    flow = mt.integrate_path(coeffs, drv, np.linspace(-1, 1, 9), [1.0],
                             keep_path=True)
    assert mt.xi_closed_form_check(flow) <= 1e-6


def test_xi_closed_form_check_with_jumps():
    spec = mt.LevyMeasureSpec(kind="finite_activity", intensity=3.0,
                              mark_distribution=mt.MarkDistribution("uniform", (-0.5, 0.5)))
    coeffs = CoefficientSet.from_scalar(alpha=SINH, beta=lambda x: 0.3 * np.cos(x))
    drv = mt.make_realization(spec, 1.0, 1e-3, seed=1, with_brownian=False,
                              output_times=[1.0])
    flow = mt.integrate_path(coeffs, drv, np.linspace(-1, 1, 9), [1.0],
                             keep_path=True)
    assert mt.xi_closed_form_check(flow) <= 1e-6


def test_deterministic_convergence_second_order():
    coeffs = CoefficientSet.from_scalar(a=lambda x: np.sin(x) + 0.5)
    x0 = np.array([0.2])
    errors = []
    dts = [2.0 ** -k for k in (4, 5, 6, 7)]
    ref = None
    drv_fine = mt.make_realization(None, 1.0, 2.0 ** -12, seed=0, output_times=[1.0])
    ref = mt.integrate_path(coeffs, drv_fine, x0, [1.0]).x[0, 0, 0]
    for dt in dts:
        drv = mt.make_realization(None, 1.0, dt, seed=0, output_times=[1.0])
        val = mt.integrate_path(coeffs, drv, x0, [1.0]).x[0, 0, 0]
        errors.append(abs(val - ref))
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    assert slope >= 1.9


def test_jump_only_flow_dt_independent():
    """With zero continuous coefficients every dt gives the same endpoints."""
    spec = mt.LevyMeasureSpec(kind="finite_activity", intensity=3.0,
                              mark_distribution=mt.MarkDistribution("uniform", (-1.0, 1.0)))
    coeffs = CoefficientSet.from_scalar(alpha=SINH)
    x0 = np.array([0.5])
    vals = []
    for dt in (1e-1, 1e-2, 1e-3):
        drv = mt.make_realization(spec, 1.0, dt, seed=3, with_brownian=False,
                                  output_times=[1.0])
        vals.append(mt.integrate_path(coeffs, drv, x0, [1.0]).x[0, 0, 0])
    assert vals[0] == pytest.approx(vals[2], abs=1e-12)
    assert vals[1] == pytest.approx(vals[2], abs=1e-12)


def test_integrate_path_deterministic_given_seed():
    spec = mt.LevyMeasureSpec(kind="finite_activity", intensity=2.0,
                              mark_distribution=mt.MarkDistribution("normal", (0.0, 0.4)))
    coeffs = CoefficientSet.from_scalar(a=lambda x: 0.1 * x, alpha=SINH)
    outs = []
    for _ in range(2):
        drv = mt.make_realization(spec, 1.0, 1e-2, seed=77, with_brownian=True,
                                  output_times=[1.0])
        outs.append(mt.integrate_path(coeffs, drv, np.linspace(-1, 1, 11), [1.0]).x)
    np.testing.assert_array_equal(outs[0], outs[1])
