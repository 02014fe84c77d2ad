from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quadsim.controller import (
    IntegratorState,
    LqWeights,
    compute_gain,
    control_law,
    equilibrium_integrator,
    integral_update,
    lq_gain,
    reference_increment,
)
from quadsim.exceptions import DareConvergenceError
from quadsim.harness import NoiseConfig, build_design
from quadsim.estimator import selection_matrix
from quadsim.numerics import dare_residual, spectral_radius
from quadsim.sensors import AvailabilityMask, MeasurementFrame

FULL = AvailabilityMask(True, True, True)
IMU_ONLY = AvailabilityMask(False, False, True)


def test_scalar_gain():
    l, s = lq_gain(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    golden = (1 + np.sqrt(5)) / 2
    assert s[0, 0] == pytest.approx(golden, abs=1e-9)
    assert l[0, 0] == pytest.approx(golden / (golden + 1), abs=1e-9)


def test_default_gain_is_stabilizing(design):
    g = design.gain
    assert g.l_xhat.shape == (4, 12) and g.l_i.shape == (4, 3)
    assert g.spectral_radius < 1.0
    am = design.augmented
    assert g.spectral_radius == pytest.approx(spectral_radius(am.phi_bar - am.gamma_bar @ g.full))


def test_gain_solves_the_riccati_equation(design, scenario):
    am, g = design.augmented, design.gain
    residual = dare_residual(am.phi_bar, am.gamma_bar, scenario.weights.q_bar, scenario.weights.r, g.s)
    assert residual < 1e-9 * (1 + np.linalg.norm(g.s, ord=np.inf))


def test_certainty_equivalence(scenario, design):
    noisy = replace(scenario, noise=NoiseConfig(filter_w=5 * np.eye(12), filter_v=np.eye(9)))
    other = build_design(noisy)
    assert np.array_equal(other.gain.full, design.gain.full)


def test_costlier_input_softens_gain(scenario, design):
    w = scenario.weights
    soft = compute_gain(design.augmented, LqWeights(w.q_bar, 100 * w.r))
    stiff = np.abs(design.gain.full)
    assert np.all(np.abs(soft.full) <= stiff + 1e-12)
    assert np.all(np.abs(soft.full)[stiff > 1e-9] < stiff[stiff > 1e-9])
    assert design.gain.spectral_radius < soft.spectral_radius < 1.0


def test_tiered_preset_is_stabilizing(design):
    g = compute_gain(design.augmented, LqWeights.tiered())
    assert g.spectral_radius < 1.0


def test_non_stabilizable_pair_raises(design):
    broken = replace(design.augmented, gamma_bar=np.zeros_like(design.augmented.gamma_bar))
    with pytest.raises(DareConvergenceError):
        compute_gain(broken, LqWeights.default(), max_iter=200)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"q_bar": np.eye(14), "r": np.eye(4)},
        {"q_bar": np.eye(15), "r": np.zeros((4, 4))},
        {"q_bar": -np.eye(15), "r": np.eye(4)},
    ],
)
def test_weights_validation(kwargs):
    with pytest.raises(ValueError):
        LqWeights(**kwargs)


def test_unknown_preset():
    with pytest.raises(ValueError):
        LqWeights.preset("agresivo")


class TestIntegrator:
    def test_accumulates_tracking_error(self):
        y = np.zeros(9)
        y[:3] = [1.0, 2.0, 3.0]
        e = selection_matrix(FULL)
        out = integral_update(IntegratorState(), np.array([1.5, 2.0, 2.0]), MeasurementFrame(y, FULL), e)
        np.testing.assert_allclose(out.i, [0.5, 0.0, -1.0])

    def test_yolo_fallback_reads_yolo_block(self):
        y = np.zeros(9)
        y[3:6] = [1.0, 1.0, 1.0]
        mask = AvailabilityMask(False, True, True)
        out = integral_update(IntegratorState(), np.ones(3), MeasurementFrame(y, mask), selection_matrix(mask))
        np.testing.assert_allclose(out.i, 0.0)

    def test_accumulate_policy_integrates_reference_during_outage(self):
        out = integral_update(IntegratorState(), np.ones(3), MeasurementFrame(np.zeros(9), IMU_ONLY), np.zeros((3, 9)))
        np.testing.assert_allclose(out.i, 1.0)

    def test_estimate_policy_integrates_estimated_error_during_outage(self):
        p_hat = np.array([0.5, 1.0, 0.25])
        out = integral_update(
            IntegratorState(), np.ones(3), MeasurementFrame(np.zeros(9), IMU_ONLY), np.zeros((3, 9)), "estimate", position_estimate=p_hat
        )
        np.testing.assert_allclose(out.i, [0.5, 0.0, 0.75])

    def test_estimate_policy_ignores_estimate_with_position(self):
        y = np.zeros(9)
        y[:3] = [1.0, 1.0, 1.0]
        e = selection_matrix(FULL)
        out = integral_update(IntegratorState(), np.full(3, 2.0), MeasurementFrame(y, FULL), e, "estimate", position_estimate=np.zeros(3))
        np.testing.assert_allclose(out.i, 1.0)

    def test_estimate_policy_requires_position_estimate(self):
        with pytest.raises(ValueError):
            reference_increment(np.ones(3), np.zeros((3, 9)), "estimate")

    def test_hold_policy_freezes_during_outage(self):
        start = IntegratorState(np.array([0.1, -0.2, 0.3]))
        out = integral_update(start, np.ones(3), MeasurementFrame(np.zeros(9), IMU_ONLY), np.zeros((3, 9)), "hold")
        np.testing.assert_array_equal(out.i, start.i)

    def test_clamp(self):
        out = integral_update(IntegratorState(), np.full(3, 10.0), MeasurementFrame(np.zeros(9), IMU_ONLY), np.zeros((3, 9)), clamp=2.0)
        np.testing.assert_array_equal(out.i, [2.0, 2.0, 2.0])

    def test_clamp_is_centered(self):
        center = np.array([0.0, 0.0, 100.0])
        start = IntegratorState(center)
        out = integral_update(start, np.full(3, 10.0), MeasurementFrame(np.zeros(9), IMU_ONLY), np.zeros((3, 9)), clamp=2.0, center=center)
        np.testing.assert_array_equal(out.i, [2.0, 2.0, 102.0])

    def test_reference_increment_policies(self):
        r = np.ones(3)
        e = selection_matrix(FULL)
        np.testing.assert_array_equal(reference_increment(r, e, "hold"), r)
        np.testing.assert_array_equal(reference_increment(r, np.zeros((3, 9)), "hold"), np.zeros(3))
        with pytest.raises(ValueError):
            reference_increment(r, e, "olvidar")

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            IntegratorState(np.array([np.inf, 0.0, 0.0]))


class TestControlLaw:
    def test_zero_state_gives_zero_input(self, design):
        u = control_law(design.gain, np.zeros(15), IntegratorState())
        np.testing.assert_array_equal(u.as_vector(), np.zeros(4))

    @pytest.mark.parametrize("position", [[0.0, 0.0, 1.0], [3.0, -2.0, 1.5]])
    def test_equilibrium_integrator_cancels_the_command(self, design, position):
        x_hat = np.zeros(12)
        x_hat[:3] = position
        i = equilibrium_integrator(design.gain, x_hat)
        assert abs(i[2]) > 1.0
        u = control_law(design.gain, x_hat, IntegratorState(i)).as_vector()
        np.testing.assert_allclose(u, 0.0, atol=1e-8)
        np.testing.assert_allclose(equilibrium_integrator(design.gain, position), i)

    def test_equilibrium_integrator_rejects_bad_size(self, design):
        with pytest.raises(ValueError):
            equilibrium_integrator(design.gain, np.zeros(5))

    @settings(max_examples=25, deadline=None)
    @given(
        x=arrays(np.float64, 15, elements=st.floats(-5, 5)),
        i=arrays(np.float64, 3, elements=st.floats(-5, 5)),
    )
    def test_linear_and_odd(self, design, x, i):
        g = design.gain
        u = control_law(g, x, IntegratorState(i)).as_vector()
        u_neg = control_law(g, -x, IntegratorState(-i)).as_vector()
        np.testing.assert_allclose(u_neg, -u, atol=1e-9)
        np.testing.assert_allclose(u, -g.l_xhat @ x[:12] - g.l_i @ i, atol=1e-12)
