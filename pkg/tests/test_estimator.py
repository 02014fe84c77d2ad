from dataclasses import replace

import numpy as np
import pytest

from quadsim.estimator import (
    N_AUG,
    AugmentedEstimate,
    build_augmented,
    initial_estimate,
    kf_step,
    selection_matrix,
)
from quadsim.exceptions import SingularInnovationError
from quadsim.model import build_discrete_model
from quadsim.sensors import AvailabilityMask, MeasurementFrame

V_NOMINAL = np.diag([0.05] * 3 + [0.08] * 3 + [0.01] * 3)
FULL = AvailabilityMask(True, True, True)


@pytest.fixture(scope="module")
def augmented(params):
    return build_augmented(build_discrete_model(params, 0.01 * np.eye(12), V_NOMINAL))


def _oracle_step(x, p, am, y, u, r):
    """Forma filtrada más predicción decorrelada, con disponibilidad completa."""
    e = selection_matrix(FULL)
    f = am.phi_bar_for(e)
    e_bar = am.e_bar_for(e)
    c, rv = am.c_bar, am.v2
    q = e_bar @ am.v1 @ e_bar.T
    m = e_bar @ am.v12
    j = m @ np.linalg.inv(rv)

    s = c @ p @ c.T + rv
    kf = p @ c.T @ np.linalg.inv(s)
    x_f = x + kf @ (y - c @ x)
    p_f = p - kf @ c @ p

    a = f - j @ c
    x_next = a @ x_f + am.gamma_bar @ u + am.i_bar @ r + j @ y
    p_next = a @ p_f @ a.T + q - j @ rv @ j.T
    return x_next, p_next


class TestSelection:
    @pytest.mark.parametrize(
        "mask, block",
        [((1, 1, 1), 0), ((1, 0, 0), 0), ((0, 1, 1), 3), ((0, 1, 0), 3)],
    )
    def test_position_source(self, mask, block):
        e = selection_matrix(AvailabilityMask(*mask))
        np.testing.assert_array_equal(e[:, block:block + 3], np.eye(3))
        assert np.count_nonzero(e) == 3

    def test_no_position_gives_zero(self):
        assert not np.any(selection_matrix(AvailabilityMask(False, False, True)))


class TestAugmentedModel:
    def test_block_structure(self, augmented):
        assert augmented.phi_bar.shape == (15, 15)
        assert augmented.v1.shape == (21, 21) and augmented.v12.shape == (21, 9)
        np.testing.assert_array_equal(augmented.v12[12:], V_NOMINAL)
        assert not np.any(augmented.v12[:12])
        np.testing.assert_array_equal(augmented.i_bar[12:], np.eye(3))
        np.testing.assert_array_equal(augmented.phi_bar[12:, :3], -np.eye(3))

    def test_zero_selection_decouples_integrators(self, augmented):
        phi_bar = augmented.phi_bar_for(np.zeros((3, 9)))
        assert not np.any(phi_bar[12:, :12])
        np.testing.assert_array_equal(phi_bar[12:, 12:], np.eye(3))

    def test_rejects_singular_v(self, params):
        v = V_NOMINAL.copy()
        v[0, 0] = 0.0
        with pytest.raises(ValueError):
            build_augmented(build_discrete_model(params, np.eye(12), v))


class TestKalmanStep:
    def test_matches_decorrelated_oracle(self, augmented):
        rng = np.random.default_rng(11)
        x_ref = rng.normal(size=N_AUG)
        p_ref = np.eye(N_AUG)
        est = AugmentedEstimate(x_hat=x_ref.copy(), p=p_ref.copy())
        for _ in range(20):
            y, u, r = rng.normal(size=9), rng.normal(size=4), 0.01 * rng.normal(size=3)
            est = kf_step(est, augmented, MeasurementFrame(y, FULL), u, r)
            x_ref, p_ref = _oracle_step(x_ref, p_ref, augmented, y, u, r)
            np.testing.assert_allclose(est.x_hat, x_ref, rtol=1e-9, atol=1e-10)
            np.testing.assert_allclose(est.p, p_ref, rtol=1e-9, atol=1e-10)

    def test_no_measurement_is_pure_prediction(self, augmented):
        est = initial_estimate(np.arange(12.0), np.eye(N_AUG))
        mask = AvailabilityMask(False, False, False)
        out = kf_step(est, augmented, MeasurementFrame(np.zeros(9), mask), np.zeros(4), np.zeros(3))
        e = np.zeros((3, 9))
        phi_bar, e_bar = augmented.phi_bar_for(e), augmented.e_bar_for(e)
        assert not np.any(out.gain)
        np.testing.assert_allclose(out.p, phi_bar @ est.p @ phi_bar.T + e_bar @ augmented.v1 @ e_bar.T, atol=1e-14)
        np.testing.assert_allclose(out.x_hat, phi_bar @ est.x_hat, atol=1e-14)

    def test_absent_blocks_are_ignored_bit_for_bit(self, augmented):
        rng = np.random.default_rng(5)
        est = initial_estimate(rng.normal(size=12), np.eye(N_AUG))
        mask = AvailabilityMask(False, False, True)
        y_zero = np.zeros(9)
        y_zero[6:] = [0.1, -0.1, 0.2]
        y_junk = y_zero.copy()
        y_junk[:6] = rng.normal(size=6) * 100
        u, r = rng.normal(size=4), rng.normal(size=3)
        a = kf_step(est, augmented, MeasurementFrame(y_zero, mask), u, r)
        b = kf_step(est, augmented, MeasurementFrame(y_junk, mask), u, r)
        assert np.array_equal(a.x_hat, b.x_hat)
        assert np.array_equal(a.p, b.p)

    def test_covariance_stays_symmetric_psd(self, augmented):
        rng = np.random.default_rng(2)
        est = initial_estimate(np.zeros(12), np.eye(N_AUG))
        for _ in range(200):
            mask = AvailabilityMask(*(rng.random(3) < 0.6))
            est = kf_step(est, augmented, MeasurementFrame(rng.normal(size=9), mask), np.zeros(4), np.zeros(3))
            assert np.array_equal(est.p, est.p.T)
            assert np.min(np.linalg.eigvalsh(est.p)) >= -1e-10 * np.trace(est.p)

    def test_imu_only_position_uncertainty_grows(self, design):
        am = design.augmented
        est = initial_estimate(np.zeros(12), np.eye(N_AUG))
        mask = AvailabilityMask(False, False, True)
        pos_trace, att_trace = [], []
        for _ in range(100):
            est = kf_step(est, am, MeasurementFrame(np.zeros(9), mask), np.zeros(4), np.zeros(3))
            pos_trace.append(np.trace(est.p[:3, :3]))
            att_trace.append(np.trace(est.p[3:6, 3:6]))
        assert np.all(np.diff(pos_trace) >= 0)
        assert max(att_trace) < 10.0

    @pytest.mark.slow
    def test_steady_state_gain_converges(self, params):
        am = build_augmented(build_discrete_model(params, 1e-4 * np.eye(12), V_NOMINAL))
        est = initial_estimate(np.zeros(12), np.eye(N_AUG))
        frame = MeasurementFrame(np.zeros(9), FULL)
        prev = None
        for _ in range(5000):
            est = kf_step(est, am, frame, np.zeros(4), np.zeros(3))
            if prev is not None:
                delta = np.max(np.abs(est.gain - prev))
            prev = est.gain
        assert delta < 1e-8

    def test_singular_innovation_raises(self, augmented):
        broken = replace(augmented, v2=np.zeros((9, 9)))
        est = initial_estimate(np.zeros(12), np.eye(N_AUG))
        frame = MeasurementFrame(np.zeros(9), AvailabilityMask(False, False, False))
        with pytest.raises(SingularInnovationError):
            kf_step(est, broken, frame, np.zeros(4), np.zeros(3))

    def test_rejects_non_finite_estimate(self, augmented):
        est = AugmentedEstimate(x_hat=np.full(N_AUG, np.nan), p=np.eye(N_AUG))
        with pytest.raises(ValueError):
            kf_step(est, augmented, MeasurementFrame(np.zeros(9), FULL), np.zeros(4), np.zeros(3))
