import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadsim.exceptions import DegenerateGeometryError
from quadsim.harness import NoiseConfig
from quadsim.model import PlantState
from quadsim.sensors import (
    AnchorSet,
    AvailabilityMask,
    DropoutConfig,
    LandmarkSet,
    assemble_frame,
    availability_step,
    default_anchors,
    default_landmarks,
    laterate,
    multilaterate,
    sense_imu,
    sense_uwb,
    sense_yolo,
    uwb_ranges,
    visible_landmarks,
)

TETRA = AnchorSet(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]))
CUBE = AnchorSet(np.array([[x, y, z] for x in (0.0, 4.0) for y in (0.0, 4.0) for z in (0.0, 4.0)]))
AHEAD = LandmarkSet(np.array([[3.0, 1.0, 0.0], [3.0, -1.0, 2.0], [4.0, 0.0, 1.0], [5.0, 1.0, 3.0]]))


class TestAvailability:
    def test_certain_sensors_always_available(self, rng):
        cfg = DropoutConfig(p_uwb=1.0, p_yolo=1.0, p_imu=1.0)
        for _ in range(20):
            assert availability_step(cfg, PlantState(), rng).as_tuple() == (True, True, True)

    def test_zero_probabilities(self, rng):
        cfg = DropoutConfig(p_uwb=0.0, p_yolo=0.0, p_imu=0.0)
        assert availability_step(cfg, PlantState(), rng).as_tuple() == (False, False, False)

    def test_blackout_forces_uwb_off(self, rng):
        cfg = DropoutConfig(p_uwb=1.0, p_yolo=1.0, p_imu=1.0, uwb_blackout=(4.0, 6.0))
        assert not availability_step(cfg, PlantState.hover_at([5.0, 0.0, 1.0]), rng).uwb
        assert availability_step(cfg, PlantState.hover_at([6.5, 0.0, 1.0]), rng).uwb

    def test_yolo_off_without_three_visible(self, rng):
        cfg = DropoutConfig(p_uwb=1.0, p_yolo=1.0, p_imu=1.0)
        mask = availability_step(cfg, PlantState.hover_at([100.0, 0.0, 1.0]), rng, default_landmarks())
        assert mask.as_tuple() == (True, False, True)

    def test_always_consumes_three_draws(self):
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        availability_step(DropoutConfig(uwb_blackout=(-1.0, 1.0)), PlantState(), a, default_landmarks())
        b.random(3)
        assert a.random() == b.random()

    def test_empirical_rate(self, rng):
        cfg = DropoutConfig(p_uwb=0.9, p_yolo=0.7, p_imu=1.0)
        masks = np.array([availability_step(cfg, PlantState(), rng).as_tuple() for _ in range(20_000)])
        np.testing.assert_allclose(masks.mean(axis=0), [0.9, 0.7, 1.0], atol=0.015)

    @pytest.mark.parametrize("kwargs", [{"p_uwb": 1.2}, {"p_yolo": -0.1}, {"uwb_blackout": (6.0, 4.0)}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            DropoutConfig(**kwargs)


class TestImu:
    def test_noiseless_returns_attitude(self, rng):
        truth = PlantState(eta=[0.1, -0.2, 0.3])
        np.testing.assert_array_equal(sense_imu(truth, 0.0, rng), truth.eta)

    def test_noise_variance(self, rng):
        truth = PlantState()
        draws = np.array([sense_imu(truth, 0.01, rng) for _ in range(100_000)])
        np.testing.assert_allclose(draws.var(axis=0), 0.01, rtol=0.05)

    def test_rejects_negative_variance(self, rng):
        with pytest.raises(ValueError):
            sense_imu(PlantState(), -1.0, rng)


class TestUwb:
    def test_pythagorean_range(self, rng):
        anchors = AnchorSet(np.array([[4.0, 5.0, 1.0], [0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 3.0]]))
        r = uwb_ranges(np.array([0.0, 0.0, 1.0]), anchors, 0.0, rng)
        assert r[0] == pytest.approx(np.hypot(4.0, 5.0))

    def test_tag_at_anchor_has_zero_range(self, rng):
        assert uwb_ranges(np.zeros(3), TETRA, 0.0, rng)[0] == 0.0

    def test_ranges_are_clamped(self, rng):
        assert np.all(uwb_ranges(np.zeros(3), TETRA, 10.0, rng) >= 0.0)

    def test_multilaterate_centroid(self, rng):
        tag = np.array([0.5, 0.5, 0.5])
        est = multilaterate(uwb_ranges(tag, TETRA, 0.0, rng), TETRA)
        np.testing.assert_allclose(est, tag, atol=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(
        x=st.floats(0.0, 20.0),
        y=st.floats(-4.0, 4.0),
        z=st.floats(0.2, 2.8),
    )
    def test_multilaterate_recovers_noiseless_tag(self, x, y, z):
        anchors = default_anchors()
        tag = np.array([x, y, z])
        ranges = np.linalg.norm(anchors.anchors - tag, axis=1)
        np.testing.assert_allclose(multilaterate(ranges, anchors), tag, atol=1e-6)

    def test_noise_rms_inside_cube(self, rng):
        errs = []
        for _ in range(2000):
            tag = rng.uniform(1.0, 3.0, size=3)
            errs.append(multilaterate(uwb_ranges(tag, CUBE, 0.1, rng), CUBE) - tag)
        rms = np.sqrt(np.mean(np.sum(np.square(errs), axis=1)))
        assert rms < 0.15

    def test_multilaterate_wrong_count(self):
        with pytest.raises(ValueError):
            multilaterate(np.ones(3), TETRA)

    def test_sense_uwb_noiseless(self, rng):
        truth = PlantState.hover_at([7.0, 1.0, 1.5])
        np.testing.assert_allclose(sense_uwb(truth, default_anchors(), 0.0, rng), truth.xi, atol=1e-6)

    def test_anchor_validation(self):
        with pytest.raises(ValueError):
            AnchorSet(np.zeros((3, 3)) + np.arange(3)[:, None])
        with pytest.raises(ValueError, match="coplanares"):
            AnchorSet(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]))
        with pytest.raises(ValueError):
            AnchorSet(np.array([[0.0, 0, 0], [0, 0, 0], [0, 1, 0], [1, 1, 1]]))


class TestYolo:
    def test_noiseless_trilateration(self, rng):
        truth = PlantState.hover_at([0.0, 0.0, 1.0])
        np.testing.assert_allclose(sense_yolo(truth, AHEAD, 0.0, rng), truth.xi, atol=1e-6)

    def test_coplanar_landmarks_resolve_mirror(self, rng):
        flat = LandmarkSet(np.array([[3.0, 1.0, 0.0], [3.0, -1.0, 0.0], [4.0, 0.0, 0.0]]))
        truth = PlantState.hover_at([0.0, 0.0, 1.2])
        np.testing.assert_allclose(sense_yolo(truth, flat, 0.0, rng), truth.xi, atol=1e-6)

    def test_landmarks_behind_are_invisible(self, rng):
        behind = LandmarkSet(AHEAD.landmarks * np.array([-1.0, 1.0, 1.0]))
        assert sense_yolo(PlantState.hover_at([0.0, 0.0, 1.0]), behind, 0.0, rng) is None

    def test_yaw_turns_the_cone(self):
        behind = LandmarkSet(AHEAD.landmarks * np.array([-1.0, 1.0, 1.0]))
        assert not visible_landmarks(np.zeros(3), 0.0, behind).any()
        assert visible_landmarks(np.zeros(3), np.pi, behind).all()

    def test_draws_noise_for_every_landmark(self):
        a, b = np.random.default_rng(9), np.random.default_rng(9)
        sense_yolo(PlantState.hover_at([100.0, 0.0, 1.0]), default_landmarks(), 0.1, a)
        b.standard_normal(len(default_landmarks()))
        assert a.random() == b.random()

    @settings(max_examples=50, deadline=None)
    @given(
        x=st.floats(-5.0, 35.0),
        y=st.floats(-6.0, 6.0),
        yaw=st.floats(-np.pi, np.pi),
        grow=st.floats(1.0, 3.0),
        widen=st.floats(0.0, 1.0),
    )
    def test_visibility_is_monotone(self, x, y, yaw, grow, widen):
        base = default_landmarks()
        wide = LandmarkSet(base.landmarks, base.max_range * grow, min(np.pi, base.half_angle + widen))
        pos = np.array([x, y, 1.0])
        narrow_vis = visible_landmarks(pos, yaw, base)
        wide_vis = visible_landmarks(pos, yaw, wide)
        assert np.all(wide_vis[narrow_vis])

    def test_degenerate_collinear_points(self):
        pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(DegenerateGeometryError):
            laterate(pts, np.ones(3), hint=np.zeros(3))


class TestFrame:
    def test_assemble_frame_zero_fills(self):
        mask = AvailabilityMask(False, True, True)
        frame = assemble_frame(None, np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]), mask)
        np.testing.assert_array_equal(frame.y, [0, 0, 0, 1, 2, 3, 0.1, 0.2, 0.3])
        np.testing.assert_array_equal(np.diag(mask.delta_matrix()), [0, 0, 0, 1, 1, 1, 1, 1, 1])

    def test_mismatch_raises(self):
        with pytest.raises(ValueError, match="uwb"):
            assemble_frame(np.zeros(3), None, np.zeros(3), AvailabilityMask(False, False, True))
        with pytest.raises(ValueError, match="imu"):
            assemble_frame(None, None, None, AvailabilityMask(False, False, True))

    def test_has_position(self):
        assert AvailabilityMask(False, True, False).has_position
        assert not AvailabilityMask(False, False, True).has_position


class TestNoiseCalibration:
    """La dispersión de las posiciones medidas concuerda con la V del filtro."""

    DRAWS = 4000

    @pytest.mark.parametrize("tag", [[0.0, 0.0, 1.0], [10.0, 0.0, 1.0]])
    def test_uwb_variance_matches_filter(self, tag):
        noise = NoiseConfig()
        gen = np.random.default_rng(21)
        truth = PlantState.hover_at(tag)
        anchors = default_anchors()
        samples = np.array([sense_uwb(truth, anchors, noise.uwb_range_std, gen) for _ in range(self.DRAWS)])
        np.testing.assert_allclose(samples.mean(axis=0), tag, atol=0.02)
        np.testing.assert_allclose(samples.var(axis=0), np.diag(noise.filter_v)[:3], rtol=0.2)

    def test_yolo_variance_within_factor_two_of_filter(self):
        noise = NoiseConfig()
        gen = np.random.default_rng(22)
        truth = PlantState.hover_at([10.0, 0.0, 1.0])
        landmarks = default_landmarks()
        samples = np.array([sense_yolo(truth, landmarks, noise.yolo_range_std, gen) for _ in range(self.DRAWS)])
        var = samples.var(axis=0)
        v = np.diag(noise.filter_v)[3:6]
        assert np.all(var > 0.5 * v) and np.all(var < 2.0 * v)
