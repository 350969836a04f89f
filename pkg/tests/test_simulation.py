"""
Tests for the synthetic scene, trajectory and sequence simulator.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import map_coordinates
from scipy.spatial.transform import Rotation

sys.path.insert(0, str(Path(__file__).parent.parent))

from tau_depth.core import CameraIntrinsics, to_calibrated, to_pixel
from tau_depth.errors import ScenarioError
from tau_depth.simulation import (
    Excitation,
    OracleModel,
    PlanarScene,
    PlaneRenderer,
    RotationSpec,
    RotationTerm,
    Scenario,
    TextureSpec,
    TrajectorySpec,
    bundled_scenarios,
    load_scenario,
    oracle_foc,
)
from tau_depth.simulation.simulator import homography_to_affine, sample_times
from tests.conftest import SMOOTH_TEXTURE, small_scenario

G = (0.0, -9.81, 0.0)


class TestExcitation:
    """Tests for the closed-form camera motion terms."""

    def test_pure_oscillation(self):
        """Phase pi/2 gives p = A / w^2 (1 - cos w t)."""
        term = Excitation("z", 3.5, 0.5)
        t = np.linspace(0.0, 4.0, 81)
        w = np.pi
        np.testing.assert_allclose(term.position(t), 3.5 / w ** 2 * (1 - np.cos(w * t)), atol=1e-12)
        np.testing.assert_allclose(term.acceleration(t), 3.5 * np.cos(w * t), atol=1e-12)

    def test_velocity_is_derivative_of_position(self):
        """Central differences of position match the velocity."""
        term = Excitation("x", 2.0, 0.7, phase=0.3, start=0.5, end=2.5)
        t = np.linspace(0.0, 4.0, 41)
        h = 1e-6
        numeric = (term.position(t + h) - term.position(t - h)) / (2 * h)
        np.testing.assert_allclose(numeric, term.velocity(t), atol=1e-6)

    def test_coasts_after_span(self):
        """After the span the velocity stays at its final value."""
        term = Excitation("z", 3.5, 0.5, phase=0.0, start=0.0, end=1.0)
        v = term.velocity(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(v, np.full(3, v[0]))
        assert term.acceleration(np.array([1.5]))[0] == 0.0

    def test_position_amplitude(self):
        """Position amplitude B sets the acceleration amplitude B w^2."""
        term = Excitation.from_position_amplitude("y", 0.1, 1.0)
        assert term.amplitude == pytest.approx(0.1 * (2 * np.pi) ** 2)

    def test_rejects_bad_values(self):
        """Unknown axes and empty spans are scenario errors."""
        with pytest.raises(ScenarioError):
            Excitation("w", 1.0, 1.0)
        with pytest.raises(ScenarioError):
            Excitation("x", 1.0, 1.0, start=2.0, end=1.0)
        with pytest.raises(ScenarioError):
            Excitation("x", 1.0, 0.0)


class TestRotationSpec:
    """Tests for the analytic orientation."""

    def test_body_rate_matches_orientation(self):
        """The gyro rate is the derivative of the orientation in the body frame."""
        spec = RotationSpec((RotationTerm("x", 0.06, 0.5), RotationTerm("y", 0.08, 0.4),
                             RotationTerm("z", 0.1, 0.3, phase=0.2)))
        h = 1e-4
        for t in (0.3, 1.1, 2.7):
            before = spec.rotation(t - h)
            after = spec.rotation(t + h)
            numeric = (before.inv() * after).as_rotvec()[0] / (2 * h)
            np.testing.assert_allclose(spec.body_rate(t)[0], numeric, atol=1e-6)

    def test_starts_at_identity(self):
        """theta(0) = 0 for any phase."""
        spec = RotationSpec((RotationTerm("z", 0.1, 0.3, phase=1.0),))
        assert spec.rotation(0.0).magnitude()[0] == pytest.approx(0.0)


class TestTrajectorySpec:
    """Tests for the trajectory container."""

    def test_drift_and_excitations_add(self):
        """Position is drift t plus the excitation terms."""
        spec = TrajectorySpec(duration=2.0, excitations=(Excitation("z", 3.5, 0.5),),
                              drift=(0.1, 0.0, 0.0))
        p = spec.position(1.0)[0]
        assert p[0] == pytest.approx(0.1)
        assert p[2] == pytest.approx(7.0 / np.pi ** 2)

    def test_rejects_zero_duration(self):
        """Duration must be positive."""
        with pytest.raises(ScenarioError):
            TrajectorySpec(duration=0.0)

    def test_rejects_negative_noise(self):
        """Noise levels cannot be negative."""
        with pytest.raises(ScenarioError):
            TrajectorySpec(duration=1.0, accel_noise=-0.1)


class TestScene:
    """Tests for the textured plane."""

    def test_fronto_parallel_point(self):
        """The optical axis meets a fronto-parallel plane at its depth."""
        scene = PlanarScene.fronto_parallel(2.0)
        np.testing.assert_allclose(scene.point_at(0.0, 0.0), [0.0, 0.0, 2.0])
        np.testing.assert_allclose(scene.point_at(0.5, 0.0), [1.0, 0.0, 2.0])

    def test_edge_on_plane(self):
        """n_z = 0 is rejected."""
        with pytest.raises(ScenarioError):
            PlanarScene((1.0, 0.0, 0.0))

    def test_texture_validation(self):
        """Unknown kinds and contrast out of range are rejected."""
        with pytest.raises(ScenarioError):
            TextureSpec(kind="stripes")
        with pytest.raises(ScenarioError):
            TextureSpec(contrast=1.5)

    def test_scene_from_dict_with_preset(self):
        """Presets and depth build the same scene as the factories."""
        scene = PlanarScene.from_dict({"depth": 1.5, "texture": {"preset": "checkerboard", "cell": 8.0}})
        assert scene.texture == TextureSpec.checkerboard(cell=8.0)
        np.testing.assert_allclose(scene.n, [0.0, 0.0, 1 / 1.5])

    def test_scene_from_dict_needs_geometry(self):
        """A scene without normal or depth is rejected."""
        with pytest.raises(ScenarioError):
            PlanarScene.from_dict({"texture": {}})


class TestOracleModel:
    """Tests for the closed-form oracles."""

    def _approach(self):
        spec = TrajectorySpec(duration=4.0, drift=(0.0, 0.0, 0.25))
        return OracleModel(PlanarScene.fronto_parallel(2.0), spec)

    def test_constant_velocity_tau(self):
        """Approaching at constant speed, tau falls with slope -1."""
        model = self._approach()
        t = np.linspace(0.0, 4.0, 9)
        np.testing.assert_allclose(model.tau(t), 8.0 - t)
        np.testing.assert_allclose(model.foc(t)[:, 2], -0.25 / (2.0 - 0.25 * t))

    def test_foc_is_log_depth_derivative(self):
        """F_z equals d/dt log Z by central differences."""
        spec = TrajectorySpec(duration=6.0, excitations=(Excitation("z", 3.5, 0.5),
                                                         Excitation("x", 2.0, 0.6)))
        model = OracleModel(PlanarScene.fronto_parallel(1.8), spec, (0.1, -0.05))
        h = 1e-5
        for t in (0.7, 2.3, 4.1):
            numeric = (np.log(model.depth(t + h)) - np.log(model.depth(t - h))) / (2 * h)
            assert model.foc(t)[0, 2] == pytest.approx(numeric[0], abs=1e-8)

    def test_affine_warp_of_pure_approach(self):
        """Without rotation a fronto-parallel approach is an exact scaling."""
        model = self._approach()
        warp = model.warp(2.0)
        np.testing.assert_allclose(warp.params, [1 / 0.75, 0, 0, 0, 1 / 0.75, 0], atol=1e-12)

    def test_oracle_foc_outside_duration(self):
        """Queries outside the scenario are rejected."""
        spec = TrajectorySpec(duration=1.0, drift=(0.0, 0.0, 0.1))
        with pytest.raises(ScenarioError):
            oracle_foc(spec, PlanarScene.fronto_parallel(2.0), 1.5)

    def test_flow_matches_warp_derivative(self):
        """The oracle flow equals W' W^-1 of the oracle warp."""
        model = self._approach()
        h = 1e-6
        w_next, w_prev = model.warp(1.0 + h).matrix, model.warp(1.0 - h).matrix
        numeric = (w_next - w_prev) / (2 * h) @ np.linalg.inv(model.warp(1.0).matrix)
        np.testing.assert_allclose(model.flow(1.0).matrix, numeric, atol=1e-6)


class TestHomographyToAffine:
    """Tests for the affine linearisation."""

    def test_affine_homography_is_unchanged(self):
        """A homography with bottom row (0, 0, 1) is its own linearisation."""
        H = np.array([[1.1, 0.02, 0.3], [-0.01, 0.95, -0.1], [0.0, 0.0, 1.0]])
        np.testing.assert_allclose(homography_to_affine(H, np.array([0.2, -0.1])), H[:2], atol=1e-12)


class TestRenderer:
    """Tests for plane rendering."""

    def test_first_frame_is_texture(self):
        """The first frame shows the texture at its own pixel coordinates."""
        intr = CameraIntrinsics(100.0, 100.0, 80.0, 60.0, 160, 120)
        scene = PlanarScene.fronto_parallel(2.0, SMOOTH_TEXTURE)
        renderer = PlaneRenderer(scene, intr, supersample=1)
        img = renderer.render_intensity(Rotation.identity(), np.zeros(3))
        u, v = np.meshgrid(np.arange(160.0), np.arange(120.0))
        np.testing.assert_allclose(img, renderer.raster.sample(u, v), atol=1e-12)

    def test_frame_matches_oracle_warp(self):
        """Warping the first frame by the oracle warp reproduces a later frame."""
        intr = CameraIntrinsics(100.0, 100.0, 80.0, 60.0, 160, 120)
        scene = PlanarScene.fronto_parallel(2.0, SMOOTH_TEXTURE)
        spec = TrajectorySpec(duration=2.0, drift=(0.0, 0.0, 0.25))
        model = OracleModel(scene, spec)
        renderer = PlaneRenderer(scene, intr, supersample=1)
        first = renderer.render_intensity(Rotation.identity(), np.zeros(3))
        later = renderer.render_intensity(Rotation.identity(), spec.position(1.0)[0])

        u, v = np.meshgrid(np.arange(50.0, 111.0), np.arange(35.0, 86.0))
        uv = np.column_stack([u.ravel(), v.ravel()])
        moved = to_pixel(model.warp(1.0).apply(to_calibrated(uv, intr)), intr)
        sampled = map_coordinates(later, [moved[:, 1], moved[:, 0]], order=1)
        reference = first[v.ravel().astype(int), u.ravel().astype(int)]
        unwarped = later[v.ravel().astype(int), u.ravel().astype(int)]

        warped_error = np.mean(np.abs(sampled - reference))
        assert warped_error < 0.01
        assert warped_error < np.mean(np.abs(unwarped - reference)) / 3

    def test_render_is_uint8(self):
        """render quantizes to 8 bits."""
        scene = PlanarScene.fronto_parallel(2.0, SMOOTH_TEXTURE)
        intr = CameraIntrinsics(60.0, 60.0, 40.0, 30.0, 80, 60)
        frames = PlaneRenderer(scene, intr, supersample=2).render_many(
            Rotation.identity(2), [np.zeros(3), np.array([0.0, 0.0, 0.1])], workers=2)
        assert len(frames) == 2
        assert frames[0].dtype == np.uint8
        assert frames[0].shape == (60, 80)


class TestSimulate:
    """Tests for whole simulated sequences."""

    def test_sample_counts(self, sequence):
        """Frames exclude the end time; IMU and truth include it."""
        assert len(sequence.frames) == 360
        assert len(sequence.gyro) == 1201
        assert len(sequence.accel) == 1201
        assert len(sequence.oracle.trajectory) == 601
        assert sequence.frames[1][0] == int(round(1e9 / 60.0))
        assert sequence.frames[0][1].shape == (60, 80)

    def test_accelerometer_reading(self, sequence):
        """Without rotation the accelerometer reads p'' + g."""
        t = sequence.accel.t_s
        expected = np.zeros((t.size, 3))
        expected[:, 1] = -9.81
        expected[:, 2] = 3.5 * np.cos(np.pi * t)
        np.testing.assert_allclose(sequence.accel.values, expected, atol=1e-9)
        np.testing.assert_allclose(sequence.gyro.values, 0.0, atol=1e-12)

    def test_oracle_consistency(self, sequence):
        """Oracle F, tau and points agree with the ground truth."""
        oracle = sequence.oracle
        np.testing.assert_allclose(oracle.tau, np.where(oracle.F[:, 2] != 0, -1 / np.where(
            oracle.F[:, 2] != 0, oracle.F[:, 2], 1.0), np.inf))
        np.testing.assert_allclose(oracle.points, 0.0, atol=1e-12)
        np.testing.assert_allclose(oracle.trajectory.positions[0], [0.0, 0.0, 1.8])
        assert len(oracle.warps) == len(sequence.frames)
        np.testing.assert_allclose(oracle.warps[0].params, [1, 0, 0, 0, 1, 0], atol=1e-12)

    def test_imu_noise_is_seeded(self):
        """The same seed reproduces the same noisy IMU streams."""
        spec = TrajectorySpec(duration=1.0, excitations=(Excitation("z", 3.5, 0.5),),
                              accel_noise=0.05, gyro_noise=0.005)
        a = small_scenario(duration=1.0, trajectory=spec).run(workers=1)
        b = small_scenario(duration=1.0, trajectory=spec).run(workers=1)
        np.testing.assert_array_equal(a.accel.values, b.accel.values)
        np.testing.assert_array_equal(a.gyro.values, b.gyro.values)
        assert np.std(a.gyro.values) > 0

    def test_depth_margin(self):
        """A sequence running into the plane is rejected."""
        spec = TrajectorySpec(duration=2.0, drift=(0.0, 0.0, 0.8))
        with pytest.raises(ScenarioError):
            small_scenario(duration=2.0, trajectory=spec).run(workers=1)

    def test_patch_leaves_view(self):
        """A fixation too close to the border is rejected."""
        with pytest.raises(ScenarioError):
            small_scenario(duration=1.0, fixation_center=(5.0, 30.0)).run(workers=1)


class TestScenarios:
    """Tests for scenario files."""

    def test_bundled_names(self):
        """The package ships the reference scenarios."""
        assert bundled_scenarios() == ["approach-2m", "quiet-span", "rotation-only",
                                       "sinusoid-xz", "static"]

    def test_load_bundled(self):
        """Bundled scenarios load by name."""
        scenario = load_scenario("approach-2m")
        assert scenario.name == "approach-2m"
        assert scenario.trajectory.duration == 4.0
        assert scenario.trajectory.drift == (0.0, 0.0, 0.25)
        assert scenario.fixation_center == (212.0, 120.0)

    def test_dict_form_reloads(self):
        """A scenario rebuilt from its JSON form is equal to it."""
        scenario = load_scenario("sinusoid-xz")
        assert Scenario.from_dict(json.loads(json.dumps(scenario.to_dict()))) == scenario

    def test_unknown_name(self):
        """Unknown names are scenario errors."""
        with pytest.raises(ScenarioError):
            load_scenario("no-such-scenario")

    def test_missing_file(self, tmp_path):
        """A missing JSON file is a scenario error."""
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "missing.json")

    def test_invalid_json(self, tmp_path):
        """Malformed JSON is a scenario error."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_zero_duration(self, tmp_path):
        """A zero duration is rejected on load."""
        path = tmp_path / "zero.json"
        path.write_text(json.dumps({"duration": 0.0, "scene": {"depth": 2.0}}))
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_missing_scene(self):
        """The scene section is required."""
        with pytest.raises(ScenarioError):
            Scenario.from_dict({"duration": 1.0})

    def test_frame_times(self):
        """Frame times are k / rate."""
        np.testing.assert_allclose(sample_times(90.0, 1.0, endpoint=False), np.arange(90) / 90.0)
        assert sample_times(250.0, 2.0).size == 501
