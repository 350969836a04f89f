"""
Tests for the depth observer and 3D reconstruction.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from tau_depth.errors import ConfigError, InputError, ObserverError
from tau_depth.observer import (
    DepthObserver,
    ObserverGain,
    ObserverMode,
    ObserverState,
    dead_reckon,
    fuse_axes,
    observer_step,
    reconstruct_xyz,
)
from tau_depth.solver import ActionEffect, WindowResult, WindowSolution

G = 9.81


def _solution(axis, z0, g=0.0, valid=True):
    if not valid:
        return WindowSolution.unposed(axis, 0.0)
    return WindowSolution(axis, z0, g, 1.0, 1.0, 0.0, True, True)


def _window(t_now, solutions, gated=(True, True, True), phi_end=1.0, F_now=(0.0, 0.0, 0.0),
            accel_now=(0.0, 0.0, G)):
    effect = ActionEffect(np.zeros((2, 3)), np.array([1.0, phi_end]), np.zeros(3))
    return WindowResult(
        t_now=t_now,
        effect=effect,
        solutions=tuple(solutions),
        gated=tuple(gated),
        F_now=np.asarray(F_now, dtype=np.float64),
        accel_now=np.asarray(accel_now, dtype=np.float64),
        accel_mean=np.asarray(accel_now, dtype=np.float64),
    )


def _unposed():
    return [_solution(a, 0.0, valid=False) for a in "xyz"]


class TestObserverGain:
    """Tests for the injection gain."""

    def test_default_gain(self):
        """The default diag(2, 20) is stabilising."""
        gain = ObserverGain()
        assert (gain.l1, gain.l2) == (2.0, 20.0)
        np.testing.assert_allclose(gain.eigenvalues, [-20.0, -2.0])

    def test_rejects_unstable_gain(self):
        """A negative gain makes the error dynamics unstable."""
        with pytest.raises(ConfigError):
            ObserverGain(l1=-1.0, l2=20.0)


class TestObserverStep:
    """Tests for one discrete observer step."""

    def test_converges_to_static_depth(self):
        """Starting at 1 m, the estimate converges to a static 3 m within 1%."""
        state = ObserverState(Z=1.0, Z_dot=0.0, t=0)
        for _ in range(500):
            state = observer_step(state, 0.01, G, (3.0, 0.0), G)
        assert abs(state.Z - 3.0) / 3.0 < 0.01
        assert state.t == 5_000_000_000
        assert state.mode is ObserverMode.MEASURED

    def test_matching_measurement_is_pure_prediction(self):
        """With no innovation the step is an Euler prediction."""
        state = ObserverState(Z=2.0, Z_dot=-0.5, t=0)
        new = observer_step(state, 0.01, G - 1.0, (2.0, -0.5), G)
        assert new.Z == pytest.approx(2.0 - 0.005)
        assert new.Z_dot == pytest.approx(-0.5 + 0.01)

    def test_without_measurement(self):
        """A missing measurement drops the correction."""
        state = ObserverState(Z=2.0, Z_dot=0.1, t=0)
        new = observer_step(state, 0.1, G, None, G)
        assert new.Z == pytest.approx(2.01)
        assert new.Z_dot == pytest.approx(0.1)

    def test_rejects_non_positive_step(self):
        """dt must be positive."""
        with pytest.raises(InputError):
            observer_step(ObserverState(1.0, 0.0, 0), 0.0, G, None, G)

    def test_depth_crossing_zero(self):
        """Predicting through the plane is an observer failure."""
        state = ObserverState(Z=0.01, Z_dot=-5.0, t=0)
        with pytest.raises(ObserverError):
            observer_step(state, 0.01, G, None, G)

    def test_non_finite_state(self):
        """States must be finite."""
        with pytest.raises(ObserverError):
            ObserverState(Z=np.inf, Z_dot=0.0, t=0)


class TestDeadReckon:
    """Tests for propagation through F_z alone."""

    def test_exponential_propagation(self):
        """Z <- Z exp(F_z dt) and Z_dot = F_z Z."""
        new = dead_reckon(ObserverState(2.0, 0.0, 0), -0.5, 0.1)
        assert new.Z == pytest.approx(2.0 * np.exp(-0.05))
        assert new.Z_dot == pytest.approx(-0.5 * new.Z)
        assert new.mode is ObserverMode.DEAD_RECKONING
        assert new.t == 100_000_000

    def test_rejects_non_positive_step(self):
        """dt must be positive."""
        with pytest.raises(InputError):
            dead_reckon(ObserverState(2.0, 0.0, 0), -0.5, -0.1)


class TestFuseAxes:
    """Tests for combining per-axis solutions."""

    def test_averages_qualifying_axes(self):
        """Valid gated axes are averaged after propagation."""
        sols = [_solution("x", 2.0), _solution("y", 4.0), _solution("z", 100.0)]
        fused = fuse_axes(sols, 0.5, [0.0, 0.0, -0.2], gated=[True, True, False])
        assert fused == pytest.approx((1.5, -0.3))

    def test_none_when_nothing_qualifies(self):
        """No valid axis means no measurement."""
        assert fuse_axes(_unposed(), 1.0, [0.0, 0.0, 0.0]) is None


class TestReconstruct:
    """Tests for 3D reconstruction."""

    def test_scales_calibrated_point(self):
        """The fixated point is (x Z, y Z, Z)."""
        state = ObserverState(2.0, 0.0, 0)
        np.testing.assert_allclose(reconstruct_xyz(state, (0.1, -0.2)), [0.2, -0.4, 2.0])


class TestDepthObserver:
    """Tests for the stateful observer."""

    def test_waits_for_first_solution(self):
        """No output before the first usable window."""
        observer = DepthObserver()
        assert observer.update(_window(0, _unposed()), 0.01) is None
        assert not observer.initialized

    def test_initializes_from_window_end_depth(self):
        """Initialization uses Z0 Phi(T) and F_z Z."""
        observer = DepthObserver()
        sols = [_solution("x", 0.0, valid=False), _solution("y", 0.0, valid=False),
                _solution("z", 2.0, g=9.7)]
        state = observer.update(_window(10, sols, phi_end=0.75, F_now=(0, 0, -0.4)), 0.01)
        assert state.Z == pytest.approx(1.5)
        assert state.Z_dot == pytest.approx(-0.6)
        assert state.t == 10
        assert state.g[2] == pytest.approx(9.7)
        assert state.g[1] == pytest.approx(0.0)

    def test_dead_reckons_without_measurement(self):
        """After initialization, missing solutions switch to dead reckoning."""
        observer = DepthObserver()
        sols = [_solution("x", 0.0, valid=False), _solution("y", 0.0, valid=False),
                _solution("z", 2.0)]
        observer.update(_window(0, sols, F_now=(0, 0, -0.1)), 0.01)
        state = observer.update(_window(10_000_000, _unposed(), F_now=(0, 0, -0.1)), 0.01)
        assert state.mode is ObserverMode.DEAD_RECKONING
        assert state.Z == pytest.approx(2.0 * np.exp(-0.001))
        assert state.t == 10_000_000
        back = observer.update(_window(20_000_000, sols, F_now=(0, 0, -0.1)), 0.01)
        assert back.mode is ObserverMode.MEASURED

    def test_gravity_stays_latched(self):
        """A gravity estimate survives windows without a valid solution."""
        observer = DepthObserver()
        sols = [_solution("x", 0.0, valid=False), _solution("y", 0.0, valid=False),
                _solution("z", 2.0, g=9.7)]
        observer.update(_window(0, sols), 0.01)
        state = observer.update(_window(10_000_000, _unposed(), accel_now=(0, 0, 5.0)), 0.01)
        assert state.g[2] == pytest.approx(9.7)
        assert state.g[0] == pytest.approx(0.0)

    def test_gravity_ignores_gated_axes(self):
        """Only posed and gated axes latch a gravity estimate."""
        observer = DepthObserver()
        sols = [_solution("x", 2.0, g=0.5), _solution("y", 0.0, valid=False),
                _solution("z", 2.0, g=9.7)]
        state = observer.update(_window(0, sols, gated=(False, False, True),
                                        accel_now=(0.2, 0.0, G)), 0.01)
        assert state.g[0] == pytest.approx(0.2)
        assert state.g[2] == pytest.approx(9.7)


class TestObserverConvergence:
    """Error decay against the closed-loop eigenvalues."""

    def test_decay_matches_eigenvalues(self):
        """A 50% depth error decays below 1% in 5 s at the slowest eigenvalue's rate."""
        gain = ObserverGain()
        truth, dt = 2.0, 0.01
        state = ObserverState(Z=1.5 * truth, Z_dot=0.0, t=0)
        errors = [abs(state.Z - truth)]
        for _ in range(500):
            state = observer_step(state, dt, G, (truth, 0.0), G, gain)
            errors.append(abs(state.Z - truth))
        assert errors[-1] < 0.01 * errors[0]

        # fit the decay between 1 s and 3 s
        rate = (np.log(errors[300]) - np.log(errors[100])) / 2.0
        slowest = gain.eigenvalues[-1]
        assert abs(rate - slowest) <= 0.1 * abs(slowest)
