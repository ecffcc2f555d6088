import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdtransport.desired import (
    assemble_desired,
    attitude_from_thrust_axis,
    desired_thrust_attitude,
    desired_torques,
    finite_difference_rates,
)
from cdtransport.dynamics import QuadParams, body_z_axis, state_derivative
from cdtransport.errors import AttitudeOutOfRange, DegenerateForce

P = QuadParams()
Z3 = np.zeros(3)


class TestThrustAttitude:
    def test_hover(self):
        T, phi, theta, kb = desired_thrust_attitude(Z3, Z3, Z3, P)
        assert T == pytest.approx(4.59108, abs=1e-12)
        assert phi == 0 and theta == 0
        np.testing.assert_array_equal(kb, [0, 0, 1])

    def test_cable_pulling_down(self):
        T, phi, theta, _ = desired_thrust_attitude(Z3, Z3, [0, 0, -1.0], P)
        assert T == pytest.approx(5.59108, abs=1e-12)
        assert abs(phi) < 1e-15 and abs(theta) < 1e-15

    def test_trim_is_equilibrium(self):
        vel = np.array([0.3, -0.4, 0.0])
        f = np.array([0.5, -1.0, -3.0])
        T, phi, theta, _ = desired_thrust_attitude(Z3, vel, f, P, psi_d=0.2)
        s = np.zeros(12)
        s[3:6] = [phi, theta, 0.2]
        s[6:9] = vel
        d = state_derivative(s, [T, 0, 0, 0], f, P)
        np.testing.assert_allclose(d[6:9], 0, atol=1e-13)

    def test_zero_thrust(self):
        with pytest.raises(DegenerateForce):
            desired_thrust_attitude([0, 0, -9.81], Z3, Z3, P)

    def test_roll_out_of_range(self):
        with pytest.raises(AttitudeOutOfRange):
            attitude_from_thrust_axis(np.array([0.0, -1.5, 0.1]), 0.0)

    @given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-np.pi, np.pi))
    def test_round_trip(self, phi, theta, psi):
        p2, t2 = attitude_from_thrust_axis(body_z_axis(phi, theta, psi), psi)
        assert abs(p2 - phi) <= 1e-10 and abs(t2 - theta) <= 1e-10


class TestRates:
    def test_constant_angles(self):
        a = np.array([0.1, -0.2, 0.3])
        rates, body = finite_difference_rates(a, a, 0.01)
        np.testing.assert_array_equal(rates, 0)
        np.testing.assert_array_equal(body, 0)

    def test_roll_ramp(self):
        _, body = finite_difference_rates(Z3, [0.1, 0, 0], 1.0)
        np.testing.assert_allclose(body, [0.1, 0, 0], atol=1e-15)

    def test_yaw_ramp_at_pitch(self):
        _, body = finite_difference_rates([0, 0.2, 0], [0, 0.2, 0.5], 1.0)
        assert body[2] == pytest.approx(0.5 * np.cos(0.2) * np.cos(0.0), abs=1e-15)
        assert body[0] == pytest.approx(-0.5 * np.sin(0.2), abs=1e-15)

    def test_batched(self, rng):
        a0 = rng.normal(scale=0.3, size=(5, 3))
        a1 = a0 + rng.normal(scale=0.01, size=(5, 3))
        _, body = finite_difference_rates(a0, a1, 0.5)
        for i in range(5):
            np.testing.assert_allclose(body[i], finite_difference_rates(a0[i], a1[i], 0.5)[1], rtol=1e-14)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            finite_difference_rates(Z3, Z3, 0.0)


class TestTorques:
    def test_zero(self):
        np.testing.assert_array_equal(desired_torques(Z3, Z3, 1.0, P.inertia), 0)

    def test_roll_acceleration(self):
        tau = desired_torques(Z3, [1.0, 0, 0], 1.0, P.inertia)
        np.testing.assert_allclose(tau, [4.856e-3, 0, 0], atol=1e-18)

    def test_symmetric_gyroscopic_cancels(self):
        w = np.array([1.0, 1.0, 0.0])
        tau = desired_torques(w, w, 1.0, P.inertia)
        np.testing.assert_allclose(tau, 0, atol=1e-18)


def test_assemble_first_sample_has_zero_rates():
    s = assemble_desired(0.0, [[0, 0, 50]], [[0.25, 0, 0]], [[0, 0, 0]], [[0, 0, -1.0]], P)
    np.testing.assert_array_equal(s.body_rates, 0)
    np.testing.assert_array_equal(s.input[:, 1:], 0)
    assert s.input[0, 0] == pytest.approx(np.hypot(5.59108, 0.0625), abs=1e-12)


def test_assemble_uses_previous_sample():
    first = assemble_desired(0.0, [[0, 0, 50]], [[0, 0, 0]], [[0, 0, 0]], [[0, 0, 0]], P)
    second = assemble_desired(1.0, [[0, 0, 50]], [[0, 0, 0]], [[0, 0, 0]], [[0.1, 0, 0]], P)
    _, theta_expected = attitude_from_thrust_axis(np.array([-0.1, 0, 4.59108]) / np.hypot(0.1, 4.59108), 0.0)
    assert second.angles[0, 1] == pytest.approx(theta_expected)
    linked = assemble_desired(1.0, [[0, 0, 50]], [[0, 0, 0]], [[0, 0, 0]], [[0.1, 0, 0]], P, previous=first)
    assert linked.body_rates[0, 1] == pytest.approx(theta_expected, rel=1e-12)
    assert linked.input[0, 2] == pytest.approx(P.iyy * theta_expected, rel=1e-12)
