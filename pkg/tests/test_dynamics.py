import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdtransport.dynamics import (
    QuadParams,
    body_z_axis,
    euler_rate_matrix,
    euler_rate_matrix_inv,
    hover_input,
    rk4_step,
    rotation_321,
    state_derivative,
)
from cdtransport.errors import GimbalLock

P = QuadParams()
angle = st.floats(-1.2, 1.2)


def rotation_oracle(phi, theta, psi):
    """Product of elementary frame rotations R1(phi) R2(theta) R3(psi)."""
    c, s = np.cos, np.sin
    r1 = np.array([[1, 0, 0], [0, c(phi), s(phi)], [0, -s(phi), c(phi)]])
    r2 = np.array([[c(theta), 0, -s(theta)], [0, 1, 0], [s(theta), 0, c(theta)]])
    r3 = np.array([[c(psi), s(psi), 0], [-s(psi), c(psi), 0], [0, 0, 1]])
    return r1 @ r2 @ r3


def test_table_parameters():
    assert (P.m, P.ixx, P.iyy, P.izz) == (0.468, 4.856e-3, 4.856e-3, 8.801e-3)
    np.testing.assert_array_equal(P.drag, [0.25, 0.25, 0.25])


def test_rejects_nonpositive_parameters():
    with pytest.raises(ValueError):
        QuadParams(m=0.0)


class TestRotation:
    def test_identity(self):
        np.testing.assert_array_equal(rotation_321(0, 0, 0), np.eye(3))

    def test_yaw_quarter_turn(self):
        r = rotation_321(0, 0, np.pi / 2)
        # body x axis points along inertial J
        np.testing.assert_allclose(r[0], [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(r @ [0, 1, 0], [1, 0, 0], atol=1e-15)

    @given(angle, angle, st.floats(-np.pi, np.pi))
    def test_matches_oracle_and_orthogonal(self, phi, theta, psi):
        r = rotation_321(phi, theta, psi)
        np.testing.assert_allclose(r, rotation_oracle(phi, theta, psi), atol=1e-14)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(body_z_axis(phi, theta, psi), r[2], atol=1e-14)

    def test_body_z_examples(self):
        np.testing.assert_allclose(body_z_axis(0, 0, 0), [0, 0, 1])
        np.testing.assert_allclose(body_z_axis(0, np.pi / 2, 0), [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(body_z_axis(np.pi / 2, 0, 0), [0, -1, 0], atol=1e-15)


class TestEulerRates:
    def test_identity_at_zero(self):
        np.testing.assert_array_equal(euler_rate_matrix(0.0, 0.0), np.eye(3))

    def test_yaw_rate_substitution(self):
        th, psidot = 0.3, 0.7
        np.testing.assert_allclose(euler_rate_matrix(0.0, th) @ [0, 0, psidot],
                                   [-psidot * np.sin(th), 0, psidot * np.cos(th)], atol=1e-15)

    @given(angle, st.floats(-1.47, 1.47))
    def test_inverse(self, phi, theta):
        np.testing.assert_allclose(euler_rate_matrix_inv(phi, theta) @ euler_rate_matrix(phi, theta),
                                   np.eye(3), atol=1e-10)

    def test_batched_shape(self):
        w = euler_rate_matrix(np.zeros(5), np.linspace(0, 1, 5))
        assert w.shape == (5, 3, 3)
        np.testing.assert_allclose(w[3], euler_rate_matrix(0.0, 0.75))

    def test_singular_inverse(self):
        with pytest.raises(GimbalLock):
            euler_rate_matrix_inv(0.0, np.pi / 2)


class TestStateDerivative:
    def test_hover_equilibrium(self):
        s = np.zeros(12)
        s[2] = 50.0
        np.testing.assert_array_equal(state_derivative(s, hover_input(P), np.zeros(3), P), np.zeros(12))

    def test_free_fall(self):
        d = state_derivative(np.zeros(12), np.zeros(4), np.zeros(3), P)
        np.testing.assert_allclose(d[6:9], [0, 0, -9.81])

    def test_pure_yaw_torque(self):
        d = state_derivative(np.zeros(12), [P.m * P.g, 0, 0, 1e-3], np.zeros(3), P)
        expected = np.zeros(12)
        expected[11] = 1e-3 / P.izz
        np.testing.assert_allclose(d, expected, atol=1e-15)

    def test_cable_force_and_drag(self):
        s = np.zeros(12)
        s[6:9] = [1.0, -2.0, 0.5]
        f = np.array([0.1, 0.2, -0.3])
        d = state_derivative(s, hover_input(P), f, P)
        np.testing.assert_allclose(d[6:9], (f - 0.25 * s[6:9]) / P.m, atol=1e-14)

    def test_batched_matches_single(self, rng):
        s = rng.normal(scale=0.3, size=(4, 12))
        u = rng.normal(size=(4, 4)) + [4.6, 0, 0, 0]
        f = rng.normal(size=(4, 3))
        batch = state_derivative(s, u, f, P)
        for i in range(4):
            np.testing.assert_allclose(batch[i], state_derivative(s[i], u[i], f[i], P), rtol=1e-14)

    def test_gimbal_guard(self):
        s = np.zeros(12)
        s[4] = np.pi / 2 - 1e-4
        with pytest.raises(GimbalLock):
            state_derivative(s, hover_input(P), np.zeros(3), P)


def test_rk4_fourth_order():
    # y' = -y from y=1 over one unit of time
    def err(n):
        y = np.array([1.0])
        for _ in range(n):
            y = rk4_step(lambda v: -v, y, 1.0 / n)
        return abs(y[0] - np.exp(-1.0))

    ratio = err(10) / err(20)
    assert 14 < ratio < 17
