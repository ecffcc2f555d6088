import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdtransport.errors import CoincidentEndpoints
from cdtransport.payload import (
    REFERENCE_COVARIANCE_3,
    CableSpec,
    PayloadParams,
    PayloadState,
    cable_force,
    cable_forces,
    payload_acceleration,
    payload_derivative,
)

PP = PayloadParams()


class TestCable:
    def test_free_length_zero_force(self):
        f = cable_force([0, 0, 2.0], [0, 0, 0], CableSpec(k=100, l0=2.0, agent=0))
        np.testing.assert_array_equal(f, 0)

    def test_stretched_vertical(self):
        # k (l - l0) = 100 * (1 - 0.5) = 50 N, pointing up toward the quad
        f = cable_force([0, 0, 1.0], [0, 0, 0], CableSpec(k=100, l0=0.5, agent=0))
        np.testing.assert_allclose(f, [0, 0, 50.0])

    def test_slack(self):
        f = cable_force([0, 0, 0.4], [0, 0, 0], CableSpec(k=100, l0=0.5, agent=0))
        np.testing.assert_array_equal(f, 0)

    def test_compression_flag(self):
        f = cable_force([0, 0, 0.4], [0, 0, 0], CableSpec(k=100, l0=0.5, agent=0), allow_compression=True)
        np.testing.assert_allclose(f, [0, 0, -10.0])

    def test_coincident(self):
        with pytest.raises(CoincidentEndpoints):
            cable_forces([[1, 2, 3]], [1, 2, 3], [100], [1])

    @given(st.lists(st.floats(-30, 30), min_size=3, max_size=3), st.floats(0.1, 20), st.floats(1, 500))
    def test_taut_only_oracle(self, rel, l0, k):
        rel = np.array(rel)
        length = np.linalg.norm(rel)
        if length < 1e-6:
            return
        f = cable_forces(rel[None], np.zeros(3), [k], [l0])[0]
        expected = k * max(length - l0, 0.0) * rel / length
        np.testing.assert_allclose(f, expected, rtol=1e-12, atol=1e-12)


class TestPayloadAcceleration:
    def test_table_defaults(self):
        assert PP.mass == 10.0
        np.testing.assert_array_equal(PP.drag, [4, 4, 4])
        np.testing.assert_array_equal(PP.force_cov, REFERENCE_COVARIANCE_3)

    def test_no_cables(self):
        ps = PayloadState(np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(payload_derivative(ps, np.empty((0, 3)), [], PP), [0, 0, -9.81])

    def test_single_vertical_cable_equilibrium(self):
        k, l0 = 100.0, 1.0
        stretch = PP.mass * PP.g / k
        ps = PayloadState(np.zeros(3), np.zeros(3))
        acc = payload_derivative(ps, [[0, 0, l0 + stretch]], [CableSpec(k, l0, 0)], PP)
        np.testing.assert_allclose(acc, 0, atol=1e-13)

    def test_four_cables_at_thirty_degrees(self):
        # Each cable carries m g / (4 cos 30 deg) along its own direction.
        length = 10.0
        th = np.deg2rad(30.0)
        tension = PP.mass * PP.g / (4 * np.cos(th))
        k = 100.0
        l0 = length - tension / k
        dirs = [(np.sin(th) * np.cos(a), np.sin(th) * np.sin(a), np.cos(th))
                for a in np.deg2rad([0, 90, 180, 270])]
        quads = length * np.array(dirs)
        ps = PayloadState(np.zeros(3), np.zeros(3))
        acc = payload_derivative(ps, quads, [CableSpec(k, l0, i) for i in range(4)], PP)
        np.testing.assert_allclose(acc, 0, atol=1e-12)

    def test_drag_opposes_velocity(self):
        acc = payload_acceleration([1.0, 0, 0], [0, 0, PP.mass * PP.g], PP)
        np.testing.assert_allclose(acc, [-0.4, 0, 0], atol=1e-15)

    def test_force_disturbance(self):
        acc = payload_acceleration(np.zeros(3), [0, 0, PP.mass * PP.g], PP, dF=[1.0, 2.0, 3.0])
        np.testing.assert_allclose(acc, [0.1, 0.2, 0.3], atol=1e-15)

    def test_spec_length_mismatch(self):
        with pytest.raises(ValueError):
            payload_derivative(PayloadState(np.zeros(3), np.zeros(3)), [[0, 0, 1]], [], PP)
