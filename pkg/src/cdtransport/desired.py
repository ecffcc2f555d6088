"""Desired 12-state and feedforward input from a guidance trajectory.

Given a reference position/velocity/acceleration and the cable force acting
on the vehicle, the required thrust vector fixes the thrust magnitude and the
thrust axis ``k_b``; roll and pitch follow from inverting the ``k_b``
expression for a chosen yaw.  Rates and torques come from backward
differences between consecutive samples.  All functions broadcast over
leading (agent) dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import QuadParams, _check_pitch, euler_rate_matrix
from .errors import AttitudeOutOfRange, DegenerateForce


def desired_thrust_attitude(acc_d, vel_d, f_cord_d, params: QuadParams, psi_d=0.0):
    """Return ``(T_d, phi_d, theta_d, kb_d)``.

    ``f_cord_d`` is the cable force acting on the quadcopter (N).  The thrust
    vector is ``m a_d + m g K - F_aero(v_d) - f_cord_d`` with linear drag
    ``F_aero = -A v``.
    """
    acc_d = np.asarray(acc_d, dtype=float)
    vel_d = np.asarray(vel_d, dtype=float)
    f_cord_d = np.asarray(f_cord_d, dtype=float)
    force = params.m * acc_d + params.drag * vel_d - f_cord_d
    force = force + np.array([0.0, 0.0, params.m * params.g])
    thrust = np.linalg.norm(force, axis=-1)
    if np.any(thrust < 1e-9):
        raise DegenerateForce("required thrust vector vanishes")
    kb = force / thrust[..., None]
    phi, theta = attitude_from_thrust_axis(kb, psi_d)
    return thrust, phi, theta, kb


def attitude_from_thrust_axis(kb, psi):
    """Roll and pitch whose 3-2-1 thrust axis equals ``kb`` at yaw ``psi``."""
    kb = np.asarray(kb, dtype=float)
    bx, by, bz = kb[..., 0], kb[..., 1], kb[..., 2]
    sp, cp = np.sin(psi), np.cos(psi)
    arg = bx * sp - by * cp
    if np.any(np.abs(arg) > 1.0 + 1e-12):
        raise AttitudeOutOfRange(f"roll argument {np.max(np.abs(arg)):.6f} exceeds 1")
    phi = np.arcsin(np.clip(arg, -1.0, 1.0))
    theta = np.arctan2(bx * cp + by * sp, bz)
    return phi, theta


def finite_difference_rates(angles_prev, angles, dt: float):
    """Backward-difference Euler-angle rates and the matching body rates.

    Body rates use ``W_321`` evaluated at the current angles.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    angles_prev = np.asarray(angles_prev, dtype=float)
    angles = np.asarray(angles, dtype=float)
    angle_rates = (angles - angles_prev) / dt
    W = euler_rate_matrix(angles[..., 0], angles[..., 1])
    body_rates = np.einsum("...ij,...j->...i", W, angle_rates)
    return angle_rates, body_rates


def desired_torques(rates_prev, rates, dt: float, inertia):
    """Euler's equation ``M = I w_dot + w x (I w)`` at the current desired rates."""
    rates_prev = np.asarray(rates_prev, dtype=float)
    rates = np.asarray(rates, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    rate_dot = (rates - rates_prev) / dt
    return inertia * rate_dot + np.cross(rates, inertia * rates)


@dataclass(frozen=True)
class DesiredSample:
    """Desired state, input and attitude of one or more agents at one time."""

    time: float
    state: np.ndarray
    input: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        return self.state[..., 3:6]

    @property
    def body_rates(self) -> np.ndarray:
        return self.state[..., 9:12]


def assemble_desired(time: float, pos, vel, acc, f_cord, params: QuadParams,
                     psi_d=0.0, previous: DesiredSample | None = None) -> DesiredSample:
    """Desired 12-state and input at ``time``.

    With no ``previous`` sample the rates (and so the torques) are zero.
    """
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    thrust, phi, theta, _ = desired_thrust_attitude(acc, vel, f_cord, params, psi_d)
    _check_pitch(theta)
    psi = np.broadcast_to(np.asarray(psi_d, dtype=float), np.shape(phi))
    angles = np.stack([phi, theta, psi], axis=-1)
    if previous is None:
        body_rates = np.zeros_like(angles)
        torques = np.zeros_like(angles)
    else:
        dt = time - previous.time
        _, body_rates = finite_difference_rates(previous.angles, angles, dt)
        torques = desired_torques(previous.body_rates, body_rates, dt, params.inertia)
    state = np.concatenate([pos, angles, vel, body_rates], axis=-1)
    inp = np.concatenate([np.asarray(thrust)[..., None], torques], axis=-1)
    return DesiredSample(float(time), state, inp)
