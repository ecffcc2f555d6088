"""Nonlinear 12-state quadcopter model.

State ordering is ``[x, y, z, phi, theta, psi, u, v, w, p, q, r]``: inertial
position, 3-2-1 Euler angles, inertial velocity and body rates.  Inputs are
``[T, tau_phi, tau_theta, tau_psi]``.  Every function accepts arrays with
arbitrary leading batch dimensions so a whole fleet is evaluated at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GimbalLock

G = 9.81
STATE_DIM = 12
INPUT_DIM = 4
THETA_MARGIN = 1e-3
STATE_NAMES = ("x", "y", "z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r")
INPUT_NAMES = ("T", "tau_phi", "tau_theta", "tau_psi")


@dataclass(frozen=True)
class QuadParams:
    m: float = 0.468
    ixx: float = 4.856e-3
    iyy: float = 4.856e-3
    izz: float = 8.801e-3
    ax: float = 0.25
    ay: float = 0.25
    az: float = 0.25
    g: float = G

    def __post_init__(self):
        for name in ("m", "ixx", "iyy", "izz", "ax", "ay", "az", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"QuadParams.{name} must be positive")

    @property
    def inertia(self) -> np.ndarray:
        return np.array([self.ixx, self.iyy, self.izz])

    @property
    def drag(self) -> np.ndarray:
        return np.array([self.ax, self.ay, self.az])


def rotation_321(phi, theta, psi) -> np.ndarray:
    """Rotation whose rows are the body axes ``i_b, j_b, k_b`` in inertial components.

    Product of the elementary roll, pitch and yaw matrices, ``R1(phi) R2(theta) R3(psi)``.
    """
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    r_yaw = np.array([[cp, sp, 0.0], [-sp, cp, 0.0], [0.0, 0.0, 1.0]])
    r_pitch = np.array([[ct, 0.0, -st], [0.0, 1.0, 0.0], [st, 0.0, ct]])
    r_roll = np.array([[1.0, 0.0, 0.0], [0.0, cf, sf], [0.0, -sf, cf]])
    return r_roll @ r_pitch @ r_yaw


def body_z_axis(phi, theta, psi) -> np.ndarray:
    """Thrust axis ``k_b`` in inertial components (last axis of the result)."""
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.stack(
        [cf * st * cp + sf * sp, cf * st * sp - sf * cp, ct * cf], axis=-1
    )


def _check_pitch(theta, margin: float = THETA_MARGIN) -> None:
    theta = np.asarray(theta)
    if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) >= np.pi / 2 - margin):
        raise GimbalLock(f"pitch {np.max(np.abs(theta)):.6f} rad inside the gimbal guard")


def euler_rate_matrix(phi, theta) -> np.ndarray:
    """``W_321`` with ``(p, q, r) = W (phi_dot, theta_dot, psi_dot)``.

    Batched inputs give shape ``(..., 3, 3)``.
    """
    phi, theta = np.broadcast_arrays(np.asarray(phi, dtype=float), np.asarray(theta, dtype=float))
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    one, zero = np.ones_like(phi), np.zeros_like(phi)
    rows = [[one, zero, -st], [zero, cf, ct * sf], [zero, -sf, ct * cf]]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def euler_rate_matrix_inv(phi, theta) -> np.ndarray:
    """Inverse of :func:`euler_rate_matrix`; maps body rates to Euler-angle rates."""
    ct = np.cos(theta)
    if abs(ct) < 1e-6:
        raise GimbalLock(f"cos(theta)={ct:.3e}; W_321 is singular")
    cf, sf = np.cos(phi), np.sin(phi)
    tt = np.tan(theta)
    return np.array(
        [[1.0, sf * tt, cf * tt], [0.0, cf, -sf], [0.0, sf / ct, cf / ct]]
    )


def state_derivative(s, u, f_cable, params: QuadParams) -> np.ndarray:
    """Time derivative of the 12-state for input ``u`` and external cable force.

    Thrust acts along ``+k_b``; the cable force (N) and linear drag enter the
    translational acceleration divided by the mass.
    """
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    f_cable = np.asarray(f_cable, dtype=float)
    phi, theta, psi = s[..., 3], s[..., 4], s[..., 5]
    _check_pitch(theta)
    vel = s[..., 6:9]
    p, q, r = s[..., 9], s[..., 10], s[..., 11]
    thrust = u[..., 0]

    cf, sf = np.cos(phi), np.sin(phi)
    ct, tt = np.cos(theta), np.tan(theta)

    out = np.empty(np.broadcast_shapes(s.shape, u.shape[:-1] + (12,), f_cable.shape[:-1] + (12,)))
    out[..., 0:3] = vel
    out[..., 3] = p + q * sf * tt + r * cf * tt
    out[..., 4] = q * cf - r * sf
    out[..., 5] = (q * sf + r * cf) / ct

    kb = body_z_axis(phi, theta, psi)
    acc = (f_cable - params.drag * vel) / params.m + (thrust / params.m)[..., None] * kb
    acc[..., 2] -= params.g
    out[..., 6:9] = acc

    ixx, iyy, izz = params.ixx, params.iyy, params.izz
    out[..., 9] = (iyy - izz) / ixx * q * r + u[..., 1] / ixx
    out[..., 10] = (izz - ixx) / iyy * r * p + u[..., 2] / iyy
    out[..., 11] = (ixx - iyy) / izz * p * q + u[..., 3] / izz
    return out


def hover_input(params: QuadParams) -> np.ndarray:
    return np.array([params.m * params.g, 0.0, 0.0, 0.0])


def rk4_step(fun, y, dt: float):
    """One classical Runge-Kutta step of ``y' = fun(y)``."""
    k1 = fun(y)
    k2 = fun(y + 0.5 * dt * k1)
    k3 = fun(y + 0.5 * dt * k2)
    k4 = fun(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
