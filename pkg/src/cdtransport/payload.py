"""Point-mass payload hanging from elastic cables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import G
from .errors import CoincidentEndpoints

MIN_CABLE_LENGTH = 1e-9

# Shared 3x3 covariance printed for both the payload aerodynamic force
# disturbance (N^2) and the quadcopter position perturbation (m^2).
REFERENCE_COVARIANCE_3 = np.array(
    [
        [0.9985, 0.0488, 0.0302],
        [0.0488, 0.9906, -0.0390],
        [0.0302, -0.0390, 0.9840],
    ]
)


@dataclass(frozen=True)
class CableSpec:
    k: float
    l0: float
    agent: int

    def __post_init__(self):
        if not (self.k > 0 and self.l0 > 0):
            raise ValueError("cable stiffness and free length must be positive")


@dataclass(frozen=True)
class PayloadParams:
    mass: float = 10.0
    drag: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 4.0]))
    force_cov: np.ndarray = field(default_factory=lambda: REFERENCE_COVARIANCE_3.copy())
    g: float = G

    def __post_init__(self):
        object.__setattr__(self, "drag", np.asarray(self.drag, dtype=float))
        object.__setattr__(self, "force_cov", np.asarray(self.force_cov, dtype=float))
        if not self.mass > 0:
            raise ValueError("payload mass must be positive")


@dataclass
class PayloadState:
    position: np.ndarray
    velocity: np.ndarray


def cable_forces(quad_positions, r_payload, k, l0, allow_compression: bool = False):
    """Spring force of every cable on the payload, shape ``(N, 3)``.

    Force magnitude is ``k (l - l0)`` along the payload-to-quad direction.
    A slack cable (``l <= l0``) transmits nothing unless ``allow_compression``
    is set, in which case the signed spring law is used as is.
    """
    rel = np.asarray(quad_positions, dtype=float) - np.asarray(r_payload, dtype=float)
    length = np.linalg.norm(rel, axis=-1)
    if np.any(length < MIN_CABLE_LENGTH):
        idx = int(np.argmin(length))
        raise CoincidentEndpoints(f"cable {idx} has length {length[idx]:.3e} m")
    stretch = length - np.asarray(l0, dtype=float)
    if not allow_compression:
        stretch = np.maximum(stretch, 0.0)
    return (np.asarray(k, dtype=float) * stretch / length)[..., None] * rel


def cable_force(r_quad, r_payload, spec: CableSpec, allow_compression: bool = False):
    """Force (N) exerted on the payload by one cable."""
    return cable_forces(
        np.asarray(r_quad, dtype=float)[None], r_payload, [spec.k], [spec.l0], allow_compression
    )[0]


def payload_acceleration(velocity, total_cable_force, params: PayloadParams, dF=None):
    """Newton's law for the payload given the summed cable force."""
    acc = (np.asarray(total_cable_force, dtype=float) - params.drag * np.asarray(velocity)) / params.mass
    if dF is not None:
        acc = acc + np.asarray(dF, dtype=float) / params.mass
    acc[..., 2] -= params.g
    return acc


def payload_derivative(ps: PayloadState, quad_positions, specs, params: PayloadParams,
                       dF=None, allow_compression: bool = False) -> np.ndarray:
    """Payload acceleration from the cables listed in ``specs``.

    ``quad_positions[i]`` is the attachment point of ``specs[i]``.
    """
    if len(quad_positions) != len(specs):
        raise ValueError("one quad position per cable spec is required")
    if len(specs) == 0:
        total = np.zeros(3)
    else:
        k = [s.k for s in specs]
        l0 = [s.l0 for s in specs]
        total = cable_forces(quad_positions, ps.position, k, l0, allow_compression).sum(axis=0)
    return payload_acceleration(ps.velocity, total, params, dF)
