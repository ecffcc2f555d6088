"""Desired cable tensions by the parallel-spring (equal elongation) rule.

Cables of equal stiffness sharing a common payload displacement ``d_p n_p``
elongate by ``d_p / (n_i . n_p)``; requiring the tensions to be proportional
to the elongations and their projections on ``n_p`` to add up to the load
magnitude ``M`` gives an N x N system with a bidiagonal upper block and one
dense last row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import G
from .errors import CoincidentEndpoints, DegenerateGeometry, ZeroLoad

EPS_COS = 0.05


@dataclass(frozen=True)
class TensionSolution:
    tensions: np.ndarray
    directions: np.ndarray
    load_direction: np.ndarray
    magnitude: float

    @property
    def cosines(self) -> np.ndarray:
        return self.directions @ self.load_direction

    @property
    def forces(self) -> np.ndarray:
        """Per-cable force on the payload, ``f_i n_i``."""
        return self.tensions[:, None] * self.directions

    def residual(self) -> np.ndarray:
        """Off-axis part of the resultant, ``sum f_i n_i - M n_p``."""
        return self.forces.sum(axis=0) - self.magnitude * self.load_direction


def cable_directions(quad_positions, r_payload) -> np.ndarray:
    rel = np.asarray(quad_positions, dtype=float) - np.asarray(r_payload, dtype=float)
    length = np.linalg.norm(rel, axis=-1, keepdims=True)
    if np.any(length < 1e-9):
        raise CoincidentEndpoints("a quadcopter coincides with the payload")
    return rel / length


def load_direction(a_p, m_p: float, g: float = G) -> tuple[np.ndarray, float]:
    """Unit vector and magnitude of ``m_p (g K + a_p)``."""
    vec = np.asarray(a_p, dtype=float) + np.array([0.0, 0.0, g])
    norm = float(np.linalg.norm(vec))
    if norm < 1e-9:
        raise ZeroLoad("payload is in free fall; load direction undefined")
    return vec / norm, m_p * norm


def solve_bidiagonal_bordered(diag, upper, last_row, rhs) -> np.ndarray:
    """Solve the N x N system with rows ``diag[i] f_i - upper[i] f_{i+1} = rhs[i]``
    (i < N-1) and a dense last row ``last_row . f = rhs[N-1]`` in O(N).

    Each unknown is written as ``f_i = a_i + b_i f_N`` by back substitution
    from ``f_N``; the dense row then fixes ``f_N``.
    """
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    last_row = np.asarray(last_row, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = last_row.size
    a = np.zeros(n)
    b = np.zeros(n)
    b[-1] = 1.0
    for i in range(n - 2, -1, -1):
        a[i] = (rhs[i] + upper[i] * a[i + 1]) / diag[i]
        b[i] = upper[i] * b[i + 1] / diag[i]
    f_last = (rhs[-1] - last_row @ a) / (last_row @ b)
    return a + b * f_last


def allocate_tensions(directions, n_p, magnitude: float, eps_cos: float = EPS_COS) -> TensionSolution:
    directions = np.asarray(directions, dtype=float)
    n_p = np.asarray(n_p, dtype=float)
    c = directions @ n_p
    if np.any(c <= eps_cos):
        bad = np.flatnonzero(c <= eps_cos).tolist()
        raise DegenerateGeometry(f"cables {bad} nearly orthogonal to the load (cos <= {eps_cos})")
    rhs = np.zeros(c.size)
    rhs[-1] = magnitude
    f = solve_bidiagonal_bordered(c[:-1], c[1:], c, rhs)
    return TensionSolution(f, directions, n_p, float(magnitude))


def desired_tensions(quad_positions, r_payload, a_p, m_p: float, g: float = G,
                     eps_cos: float = EPS_COS) -> TensionSolution:
    n_p, magnitude = load_direction(a_p, m_p, g)
    return allocate_tensions(cable_directions(quad_positions, r_payload), n_p, magnitude, eps_cos)
