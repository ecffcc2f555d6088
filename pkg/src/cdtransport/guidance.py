"""Planar homogeneous-deformation guidance driven by three leaders.

A homogeneous deformation maps every agent's reference position through the
same affine map ``r(t) = Q(t) r(t0) + D(t)``.  With three leaders at the
vertices of a triangle the map is fully determined by the leaders, and each
follower can be written as a fixed convex combination of the leaders
(its barycentric weights).  Followers therefore only need the leaders'
waypoints to reproduce the deformation; no other communication is needed.

Positions are plain ``numpy`` arrays of shape ``(3,)``; a leading triangle is
an array of shape ``(3, 3)`` whose rows are the three leaders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfSchedule, SingularTriangle

#: Relative determinant threshold for the rank condition.
EPS_RANK = 1e-9


def _as_triangle(tri) -> np.ndarray:
    tri = np.asarray(tri, dtype=float)
    if tri.shape == (3, 2):
        tri = np.column_stack([tri, np.zeros(3)])
    if tri.shape != (3, 3):
        raise ValueError(f"leading triangle must have shape (3, 3), got {tri.shape}")
    return tri


def triangle_determinant(tri) -> float:
    """Signed determinant of the x-y edge vectors ``r2 - r1`` and ``r3 - r1``."""
    tri = _as_triangle(tri)
    e1 = tri[1, :2] - tri[0, :2]
    e2 = tri[2, :2] - tri[0, :2]
    return float(e1[0] * e2[1] - e1[1] * e2[0])


def check_leading_triangle(tri, eps: float = EPS_RANK) -> bool:
    """True iff the leaders' x-y edge vectors have rank 2.

    The determinant is compared against ``eps`` times the squared longest
    edge so the test is scale free.
    """
    tri = _as_triangle(tri)
    if not np.all(np.isfinite(tri)):
        return False
    xy = tri[:, :2]
    longest = max(
        np.linalg.norm(xy[1] - xy[0]),
        np.linalg.norm(xy[2] - xy[0]),
        np.linalg.norm(xy[2] - xy[1]),
    )
    if longest == 0.0:
        return False
    return abs(triangle_determinant(tri)) > eps * longest**2


def _require_triangle(tri) -> np.ndarray:
    tri = _as_triangle(tri)
    if not check_leading_triangle(tri):
        raise SingularTriangle(f"leaders are collinear or coincident: {tri[:, :2].tolist()}")
    return tri


def compute_weights(p0, tri0) -> np.ndarray:
    """Barycentric weights of ``p0`` with respect to the leading triangle ``tri0``.

    Solves ``[x1 x2 x3; y1 y2 y3; 1 1 1] a = [x; y; 1]``.
    """
    tri0 = _require_triangle(tri0)
    p0 = np.asarray(p0, dtype=float)
    lhs = np.vstack([tri0[:, 0], tri0[:, 1], np.ones(3)])
    rhs = np.array([p0[0], p0[1], 1.0])
    return np.linalg.solve(lhs, rhs)


@dataclass(frozen=True)
class HomogeneousMap:
    """Affine map ``p -> Q p + D`` restricted to the x-y plane."""

    Q: np.ndarray
    D: np.ndarray

    @classmethod
    def identity(cls) -> HomogeneousMap:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_planar(cls, q2: np.ndarray, d2: np.ndarray) -> HomogeneousMap:
        # Rows/columns set explicitly so the planar constraints hold exactly.
        Q = np.eye(3)
        Q[:2, :2] = q2
        D = np.zeros(3)
        D[:2] = d2
        return cls(Q, D)

    def is_planar(self) -> bool:
        Q, D = self.Q, self.D
        return (
            Q[0, 2] == 0.0 and Q[1, 2] == 0.0 and Q[2, 0] == 0.0 and Q[2, 1] == 0.0
            and Q[2, 2] == 1.0 and D[2] == 0.0
        )


def solve_homogeneous_map(tri0, tri_t) -> HomogeneousMap:
    """Jacobian ``Q`` and displacement ``D`` carrying ``tri0`` onto ``tri_t``.

    Unknowns are ordered ``[Q11, Q12, Q21, Q22, D1, D2]`` and the right-hand
    side is ``[x1, x2, x3, y1, y2, y3]`` at time t, giving the 6x6 system
    ``[I2 (x) L0, I2 (x) 1] J = P`` with ``L0`` the 3x2 matrix of initial
    leader x-y coordinates.
    """
    tri0 = _require_triangle(tri0)
    tri_t = _require_triangle(tri_t)
    L0 = tri0[:, :2]
    M = np.hstack([np.kron(np.eye(2), L0), np.kron(np.eye(2), np.ones((3, 1)))])
    P = np.concatenate([tri_t[:, 0], tri_t[:, 1]])
    J = np.linalg.solve(M, P)
    return HomogeneousMap.from_planar(J[:4].reshape(2, 2), J[4:])


def apply_map(hmap: HomogeneousMap, p0) -> np.ndarray:
    """Image of ``p0`` (or of each row of an ``(n, 3)`` array) under ``hmap``."""
    p0 = np.asarray(p0, dtype=float)
    return p0 @ hmap.Q.T + hmap.D


@dataclass(frozen=True)
class WaypointSchedule:
    """Leader waypoints at strictly increasing sample times.

    ``positions[k]`` is the ``(3, 3)`` leading triangle at ``times[k]``.
    """

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a schedule needs at least two sample times")
        if positions.shape != (times.size, 3, 3):
            raise ValueError(
                f"positions must have shape ({times.size}, 3, 3), got {positions.shape}"
            )
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def tf(self) -> float:
        return float(self.times[-1])

    @property
    def initial_triangle(self) -> np.ndarray:
        return self.positions[0]

    def invalid_samples(self) -> list[float]:
        """Sample times at which the leaders do not form a valid planar triangle."""
        bad = []
        for t, tri in zip(self.times, self.positions):
            if not check_leading_triangle(tri) or np.ptp(tri[:, 2]) != 0.0:
                bad.append(float(t))
        return bad

    def interval(self, t: float) -> int:
        """Index k of the active interval ``[times[k], times[k+1])``.

        The final sample time belongs to the last interval.
        """
        if not (self.t0 <= t <= self.tf):
            raise OutOfSchedule(f"t={t} outside schedule span [{self.t0}, {self.tf}]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(k, self.times.size - 2)

    def leader_state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated leading triangle and leader velocities at ``t``."""
        k = self.interval(t)
        t_a, t_b = self.times[k], self.times[k + 1]
        r_a, r_b = self.positions[k], self.positions[k + 1]
        vel = (r_b - r_a) / (t_b - t_a)
        return r_a + (t - t_a) * vel, vel

    def map_at(self, t: float) -> HomogeneousMap:
        tri_t, _ = self.leader_state(t)
        return solve_homogeneous_map(self.initial_triangle, tri_t)


def follower_desired_state(weights, schedule: WaypointSchedule, t: float):
    """Desired position and velocity of an agent with barycentric ``weights``.

    Inside each waypoint interval the position is the weighted sum of the
    linearly interpolated leader positions, so the velocity is constant on
    the interval.  ``weights`` may also be an ``(n, 3)`` array, one row per
    agent, in which case ``(n, 3)`` arrays are returned.
    """
    weights = np.asarray(weights, dtype=float)
    tri_t, leader_vel = schedule.leader_state(t)
    return weights @ tri_t, weights @ leader_vel


def leader_weights(index: int) -> np.ndarray:
    w = np.zeros(3)
    w[index] = 1.0
    return w
