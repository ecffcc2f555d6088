"""Tracking covariances, containment and separation metrics of a trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import dump_flat
from .engine import Trace
from .guidance import WaypointSchedule, compute_weights


@dataclass
class MetricsReport:
    q_pos: np.ndarray  # (N, 3, 3)
    q_euler: np.ndarray  # (N, 3, 3)
    q_actual: np.ndarray  # (N, 12, 12)
    q_pos_eigenvalues: np.ndarray  # (N, 3), ascending
    q_pos_eigenvectors: np.ndarray  # (N, 3, 3), columns match the eigenvalues
    min_distance: float
    min_weight: float | None = None
    max_weight_drift: float | None = None
    observer: str = "standard"
    samples: int = 0

    def to_entries(self) -> list[tuple[str, object]]:
        e: list[tuple[str, object]] = [
            ("observer", self.observer),
            ("samples", self.samples),
        ]
        if np.isfinite(self.min_distance):
            e.append(("mission.min_distance", self.min_distance))
        if self.min_weight is not None:
            e += [("mission.min_weight", self.min_weight),
                  ("mission.max_weight_drift", self.max_weight_drift)]
        for i in range(self.q_pos.shape[0]):
            key = f"agent.{i + 1}"
            e += [
                (f"{key}.q_pos", self.q_pos[i].tolist()),
                (f"{key}.q_pos_eigenvalues", self.q_pos_eigenvalues[i].tolist()),
                (f"{key}.q_pos_eigenvectors", self.q_pos_eigenvectors[i].tolist()),
                (f"{key}.q_euler", self.q_euler[i].tolist()),
                (f"{key}.q_euler_eigenvalues", np.linalg.eigvalsh(self.q_euler[i]).tolist()),
                (f"{key}.q_actual", self.q_actual[i].tolist()),
            ]
        return e

    def dumps(self) -> str:
        return dump_flat(self.to_entries())


def _second_moment(err: np.ndarray) -> np.ndarray:
    """``sum_k e_k e_k^T / K`` per agent, for ``err`` shaped ``(K, N, d)``."""
    m = np.einsum("kni,knj->nij", err, err) / err.shape[0]
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def min_inter_agent_distance(positions: np.ndarray) -> float:
    """Smallest pairwise distance over all samples of ``positions`` ``(K, N, 3)``."""
    n = positions.shape[1]
    if n < 2:
        return float("inf")
    iu, ju = np.triu_indices(n, k=1)
    d = np.linalg.norm(positions[:, iu] - positions[:, ju], axis=-1)
    return float(d.min())


def containment_check(trace: Trace, schedule: WaypointSchedule, leaders) -> tuple[float, float]:
    """Follower weights of the actual positions against the desired leading triangle.

    Returns ``(min_margin, max_weight_drift)``: the smallest weight seen by
    any follower at any sample, and the largest ``|alpha(t) - alpha(t0)|``.
    """
    leaders = list(leaders)
    followers = [i for i in range(trace.n_agents) if i not in leaders]
    if not followers:
        return float("inf"), 0.0
    pos = trace.states[:, followers, :3]
    tri0 = schedule.initial_triangle
    alpha0 = np.array([compute_weights(p, tri0) for p in pos[0]])
    min_margin, drift = np.inf, 0.0
    for k, t in enumerate(trace.times):
        tri, _ = schedule.leader_state(float(t))
        basis = np.vstack([tri[:, 0], tri[:, 1], np.ones(3)])
        rhs = np.vstack([pos[k, :, 0], pos[k, :, 1], np.ones(len(followers))])
        alpha = np.linalg.solve(basis, rhs).T
        min_margin = min(min_margin, float(alpha.min()))
        drift = max(drift, float(np.abs(alpha - alpha0).max()))
    return min_margin, drift


def compute_metrics(trace: Trace, schedule: WaypointSchedule | None = None,
                    leaders=None) -> MetricsReport:
    """Empirical deviation covariances about the desired state.

    The mean is not subtracted.  The closing sample at the final time is
    left out so a 20 s mission at 0.01 s gives 2000 terms.
    """
    k = len(trace) - 1 if len(trace) > 1 else len(trace)
    err = trace.errors()[:k]
    q_actual = _second_moment(err)
    q_pos = q_actual[:, :3, :3].copy()
    q_euler = q_actual[:, 3:6, 3:6].copy()
    w, v = np.linalg.eigh(q_pos)
    report = MetricsReport(
        q_pos=q_pos, q_euler=q_euler, q_actual=q_actual,
        q_pos_eigenvalues=w, q_pos_eigenvectors=v,
        min_distance=min_inter_agent_distance(trace.states[:, :, :3]),
        observer=trace.observer, samples=k,
    )
    if schedule is not None and leaders is not None:
        report.min_weight, report.max_weight_drift = containment_check(trace, schedule, leaders)
    return report
