"""Linearization, Riccati gains and the deviation-state LQG loop.

Sign conventions: the regulator gain is ``K = -H^{-1} B^T S`` and the
control is ``dU = K dX_hat`` (so ``A + B K`` is the closed loop); the Kalman
gain is ``L = P C^T R^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dynamics import QuadParams, state_derivative
from .errors import NonConvergence, NotStabilizable

# 12x12 symmetric matrix printed for the case study; both cost and noise
# matrices are scaled from it by 0.01.
REFERENCE_MATRIX_12 = np.array(
    [
        [98, 1, -3, 0, 2, 0, 0, 0, 3, -2, -7, 4],
        [1, 91, -1, 0, -4, 2, -1, 3, -4, -2, -3, 0],
        [-3, -1, 98, -4, -2, 0, 0, -5, -3, 5, -1, 2],
        [0, 0, -4, 99, 2, 3, 2, 1, 0, -3, -5, 2],
        [2, -4, -2, 2, 90, 5, -1, 1, 1, 1, 3, 0],
        [0, 2, 0, 3, 5, 95, 1, 0, 1, 0, -1, -6],
        [0, -1, 0, 2, -1, 1, 97, 2, -2, 0, -4, 4],
        [0, 3, -5, 1, 1, 0, 2, 97, 5, -1, 0, 5],
        [3, -4, -3, 0, 1, 1, -2, 5, 98, -2, 1, 0],
        [-2, -2, 5, -3, 1, 0, 0, -1, -2, 96, -2, -1],
        [-7, -3, -1, -5, 3, -1, -4, 0, 1, -2, 101, -1],
        [4, 0, 2, 2, 0, -6, 4, 5, 0, -1, -1, 97],
    ],
    dtype=float,
)

ITER_CAP = 100


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    t_start: float = 0.0
    t_end: float = np.inf


@dataclass(frozen=True)
class NoiseModel:
    E: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    @classmethod
    def canonical(cls) -> NoiseModel:
        E = 0.01 * REFERENCE_MATRIX_12
        return cls(E=E, H=0.01 * np.eye(4), Q=E.copy(), R=0.01 * REFERENCE_MATRIX_12)


@dataclass(frozen=True)
class GainSet:
    K: np.ndarray
    L: np.ndarray
    S: np.ndarray
    P: np.ndarray


def linearize(x_d, u_d, params: QuadParams, f_cable, t_start: float = 0.0,
              t_end: float = np.inf) -> LinearModel:
    """Central-difference Jacobians of :func:`state_derivative` about ``(x_d, u_d)``.

    The cable force is held fixed while differentiating.
    """
    x_d = np.asarray(x_d, dtype=float)
    u_d = np.asarray(u_d, dtype=float)
    f_cable = np.asarray(f_cable, dtype=float)

    def jac(center, fun):
        n = center.size
        h = np.maximum(1e-6, 1e-6 * np.abs(center))
        pert = np.zeros((2 * n, n)) + center
        idx = np.arange(n)
        pert[idx, idx] += h
        pert[n + idx, idx] -= h
        vals = fun(pert)
        return ((vals[:n] - vals[n:]) / (2.0 * h)[:, None]).T

    A = jac(x_d, lambda xs: state_derivative(xs, u_d, f_cable, params))
    B = jac(u_d, lambda us: state_derivative(x_d, us, f_cable, params))
    return LinearModel(A, B, np.eye(x_d.size), t_start, t_end)


def care_residual(S, A, B, E, H) -> np.ndarray:
    return S @ A + A.T @ S - S @ B @ np.linalg.solve(H, B.T @ S) + E


def _schur_care(A, G, E, tol: float):
    n = A.shape[0]
    Z = np.block([[A, -G], [-E, -A.T]])
    eigs = np.linalg.eigvals(Z)
    scale = max(1.0, np.linalg.norm(Z, 1))
    if np.min(np.abs(eigs.real)) <= tol * scale:
        raise NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis")
    T, U, sdim = sla.schur(Z, output="real", sort="lhp")
    if sdim != n:
        raise NotStabilizable(f"found {sdim} stable Hamiltonian eigenvalues, expected {n}")
    U11, U21 = U[:n, :n], U[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise NotStabilizable("stable invariant subspace is not a graph; (A, B) not stabilizable")
    S = np.linalg.solve(U11.T, U21.T).T
    return 0.5 * (S + S.T)


def solve_care(A, B, E, H, rtol: float = 1e-12, max_iter: int = ITER_CAP):
    """Stabilizing solution of ``S A + A^T S - S B H^{-1} B^T S + E = 0``.

    An ordered real Schur decomposition of the Hamiltonian gives the initial
    solution; Newton-Kleinman iterations then refine it until the relative
    residual stops improving.  Returns ``(S, K)`` with ``K = -H^{-1} B^T S``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    G = B @ np.linalg.solve(H, B.T)
    S = _schur_care(A, G, E, tol=1e-10)

    def rel_res(S):
        return np.linalg.norm(care_residual(S, A, B, E, H)) / (1.0 + np.linalg.norm(S))

    best = rel_res(S)
    for _ in range(max_iter):
        if best <= rtol:
            break
        Kp = np.linalg.solve(H, B.T @ S)
        Acl = A - B @ Kp
        if np.max(np.linalg.eigvals(Acl).real) >= 0:
            break
        S_new = sla.solve_continuous_lyapunov(Acl.T, -(E + Kp.T @ H @ Kp))
        S_new = 0.5 * (S_new + S_new.T)
        r = rel_res(S_new)
        if not r < best:
            break
        S, best = S_new, r
    else:
        raise NonConvergence(f"CARE refinement did not converge in {max_iter} iterations")
    K = -np.linalg.solve(H, B.T @ S)
    return S, K


def solve_fare(A, C, Q, R, rtol: float = 1e-12, max_iter: int = ITER_CAP):
    """Filter Riccati ``A P + P A^T - P C^T R^{-1} C P + Q = 0`` by duality.

    Returns ``(P, L)`` with ``L = P C^T R^{-1}``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P, _ = solve_care(A.T, C.T, Q, R, rtol=rtol, max_iter=max_iter)
    L = np.linalg.solve(R.T, C @ P.T).T
    return P, L


def fare_residual(P, A, C, Q, R) -> np.ndarray:
    return A @ P + P @ A.T - P @ C.T @ np.linalg.solve(R, C @ P) + Q


def synthesize_gains(model: LinearModel, noise: NoiseModel) -> GainSet:
    S, K = solve_care(model.A, model.B, noise.E, noise.H)
    P, L = solve_fare(model.A, model.C, noise.Q, noise.R)
    return GainSet(K=K, L=L, S=S, P=P)


def spectral_abscissa(M) -> float:
    return float(np.max(np.linalg.eigvals(M).real))


def control_update(dx_hat, K) -> np.ndarray:
    """Deviation input ``dU = K dX_hat`` (batched over leading dimensions)."""
    return np.einsum("...ij,...j->...i", K, dx_hat)


def estimator_step(dx_hat, dy, du, A, B, L, C, dt: float, literal_innovation: bool = False):
    """Advance the observer ``dX_hat' = A dX_hat + B dU + L (dY - C dX_hat)`` by ``dt``.

    ``dy`` and ``du`` are held over the step; one RK4 step is taken.  With
    ``literal_innovation`` the innovation is ``L dY`` instead.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    ein = "...ij,...j->...i"
    drive = np.einsum(ein, B, du) + np.einsum(ein, L, dy)
    if literal_innovation:
        M = A
    else:
        M = A - np.einsum("...ij,...jk->...ik", L, C)

    def rhs(x):
        return np.einsum(ein, M, x) + drive

    k1 = rhs(dx_hat)
    k2 = rhs(dx_hat + 0.5 * dt * k1)
    k3 = rhs(dx_hat + 0.5 * dt * k2)
    k4 = rhs(dx_hat + dt * k3)
    return dx_hat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
