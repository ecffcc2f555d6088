"""Closed-loop simulation of the fleet, the cables and the payload.

The world state (every quadcopter's 12-state, every observer state and the
payload) is advanced by fixed-step RK4.  The LQG regulator is a
continuous-time system: the observer is integrated together with the plant
and the feedback ``K dX_hat`` is evaluated at every RK4 stage, while
measurements (and all noise samples) are drawn once per control tick and
held over the tick.  Every ``dt_lin`` seconds the desired states are
reassembled, the models relinearized, the gains resynthesized and the
observer re-based.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import guidance, lqg, tension
from .config import ScenarioConfig
from .desired import DesiredSample, assemble_desired, desired_thrust_attitude
from .dynamics import QuadParams, _check_pitch, state_derivative
from .errors import CDTransportError, SimulationAbort
from .payload import cable_forces, payload_acceleration

log = logging.getLogger(__name__)

CHANNEL_MEASUREMENT, CHANNEL_PROCESS, CHANNEL_QUAD_POSITION, CHANNEL_PAYLOAD_FORCE = range(4)


@dataclass
class TraceRecord:
    time: float
    state: np.ndarray
    estimate: np.ndarray
    desired: np.ndarray
    input: np.ndarray
    tension: np.ndarray
    payload_position: np.ndarray | None
    payload_velocity: np.ndarray | None
    residual: np.ndarray | None


@dataclass
class Trace:
    """Simulation output sampled at the trace rate; arrays indexed ``[tick, agent, ...]``."""

    times: np.ndarray
    states: np.ndarray
    estimates: np.ndarray
    desired: np.ndarray
    inputs: np.ndarray
    tensions: np.ndarray
    payload_position: np.ndarray | None = None
    payload_velocity: np.ndarray | None = None
    residual: np.ndarray | None = None
    observer: str = "standard"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.size

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]

    def record(self, k: int) -> TraceRecord:
        has_payload = self.payload_position is not None
        return TraceRecord(
            float(self.times[k]), self.states[k], self.estimates[k], self.desired[k],
            self.inputs[k], self.tensions[k],
            self.payload_position[k] if has_payload else None,
            self.payload_velocity[k] if has_payload else None,
            self.residual[k] if has_payload else None,
        )

    def errors(self) -> np.ndarray:
        return self.states - self.desired


def _sqrt_cov(cov) -> np.ndarray:
    """Factor ``F`` with ``F F^T = cov`` for a symmetric PSD ``cov``."""
    w, v = np.linalg.eigh(0.5 * (np.asarray(cov) + np.asarray(cov).T))
    return v * np.sqrt(np.clip(w, 0.0, None))


class NoiseSource:
    """Gaussian samples keyed by ``(seed, tick, channel)``.

    Each tick/channel pair owns an independent stream, so draws do not
    depend on evaluation order; agents are rows of each draw.
    """

    def __init__(self, seed: int, enabled: bool):
        self.seed = int(seed)
        self.enabled = enabled

    def draw(self, tick: int, channel: int, factor: np.ndarray, count: int | None = None):
        dim = factor.shape[0]
        shape = (dim,) if count is None else (count, dim)
        if not self.enabled:
            return np.zeros(shape)
        rng = np.random.default_rng([self.seed, tick, channel])
        return rng.standard_normal(shape) @ factor.T


def initial_payload(cfg: ScenarioConfig):
    """Static-equilibrium payload placement and cable free lengths.

    The payload hangs ``hang_depth`` below the stiffness-weighted fleet
    centroid; free lengths are shortened by a common factor chosen so that
    the cable forces exactly balance the payload weight.  Returns
    ``(position, free_lengths, stretch_ratio)``.
    """
    k = cfg.cable_k
    pos = cfg.positions
    r_p = (k[:, None] * pos).sum(axis=0) / k.sum()
    r_p[2] = pos[:, 2].mean() - cfg.hang_depth
    lengths = np.linalg.norm(pos - r_p, axis=1)
    vertical = pos[:, 2] - r_p[2]
    weight = cfg.payload.mass * cfg.payload.g
    # sum_i k_i (1 - 1/(1+e)) * vertical_i = weight
    frac = weight / float((k * vertical).sum())
    if not 0 < frac < 1:
        raise ValueError("hang depth too small to support the payload with taut cables")
    stretch = 1.0 / (1.0 - frac) - 1.0
    return r_p, lengths / (1.0 + stretch), stretch


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.params: QuadParams = cfg.quad
        n = cfg.n_agents
        self.n = n
        if cfg.mission == "deformation":
            tri0 = cfg.schedule.initial_triangle
            self.weights = np.array([guidance.compute_weights(p, tri0) for p in cfg.positions])
            for slot, agent in enumerate(cfg.leaders):
                self.weights[agent] = guidance.leader_weights(slot)
        else:
            self.weights = None
        self.has_payload = cfg.payload is not None
        if self.has_payload:
            self.r_p0, self.l0, self.stretch = initial_payload(cfg)
        self.noise = NoiseSource(cfg.seed, cfg.noise_enabled)
        self.f_meas = _sqrt_cov(cfg.noise.R)
        self.f_proc = _sqrt_cov(cfg.noise.Q)
        self.f_quadpos = _sqrt_cov(cfg.quad_position_cov)
        self.f_pforce = _sqrt_cov(cfg.payload.force_cov) if self.has_payload else None

    # ------------------------------------------------------------------
    def reference(self, t: float):
        """Desired positions and velocities of all agents at ``t``."""
        if self.weights is None:
            return self.cfg.positions.copy(), np.zeros((self.n, 3))
        return guidance.follower_desired_state(self.weights, self.cfg.schedule, t)

    def _cable_state(self, quad_pos, r_p, dr):
        if not self.has_payload:
            return np.zeros((self.n, 3))
        return cable_forces(quad_pos + dr, r_p, self.cfg.cable_k, self.l0, self.cfg.allow_compression)

    def _desired_sample(self, t, r_p, a_p, previous):
        pos, vel = self.reference(t)
        acc = np.zeros_like(pos)
        residual = np.zeros(3)
        if self.has_payload:
            sol = tension.desired_tensions(pos, r_p, a_p, self.cfg.payload.mass, self.params.g)
            f_cord = -sol.forces
            residual = sol.residual()
        else:
            f_cord = np.zeros_like(pos)
        sample = assemble_desired(t, pos, vel, acc, f_cord, self.params, self.cfg.psi_d, previous)
        return sample, f_cord, residual

    def _gains(self, sample: DesiredSample, f_cord):
        cfg = self.cfg
        K = np.empty((self.n, 4, 12))
        L = np.empty((self.n, 12, 12))
        A = np.empty((self.n, 12, 12))
        B = np.empty((self.n, 12, 4))
        for i in range(self.n):
            try:
                model = lqg.linearize(sample.state[i], sample.input[i], self.params, f_cord[i])
                gs = lqg.synthesize_gains(model, cfg.noise)
            except CDTransportError as exc:
                raise SimulationAbort(exc, i + 1, sample.time, sample.state[i].copy()) from exc
            A[i], B[i], K[i], L[i] = model.A, model.B, gs.K, gs.L
        return A, B, K, L

    # ------------------------------------------------------------------
    def run(self) -> Trace:
        cfg = self.cfg
        n, p = self.n, self.params
        dt, dt_ctrl = cfg.dt_sim, cfg.dt_ctrl
        substeps = int(round(dt_ctrl / dt))
        n_ticks = int(round((cfg.tf - cfg.t0) / dt_ctrl))
        lin_every = int(round(cfg.dt_lin / dt_ctrl))
        trace_every = max(1, int(round(cfg.dt_trace / dt_ctrl)))
        n_rec = n_ticks // trace_every + 1

        X = np.zeros((n, 12))
        X[:, :3] = cfg.positions
        X[:, 6:9] = self.reference(cfg.t0)[1]
        if cfg.initial_offset is not None:
            X[:, :3] += cfg.initial_offset
        XH = np.zeros((n, 12))
        if self.has_payload:
            r_p, v_p = self.r_p0.copy(), np.zeros(3)
        else:
            r_p, v_p = np.zeros(3), np.zeros(3)

        rec_t = np.empty(n_rec)
        rec_x = np.empty((n_rec, n, 12))
        rec_xh = np.empty((n_rec, n, 12))
        rec_xd = np.empty((n_rec, n, 12))
        rec_u = np.empty((n_rec, n, 4))
        rec_ten = np.zeros((n_rec, n))
        rec_pp = np.empty((n_rec, 3)) if self.has_payload else None
        rec_pv = np.empty((n_rec, 3)) if self.has_payload else None
        rec_res = np.empty((n_rec, 3)) if self.has_payload else None

        sample = None
        gains = None
        allocation_residual = np.zeros(3)
        single = cfg.single_linearization
        if single:
            # One LTI model for the whole mission, taken at the configured time.
            t_lin = min(max(cfg.single_linearization_time, cfg.t0), cfg.tf)
            s_lin, f_lin, _ = self._desired_sample(t_lin, r_p, np.zeros(3), None)
            gains = self._gains(s_lin, f_lin)
        measured_ff = cfg.tension_feedforward == "measured" and self.has_payload
        ein = "nij,nj->ni"
        t = cfg.t0
        rec = 0
        dr = np.zeros((n, 3))
        xd_prev = None
        for tick in range(n_ticks + 1):
            t = cfg.t0 + tick * dt_ctrl
            if tick % lin_every == 0 and tick < n_ticks:
                # Mean payload acceleration over the previous interval; per-tick
                # values are dominated by the cable-position noise.
                a_p = np.zeros(3) if sample is None else (v_p - v_p_boundary) / (t - sample.time)
                v_p_boundary = v_p.copy()
                sample, f_cord_d, allocation_residual = self._desired_sample(t, r_p, a_p, sample)
                if not single:
                    gains = self._gains(sample, f_cord_d)
            A, B, K, L = gains
            xd_now = self._desired_at(sample, t)
            u_ff = sample.input.copy()
            xd_ff = xd_now.copy()
            f_quad = -self._cable_state(X[:, :3], r_p, dr)
            if measured_ff:
                thrust, phi, theta, _ = desired_thrust_attitude(
                    np.zeros((n, 3)), xd_now[:, 6:9], f_quad, p, cfg.psi_d)
                u_ff[:, 0] = thrust
                xd_ff[:, 3] = phi
                xd_ff[:, 4] = theta
            if xd_prev is None:
                # Start at trim: level-flight angles would not balance the cable pull.
                X[:, 3:] = xd_ff[:, 3:]
                XH = X - xd_ff
            else:
                # Re-base so the absolute estimate X_d + dX_hat is unaffected by
                # changes of the desired state (positions follow the same reference).
                XH[:, 3:] += xd_prev - xd_ff[:, 3:]
            xd_prev = xd_ff[:, 3:].copy()

            if tick % trace_every == 0:
                rec_t[rec] = t
                rec_x[rec] = X
                rec_xh[rec] = xd_ff + XH
                rec_xd[rec] = xd_ff
                rec_u[rec] = u_ff + np.einsum("nij,nj->ni", K, XH)
                if self.has_payload:
                    rec_ten[rec] = np.linalg.norm(f_quad, axis=1)
                    rec_pp[rec], rec_pv[rec] = r_p, v_p
                    rec_res[rec] = allocation_residual
                rec += 1
            if tick == n_ticks:
                break

            meas = self.noise.draw(tick, CHANNEL_MEASUREMENT, self.f_meas, n)
            proc = self.noise.draw(tick, CHANNEL_PROCESS, self.f_proc, n)
            if self.has_payload:
                dr = self.noise.draw(tick, CHANNEL_QUAD_POSITION, self.f_quadpos, n)
                dF = self.noise.draw(tick, CHANNEL_PAYLOAD_FORCE, self.f_pforce)
            else:
                dF = np.zeros(3)
            dY = X + meas - xd_ff
            M = A + np.einsum("nij,njk->nik", B, K)
            if not cfg.literal_innovation:
                M = M - L
            drive = np.einsum(ein, L, dY)

            def deriv(tau, X_, XH_, rp_, vp_):
                du = np.einsum(ein, K, XH_)
                u = u_ff + du
                f_pl = self._cable_state(X_[:, :3], rp_, dr)
                xdot = state_derivative(X_, u, -f_pl, p) + proc
                xhdot = np.einsum(ein, M, XH_) + drive
                if self.has_payload:
                    ap = payload_acceleration(vp_, f_pl.sum(axis=0), cfg.payload, dF)
                else:
                    ap = np.zeros(3)
                return xdot, xhdot, vp_, ap

            try:
                for sub in range(substeps):
                    tau = t + sub * dt
                    k1 = deriv(tau, X, XH, r_p, v_p)
                    s2 = [y + 0.5 * dt * k for y, k in zip((X, XH, r_p, v_p), k1)]
                    k2 = deriv(tau + 0.5 * dt, *s2)
                    s3 = [y + 0.5 * dt * k for y, k in zip((X, XH, r_p, v_p), k2)]
                    k3 = deriv(tau + 0.5 * dt, *s3)
                    s4 = [y + dt * k for y, k in zip((X, XH, r_p, v_p), k3)]
                    k4 = deriv(tau + dt, *s4)
                    X, XH, r_p, v_p = [
                        y + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                        for y, a, b, c, d in zip((X, XH, r_p, v_p), k1, k2, k3, k4)
                    ]
                    _check_pitch(X[:, 4])
            except CDTransportError as exc:
                bad = int(np.argmax(np.abs(X[:, 4]))) + 1 if X.ndim == 2 else None
                raise SimulationAbort(exc, bad, t, X.copy()) from exc
            if not np.all(np.isfinite(X)):
                raise SimulationAbort(FloatingPointError("non-finite state"), None, t, X.copy())

        return Trace(
            times=rec_t[:rec], states=rec_x[:rec], estimates=rec_xh[:rec], desired=rec_xd[:rec],
            inputs=rec_u[:rec], tensions=rec_ten[:rec],
            payload_position=None if rec_pp is None else rec_pp[:rec],
            payload_velocity=None if rec_pv is None else rec_pv[:rec],
            residual=None if rec_res is None else rec_res[:rec],
            observer="literal" if cfg.literal_innovation else "standard",
            meta={"seed": cfg.seed, "scenario": cfg.name},
        )

    def _desired_at(self, sample: DesiredSample, t: float) -> np.ndarray:
        xd = sample.state.copy()
        xd[:, :3] = self.reference(t)[0]
        return xd


def run(cfg: ScenarioConfig) -> Trace:
    return Simulation(cfg).run()
