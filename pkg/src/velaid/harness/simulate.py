"""End-to-end simulation loop: truth, sensors and observer in lock-step."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from velaid.analysis import LyapunovParams, fit_decay_rate
from velaid.attitude import DEGENERACY_SCALE, hat_R
from velaid.errors import NumericalAbort
from velaid.geom3 import E3, GIMBAL_TOL, cross, norm, rotation_to_euler
from velaid.harness.scenario import ReinitEvent, Scenario
from velaid.observer import ObserverState, default_reinit_state, observer_step, reinitialize
from velaid.rigid_body import FigureEight, RandomTrajectory, TruthState, WorldConstants, truth_step_stages
from velaid.sensors import RNG_ALGORITHM, actual_field, measure, with_stages

COLUMNS = (
    ["t"]
    + [f"v{c}" for c in "xyz"] + [f"vm{c}" for c in "xyz"] + [f"vh{c}" for c in "xyz"]
    + [f"w{c}" for c in "xyz"] + [f"wm{c}" for c in "xyz"]
    + [f"a{c}" for c in "xyz"] + [f"am{c}" for c in "xyz"]
    + [f"g{c}" for c in "xyz"] + [f"gh{c}" for c in "xyz"]
    + [f"b{c}" for c in "xyz"] + [f"bm{c}" for c in "xyz"] + [f"bh{c}" for c in "xyz"]
    + [f"B{c}" for c in "xyz"]
    + ["phi", "theta", "psi", "phih", "thetah", "psih"]
    + ["ev", "eg", "eb", "V"]
)
COL = {name: i for i, name in enumerate(COLUMNS)}


@dataclass
class RunRecord:
    """Per-tick samples, one row per sensor tick, columns as in ``COLUMNS``."""

    data: np.ndarray
    columns: tuple = tuple(COLUMNS)

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, COL[name]]

    def vec(self, prefix: str) -> np.ndarray:
        return self.data[:, [COL[prefix + c] for c in "xyz"]]


@dataclass
class RunResult:
    record: RunRecord
    summary: dict
    rotated_errors: np.ndarray | None = None  # (n, 3, 3): E_v, E_gamma, E_beta per tick
    final_truth: TruthState | None = None
    final_estimate: ObserverState | None = None
    event_ticks: list = field(default_factory=list)


def make_trajectory(s: Scenario):
    if s.trajectory_kind == "random":
        rng = np.random.Generator(np.random.PCG64(s.trajectory_seed))
        return RandomTrajectory(rng, max_rate=s.max_rate, max_accel=s.max_accel, g=s.world.g)
    return FigureEight(s.trajectory, s.world.g)


def align_to_ned(world: WorldConstants) -> np.ndarray:
    """Earth-frame basis in which the nominal field has no East component.

    ``hat_R`` converges to ``align_to_ned(world).T @ R``; for a field of the
    form ``(B1, 0, B3)`` with ``B1 > 0`` this is the identity.
    """
    c = cross(E3, world.B)
    n2 = c / norm(c)
    n1 = cross(n2, E3)
    return np.column_stack((n1, n2, E3))


def estimate_from_errors(truth: TruthState, beta_true, errors, G) -> ObserverState:
    """Observer state whose error variables equal ``errors`` (e_v, e_gamma, e_beta)."""
    ev, eg, eb = (np.asarray(e, dtype=float) for e in errors)
    return ObserverState(truth.v + ev, truth.gamma + G.L @ ev + eg, beta_true + eb)


def _wrap_deg(x):
    return (x + 180.0) % 360.0 - 180.0


def _fit_windows(t, series, event_times, t_end, floor=1e-9):
    """Decay-rate fits between consecutive events, first 5% of each window skipped."""
    out = []
    bounds = list(event_times) + [t_end]
    for t0, t1 in zip(bounds[:-1], bounds[1:]):
        sel = (t >= t0) & (t < t1)
        tt, yy = t[sel], series[sel]
        start = int(0.05 * len(tt))
        tt, yy = tt[start:], yy[start:]
        keep = yy > floor
        # only the leading stretch above the floor
        if not np.all(keep):
            stop = int(np.argmin(keep))
            tt, yy = tt[:stop], yy[:stop]
        rate = None
        if len(tt) >= 10:
            rate = fit_decay_rate((tt, yy))
        out.append({"t_start": float(t0), "t_end": float(t1), "rate": rate})
    return out


def run(s: Scenario, trajectory=None, keep_rotated: bool = False, beta_override=None) -> RunResult:
    """Simulate ``s`` and return the per-tick record plus a summary.

    ``beta_override(k, beta_m) -> beta_m`` may replace the magnetometer
    sample of tick ``k`` (used to check decoupling).

    Raises
    ------
    NumericalAbort
        If any state becomes non-finite, with the offending tick index.
    """
    traj = trajectory if trajectory is not None else make_trajectory(s)
    world = s.world
    G = s.gains
    dt = s.dt
    n = s.n_ticks
    lyap = LyapunovParams.for_gains(G)
    rng = s.sensors.make_rng()
    N = align_to_ned(world)

    sample0 = traj(0.0)
    truth = TruthState(0.0, np.array(sample0.v, dtype=float), np.array(sample0.R, dtype=float), world)
    beta0 = truth.beta_in(actual_field(0.0, world.B, s.disturbance))
    x_hat = estimate_from_errors(truth, beta0, s.initial_errors, G)

    event_at = {}
    for ev in s.events:
        k = int(round(ev.t * s.rate))
        if 0 <= k < n:
            event_at.setdefault(k, []).append(ev)

    tv = np.empty((n, 3))
    tR = np.empty((n, 3, 3))
    xh = np.empty((n, 3, 3))  # rows: v_hat, gamma_hat, beta_hat
    meas = np.empty((n, 4, 3))  # rows: v_m, omega_m, a_m, beta_m
    inputs = np.empty((n, 2, 3))  # rows: omega, a
    field_B = np.empty((n, 3))
    dist = s.disturbance

    # overflow is reported as NumericalAbort below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            t = k * dt
            B_now = actual_field(t, world.B, dist)
            for ev in event_at.get(k, ()):
                x_hat = _apply_event(ev, x_hat, truth, truth.beta_in(B_now), world, G)

            smp = traj(t + 0.5 * dt)  # inputs held over [t, t+dt], sampled mid-interval
            w, a = smp.omega, smp.accel
            nxt, stages = truth_step_stages(truth, w, a, dt)
            m = measure(truth, w, a, s.sensors, B_now, rng)
            B_stage = (B_now, actual_field(t + 0.5 * dt, world.B, dist), actual_field(t + dt, world.B, dist))
            m = with_stages(m, truth, stages, B_stage)
            if beta_override is not None:
                b = np.asarray(beta_override(k, m.beta_m), dtype=float)
                m = replace(m, beta_m=b, beta_m_stages=(b,) * 4)

            tv[k] = truth.v
            tR[k] = truth.R
            xh[k, 0] = x_hat.v
            xh[k, 1] = x_hat.gamma
            xh[k, 2] = x_hat.beta
            meas[k, 0] = m.v_m
            meas[k, 1] = m.omega_m
            meas[k, 2] = m.a_m
            meas[k, 3] = m.beta_m
            inputs[k, 0] = w
            inputs[k, 1] = a
            field_B[k] = B_now

            x_hat = observer_step(x_hat, m, G, dt)
            truth = nxt
            if not x_hat.is_finite():
                raise NumericalAbort(k, "observer state")
            if not math.isfinite(float(truth.v.sum() + truth.R.sum())):
                raise NumericalAbort(k, "truth state")

    data, rotated = _derive_columns(dt, tv, tR, xh, meas, inputs, field_B, world, G, lyap, keep_rotated)
    vh_digest = hashlib.sha256(np.ascontiguousarray(xh[:, :2]).tobytes()).hexdigest()
    bm_digest = hashlib.sha256(np.ascontiguousarray(meas[:, 3]).tobytes()).hexdigest()
    record = RunRecord(data)
    summary = summarize(s, record, vh_digest, bm_digest)
    return RunResult(record, summary, rotated, truth, x_hat, sorted(event_at))


def _euler_batch(R: np.ndarray) -> np.ndarray:
    horiz = np.hypot(R[:, 2, 1], R[:, 2, 2])
    pitch = np.arctan2(-R[:, 2, 0], horiz)
    roll = np.arctan2(R[:, 2, 1], R[:, 2, 2])
    yaw = np.arctan2(R[:, 1, 0], R[:, 0, 0])
    out = np.stack([roll, pitch, yaw], axis=1)
    for i in np.flatnonzero(np.pi / 2 - np.abs(pitch) < GIMBAL_TOL):
        out[i] = rotation_to_euler(R[i], check=False)
    return out


def _hat_R_batch(gh: np.ndarray, bh: np.ndarray, g: float) -> np.ndarray:
    ng = np.linalg.norm(gh, axis=1)
    c = np.cross(gh, bh)
    nc = np.linalg.norm(c, axis=1)
    tol = DEGENERACY_SCALE * g
    ok = (ng > tol) & (nc > tol)
    safe_ng = np.where(ok, ng, 1.0)
    safe_nc = np.where(ok, nc, 1.0)
    r3 = gh / safe_ng[:, None]
    r2 = c / safe_nc[:, None]
    r1 = np.cross(r2, r3)
    out = np.stack([r1, r2, r3], axis=1)
    for i in np.flatnonzero(~ok):
        out[i] = hat_R(gh[i], bh[i], g)
    return out


def _derive_columns(dt, tv, tR, xh, meas, inputs, field_B, world, G, lyap, keep_rotated):
    n = tv.shape[0]
    data = np.empty((n, len(COLUMNS)))
    c = COL
    gamma = world.g * tR[:, 2, :]
    beta = np.einsum("nji,nj->ni", tR, field_B)
    e_v = xh[:, 0] - tv
    e_g = xh[:, 1] - gamma - e_v @ G.L.T
    e_b = xh[:, 2] - beta
    data[:, 0] = np.arange(n) * dt
    blocks = {
        "vx": tv, "vmx": meas[:, 0], "vhx": xh[:, 0],
        "wx": inputs[:, 0], "wmx": meas[:, 1],
        "ax": inputs[:, 1], "amx": meas[:, 2],
        "gx": gamma, "ghx": xh[:, 1],
        "bx": beta, "bmx": meas[:, 3], "bhx": xh[:, 2],
        "Bx": field_B,
    }
    for key, arr in blocks.items():
        data[:, c[key]:c[key] + 3] = arr
    data[:, c["phi"]:c["phi"] + 3] = _euler_batch(tR)
    R_hat = align_to_ned(world) @ _hat_R_batch(xh[:, 1], xh[:, 2], world.g)
    data[:, c["phih"]:c["phih"] + 3] = _euler_batch(R_hat)
    nv = np.einsum("ij,ij->i", e_v, e_v)
    ngm = np.einsum("ij,ij->i", e_g, e_g)
    nb = np.einsum("ij,ij->i", e_b, e_b)
    data[:, c["ev"]] = np.sqrt(nv)
    data[:, c["eg"]] = np.sqrt(ngm)
    data[:, c["eb"]] = np.sqrt(nb)
    data[:, c["V"]] = 0.5 * lyap.rho1 * ngm + 0.5 * lyap.rho1 * lyap.eps**2 * nv + 0.5 * nb
    rotated = None
    if keep_rotated:
        rotated = np.stack([np.einsum("nij,nj->ni", tR, e) for e in (e_v, e_g, e_b)], axis=1)
    return data, rotated


def _apply_event(ev: ReinitEvent, x_hat, truth, beta_true, world, G):
    if ev.mode == "default":
        return reinitialize(x_hat, default_reinit_state(world.g, world.B))
    if ev.mode == "state":
        return reinitialize(x_hat, ev.state)
    return reinitialize(x_hat, estimate_from_errors(truth, beta_true, ev.errors, G))


def attitude_errors_deg(record: RunRecord) -> np.ndarray:
    """Absolute roll, pitch, yaw estimation errors in degrees, shape (n, 3)."""
    true = np.stack([record["phi"], record["theta"], record["psi"]], axis=1)
    est = np.stack([record["phih"], record["thetah"], record["psih"]], axis=1)
    return np.abs(_wrap_deg(np.degrees(est - true)))


def summarize(s: Scenario, record: RunRecord, vh_digest: str = "", bm_digest: str = "") -> dict:
    t = record["t"]
    t_end = s.duration
    events = [0.0] + [e.t for e in s.events if 0 <= e.t < t_end]
    bounds = set(events)
    if s.disturbance is not None:
        bounds |= {x for x in (s.disturbance.t_start, s.disturbance.t_end) if 0 < x < t_end}
    bounds = sorted(bounds)
    rates = {
        name: _fit_windows(t, record[col], bounds, t_end)
        for name, col in (("v", "ev"), ("gamma", "eg"), ("beta", "eb"))
    }
    att = attitude_errors_deg(record)
    return {
        "scenario": s.name,
        "duration": s.duration,
        "rate_hz": s.rate,
        "ticks": len(record),
        "seed": s.rng_seed,
        "rng": RNG_ALGORITHM,
        "gains": s.gains_spec,
        "sigma": {"K": s.gains.sigma_K, "L": s.gains.sigma_L, "M": s.gains.sigma_M},
        "events": events[1:],
        "decay_rates": rates,
        "max_attitude_error_deg": {
            "roll": float(att[:, 0].max()) if len(att) else 0.0,
            "pitch": float(att[:, 1].max()) if len(att) else 0.0,
            "yaw": float(att[:, 2].max()) if len(att) else 0.0,
        },
        "max_error_norm": {
            "v": float(record["ev"].max()) if len(att) else 0.0,
            "gamma": float(record["eg"].max()) if len(att) else 0.0,
            "beta": float(record["eb"].max()) if len(att) else 0.0,
        },
        "decoupling": {"sha256_v_gamma_hat": vh_digest, "sha256_beta_m": bm_digest},
    }
