"""Ground-truth rigid body model and reference trajectories.

The truth is propagated with the inputs (angular velocity, specific
acceleration) held constant over each step. Orientation is advanced with the
exact SO(3) exponential; body velocity with an integrating-factor RK4
(Lawson) that treats the ``v x w`` term exactly, so gravity in body axes is
the exactly-rotated vector at every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from velaid.errors import WorldInvalid
from velaid.geom3 import E3, cross, euler_to_rotation, expm_so3, norm

STANDARD_G = 9.81
NOMINAL_B = np.array([1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)])


@dataclass(frozen=True)
class WorldConstants:
    g: float = STANDARD_G
    B: np.ndarray = field(default_factory=lambda: NOMINAL_B.copy())

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float).reshape(3)
        object.__setattr__(self, "B", B)
        if not (math.isfinite(self.g) and self.g > 0):
            raise WorldInvalid(f"gravity must be positive, got {self.g}")
        if not np.all(np.isfinite(B)) or norm(cross(B, E3)) <= 1e-6:
            raise WorldInvalid("magnetic vector B must not be collinear with E3")

    @property
    def gravity(self) -> np.ndarray:
        """gE3, gravity in Earth axes."""
        return self.g * E3


@dataclass(frozen=True)
class TruthState:
    t: float
    v: np.ndarray
    R: np.ndarray
    world: WorldConstants = field(default_factory=WorldConstants, repr=False)

    @property
    def gamma(self) -> np.ndarray:
        return self.world.g * self.R[2]

    @property
    def beta(self) -> np.ndarray:
        return self.R.T @ self.world.B

    def beta_in(self, B: np.ndarray) -> np.ndarray:
        """Body-axes view of an arbitrary Earth-frame vector."""
        return self.R.T @ B


@dataclass(frozen=True)
class StepStages:
    """Intra-step truth samples at the four RK stages (s = 0, h/2, h/2, h)."""

    v: tuple
    rotations: tuple  # R(s) at s = 0, h/2, h


def _lawson_rotations(w: np.ndarray, dt: float):
    """Q(h/2), Q(h) with Q(s) = exp(-S(w) s)."""
    return expm_so3(-0.5 * dt * w), expm_so3(-dt * w)


def truth_step_stages(s: TruthState, w, a, dt: float) -> tuple[TruthState, StepStages]:
    """:func:`truth_step` that also returns the intra-step stage values."""
    w = np.asarray(w, dtype=float)
    a = np.asarray(a, dtype=float)
    q2, q1 = _lawson_rotations(w, dt)
    g0 = s.gamma
    v0 = s.v
    h = dt
    # gamma(s) = Q(s) gamma0 exactly, hence stages 2 and 3 share it
    k1 = g0 + a
    v2 = q2 @ (v0 + 0.5 * h * k1)
    k2 = q2 @ g0 + a
    v3 = q2 @ v0 + 0.5 * h * k2
    k3 = k2
    v4 = q1 @ v0 + h * (q2 @ k3)
    k4 = q1 @ g0 + a
    v_next = q1 @ v0 + (h / 6.0) * (q1 @ k1 + 2.0 * (q2 @ (k2 + k3)) + k4)
    R_half = s.R @ q2.T
    R_next = s.R @ q1.T
    nxt = TruthState(s.t + dt, v_next, R_next, s.world)
    return nxt, StepStages((v0, v2, v3, v4), (s.R, R_half, R_next))


def truth_step(s: TruthState, w, a, dt: float) -> TruthState:
    """Advance the design model over ``dt`` with ``w`` and ``a`` held constant.

    ``Rdot = R S(w)`` is stepped with the exact exponential and
    ``vdot = v x w + gamma + a`` with an integrating-factor RK4. Gravity and
    the magnetic field in body axes are always recomputed from ``R``.
    """
    return truth_step_stages(s, w, a, dt)[0]


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    omega: np.ndarray
    accel: np.ndarray
    v: np.ndarray
    R: np.ndarray
    position: np.ndarray | None = None


@dataclass(frozen=True)
class TrajectoryParams:
    amplitude: float = 20.0  # m
    period: float = 40.0  # s
    tilt_deg: float = 15.0
    excitation_deg: float = 10.0  # roll/pitch amplitude, period T/2


class FigureEight:
    """Tilted Lissajous figure-eight with yaw following the horizontal tangent.

    Position (NED) ``p(t) = A (sin wt, sin 2wt cos(tilt), sin 2wt sin(tilt))``
    with ``w = 2 pi / T``. Roll and pitch oscillate at period ``T/2``.
    """

    def __init__(self, params: TrajectoryParams | None = None, g: float = STANDARD_G):
        self.params = params or TrajectoryParams()
        self.g = g

    def position(self, t: float) -> np.ndarray:
        p = self.params
        w = 2.0 * math.pi / p.period
        lam = math.radians(p.tilt_deg)
        s2 = math.sin(2 * w * t)
        return p.amplitude * np.array([math.sin(w * t), s2 * math.cos(lam), s2 * math.sin(lam)])

    def _kinematics(self, t: float):
        p = self.params
        A = p.amplitude
        w = 2.0 * math.pi / p.period
        lam = math.radians(p.tilt_deg)
        cl, sl = math.cos(lam), math.sin(lam)
        s1, c1 = math.sin(w * t), math.cos(w * t)
        s2, c2 = math.sin(2 * w * t), math.cos(2 * w * t)
        pos = A * np.array([s1, s2 * cl, s2 * sl])
        vel = A * np.array([w * c1, 2 * w * c2 * cl, 2 * w * c2 * sl])
        acc = A * np.array([-w * w * s1, -4 * w * w * s2 * cl, -4 * w * w * s2 * sl])

        amp = math.radians(p.excitation_deg)
        we = 2.0 * w  # excitation period T/2
        roll = amp * math.sin(we * t)
        droll = amp * we * math.cos(we * t)
        pitch = amp * math.cos(we * t)
        dpitch = -amp * we * math.sin(we * t)
        # yaw along the horizontal tangent; the horizontal speed never vanishes
        yaw = math.atan2(vel[1], vel[0])
        dyaw = (vel[0] * acc[1] - vel[1] * acc[0]) / (vel[0] ** 2 + vel[1] ** 2)
        return pos, vel, acc, (roll, pitch, yaw), (droll, dpitch, dyaw)

    def __call__(self, t: float) -> TrajectorySample:
        pos, vel, acc, (roll, pitch, yaw), (dr, dp, dy) = self._kinematics(t)
        R = euler_to_rotation((roll, pitch, yaw))
        sr, cr = math.sin(roll), math.cos(roll)
        sp, cp = math.sin(pitch), math.cos(pitch)
        omega = np.array(
            [
                dr - dy * sp,
                dp * cr + dy * sr * cp,
                -dp * sr + dy * cr * cp,
            ]
        )
        accel = R.T @ (acc - self.g * E3)
        v = R.T @ vel
        return TrajectorySample(t, omega, accel, v, R, pos)


def figure_eight_trajectory(t: float, params: TrajectoryParams | None = None, g: float = STANDARD_G) -> TrajectorySample:
    return FigureEight(params, g)(t)


class RandomTrajectory:
    """Smooth random excitation: sums of sinusoids for angular velocity and
    specific acceleration.

    Only ``omega`` and ``accel`` are meaningful in the returned samples; the
    reference ``v``/``R`` are the random initial condition. ``|omega| <=
    max_rate`` holds for all t.
    """

    def __init__(self, rng: np.random.Generator, max_rate: float = 2.0, max_accel: float = 3.0,
                 n_terms: int = 3, g: float = STANDARD_G):
        self.g = g
        per_axis = max_rate / math.sqrt(3.0)
        self._w_amp = rng.uniform(0.0, 1.0, (3, n_terms))
        self._w_amp *= per_axis / self._w_amp.sum(axis=1, keepdims=True)
        self._w_freq = rng.uniform(0.05, 1.5, (3, n_terms))
        self._w_phase = rng.uniform(0.0, 2 * math.pi, (3, n_terms))
        self._a_amp = rng.uniform(0.0, max_accel / n_terms, (3, n_terms))
        self._a_freq = rng.uniform(0.05, 1.0, (3, n_terms))
        self._a_phase = rng.uniform(0.0, 2 * math.pi, (3, n_terms))
        e = rng.uniform([-math.pi, -1.2, -math.pi], [math.pi, 1.2, math.pi])
        self.R0 = euler_to_rotation(e)
        self.v0 = rng.normal(0.0, 3.0, 3)

    def __call__(self, t: float) -> TrajectorySample:
        omega = (self._w_amp * np.sin(self._w_freq * t + self._w_phase)).sum(axis=1)
        # hover-like specific force plus excitation, expressed in body axes
        accel = (self._a_amp * np.sin(self._a_freq * t + self._a_phase)).sum(axis=1)
        accel = accel - self.g * self.R0[2]
        return TrajectorySample(t, omega, accel, self.v0, self.R0)


def initial_truth(sample: TrajectorySample, world: WorldConstants) -> TruthState:
    return TruthState(sample.t, np.array(sample.v, dtype=float), np.array(sample.R, dtype=float), world)
