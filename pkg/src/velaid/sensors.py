"""Sensor models: biased, noisy body-frame measurements and the scripted
magnetic-field disturbance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from velaid.geom3 import rot_x
from velaid.rigid_body import StepStages, TruthState

RNG_ALGORITHM = "numpy.random.PCG64"

CHANNELS = ("v", "omega", "a", "beta")


def _zeros():
    return np.zeros(3)


@dataclass(frozen=True)
class SensorSuite:
    """Constant biases and per-sample noise variances for the four channels.

    Variances are discrete, per-sample values at the simulation rate.
    """

    b_v: np.ndarray = field(default_factory=_zeros)
    b_omega: np.ndarray = field(default_factory=_zeros)
    b_a: np.ndarray = field(default_factory=_zeros)
    b_beta: np.ndarray = field(default_factory=_zeros)
    var_v: np.ndarray = field(default_factory=_zeros)
    var_omega: np.ndarray = field(default_factory=_zeros)
    var_a: np.ndarray = field(default_factory=_zeros)
    var_beta: np.ndarray = field(default_factory=_zeros)
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("b_v", "b_omega", "b_a", "b_beta", "var_v", "var_omega", "var_a", "var_beta"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if name.startswith("var") and np.any(arr < 0):
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, arr)

    @classmethod
    def ideal(cls, rng_seed: int = 0) -> "SensorSuite":
        return cls(rng_seed=rng_seed)

    @classmethod
    def table1(cls, rng_seed: int = 0) -> "SensorSuite":
        """Biases and noise variances of the reference simulation."""
        return cls(
            b_v=[-0.10, 0.30, -0.05],
            b_omega=[0.0250, -0.0300, -0.0175],
            b_a=[0.05, 0.04, -0.02],
            b_beta=[0.024, -0.020, -0.018],
            var_v=[2e-5, 2e-5, 2e-5],
            var_omega=[2e-7, 2e-7, 2e-7],
            var_a=[1e-5, 1e-5, 1e-5],
            var_beta=[1e-7, 1e-7, 1e-7],
            rng_seed=rng_seed,
        )

    def noise_free(self) -> "SensorSuite":
        return replace(self, var_v=_zeros(), var_omega=_zeros(), var_a=_zeros(), var_beta=_zeros())

    def make_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.rng_seed))


@dataclass(frozen=True)
class Measurement:
    """One synchronized sample of the four sensor channels.

    ``v_m_stages`` / ``beta_m_stages`` optionally carry the same channel
    sampled at the four RK stages of the step (s = 0, h/2, h/2, h). They let a
    simulator emulate continuous ideal sensing of the velocity and magnetic
    channels; real data leaves them as ``None`` (zero-order hold).
    """

    t: float
    v_m: np.ndarray
    omega_m: np.ndarray
    a_m: np.ndarray
    beta_m: np.ndarray
    v_m_stages: tuple | None = None
    beta_m_stages: tuple | None = None


@dataclass(frozen=True)
class MagneticDisturbance:
    """Rotation of the Earth-frame field about E1 by
    ``amplitude * sin^2(pi tau / width) * sin(rate * tau)``, ``tau = t - t_start``.

    The envelope vanishes with zero slope at both ends of the window and the
    field norm is preserved, so only its direction is disturbed.
    """

    t_start: float = 80.0
    t_end: float = 100.0
    amplitude: float = 1.5  # rad
    rate: float = 0.5  # rad/s

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("disturbance window must satisfy t_start < t_end")

    def angle(self, t: float) -> float:
        if t <= self.t_start or t >= self.t_end:
            return 0.0
        tau = t - self.t_start
        env = math.sin(math.pi * tau / (self.t_end - self.t_start)) ** 2
        return self.amplitude * env * math.sin(self.rate * tau)


def actual_field(t: float, B_nominal: np.ndarray, d: MagneticDisturbance | None) -> np.ndarray:
    """Earth-frame magnetic vector at time ``t``: nominal, or rotated about E1
    inside the disturbance window."""
    B_nominal = np.asarray(B_nominal, dtype=float)
    if d is None:
        return B_nominal.copy()
    ang = d.angle(t)
    if ang == 0.0:
        return B_nominal.copy()
    return rot_x(ang) @ B_nominal


def _noise(rng, var):
    # always draw, so the stream layout does not depend on the variances
    z = rng.standard_normal(3)
    return z * np.sqrt(var)


def measure(s: TruthState, omega, accel, suite: SensorSuite, B_actual, rng) -> Measurement:
    """Corrupt the truth with bias and Gaussian noise, channel by channel.

    The magnetometer sees ``B_actual`` (possibly disturbed), not the nominal
    field. Noise is drawn in the fixed order v, omega, a, beta.
    """
    nv = _noise(rng, suite.var_v)
    nw = _noise(rng, suite.var_omega)
    na = _noise(rng, suite.var_a)
    nb = _noise(rng, suite.var_beta)
    return Measurement(
        t=s.t,
        v_m=s.v + suite.b_v + nv,
        omega_m=np.asarray(omega, dtype=float) + suite.b_omega + nw,
        a_m=np.asarray(accel, dtype=float) + suite.b_a + na,
        beta_m=s.R.T @ np.asarray(B_actual, dtype=float) + suite.b_beta + nb,
    )


def with_stages(m: Measurement, s: TruthState, stages: StepStages, B_stage) -> Measurement:
    """Attach intra-step velocity and field samples consistent with ``m``.

    Bias and noise are held over the step; only the underlying truth varies.
    ``B_stage`` holds the Earth-frame field at s = 0, h/2, h.
    """
    dv = m.v_m - s.v
    db = m.beta_m - s.R.T @ B_stage[0]
    v_st = (m.v_m,) + tuple(v + dv for v in stages.v[1:])
    b0 = m.beta_m
    b_half = stages.rotations[1].T @ B_stage[1] + db
    b_end = stages.rotations[2].T @ B_stage[2] + db
    return replace(m, v_m_stages=v_st, beta_m_stages=(b0, b_half, b_half, b_end))
