"""Velocity-aided attitude observer.

The estimator state is ``(v_hat, gamma_hat, beta_hat)``, three free vectors
in body axes with no norm constraint. It copies the design model and adds
output-injection terms driven by the velocity and magnetometer residuals:

    v_hat'     = v_hat x w_m + a_m + gamma_hat - (L + K)(v_hat - v_m)
    gamma_hat' = gamma_hat x w_m - (L S(w_m) - S(w_m) L + L K)(v_hat - v_m)
    beta_hat'  = beta_hat x w_m - M (beta_hat - beta_m)

The magnetometer only ever enters the last line, so velocity and gravity
estimates cannot be corrupted by magnetic disturbances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from velaid.errors import GainNotPositiveDefinite
from velaid.geom3 import E3, expm_so3, skew
from velaid.sensors import Measurement


def _min_sym_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


@dataclass(frozen=True)
class Gains:
    K: np.ndarray
    L: np.ndarray
    M: np.ndarray
    sigma_K: float
    sigma_L: float
    sigma_M: float

    @property
    def is_scalar(self) -> bool:
        return all(np.array_equal(G, G[0, 0] * np.eye(3)) for G in (self.K, self.L, self.M))


def validate_gains(K, L, M) -> Gains:
    """Check that the symmetric parts of K, L, M are positive definite.

    Returns a :class:`Gains` recording the smallest eigenvalue of each
    symmetric part.

    Raises
    ------
    GainNotPositiveDefinite
        Naming the first offending matrix.
    """
    mats = {}
    sig = {}
    for name, G in (("K", K), ("L", L), ("M", M)):
        G = np.array(G, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(G)):
            raise GainNotPositiveDefinite(name, float("nan"))
        s = _min_sym_eig(G)
        if not s > 0.0:
            raise GainNotPositiveDefinite(name, s)
        G.setflags(write=False)
        mats[name] = G
        sig[name] = s
    return Gains(mats["K"], mats["L"], mats["M"], sig["K"], sig["L"], sig["M"])


def scalar_gains(k: float, l: float, m: float) -> Gains:
    I = np.eye(3)
    return validate_gains(k * I, l * I, m * I)


def structured_gain(kx: float, ky: float, kz: float) -> np.ndarray:
    """Yaw-invariant gain ``[[kx, -ky, 0], [ky, kx, 0], [0, 0, kz]]``.

    Commutes with any rotation about the vertical axis. ``ky`` adds a
    rotational coupling in the horizontal plane (complex eigenvalues
    ``kx +- i ky``) without changing the symmetric part.
    """
    if not (kx > 0 and kz > 0):
        raise GainNotPositiveDefinite("structured", float(min(kx, kz)))
    return np.array([[kx, -ky, 0.0], [ky, kx, 0.0], [0.0, 0.0, kz]])


@dataclass(frozen=True)
class ObserverState:
    v: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray

    def as_columns(self) -> np.ndarray:
        return np.array((self.v, self.gamma, self.beta)).T

    @classmethod
    def from_columns(cls, X: np.ndarray) -> "ObserverState":
        return cls(X[:, 0].copy(), X[:, 1].copy(), X[:, 2].copy())

    def is_finite(self) -> bool:
        return math.isfinite(float(self.v.sum() + self.gamma.sum() + self.beta.sum()))


def default_reinit_state(g: float, B_nominal) -> ObserverState:
    """Level, stationary, nominal-field estimate."""
    return ObserverState(np.zeros(3), g * E3, np.array(B_nominal, dtype=float))


def reinitialize(x_hat: ObserverState, new: ObserverState) -> ObserverState:
    return ObserverState(np.array(new.v, dtype=float), np.array(new.gamma, dtype=float),
                         np.array(new.beta, dtype=float))


def observer_rhs(X: np.ndarray, m_a, v_m, beta_m, KL, C, M) -> np.ndarray:
    """Correction part of the observer dynamics (everything except ``x x w_m``)."""
    d = X[:, 0] - v_m
    out = np.empty((3, 3))
    out[:, 0] = m_a + X[:, 1] - KL @ d
    out[:, 1] = -(C @ d)
    out[:, 2] = -(M @ (X[:, 2] - beta_m))
    return out


def observer_step(x_hat: ObserverState, m: Measurement, G: Gains, dt: float) -> ObserverState:
    """One integrating-factor RK4 step of the observer.

    ``w_m`` and ``a_m`` are held constant over the step; the rotation terms
    ``x x w_m`` are integrated exactly. Velocity and field readings use the
    intra-step samples of ``m`` when present, else are held constant.
    """
    w = m.omega_m
    Sw = skew(w)
    KL = G.L + G.K
    C = G.L @ Sw - Sw @ G.L + G.L @ G.K
    M = G.M
    vs = m.v_m_stages or (m.v_m,) * 4
    bs = m.beta_m_stages or (m.beta_m,) * 4
    a = m.a_m
    h = dt
    q2 = expm_so3(-0.5 * h * w)
    q1 = expm_so3(-h * w)

    X0 = x_hat.as_columns()
    k1 = observer_rhs(X0, a, vs[0], bs[0], KL, C, M)
    X2 = q2 @ (X0 + 0.5 * h * k1)
    k2 = observer_rhs(X2, a, vs[1], bs[1], KL, C, M)
    X3 = q2 @ X0 + 0.5 * h * k2
    k3 = observer_rhs(X3, a, vs[2], bs[2], KL, C, M)
    X4 = q1 @ X0 + h * (q2 @ k3)
    k4 = observer_rhs(X4, a, vs[3], bs[3], KL, C, M)
    X1 = q1 @ X0 + (h / 6.0) * (q1 @ k1 + 2.0 * (q2 @ (k2 + k3)) + k4)
    return ObserverState.from_columns(X1)
