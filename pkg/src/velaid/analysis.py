"""Error-system diagnostics.

Error variables (all body axes)::

    e_v     = v_hat - v
    e_gamma = gamma_hat - gamma - L e_v
    e_beta  = beta_hat - beta

With perfect measurements they obey

    e_v'     = e_v x w + e_gamma - K e_v
    e_gamma' = e_gamma x w - L e_gamma
    e_beta'  = e_beta x w - M e_beta

and in Earth-frame ("rotated") coordinates ``E = R e`` the cross-product
terms vanish. For scalar gains the rotated system is linear time-invariant,
which gives the closed form in :func:`lti_error_solution`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from velaid.geom3 import norm
from velaid.observer import Gains, ObserverState
from velaid.rigid_body import TruthState


@dataclass(frozen=True)
class ErrorState:
    e_v: np.ndarray
    e_gamma: np.ndarray
    e_beta: np.ndarray
    E_v: np.ndarray
    E_gamma: np.ndarray
    E_beta: np.ndarray

    def norms(self) -> tuple[float, float, float]:
        return norm(self.e_v), norm(self.e_gamma), norm(self.e_beta)

    def rotated(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.E_v, self.E_gamma, self.E_beta


@dataclass(frozen=True)
class LyapunovParams:
    rho1: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        if not (self.rho1 > 0 and self.eps > 0):
            raise ValueError("rho1 and eps must be positive")

    @classmethod
    def for_gains(cls, G: Gains) -> "LyapunovParams":
        return cls(1.0, min(G.sigma_K, G.sigma_L))

    def guarantees_decrease(self, G: Gains) -> bool:
        return self.eps < 2.0 * min(G.sigma_K, G.sigma_L)


def error_state(truth: TruthState, x_hat: ObserverState, G: Gains, beta_true=None) -> ErrorState:
    """Error variables and their rotated counterparts.

    ``beta_true`` overrides the nominal-field ``R^T B`` (used when the actual
    field is disturbed).
    """
    R = truth.R
    beta = truth.beta if beta_true is None else beta_true
    e_v = x_hat.v - truth.v
    e_g = x_hat.gamma - truth.gamma - G.L @ e_v
    e_b = x_hat.beta - beta
    return ErrorState(e_v, e_g, e_b, R @ e_v, R @ e_g, R @ e_b)


def lyapunov_value(e: ErrorState, p: LyapunovParams) -> float:
    ng = float(e.e_gamma @ e.e_gamma)
    nv = float(e.e_v @ e.e_v)
    nb = float(e.e_beta @ e.e_beta)
    return 0.5 * p.rho1 * ng + 0.5 * p.rho1 * p.eps**2 * nv + 0.5 * nb


def lti_error_solution(E0, k: float, l: float, m: float, t: float):
    """Closed-form rotated errors at time ``t`` for gains ``(kI, lI, mI)``.

    ``E0`` is ``(E_v, E_gamma, E_beta)`` at t = 0 (an :class:`ErrorState`
    is accepted too). Returns the same triple at ``t``.
    """
    if isinstance(E0, ErrorState):
        E0 = E0.rotated()
    Ev0, Eg0, Eb0 = (np.asarray(x, dtype=float) for x in E0)
    if not (k > 0 and l > 0 and m > 0):
        raise ValueError("gains must be positive")
    ek, el = math.exp(-k * t), math.exp(-l * t)
    Eg = el * Eg0
    Eb = math.exp(-m * t) * Eb0
    if abs(k - l) > 1e-9:
        Ev = ek * Ev0 + (el - ek) / (k - l) * Eg0
    else:
        Ev = ek * (Ev0 + t * Eg0)
    return Ev, Eg, Eb


def fit_decay_rate(series, skip_fraction: float = 0.0) -> float:
    """Exponential decay rate from a least-squares line through log(value).

    ``series`` is a sequence of ``(t, value)`` pairs or a pair of arrays
    ``(t, values)``. ``skip_fraction`` drops that leading share of samples.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 2 and arr.shape[0] == 2 and arr.shape[1] != 2:
        t, y = arr
    else:
        t, y = arr[:, 0], arr[:, 1]
    start = int(len(t) * skip_fraction)
    t, y = t[start:], y[start:]
    if len(t) < 10:
        raise ValueError("need at least 10 samples to fit a decay rate")
    if np.any(y <= 0):
        raise ValueError("all values must be positive")
    slope = np.polyfit(t, np.log(y), 1)[0]
    return float(-slope)


def svd_polar_oracle(A) -> np.ndarray:
    """Nearest rotation to ``A`` through an SVD with determinant correction.

    Test oracle only; the estimator itself never needs an SVD.
    """
    A = np.asarray(A, dtype=float)
    U, _, Vt = np.linalg.svd(A)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ D @ Vt
