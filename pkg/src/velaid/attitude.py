"""Orientation reconstruction from the gravity and magnetic estimates."""

from __future__ import annotations

import math

import numpy as np

from velaid.errors import DegenerateGamma
from velaid.geom3 import E3, I3, cross, norm
from velaid.rigid_body import STANDARD_G, WorldConstants

DEGENERACY_SCALE = 1e-9


def tilde_R(gamma_hat, beta_hat, world: WorldConstants) -> np.ndarray:
    """Row-orthogonal estimate that converges to R along with the observer.

    Rows are scaled by the nominal norms, so the matrix is a rotation only
    when the estimates are exact. Zero rows are allowed.
    """
    gE3 = world.g * E3
    c0 = cross(gE3, world.B)
    n2 = norm(c0)
    n1 = norm(cross(c0, gE3))
    c = cross(gamma_hat, beta_hat)
    return np.array([cross(c, gamma_hat) / n1, c / n2, np.asarray(gamma_hat, dtype=float) / world.g])


def _complete_frame(r3: np.ndarray) -> np.ndarray:
    # Gram-Schmidt against the canonical axis least aligned with r3
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(r3)))] = 1.0
    e1 = axis - (axis @ r3) * r3
    e1 /= norm(e1)
    e2 = cross(r3, e1)
    return np.array([e1, e2, r3])


def hat_R(gamma_hat, beta_hat, g: float = STANDARD_G) -> np.ndarray:
    """Rotation closest to :func:`tilde_R`, obtained by normalizing its rows.

    Degenerate inputs are still mapped to a rotation: the identity when the
    gravity estimate vanishes, and a deterministic completion of the vertical
    axis when gravity and field estimates are collinear.
    """
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    tol = DEGENERACY_SCALE * g
    ng = norm(gamma_hat)
    if ng <= tol:
        return I3.copy()
    r3 = gamma_hat / ng
    c = cross(gamma_hat, beta_hat)
    nc = norm(c)
    if nc <= tol:
        return _complete_frame(r3)
    r2 = c / nc
    r1 = cross(r2, r3)
    return np.array([r1, r2, r3])


def roll_pitch_from_gamma(gamma_hat, g: float = STANDARD_G) -> tuple[float, float]:
    """Roll and pitch (radians) from the body-frame gravity estimate.

    Pitch is ``asin(-gx / |gamma_hat|)``, evaluated as an arctangent so it
    stays well conditioned near +-90 deg and does not depend on the
    magnitude of the unconverged estimate; ``g`` is accepted for interface
    symmetry.
    """
    gx, gy, gz = (float(c) for c in gamma_hat)
    if gx == 0.0 and gy == 0.0 and gz == 0.0:
        raise DegenerateGamma("gamma estimate is zero")
    pitch = math.atan2(-gx, math.hypot(gy, gz))
    roll = math.atan2(gy, gz)
    return roll, pitch
