"""Small fixed-size 3D geometry: skew matrices, SO(3) stepping, ZYX Euler angles.

Vectors are numpy arrays of shape (3,), matrices of shape (3, 3).
Orientation matrices map body axes to Earth (NED) axes, so that
``gamma = g * R.T @ E3`` is gravity seen from the body.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from velaid.errors import DegenerateFrame, InvalidRotation

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])
I3 = np.eye(3)

GIMBAL_TOL = 1e-9
ROTATION_TOL = 1e-6


class EulerAngles(NamedTuple):
    """Roll, pitch, yaw in radians (ZYX / aerospace sequence)."""

    roll: float
    pitch: float
    yaw: float


def vec3(x, y=None, z=None) -> np.ndarray:
    if y is None:
        return np.asarray(x, dtype=float).reshape(3).copy()
    return np.array([x, y, z], dtype=float)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross has a large fixed overhead for 3-vectors.
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def norm(a: np.ndarray) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def skew(w: np.ndarray) -> np.ndarray:
    """Matrix S(w) with S(w) @ x == cross(w, x)."""
    wx, wy, wz = w
    return np.array(
        [
            [0.0, -wz, wy],
            [wz, 0.0, -wx],
            [-wy, wx, 0.0],
        ]
    )


def expm_so3(phi: np.ndarray) -> np.ndarray:
    """Closed-form exponential exp(S(phi)) of a rotation vector (Rodrigues)."""
    x, y, z = float(phi[0]), float(phi[1]), float(phi[2])
    angle = math.sqrt(x * x + y * y + z * z)
    if angle == 0.0:
        return I3.copy()
    # (1 - cos a) / a^2 written as 2 sin^2(a/2) / a^2 to avoid cancellation
    c1 = math.sin(angle) / angle
    c2 = 2.0 * (math.sin(0.5 * angle) / angle) ** 2
    c0 = 1.0 - c2 * angle * angle
    # I + c1 S + c2 S^2, with S^2 = phi phi^T - |phi|^2 I
    return np.array(
        [
            [c0 + c2 * x * x, c2 * x * y - c1 * z, c2 * x * z + c1 * y],
            [c2 * x * y + c1 * z, c0 + c2 * y * y, c2 * y * z - c1 * x],
            [c2 * x * z - c1 * y, c2 * y * z + c1 * x, c0 + c2 * z * z],
        ]
    )


def rotate_step(R: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    """Advance ``Rdot = R S(w)`` exactly over ``dt`` with ``w`` held constant."""
    return R @ expm_so3(np.asarray(w, dtype=float) * dt)


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(e) -> np.ndarray:
    """R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    roll, pitch, yaw = e
    cf, sf = math.cos(roll), math.sin(roll)
    ct, st = math.cos(pitch), math.sin(pitch)
    cp, sp = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


def check_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> None:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidRotation("expected a finite 3x3 matrix")
    dev = np.linalg.norm(R.T @ R - I3)
    if dev > tol or np.linalg.det(R) <= 0.0:
        raise InvalidRotation(f"not a rotation: |R^T R - I|_F = {dev:.3g}")


def rotation_to_euler(R: np.ndarray, check: bool = True) -> EulerAngles:
    """Inverse of :func:`euler_to_rotation`.

    At gimbal lock (pitch at +-90 deg within 1e-9 rad) roll is set to zero
    and the remaining free angle is reported as yaw.

    Raises
    ------
    InvalidRotation
        If ``R`` is not orthonormal with positive determinant within 1e-6
        (skipped when ``check`` is false).
    """
    if check:
        check_rotation(R)
    horiz = math.hypot(R[2, 1], R[2, 2])
    pitch = math.atan2(-R[2, 0], horiz)
    if math.pi / 2 - abs(pitch) < GIMBAL_TOL or horiz < GIMBAL_TOL:
        pitch = math.copysign(math.pi / 2, -R[2, 0])
        yaw = math.atan2(-R[0, 1], R[1, 1])
        return EulerAngles(0.0, pitch, yaw)
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return EulerAngles(roll, pitch, yaw)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar factor)."""
    R = np.asarray(R, dtype=float)
    if not np.linalg.det(R) > 0.0:
        raise DegenerateFrame("cannot orthonormalize a matrix with det <= 0")
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt
