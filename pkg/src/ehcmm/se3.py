"""Rigid-body math on SE(3) / SO(3).

Conventions: twists are stored linear-first, ``(v, w)``.  ``psi`` is the
decoupled logarithm (rotation log + raw translation), not the coupled
SE(3) log with the V matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_SMALL_ANGLE = 1e-10
# |trace - (-1)| below this switches the log to the symmetric-part branch
_PI_BAND = 1e-6


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation).reshape(3)
        if R.shape != (3, 3):
            raise InvalidInputError(f"rotation must be 3x3, got {R.shape}")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "RigidTransform":
        T = np.asarray(T, dtype=float)
        if T.shape != (4, 4):
            raise InvalidInputError(f"homogeneous matrix must be 4x4, got {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), t)

    @classmethod
    def from_rpy(cls, rpy, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        """Build from roll-pitch-yaw (fixed XYZ, i.e. R = Rz(yaw) Ry(pitch) Rx(roll))."""
        r, p, y = rpy
        return cls(rot_z(y) @ rot_y(p) @ rot_x(r), translation)

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def inverse(self) -> "RigidTransform":
        return inverse(self)

    def apply(self, points) -> np.ndarray:
        """Map point(s) of shape (3,) or (n, 3) into the parent frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def is_valid(self, tol: float = 1e-9) -> bool:
        R = self.rotation
        return bool(
            np.allclose(R.T @ R, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) < tol
        )

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )

    def __repr__(self) -> str:
        return (
            f"RigidTransform(rotation={self.rotation.tolist()}, "
            f"translation={self.translation.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class Twist:
    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", _frozen(self.linear).reshape(3))
        object.__setattr__(self, "angular", _frozen(self.angular).reshape(3))

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, v) -> "Twist":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True, eq=False)
class AxisAngle:
    axis: np.ndarray
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "axis", _frozen(self.axis).reshape(3))
        object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def from_rotvec(cls, rv) -> "AxisAngle":
        rv = np.asarray(rv, dtype=float).reshape(3)
        theta = float(np.linalg.norm(rv))
        if theta < _SMALL_ANGLE:
            return cls(np.array([0.0, 0.0, 1.0]), 0.0)
        return cls(rv / theta, theta)

    @property
    def rotvec(self) -> np.ndarray:
        return self.axis * self.angle


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rodrigues(aa: AxisAngle) -> np.ndarray:
    """R = I + sin(theta) K + (1 - cos(theta)) K^2 for unit axis k, K = skew(k)."""
    theta = aa.angle
    if theta == 0.0:
        return np.eye(3)
    n = float(np.linalg.norm(aa.axis))
    if abs(n - 1.0) > 1e-9:
        raise InvalidInputError(f"rotation axis must be unit length, |k| = {n!r}")
    K = skew(aa.axis)
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def exp_so3(rotvec) -> np.ndarray:
    rv = np.asarray(rotvec, dtype=float).reshape(3)
    theta = float(np.linalg.norm(rv))
    if theta < _SMALL_ANGLE:
        return np.eye(3) + skew(rv)
    return rodrigues(AxisAngle(rv / theta, theta))


def log_so3(R) -> np.ndarray:
    """Rotation vector (axis * angle, angle in [0, pi]) of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    v = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = float(np.linalg.norm(v))
    c = max(-1.0, min(1.0, 0.5 * (tr - 1.0)))
    theta = math.atan2(s, c)
    if abs(tr + 1.0) < _PI_BAND:
        # near pi: sin(theta) ~ 0, recover the axis from the symmetric part,
        # (R + R^T) / 2 = cos(theta) I + (1 - cos(theta)) k k^T
        B = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / math.sqrt(max(B[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if float(axis @ v) < 0.0:
            axis = -axis
        return axis * theta
    if theta < 1e-6:
        # theta / sin(theta) ~ 1 + theta^2 / 6
        return v * (1.0 + theta * theta / 6.0)
    return v * (theta / s)


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix, in [0, pi]."""
    return float(np.linalg.norm(log_so3(R)))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(a: RigidTransform) -> RigidTransform:
    Rt = a.rotation.T
    return RigidTransform(Rt, -Rt @ a.translation)


def psi(T: RigidTransform) -> Twist:
    """Map a transform to a twist: (translation, rotation log)."""
    return Twist(T.translation, log_so3(T.rotation))


def slerp_rotation(R0, R1, s: float) -> np.ndarray:
    """Geodesic interpolation: R0 at s=0, R1 at s=1."""
    if s <= 0.0:
        return np.array(R0, dtype=float)
    if s >= 1.0:
        return np.array(R1, dtype=float)
    R0 = np.asarray(R0, dtype=float)
    return R0 @ exp_so3(s * log_so3(R0.T @ np.asarray(R1, dtype=float)))
