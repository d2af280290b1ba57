"""Monitoring servo target: keep the camera axis on the target while far away.

The camera optical axis is the end-effector z-axis.  Far from the target the
servo target keeps the grasp translation but swaps the rotation for the
minimal rotation that points z at the target; as sig(omega) grows the
rotation slides along the geodesic towards the grasp rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .se3 import AxisAngle, RigidTransform, log_so3, exp_so3, rodrigues


@dataclass(frozen=True)
class ServoTarget:
    grasp_pose: RigidTransform
    monitor_pose: RigidTransform
    blended: RigidTransform
    sig_used: float


def _orthogonal_axis(z: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to z, preferring x then y."""
    for ref in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        v = ref - (ref @ z) * z
        n = np.linalg.norm(v)
        if n > 1e-6:
            return v / n
    raise AssertionError("unreachable")  # pragma: no cover


def pointing_rotation(z_current, direction) -> np.ndarray:
    """Minimal rotation taking unit vector z_current onto direction."""
    z = np.asarray(z_current, dtype=float)
    z = z / np.linalg.norm(z)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    c = float(np.clip(z @ d, -1.0, 1.0))
    axis = np.cross(z, d)
    s = float(np.linalg.norm(axis))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        return rodrigues(AxisAngle(_orthogonal_axis(z), math.pi))
    theta = math.atan2(s, c)
    return rodrigues(AxisAngle(axis / s, theta))


def monitoring_pose(ee_position, target_position, current_rotation=None,
                    translation=None) -> RigidTransform:
    """Pose whose z-axis points from ee_position at target_position.

    The rotation is R_d @ current_rotation where R_d = exp(K theta) turns the
    current z-axis onto the target direction.  The translation defaults to
    ee_position; the servo loop passes the grasp translation instead.
    """
    p = np.asarray(ee_position, dtype=float).reshape(3)
    t = np.asarray(target_position, dtype=float).reshape(3)
    d = t - p
    n = float(np.linalg.norm(d))
    if n < 1e-12:
        raise InvalidInputError("end-effector and target positions coincide")
    R = np.eye(3) if current_rotation is None else np.asarray(current_rotation, dtype=float)
    R_d = pointing_rotation(R[:, 2], d / n)
    trans = p if translation is None else np.asarray(translation, dtype=float)
    return RigidTransform(R_d @ R, trans)


def blend(grasp: RigidTransform, monitor: RigidTransform, s: float) -> RigidTransform:
    """Translation s*t_g + (1-s)*t_m; rotation geodesic from monitor (s=0) to grasp (s=1)."""
    if not 0.0 <= s <= 1.0:
        raise InvalidInputError(f"blend parameter {s} outside [0, 1]")
    if s == 1.0:
        return grasp
    if s == 0.0:
        return monitor
    t = s * grasp.translation + (1.0 - s) * monitor.translation
    Rm = monitor.rotation
    R = Rm @ exp_so3(s * log_so3(Rm.T @ grasp.rotation))
    # re-orthonormalise the product to keep accumulated rounding at machine level
    u, _, vt = np.linalg.svd(R)
    R = u @ vt
    return RigidTransform(R, t)


def servo_target(grasp: RigidTransform, ee: RigidTransform, s: float) -> ServoTarget:
    """Blended servo target for the current end-effector pose."""
    try:
        mon = monitoring_pose(ee.translation, grasp.translation, ee.rotation,
                              translation=grasp.translation)
    except InvalidInputError:
        mon = RigidTransform(ee.rotation, grasp.translation)
    return ServoTarget(grasp, mon, blend(grasp, mon, s), s)


def in_frustum(camera_pose: RigidTransform, target, hfov: float, vfov: float,
               max_range: float) -> bool:
    """True if target lies in the camera's view pyramid (z forward, x right, y down)."""
    if not (0.0 < hfov < math.pi and 0.0 < vfov < math.pi):
        raise InvalidInputError("field-of-view angles must lie in (0, pi)")
    p = camera_pose.rotation.T @ (np.asarray(target, dtype=float) - camera_pose.translation)
    z = p[2]
    if z <= 0.0 or np.linalg.norm(p) > max_range:
        return False
    return bool(abs(p[0]) <= z * math.tan(0.5 * hfov) and abs(p[1]) <= z * math.tan(0.5 * vfov))


def approach_pose(position, approach, roll: float = 0.0) -> RigidTransform:
    """Pose at ``position`` whose z-axis is ``approach``.

    The x-axis is world down projected off z (minus world x when z is
    vertical), then turned by ``roll`` about z.  With roll 0 a forward
    approach matches the tool's home orientation.
    """
    z = np.asarray(approach, dtype=float).reshape(3)
    n = np.linalg.norm(z)
    if n < 1e-12:
        raise InvalidInputError("approach direction must be non-zero")
    z = z / n
    ref = np.array([0.0, 0.0, -1.0])
    x = ref - (ref @ z) * z
    if np.linalg.norm(x) < 1e-6:
        ref = np.array([-1.0, 0.0, 0.0])
        x = ref - (ref @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.column_stack([x, y, z]) @ rodrigues(AxisAngle(np.array([0.0, 0.0, 1.0]), roll))
    return RigidTransform(R, np.asarray(position, dtype=float).reshape(3))
