"""Mobile manipulator kinematics.

The base is a virtual planar chain (prismatic x, prismatic y, revolute
theta about world z) followed by the constant mounts ``T_vb`` (virtual
base -> mobile base) and ``T_ba`` (mobile base -> arm base), a 6-DOF arm
in modified (Craig) DH form, and a constant tool transform.

Joint ordering everywhere is ``(x, y, theta, q1..q6)``; Jacobians map
joint rates to world-frame twists ``(v, w)`` of the end-effector point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidInputError, SchemaError
from .se3 import RigidTransform, rot_x, rot_y, rot_z

N_BASE = 3
N_ARM = 6
N_JOINTS = N_BASE + N_ARM


@dataclass(frozen=True)
class DHRow:
    """Modified DH row: RotX(alpha) TransX(a) RotZ(theta + offset) TransZ(d)."""

    a: float
    alpha: float
    d: float
    offset: float = 0.0


def _transform_matrix(T: RigidTransform | np.ndarray) -> np.ndarray:
    if isinstance(T, RigidTransform):
        return T.matrix
    return np.asarray(T, dtype=float)


@dataclass(frozen=True, eq=False)
class RobotModel:
    arm_dh: tuple[DHRow, ...]
    T_vb: RigidTransform
    T_ba: RigidTransform
    T_ae_tool: RigidTransform
    joint_limits: np.ndarray  # (9, 2)
    velocity_limits: np.ndarray  # (9,)
    link_radii: np.ndarray = field(default_factory=lambda: np.full(N_ARM, 0.05))
    footprint_radius: float = 0.3
    footprint_height: float = 0.15
    footprint_points: int = 8
    name: str = "mobile-manipulator"
    home_arm: np.ndarray = field(default_factory=lambda: np.zeros(N_ARM))

    def __post_init__(self):
        if len(self.arm_dh) != N_ARM:
            raise InvalidInputError(f"expected {N_ARM} arm DH rows, got {len(self.arm_dh)}")
        lim = np.array(self.joint_limits, dtype=float)
        if lim.shape != (N_JOINTS, 2):
            raise InvalidInputError(f"joint_limits must be {N_JOINTS}x2, got {lim.shape}")
        if np.any(lim[:, 0] >= lim[:, 1]):
            raise InvalidInputError("joint limits must satisfy min < max")
        vel = np.array(self.velocity_limits, dtype=float).reshape(-1)
        if vel.shape != (N_JOINTS,) or np.any(vel <= 0):
            raise InvalidInputError("velocity_limits must be 9 positive values")
        radii = np.array(self.link_radii, dtype=float).reshape(-1)
        if radii.shape != (N_ARM,):
            raise InvalidInputError("link_radii must have one entry per arm link")
        home = np.array(self.home_arm, dtype=float).reshape(-1)
        if home.shape != (N_ARM,):
            raise InvalidInputError("home_arm must have one entry per arm joint")
        if np.any(home < lim[N_BASE:, 0]) or np.any(home > lim[N_BASE:, 1]):
            raise InvalidInputError("home_arm lies outside the joint limits")
        for arr in (lim, vel, radii, home):
            arr.setflags(write=False)
        object.__setattr__(self, "home_arm", home)
        object.__setattr__(self, "arm_dh", tuple(self.arm_dh))
        object.__setattr__(self, "joint_limits", lim)
        object.__setattr__(self, "velocity_limits", vel)
        object.__setattr__(self, "link_radii", radii)
        # constant RotX(alpha) TransX(a) prefix of each row
        pre = []
        for row in self.arm_dh:
            A = np.eye(4)
            A[:3, :3] = rot_x(row.alpha)
            A[:3, 3] = A[:3, :3] @ np.array([row.a, 0.0, 0.0])
            pre.append(A)
        object.__setattr__(self, "_dh_prefix", np.array(pre))
        object.__setattr__(self, "_dh_d", np.array([r.d for r in self.arm_dh]))
        object.__setattr__(self, "_dh_offset", np.array([r.offset for r in self.arm_dh]))
        object.__setattr__(self, "_T_va", self.T_vb.matrix @ self.T_ba.matrix)
        object.__setattr__(self, "_T_tool", self.T_ae_tool.matrix)

    @property
    def reach(self) -> float:
        """Upper bound on the distance from arm base to the tool point."""
        total = 0.0
        for row in self.arm_dh:
            total += abs(row.a) + abs(row.d)
        return total + float(np.linalg.norm(self.T_ae_tool.translation))

    def home(self, base=(0.0, 0.0, 0.0)) -> "Configuration":
        return Configuration(np.asarray(base, dtype=float), self.home_arm.copy())

    def with_limits(self, joint_limits=None, velocity_limits=None) -> "RobotModel":
        return replace(
            self,
            joint_limits=self.joint_limits if joint_limits is None else joint_limits,
            velocity_limits=self.velocity_limits if velocity_limits is None else velocity_limits,
        )


@dataclass(frozen=True, eq=False)
class Configuration:
    base: np.ndarray  # (x, y, theta)
    arm: np.ndarray  # (6,)

    def __post_init__(self):
        b = np.array(self.base, dtype=float).reshape(-1)
        a = np.array(self.arm, dtype=float).reshape(-1)
        if b.shape != (N_BASE,) or a.shape != (N_ARM,):
            raise InvalidInputError(
                f"configuration needs 3 base and 6 arm values, got {b.shape} / {a.shape}"
            )
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "arm", a)

    @classmethod
    def from_vector(cls, q) -> "Configuration":
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape != (N_JOINTS,):
            raise InvalidInputError(f"joint vector must have {N_JOINTS} entries, got {q.shape}")
        return cls(q[:3], q[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.base, self.arm])

    def wrapped(self) -> "Configuration":
        b = self.base.copy()
        b[2] = wrap_angle(b[2])
        return Configuration(b, self.arm)

    def within_limits(self, model: RobotModel, tol: float = 0.0) -> bool:
        q = self.as_vector()
        lim = model.joint_limits
        return bool(np.all(q >= lim[:, 0] - tol) and np.all(q <= lim[:, 1] + tol))


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w == -math.pi:
        w = math.pi
    return w


def _base_matrix(x: float, y: float, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[c, -s, 0.0, x], [s, c, 0.0, y], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
    )


def _joint_matrix(theta: float, d: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[c, -s, 0.0, 0.0], [s, c, 0.0, 0.0], [0.0, 0.0, 1.0, d], [0.0, 0.0, 0.0, 1.0]]
    )


def arm_frames(model: RobotModel, q_arm) -> np.ndarray:
    """Arm-base-frame poses of joint frames 1..6 and the tool, shape (7, 4, 4)."""
    q = np.asarray(q_arm, dtype=float)
    out = np.empty((N_ARM + 1, 4, 4))
    T = np.eye(4)
    pre = model._dh_prefix
    d = model._dh_d
    off = model._dh_offset
    for i in range(N_ARM):
        T = T @ pre[i] @ _joint_matrix(q[i] + off[i], d[i])
        out[i] = T
    out[N_ARM] = T @ model._T_tool
    return out


def world_frames(model: RobotModel, cfg: Configuration) -> tuple[np.ndarray, np.ndarray]:
    """(virtual-base pose, world poses of joint frames 1..6 + tool)."""
    x, y, th = cfg.base
    T_ov = _base_matrix(x, y, th)
    T_oa = T_ov @ model._T_va
    frames = T_oa @ arm_frames(model, cfg.arm)
    return T_ov, frames


def _check_cfg(cfg) -> Configuration:
    if not isinstance(cfg, Configuration):
        try:
            cfg = Configuration.from_vector(cfg)
        except InvalidInputError:
            raise
        except Exception as exc:  # pragma: no cover - defensive
            raise InvalidInputError(str(exc)) from exc
    return cfg


def fk_end_effector(model: RobotModel, cfg: Configuration) -> RigidTransform:
    """World pose of the end-effector: T_ov(x,y,theta) T_vb T_ba T_ae(q) T_tool."""
    cfg = _check_cfg(cfg)
    _, frames = world_frames(model, cfg)
    return RigidTransform.from_matrix(frames[-1])


def fk_arm(model: RobotModel, q_arm) -> np.ndarray:
    """Tool pose in the arm-base frame (4x4)."""
    return arm_frames(model, q_arm)[-1]


def _segment_offsets(model: RobotModel) -> np.ndarray:
    """Origin of the next frame expressed in frame k, k = 1..6 (constant)."""
    offs = np.empty((N_ARM, 3))
    for k in range(N_ARM - 1):
        # origin of frame k+1 in frame k: prefix_{k+1} @ (0, 0, d_{k+1})
        offs[k] = (model._dh_prefix[k + 1] @ np.array([0.0, 0.0, model._dh_d[k + 1], 1.0]))[:3]
    offs[N_ARM - 1] = model._T_tool[:3, 3]
    return offs


@dataclass(frozen=True)
class LinkPoint:
    """A collision sample rigidly attached to a frame.

    ``frame`` is -1 for the base footprint (attached to the virtual base) or
    the 0-based arm frame index k; only joints up to k move the point.
    """

    frame: int
    offset: np.ndarray
    radius: float


def link_point_template(model: RobotModel, samples_per_link: int = 3,
                        include_footprint: bool = True,
                        skip_degenerate: bool = False) -> list[LinkPoint]:
    if samples_per_link < 1:
        raise InvalidInputError("samples_per_link must be >= 1")
    pts: list[LinkPoint] = []
    offs = _segment_offsets(model)
    for k in range(N_ARM):
        if skip_degenerate and np.linalg.norm(offs[k]) < 1e-9:
            continue
        for i in range(samples_per_link):
            f = i / samples_per_link
            pts.append(LinkPoint(k, f * offs[k], float(model.link_radii[k])))
    if include_footprint and model.footprint_points > 0:
        # footprint circle lives in the mobile-base frame, mapped to {v}
        R_vb = model.T_vb.rotation
        t_vb = model.T_vb.translation
        for j in range(model.footprint_points):
            a = 2.0 * math.pi * j / model.footprint_points
            local = np.array([
                model.footprint_radius * math.cos(a),
                model.footprint_radius * math.sin(a),
                model.footprint_height,
            ])
            pts.append(LinkPoint(-1, R_vb @ local + t_vb, 0.0))
    return pts


def fk_link_points(model: RobotModel, cfg: Configuration, samples_per_link: int = 3,
                   include_footprint: bool = True) -> np.ndarray:
    """World positions of the collision samples, shape (n, 3).

    Each arm link k is the segment from the origin of joint frame k to the
    origin of frame k+1 (the tool point for the last link), sampled at
    fractions 0, 1/n, ..., (n-1)/n.  Footprint samples follow.
    """
    cfg = _check_cfg(cfg)
    template = link_point_template(model, samples_per_link, include_footprint)
    T_ov, frames = world_frames(model, cfg)
    return _template_positions(template, T_ov, frames)


def _template_positions(template, T_ov, frames) -> np.ndarray:
    out = np.empty((len(template), 3))
    for n, lp in enumerate(template):
        T = T_ov if lp.frame < 0 else frames[lp.frame]
        out[n] = T[:3, :3] @ lp.offset + T[:3, 3]
    return out


def _jacobian_from_frames(T_ov: np.ndarray, frames: np.ndarray, point: np.ndarray,
                          upto: int = N_ARM) -> np.ndarray:
    """6x9 world Jacobian of a point attached to arm frame ``upto - 1``."""
    J = np.zeros((6, N_JOINTS))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    r = point - T_ov[:3, 3]
    J[0, 2] = -r[1]
    J[1, 2] = r[0]
    J[5, 2] = 1.0
    if upto > 0:
        z = frames[:upto, :3, 2]
        o = frames[:upto, :3, 3]
        J[:3, 3:3 + upto] = np.cross(z, point - o).T
        J[3:, 3:3 + upto] = z.T
    return J


def whole_body_jacobian(model: RobotModel, cfg: Configuration) -> np.ndarray:
    """6x9 Jacobian with nu_e = J (qdot_base; qdot_arm), world frame, (v, w) rows."""
    cfg = _check_cfg(cfg)
    T_ov, frames = world_frames(model, cfg)
    return _jacobian_from_frames(T_ov, frames, frames[-1][:3, 3])


def point_jacobian(model: RobotModel, cfg: Configuration, lp: LinkPoint) -> np.ndarray:
    """3x9 translational Jacobian of a collision sample."""
    T_ov, frames = world_frames(model, cfg)
    return _point_jacobian(T_ov, frames, lp)


def _point_jacobian(T_ov, frames, lp: LinkPoint) -> np.ndarray:
    if lp.frame < 0:
        p = T_ov[:3, :3] @ lp.offset + T_ov[:3, 3]
        return _jacobian_from_frames(T_ov, frames, p, upto=0)[:3]
    T = frames[lp.frame]
    p = T[:3, :3] @ lp.offset + T[:3, 3]
    return _jacobian_from_frames(T_ov, frames, p, upto=lp.frame + 1)[:3]


_IDX = np.arange(N_ARM)
_LO = np.minimum.outer(_IDX, _IDX)
_HI = np.maximum.outer(_IDX, _IDX)
_UPPER = (_IDX[:, None] < _IDX[None, :]).astype(float)[..., None]


def arm_hessian(J_arm: np.ndarray) -> np.ndarray:
    """H[i, :, j] = d(column j of J_arm) / dq_i for an all-revolute chain.

    Uses the closed form in terms of the Jacobian columns themselves:
    dJv_j/dq_i = w_min(i,j) x v_max(i,j), dJw_j/dq_i = w_i x w_j for i < j.
    """
    Jv = J_arm[:3].T
    Jw = J_arm[3:].T
    Hv = np.cross(Jw[_LO], Jv[_HI])  # (i, j, 3)
    Hw = np.cross(Jw[:, None, :], Jw[None, :, :]) * _UPPER
    return np.concatenate([Hv, Hw], axis=2).transpose(0, 2, 1)  # (i, 6, j)


def _manipulability_terms(J_arm: np.ndarray) -> tuple[float, np.ndarray]:
    A = J_arm @ J_arm.T
    det = float(np.linalg.det(A))
    if not det > 1e-300:
        return 0.0, np.zeros(N_ARM)
    m = math.sqrt(det)
    try:
        Jinv = np.linalg.inv(J_arm) if J_arm.shape[0] == J_arm.shape[1] else np.linalg.pinv(J_arm)
    except np.linalg.LinAlgError:
        return 0.0, np.zeros(N_ARM)
    H = arm_hessian(J_arm)
    # dm/dq_i = m * trace(J^+ dJ/dq_i)
    grad = m * np.einsum("jr,irj->i", Jinv, H)
    return m, grad


def manipulability(model: RobotModel, cfg: Configuration) -> float:
    """Yoshikawa measure sqrt(det(Ja Ja^T)) over the arm columns."""
    J = whole_body_jacobian(model, cfg)
    A = J[:, 3:] @ J[:, 3:].T
    det = float(np.linalg.det(A))
    return math.sqrt(det) if det > 1e-300 else 0.0


def manipulability_jacobian(model: RobotModel, cfg: Configuration) -> np.ndarray:
    """Gradient of manipulability w.r.t. all 9 joints (base entries are zero)."""
    J = whole_body_jacobian(model, cfg)
    _, g = _manipulability_terms(J[:, 3:])
    out = np.zeros(N_JOINTS)
    out[3:] = g
    return out


@dataclass
class KinematicSnapshot:
    """Everything the controller needs from one kinematic evaluation."""

    T_ov: np.ndarray
    frames: np.ndarray
    ee: np.ndarray  # 4x4 world pose
    J: np.ndarray  # 6x9
    m: float
    J_m: np.ndarray  # 9


def snapshot(model: RobotModel, cfg: Configuration, with_manipulability: bool = True
             ) -> KinematicSnapshot:
    T_ov, frames = world_frames(model, cfg)
    ee = frames[-1]
    J = _jacobian_from_frames(T_ov, frames, ee[:3, 3])
    Jm = np.zeros(N_JOINTS)
    m = 0.0
    if with_manipulability:
        m, g = _manipulability_terms(J[:, 3:])
        Jm[3:] = g
    return KinematicSnapshot(T_ov, frames, ee, J, m, Jm)


# ---------------------------------------------------------------------------
# default model and model files

def default_model() -> RobotModel:
    """A 6-DOF spherical-wrist arm (0.79 m shoulder-to-tool reach) on a planar base.

    The mount puts the arm base 0.35 m above the floor, 0.15 m ahead of
    the base centre.
    """
    pi = math.pi
    dh = (
        DHRow(a=0.0, alpha=0.0, d=0.24, offset=0.0),
        DHRow(a=0.0, alpha=-pi / 2, d=0.0, offset=-pi / 2),
        DHRow(a=0.36, alpha=0.0, d=0.0, offset=pi / 2),
        DHRow(a=0.0, alpha=pi / 2, d=0.32, offset=0.0),
        DHRow(a=0.0, alpha=-pi / 2, d=0.0, offset=0.0),
        DHRow(a=0.0, alpha=pi / 2, d=0.06, offset=0.0),
    )
    deg = pi / 180.0
    limits = np.array([
        [-1e4, 1e4],
        [-1e4, 1e4],
        [-1e4, 1e4],
        [-178 * deg, 178 * deg],
        [-150 * deg, 150 * deg],
        [-160 * deg, 160 * deg],
        [-178 * deg, 178 * deg],
        [-150 * deg, 150 * deg],
        [-360 * deg, 360 * deg],
    ])
    vel = np.array([2.0, 2.0, 1.5, 2.5, 2.5, 2.5, 3.0, 3.0, 3.0])
    return RobotModel(
        arm_dh=dh,
        T_vb=RigidTransform.from_translation([0.0, 0.0, 0.0]),
        T_ba=RigidTransform.from_translation([0.15, 0.0, 0.35]),
        T_ae_tool=RigidTransform.from_translation([0.0, 0.0, 0.05]),
        joint_limits=limits,
        velocity_limits=vel,
        link_radii=np.array([0.06, 0.06, 0.05, 0.05, 0.04, 0.04]),
        footprint_radius=0.32,
        footprint_height=0.15,
        footprint_points=8,
        name="default-6dof",
        # elbow-up travel posture: tool 0.35 m ahead of the arm base, z forward,
        # no link ahead of or below the tool
        home_arm=np.array([0.0, -0.123, 2.172, 0.0, -0.478, 0.0]),
    )


def _parse_transform(node, what: str) -> RigidTransform:
    if node is None:
        return RigidTransform.identity()
    if isinstance(node, dict):
        if "matrix" in node:
            return RigidTransform.from_matrix(node["matrix"])
        t = node.get("translation", [0.0, 0.0, 0.0])
        rpy = node.get("rpy", [0.0, 0.0, 0.0])
        if len(t) != 3 or len(rpy) != 3:
            raise SchemaError(f"{what}: translation and rpy need 3 values")
        return RigidTransform.from_rpy([float(v) for v in rpy], [float(v) for v in t])
    raise SchemaError(f"{what}: expected a mapping with translation/rpy or matrix")


def _dump_transform(T: RigidTransform) -> dict:
    return {"matrix": T.matrix.tolist()}


def model_from_dict(doc: dict) -> RobotModel:
    if not isinstance(doc, dict):
        raise SchemaError("robot model document must be a mapping")
    try:
        rows = doc["arm_dh"]
        dh = tuple(
            DHRow(float(r["a"]), float(r["alpha"]), float(r["d"]), float(r.get("offset", 0.0)))
            for r in rows
        )
        base = default_model()
        return RobotModel(
            arm_dh=dh,
            T_vb=_parse_transform(doc.get("T_vb"), "T_vb"),
            T_ba=_parse_transform(doc.get("T_ba"), "T_ba"),
            T_ae_tool=_parse_transform(doc.get("T_ae_tool"), "T_ae_tool"),
            joint_limits=np.array(doc["joint_limits"], dtype=float),
            velocity_limits=np.array(doc["velocity_limits"], dtype=float),
            link_radii=np.array(doc.get("link_radii", base.link_radii), dtype=float),
            footprint_radius=float(doc.get("footprint_radius", base.footprint_radius)),
            footprint_height=float(doc.get("footprint_height", base.footprint_height)),
            footprint_points=int(doc.get("footprint_points", base.footprint_points)),
            name=str(doc.get("name", "robot")),
            home_arm=np.array(doc.get("home_arm", [0.0] * N_ARM), dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"robot model: missing or malformed field ({exc})") from exc
    except InvalidInputError as exc:
        raise SchemaError(f"robot model: {exc}") from exc


def model_to_dict(model: RobotModel) -> dict:
    return {
        "name": model.name,
        "arm_dh": [
            {"a": r.a, "alpha": r.alpha, "d": r.d, "offset": r.offset} for r in model.arm_dh
        ],
        "T_vb": _dump_transform(model.T_vb),
        "T_ba": _dump_transform(model.T_ba),
        "T_ae_tool": _dump_transform(model.T_ae_tool),
        "joint_limits": model.joint_limits.tolist(),
        "velocity_limits": model.velocity_limits.tolist(),
        "link_radii": model.link_radii.tolist(),
        "footprint_radius": model.footprint_radius,
        "footprint_height": model.footprint_height,
        "footprint_points": model.footprint_points,
        "home_arm": model.home_arm.tolist(),
    }


def load_model(path: str | Path) -> RobotModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SchemaError(f"{path}: not valid YAML ({exc})") from exc
    return model_from_dict(doc)


def save_model(model: RobotModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(model_to_dict(model), fh, sort_keys=False)


# small helpers used by tests and the reachability builder

def random_configuration(model: RobotModel, rng: np.random.Generator,
                         base_span: float = 2.0) -> Configuration:
    lim = model.joint_limits[3:]
    arm = rng.uniform(lim[:, 0], lim[:, 1])
    base = np.array([
        rng.uniform(-base_span, base_span),
        rng.uniform(-base_span, base_span),
        rng.uniform(-math.pi, math.pi),
    ])
    return Configuration(base, arm)


__all__ = [
    "DHRow", "RobotModel", "Configuration", "LinkPoint", "KinematicSnapshot",
    "N_BASE", "N_ARM", "N_JOINTS",
    "fk_end_effector", "fk_arm", "fk_link_points", "whole_body_jacobian",
    "point_jacobian", "manipulability", "manipulability_jacobian", "arm_hessian",
    "link_point_template", "snapshot", "world_frames", "arm_frames", "wrap_angle",
    "default_model", "load_model", "save_model", "model_from_dict", "model_to_dict",
    "random_configuration", "rot_y", "rot_z",
]
