"""Discrete-time kinematic world with per-joint actuation noise.

The commanded joint velocity is perturbed by zero-mean Gaussian noise
(independent per joint and tick), Euler-integrated, and clamped to the
joint limits.  Every step appends one row to the trace.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .controller import ControllerParams, Sphere, camera_pose, min_obstacle_distance
from .errors import InvalidInputError, SchemaError
from .kinematics import N_BASE, N_JOINTS, Configuration, RobotModel, fk_end_effector
from .mpbs import approach_pose, in_frustum
from .se3 import RigidTransform, rotation_angle

DEFAULT_POS_TOL = 0.01
DEFAULT_ROT_TOL = 0.05


NOISE_MODES = ("additive", "proportional")


@dataclass(frozen=True)
class NoiseModel:
    """Standard deviations of the executed-velocity noise (per joint, per tick)."""

    base_t_sigma: float = 0.05
    base_r_sigma: float = 0.05
    arm_sigma: float = 0.002
    mode: str = "additive"  # or "proportional": sigma scales with |commanded velocity|

    def __post_init__(self):
        if min(self.base_t_sigma, self.base_r_sigma, self.arm_sigma) < 0:
            raise InvalidInputError("noise sigmas must be non-negative")
        if self.mode not in NOISE_MODES:
            raise InvalidInputError(f"unknown noise mode {self.mode!r}")

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.base_t_sigma == 0 and self.base_r_sigma == 0 and self.arm_sigma == 0

    def sigmas(self) -> np.ndarray:
        return np.array([self.base_t_sigma, self.base_t_sigma, self.base_r_sigma]
                        + [self.arm_sigma] * (N_JOINTS - N_BASE))


@dataclass
class TraceRow:
    t: float
    q: np.ndarray  # 9-vector
    e_norm: float
    rot_err: float
    sig: float
    min_distance: float
    in_frustum: bool
    qdot: np.ndarray  # commanded velocity that led to this state (zeros for row 0)
    status: str = ""
    phase: int = 0
    omega: float = float("nan")


@dataclass
class SimState:
    """Mutable world state.  ``step`` advances it in place and returns it."""

    cfg: Configuration
    obstacles: list
    target: RigidTransform
    dt: float = 0.02
    rng_seed: int = 0
    t: float = 0.0
    steps: int = 0
    trace: list = field(default_factory=list)
    record: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        self.rng = np.random.default_rng(self.rng_seed)


def _observe(model: RobotModel, cfg: Configuration, target: RigidTransform, obstacles,
             params: ControllerParams):
    ee = fk_end_effector(model, cfg)
    e = float(np.linalg.norm(target.translation - ee.translation))
    r = rotation_angle(ee.rotation.T @ target.rotation)
    d = min_obstacle_distance(model, cfg, obstacles, params.samples_per_link)
    cam = camera_pose(ee, params)
    vis = in_frustum(cam, target.translation, params.camera_hfov, params.camera_vfov,
                     params.camera_range)
    return e, r, d, vis


def new_state(model: RobotModel, cfg: Configuration, target: RigidTransform, obstacles=(),
              dt: float = 0.02, seed: int = 0, params: ControllerParams | None = None,
              record: bool = True) -> SimState:
    state = SimState(cfg, list(obstacles), target, dt, seed, record=record)
    if record:
        params = params or ControllerParams(dt=dt)
        e, r, d, vis = _observe(model, cfg, target, state.obstacles, params)
        state.trace.append(TraceRow(0.0, cfg.as_vector(), e, r, float("nan"), d, vis,
                                    np.zeros(N_JOINTS)))
    return state


def step(model: RobotModel, state: SimState, qdot_cmd, noise: NoiseModel,
         params: ControllerParams | None = None, sig: float = float("nan"),
         status: str = "", phase: int = 0, omega: float = float("nan")) -> SimState:
    """Advance one tick: q += dt * (qdot_cmd + noise), then clamp to limits."""
    qdot_cmd = np.asarray(qdot_cmd, dtype=float).reshape(N_JOINTS)
    q = state.cfg.as_vector()
    if noise.is_zero:
        qdot = qdot_cmd
    else:
        sd = noise.sigmas()
        if noise.mode == "proportional":
            sd = sd * np.abs(qdot_cmd)
        qdot = qdot_cmd + sd * state.rng.standard_normal(N_JOINTS)
    q = q + state.dt * qdot
    lim = model.joint_limits
    q = np.clip(q, lim[:, 0], lim[:, 1])
    state.cfg = Configuration.from_vector(q).wrapped()
    state.steps += 1
    state.t = state.steps * state.dt
    if state.record:
        params = params or ControllerParams(dt=state.dt)
        e, r, d, vis = _observe(model, state.cfg, state.target, state.obstacles, params)
        state.trace.append(TraceRow(state.t, state.cfg.as_vector(), e, r, sig, d, vis,
                                    qdot_cmd.copy(), status, phase, omega))
    return state


def pose_error(model: RobotModel, cfg: Configuration, target: RigidTransform):
    ee = fk_end_effector(model, cfg)
    return (float(np.linalg.norm(target.translation - ee.translation)),
            rotation_angle(ee.rotation.T @ target.rotation))


def success_check(model: RobotModel, state: SimState, pos_tol: float = DEFAULT_POS_TOL,
                  rot_tol: float = DEFAULT_ROT_TOL) -> bool:
    if not (pos_tol > 0 and rot_tol > 0):
        raise InvalidInputError("tolerances must be positive")
    e, r = pose_error(model, state.cfg, state.target)
    return e <= pos_tol and r <= rot_tol


def trace_digest(trace) -> str:
    """Stable hash of a trace (floats by their exact binary value)."""
    h = hashlib.sha256()
    for row in trace:
        h.update(np.float64(row.t).tobytes())
        h.update(np.ascontiguousarray(row.q, dtype=np.float64).tobytes())
        h.update(np.array([row.e_norm, row.rot_err, row.sig, row.min_distance,
                           row.omega]).tobytes())
        h.update(bytes([row.in_frustum]))
        h.update(np.ascontiguousarray(row.qdot, dtype=np.float64).tobytes())
        h.update(row.status.encode())
    return h.hexdigest()


TRACE_COLUMNS = (["t"] + [f"q{i}" for i in range(N_JOINTS)]
                 + ["e_norm", "rot_err", "sig", "min_distance", "in_frustum"]
                 + [f"qdot{i}" for i in range(N_JOINTS)] + ["status", "phase", "omega"])


def trace_rows(trace):
    for r in trace:
        yield ([repr(float(r.t))] + [repr(float(v)) for v in r.q]
               + [repr(float(r.e_norm)), repr(float(r.rot_err)), repr(float(r.sig)),
                  repr(float(r.min_distance)), str(int(r.in_frustum))]
               + [repr(float(v)) for v in r.qdot] + [r.status, str(r.phase),
                                                      repr(float(r.omega))])


# ---------------------------------------------------------------------------
# scenes

@dataclass
class Scene:
    """Obstacles, a target sequence, a start configuration, noise and seed."""

    name: str
    start: Configuration
    targets: list  # of RigidTransform
    obstacles: list = field(default_factory=list)
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    dt: float = 0.02
    timeout: float = 30.0


def _pose_from_node(node, what: str) -> RigidTransform:
    if not isinstance(node, dict):
        raise SchemaError(f"{what}: expected a mapping")
    try:
        if "matrix" in node:
            return RigidTransform.from_matrix(np.array(node["matrix"], dtype=float))
        t = node.get("position", node.get("translation", [0, 0, 0]))
        if "approach" in node:
            return approach_pose(np.array(t, dtype=float), np.array(node["approach"], dtype=float),
                                 float(node.get("roll", 0.0)))
        return RigidTransform.from_rpy(node.get("rpy", [0, 0, 0]), t)
    except SchemaError:
        raise
    except Exception as exc:
        raise SchemaError(f"{what}: {exc}") from exc


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SchemaError("scene document must be a mapping")
    known = {"name", "start", "targets", "obstacles", "noise", "seed", "dt", "timeout"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise SchemaError(f"unknown scene key(s): {', '.join(unknown)}")
    if "targets" not in doc or not doc["targets"]:
        raise SchemaError("scene needs at least one target")
    st = doc.get("start", {}) or {}
    try:
        start = Configuration(st.get("base", [0, 0, 0]), st.get("arm", [0.0] * 6))
    except InvalidInputError as exc:
        raise SchemaError(f"start: {exc}") from exc
    targets = [_pose_from_node(n, f"targets[{i}]") for i, n in enumerate(doc["targets"])]
    obstacles = []
    for i, o in enumerate(doc.get("obstacles", []) or []):
        try:
            obstacles.append(Sphere(o["center"], float(o["radius"])))
        except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
            raise SchemaError(f"obstacles[{i}]: {exc}") from exc
    nz = doc.get("noise", {})
    try:
        if nz in (None, "none", False):
            noise = NoiseModel.zero()
        else:
            noise = NoiseModel(**nz)
    except (TypeError, InvalidInputError) as exc:
        raise SchemaError(f"noise: {exc}") from exc
    return Scene(str(doc.get("name", "scene")), start, targets, obstacles, noise,
                 int(doc.get("seed", 0)), float(doc.get("dt", 0.02)),
                 float(doc.get("timeout", 30.0)))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "name": scene.name,
        "start": {"base": [float(v) for v in scene.start.base],
                  "arm": [float(v) for v in scene.start.arm]},
        "targets": [{"matrix": T.matrix.tolist()} for T in scene.targets],
        "obstacles": [{"center": [float(v) for v in o.center], "radius": float(o.radius)}
                      for o in scene.obstacles],
        "noise": {"base_t_sigma": scene.noise.base_t_sigma,
                  "base_r_sigma": scene.noise.base_r_sigma,
                  "arm_sigma": scene.noise.arm_sigma},
        "seed": scene.seed,
        "dt": scene.dt,
        "timeout": scene.timeout,
    }


def load_scene(path: str | Path) -> Scene:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return scene_from_dict(doc)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scene_to_dict(scene), sort_keys=False))
