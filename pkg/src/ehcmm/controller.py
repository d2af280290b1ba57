"""Per-tick whole-body velocity QP.

Decision vector x = (qdot (9), delta (6)).  Cost 1/2 x'Qx + C'x with

    Q = diag(w_base * I3, I6, slack_weight * I6),   C = (-gamma * J_m, 0)

equality J qdot - delta = nu_e, and the inequality stack

    obstacle velocity dampers
    x <= X+,  -x <= -X-              (15 + 15 rows)
    joint-position dampers           (9 + 9 rows)

The base weight w_base is what distinguishes the methods: w_max * sig(omega)
for the embodied controller, 1/||e|| and a constant for the two NEO
variants.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidInputError, SchemaError
from .kinematics import (
    N_ARM,
    N_BASE,
    N_JOINTS,
    Configuration,
    RobotModel,
    _jacobian_from_frames,
    _manipulability_terms,
    link_point_template,
    world_frames,
)
from .mpbs import servo_target
from .qp import kkt_residuals, solve_qp
from .reachability import EmbodiedWeight, ReachabilityMap, SigParams, omega
from .se3 import RigidTransform, Twist, log_so3

N_SLACK = 6
N_X = N_JOINTS + N_SLACK

STATUS_OPTIMAL = "optimal"
STATUS_RELAXED = "relaxed"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius >= 0:
            raise InvalidInputError("sphere radius must be non-negative")


@dataclass(frozen=True)
class ControllerParams:
    gain: float = 2.0
    beta: float = 0.5  # velocity-damper gain
    gamma: float = 0.1  # manipulability gain
    slack_weight: float = 1e3
    w_max: float = 10.0
    sig_k: float = 8.0
    sig_omega0: float = 1.0
    omega_max: float = 10.0
    tie_angle: float = 0.05
    neo_c: float = 1.0
    neo_e_floor: float = 1e-3  # ||e|| floor in the 1/||e|| weight
    safety_distance: float = 0.05  # S
    activation_distance: float = 0.3  # d_act
    samples_per_link: int = 3
    max_linear: float = 1.5
    max_angular: float = 1.0
    slack_limit: float = 10.0
    joint_margin: float = 0.05
    joint_damper_gain: float = 0.5
    dt: float = 0.02
    tsmm_standoff: float = 0.2
    camera_hfov: float = math.radians(69.4)
    camera_vfov: float = math.radians(42.5)
    camera_range: float = 10.0
    camera_offset: tuple = (0.0, 0.0, -0.2)  # camera origin in the end-effector frame (wrist mount)
    velocity_limits: tuple | None = None  # overrides the robot model when given
    omega_origin: str = "tool"  # error vector fed to omega: "tool" (target - tool) or "arm_base"
    exact_tracking: bool = True  # pin the slack to zero whenever that is feasible

    def __post_init__(self):
        for name in ("gain", "beta", "slack_weight", "w_max", "sig_k", "safety_distance",
                     "activation_distance", "max_linear", "max_angular", "dt",
                     "slack_limit", "neo_c", "tsmm_standoff", "camera_range"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"controller parameter {name} must be positive")
        if self.gamma < 0 or self.joint_margin < 0 or self.joint_damper_gain <= 0:
            raise InvalidInputError("gamma, joint_margin must be >= 0 and damper gain > 0")
        if self.activation_distance <= self.safety_distance:
            raise InvalidInputError("activation distance must exceed the safety distance")
        if self.samples_per_link < 1:
            raise InvalidInputError("samples_per_link must be >= 1")
        if self.omega_origin not in ("tool", "arm_base"):
            raise InvalidInputError("omega_origin must be 'tool' or 'arm_base'")
        object.__setattr__(self, "camera_offset", tuple(float(v) for v in self.camera_offset))
        if self.velocity_limits is not None:
            v = tuple(float(x) for x in self.velocity_limits)
            if len(v) != N_JOINTS or min(v) <= 0:
                raise InvalidInputError("velocity_limits needs 9 positive entries")
            object.__setattr__(self, "velocity_limits", v)

    @property
    def sig_params(self) -> SigParams:
        return SigParams(self.sig_k, self.sig_omega0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["camera_offset"] = list(self.camera_offset)
        if self.velocity_limits is not None:
            d["velocity_limits"] = list(self.velocity_limits)
        return d

    @classmethod
    def from_dict(cls, doc: dict | None) -> "ControllerParams":
        doc = dict(doc or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise SchemaError(f"unknown controller parameter(s): {', '.join(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise SchemaError(str(exc)) from exc

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_params(path: str | Path) -> ControllerParams:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if doc is not None and not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a mapping of controller parameters")
    return ControllerParams.from_dict(doc)


def save_params(params: ControllerParams, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(params.to_dict(), sort_keys=True))


# ---------------------------------------------------------------------------
# building blocks

def clamp_twist(v: np.ndarray, max_linear: float, max_angular: float) -> np.ndarray:
    out = np.array(v, dtype=float)
    n = np.linalg.norm(out[:3])
    if n > max_linear:
        out[:3] *= max_linear / n
    n = np.linalg.norm(out[3:])
    if n > max_angular:
        out[3:] *= max_angular / n
    return out


def desired_velocity(current: RigidTransform, target: RigidTransform, gain: float,
                     max_linear: float = math.inf, max_angular: float = math.inf) -> Twist:
    """World-frame twist gain * psi(current^-1 target), each part norm-clamped."""
    if not gain > 0:
        raise InvalidInputError("gain must be positive")
    R = current.rotation
    # psi of the relative pose, rotated from the current end-effector frame to the world
    lin = target.translation - current.translation
    ang = R @ log_so3(R.T @ target.rotation)
    v = clamp_twist(gain * np.concatenate([lin, ang]), max_linear, max_angular)
    return Twist(v[:3], v[3:])


@dataclass
class ObstacleRows:
    G: np.ndarray  # (k, 9)
    h: np.ndarray  # (k,)
    min_distance: float  # over all pairs, not only active ones
    violated: bool  # some pair already closer than S
    pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))


class _PointSet:
    """Collision samples of a model, arranged for vectorised evaluation."""

    def __init__(self, model: RobotModel, samples_per_link: int):
        tpl = link_point_template(model, samples_per_link, include_footprint=True,
                                  skip_degenerate=True)
        self.frame = np.array([lp.frame for lp in tpl], dtype=int)
        self.offset = np.array([lp.offset for lp in tpl], dtype=float).reshape(-1, 3)
        self.radius = np.array([lp.radius for lp in tpl], dtype=float)
        # mask[n, j] = arm joint j moves sample n
        self.mask = (np.arange(N_ARM)[None, :] <= self.frame[:, None]).astype(float)

    def positions(self, T_ov: np.ndarray, frames: np.ndarray) -> np.ndarray:
        T = np.concatenate([T_ov[None], frames[:N_ARM]])[self.frame + 1]
        return np.einsum("nij,nj->ni", T[:, :3, :3], self.offset) + T[:, :3, 3]


_POINTSETS: dict = {}


def _pointset(model: RobotModel, samples_per_link: int) -> _PointSet:
    key = (id(model), samples_per_link)
    hit = _POINTSETS.get(key)
    if hit is None or hit[0] is not model:
        hit = (model, _PointSet(model, samples_per_link))
        _POINTSETS[key] = hit
    return hit[1]


def _obstacle_rows(ps: _PointSet, T_ov, frames, obstacles, S, beta, dt, d_act) -> ObstacleRows:
    if not obstacles:
        return ObstacleRows(np.zeros((0, N_JOINTS)), np.zeros(0), math.inf, False)
    pts = ps.positions(T_ov, frames)
    # obstacles are expressed in the virtual-base frame, as are the samples
    R_ov = T_ov[:3, :3]
    t_ov = T_ov[:3, 3]
    centres = np.array([o.center for o in obstacles])
    radii = np.array([o.radius for o in obstacles])
    c_v = (centres - t_ov) @ R_ov
    p_v = (pts - t_ov) @ R_ov
    diff = p_v[:, None, :] - c_v[None, :, :]  # (n_pts, n_obs, 3)
    dist_c = np.linalg.norm(diff, axis=2)
    d = dist_c - radii[None, :] - ps.radius[:, None]
    min_d = float(d.min())
    act = np.argwhere(d < d_act)
    if len(act) == 0:
        return ObstacleRows(np.zeros((0, N_JOINTS)), np.zeros(0), min_d, min_d < S)
    i, k = act[:, 0], act[:, 1]
    nrm = np.maximum(dist_c[i, k], 1e-12)
    n_world = (diff[i, k] / nrm[:, None]) @ R_ov.T  # unit, obstacle -> sample
    p = pts[i]
    a = len(i)
    G = np.zeros((a, N_JOINTS))
    r = p - t_ov
    G[:, 0] = -n_world[:, 0]
    G[:, 1] = -n_world[:, 1]
    G[:, 2] = -(n_world[:, 1] * r[:, 0] - n_world[:, 0] * r[:, 1])
    z = frames[:N_ARM, :3, 2]
    o = frames[:N_ARM, :3, 3]
    rel = p[:, None, :] - o[None, :, :]  # (a, 6, 3)
    # n . (z_j x rel) = z_j . (rel x n)
    trip = np.einsum("jc,ajc->aj", z, np.cross(rel, n_world[:, None, :]))
    G[:, 3:] = -trip * ps.mask[i]
    h = beta * (d[i, k] - S) / dt
    return ObstacleRows(G, h, min_d, min_d < S, act)


def obstacle_rows(model: RobotModel, cfg: Configuration, obstacles, S: float, beta: float,
                  dt: float = 0.02, d_act: float = 0.3,
                  samples_per_link: int = 3) -> ObstacleRows:
    """Velocity-damper rows -n'J_p qdot <= beta (d - S) / dt for pairs with d < d_act."""
    if not (S > 0 and beta > 0):
        raise InvalidInputError("S and beta must be positive")
    T_ov, frames = world_frames(model, cfg)
    return _obstacle_rows(_pointset(model, samples_per_link), T_ov, frames, list(obstacles),
                          S, beta, dt, d_act)


def min_obstacle_distance(model: RobotModel, cfg: Configuration, obstacles,
                          samples_per_link: int = 3) -> float:
    if not obstacles:
        return math.inf
    T_ov, frames = world_frames(model, cfg)
    ps = _pointset(model, samples_per_link)
    pts = ps.positions(T_ov, frames)
    centres = np.array([o.center for o in obstacles])
    radii = np.array([o.radius for o in obstacles])
    d = np.linalg.norm(pts[:, None] - centres[None], axis=2) - radii[None] - ps.radius[:, None]
    return float(d.min())


def _velocity_bounds(model: RobotModel, params: ControllerParams, base_on: bool, arm_on: bool):
    v = np.array(params.velocity_limits if params.velocity_limits is not None
                 else model.velocity_limits, dtype=float)
    if not base_on:
        v[:N_BASE] = 0.0
    if not arm_on:
        v[N_BASE:] = 0.0
    return v


def _position_dampers(model: RobotModel, q: np.ndarray, vlim: np.ndarray,
                      params: ControllerParams):
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    k = params.joint_damper_gain / params.dt
    up = k * (hi - params.joint_margin - q)
    dn = k * (q - lo - params.joint_margin)
    # never demand more than the box allows, so x = 0 style fallbacks stay feasible
    up = np.clip(up, -0.99 * vlim, vlim)
    dn = np.clip(dn, -0.99 * vlim, vlim)
    G = np.zeros((2 * N_JOINTS, N_X))
    G[:N_JOINTS, :N_JOINTS] = np.eye(N_JOINTS)
    G[N_JOINTS:, :N_JOINTS] = -np.eye(N_JOINTS)
    return G, np.concatenate([up, dn])


@dataclass
class QpProblem:
    Q: np.ndarray
    C: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    G: np.ndarray
    r_I: np.ndarray
    n_obstacle_rows: int = 0
    min_obstacle_distance: float = math.inf
    obstacle_violated: bool = False
    obstacle_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    def __post_init__(self):
        if self.G.shape[0] != self.r_I.shape[0]:
            raise InvalidInputError("G and r_I row counts differ")
        if not np.all(np.isfinite(self.r_I)):
            raise InvalidInputError("every inequality row needs a finite bound")

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.C @ x)


def base_weight(method: str, weight: EmbodiedWeight | None, error_norm: float,
                params: ControllerParams) -> float:
    kind = canonical_method(method)
    if kind in ("ehc", "ehc-nompbs"):
        if weight is None:
            raise InvalidInputError("the embodied controller needs an EmbodiedWeight")
        return params.w_max * weight.sig_value
    if kind == "neo-e":
        return 1.0 / max(error_norm, params.neo_e_floor)
    return params.neo_c  # neo-c and tsmm


def assemble(model: RobotModel, cfg: Configuration, target: RigidTransform,
             weight: EmbodiedWeight | None, obstacles, params: ControllerParams,
             w_base: float | None = None, base_on: bool = True, arm_on: bool = True,
             d_act: float | None = None, slack_weight: float | None = None,
             _kin=None) -> QpProblem:
    """QP for one tick.  ``target`` is the pose the end-effector is servoed to."""
    if w_base is None:
        if weight is None:
            raise InvalidInputError("need either an EmbodiedWeight or an explicit base weight")
        w_base = params.w_max * weight.sig_value
    if not w_base > 0:
        raise InvalidInputError("base weight must be positive")
    T_ov, frames, J, Jm = _kin if _kin is not None else _kinematics(model, cfg)
    ee = RigidTransform(frames[-1][:3, :3], frames[-1][:3, 3])
    nu = desired_velocity(ee, target, params.gain, params.max_linear, params.max_angular)
    lam = params.slack_weight if slack_weight is None else slack_weight
    q_diag = np.concatenate([np.full(N_BASE, w_base), np.ones(N_ARM), np.full(N_SLACK, lam)])
    Q = np.diag(q_diag)
    C = np.zeros(N_X)
    C[:N_JOINTS] = -params.gamma * Jm
    A = np.hstack([J, -np.eye(N_SLACK)])
    b = nu.as_vector()

    ob = _obstacle_rows(_pointset(model, params.samples_per_link), T_ov, frames,
                        list(obstacles or ()), params.safety_distance, params.beta,
                        params.dt, params.activation_distance if d_act is None else d_act)
    vlim = _velocity_bounds(model, params, base_on, arm_on)
    xmax = np.concatenate([vlim, np.full(N_SLACK, params.slack_limit)])
    G_box = np.vstack([np.eye(N_X), -np.eye(N_X)])
    h_box = np.concatenate([xmax, xmax])
    G_pd, h_pd = _position_dampers(model, cfg.as_vector(), vlim, params)
    G_ob = np.hstack([ob.G, np.zeros((len(ob.G), N_SLACK))])
    G = np.vstack([G_ob, G_box, G_pd])
    h = np.concatenate([ob.h, h_box, h_pd])
    return QpProblem(Q, C, A, b, G, h, len(ob.G), ob.min_distance, ob.violated, ob.pairs)


def _kinematics(model: RobotModel, cfg: Configuration):
    T_ov, frames = world_frames(model, cfg)
    J = _jacobian_from_frames(T_ov, frames, frames[-1][:3, 3])
    _, g = _manipulability_terms(J[:, N_BASE:])
    Jm = np.zeros(N_JOINTS)
    Jm[N_BASE:] = g
    return T_ov, frames, J, Jm


@dataclass
class ControlTick:
    qdot: np.ndarray
    slack: np.ndarray
    omega_used: float
    sig_used: float
    min_obstacle_distance: float
    solver_status: str
    base_weight: float = 0.0
    nu_e: np.ndarray = field(default_factory=lambda: np.zeros(6))
    active: list = field(default_factory=list)
    obstacle_violated: bool = False
    phase: int = 0  # 1/2 for the two-stage baseline, 0 otherwise
    servo: RigidTransform | None = None
    ee: RigidTransform | None = None
    error_norm: float = float("nan")


def _exact_rows(p: QpProblem) -> np.ndarray:
    """Rows of G that do not involve the slack (obstacles, qdot box, dampers)."""
    n = p.n_obstacle_rows
    return np.r_[0:n, n:n + N_JOINTS, n + N_X:n + N_X + N_JOINTS, n + 2 * N_X:len(p.r_I)]


def solve_exact(p: QpProblem, warm_active=None):
    """The tick problem with delta fixed at zero (exact tracking), or None if infeasible."""
    rows = _exact_rows(p)
    back = {int(r): i for i, r in enumerate(rows)}
    warm = [back[i] for i in (warm_active or []) if i in back]
    sol = solve_qp(p.Q[:N_JOINTS, :N_JOINTS], p.C[:N_JOINTS], p.A_eq[:, :N_JOINTS], p.b_eq,
                   p.G[rows, :N_JOINTS], p.r_I[rows], warm_active=warm)
    if not sol.ok:
        return None
    return np.concatenate([sol.x, np.zeros(N_SLACK)]), [int(rows[i]) for i in sol.active]


def solve(p: QpProblem, relax=None, warm_active=None,
          exact_first: bool = False) -> tuple[np.ndarray, str, list]:
    """Solve a tick problem; on infeasibility retry once on relax() if given.

    With ``exact_first`` the slack is pinned to zero whenever that is feasible,
    and the slack QP only runs when exact tracking violates an inequality.
    Returns (x, status, active set).  x is all zeros when both attempts fail.
    """
    if exact_first:
        hit = solve_exact(p, warm_active)
        if hit is not None:
            return hit[0], STATUS_OPTIMAL, hit[1]
    sol = solve_qp(p.Q, p.C, p.A_eq, p.b_eq, p.G, p.r_I, warm_active=warm_active)
    if sol.ok:
        return sol.x, STATUS_OPTIMAL, sol.active
    if relax is not None:
        p2 = relax()
        sol = solve_qp(p2.Q, p2.C, p2.A_eq, p2.b_eq, p2.G, p2.r_I)
        if sol.ok:
            return sol.x, STATUS_RELAXED, sol.active
    return np.zeros(N_X), STATUS_INFEASIBLE, []


def tick_residuals(p: QpProblem, x: np.ndarray, warm_active=None) -> dict:
    """KKT residuals of a solved tick (re-solving to recover multipliers)."""
    sol = solve_qp(p.Q, p.C, p.A_eq, p.b_eq, p.G, p.r_I, warm_active=warm_active)
    return kkt_residuals(p.Q, p.C, p.A_eq, p.b_eq, p.G, p.r_I, sol.x, sol.y, sol.z)


# ---------------------------------------------------------------------------
# methods

_ALIASES = {
    "ehc": "ehc",
    "ehc-mpbs": "ehc",
    "ehc-nompbs": "ehc-nompbs",
    "ehc_nompbs": "ehc-nompbs",
    "neo-c": "neo-c",
    "neo_c": "neo-c",
    "neo-e": "neo-e",
    "neo_e": "neo-e",
    "neo-nompbs": "neo-e",
    "neo_nompbs": "neo-e",
    "neo": "neo-e",
    "tsmm": "tsmm",
}
METHODS = ("ehc", "ehc-nompbs", "neo-c", "neo-e", "tsmm")


def canonical_method(name: str) -> str:
    key = str(name).strip().lower()
    if key not in _ALIASES:
        raise InvalidInputError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return _ALIASES[key]


def camera_pose(ee: RigidTransform, params: ControllerParams) -> RigidTransform:
    return RigidTransform(ee.rotation, ee.translation + ee.rotation @ np.array(params.camera_offset))


class Controller:
    """Stateful per-robot controller (warm start, two-stage phase)."""

    def __init__(self, model: RobotModel, rmap: ReachabilityMap | None,
                 params: ControllerParams | None = None, method: str = "ehc"):
        self.model = model
        self.rmap = rmap
        self.params = params or ControllerParams()
        self.method = canonical_method(method)
        if self.method.startswith("ehc") and rmap is None:
            raise InvalidInputError("the embodied controller needs a reachability map")
        self.mpbs = self.method == "ehc"
        self.reset()

    def reset(self) -> None:
        self._warm_fixed: list = []
        self._warm_pairs: set = set()
        self.phase = 1 if self.method == "tsmm" else 0

    def embodied_weight(self, T_ov: np.ndarray, ee_position, target_position) -> EmbodiedWeight:
        """omega and sig for the translational error expressed in the arm-base frame."""
        T_oa = T_ov @ self.model._T_va
        origin = ee_position if self.params.omega_origin == "tool" else T_oa[:3, 3]
        e_world = np.asarray(target_position, dtype=float) - np.asarray(origin, dtype=float)
        return omega(self.rmap, T_oa[:3, :3].T @ e_world, self.params.sig_params,
                     self.params.omega_max, self.params.tie_angle)

    def _warm_indices(self, prob: QpProblem) -> list:
        n_ob = prob.n_obstacle_rows
        idx = [n_ob + j for j in self._warm_fixed]
        if self._warm_pairs and n_ob:
            for r, pair in enumerate(map(tuple, prob.obstacle_pairs)):
                if pair in self._warm_pairs:
                    idx.append(r)
        return idx

    def _remember(self, prob: QpProblem, active: list) -> None:
        n_ob = prob.n_obstacle_rows
        self._warm_fixed = [i - n_ob for i in active if i >= n_ob]
        self._warm_pairs = {tuple(prob.obstacle_pairs[i]) for i in active if i < n_ob}

    def step(self, cfg: Configuration, target: RigidTransform, obstacles=()) -> ControlTick:
        p = self.params
        kin = _kinematics(self.model, cfg)
        T_ov, frames = kin[0], kin[1]
        ee = RigidTransform(frames[-1][:3, :3], frames[-1][:3, 3])
        e_world = target.translation - ee.translation
        e_norm = float(np.linalg.norm(e_world))
        w = self.embodied_weight(T_ov, ee.translation, target.translation) \
            if self.rmap is not None else None
        s = w.sig_value if w is not None else float("nan")
        servo = servo_target(target, ee, s).blended if self.mpbs else target

        base_on = arm_on = True
        if self.method == "tsmm":
            if self.phase == 1 and float(np.linalg.norm(e_world[:2])) <= p.tsmm_standoff:
                self.phase = 2
            base_on, arm_on = self.phase == 1, self.phase == 2
        wb = base_weight(self.method, w, e_norm, p)
        obstacles = list(obstacles or ())

        def build(d_act=None, lam=None):
            return assemble(self.model, cfg, servo, w, obstacles, p, w_base=wb,
                            base_on=base_on, arm_on=arm_on, d_act=d_act, slack_weight=lam,
                            _kin=kin)

        prob = build()
        x, status, active = solve(
            prob,
            relax=lambda: build(0.5 * p.activation_distance, 0.1 * p.slack_weight),
            warm_active=self._warm_indices(prob),
            exact_first=p.exact_tracking,
        )
        # a zero velocity box only holds to rounding; disabled joints get exact zeros
        if not base_on:
            x[:N_BASE] = 0.0
        if not arm_on:
            x[N_BASE:N_JOINTS] = 0.0
        if status == STATUS_OPTIMAL:
            self._remember(prob, active)
        else:
            self._warm_fixed, self._warm_pairs = [], set()
        return ControlTick(
            qdot=x[:N_JOINTS].copy(),
            slack=x[N_JOINTS:].copy(),
            omega_used=w.omega if w is not None else float("nan"),
            sig_used=s,
            min_obstacle_distance=prob.min_obstacle_distance,
            solver_status=status,
            base_weight=wb,
            nu_e=prob.b_eq.copy(),
            active=list(active),
            obstacle_violated=prob.obstacle_violated,
            phase=self.phase,
            servo=servo,
            ee=ee,
            error_norm=e_norm,
        )
