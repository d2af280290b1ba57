"""Experiment protocols, baselines and metrics.

Three suites:

random-reach       a sequence of random target poses per set, shared by all
                   methods; 30 s limit per point; actuation noise.
sequential-grasp   three objects on a table reached in order from a fixed
                   start, with the table as a field of sphere obstacles.
monitoring         one object 1.5 m ahead approached with a forward,
                   downward or sideways grasp; reports the share of ticks
                   with the object inside the camera frustum.

Joint-velocity metrics use the commanded velocities.  Base-T is the planar
speed |(xdot, ydot)|, Base-R is |thetadot|, Arm is the sum of absolute arm
joint speeds.  "Distant" ticks are those before omega first reaches 1,
"close" ticks the rest.  Per-trial phase means are averaged over the
successful trials.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .controller import (
    STATUS_OPTIMAL,
    STATUS_RELAXED,
    Controller,
    ControllerParams,
    Sphere,
    camera_pose,
    canonical_method,
)
from .kinematics import N_BASE, Configuration, RobotModel, model_to_dict
from .mpbs import approach_pose, in_frustum
from .reachability import ReachabilityMap
from .se3 import RigidTransform, rotation_angle
from .simulator import (
    DEFAULT_POS_TOL,
    DEFAULT_ROT_TOL,
    NoiseModel,
    Scene,
    SimState,
    new_state,
    step,
    trace_digest,
)

SUITES = ("random-reach", "sequential-grasp", "monitoring")
ORIENTATIONS = ("forward", "downward", "sideways")


# ---------------------------------------------------------------------------
# records

@dataclass
class TrialRecord:
    suite: str
    method: str
    group: str
    set_index: int
    index: int
    success: bool
    time: float
    ticks: int
    final_error: float
    final_rot_error: float
    distant: list | None
    close: list | None
    n_distant: int
    n_close: int
    tfm: float
    min_distance: float  # over ticks solved with status optimal
    n_relaxed: int
    n_infeasible: int
    digest: str

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("time", "final_error", "final_rot_error", "tfm", "min_distance"):
            d[k] = _num(d[k])
        for k in ("distant", "close"):
            if d[k] is not None:
                d[k] = [_num(v) for v in d[k]]
        return d


def _num(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


@dataclass
class Trial:
    record: TrialRecord
    trace: list | None = None


def _phase_velocities(qdot: np.ndarray) -> np.ndarray:
    """(Base-T, Base-R, Arm) per tick for an (n, 9) array of commands."""
    return np.column_stack([
        np.hypot(qdot[:, 0], qdot[:, 1]),
        np.abs(qdot[:, 2]),
        np.abs(qdot[:, N_BASE:]).sum(axis=1),
    ])


def split_index(omegas) -> int:
    """Index of the first tick with omega >= 1 (len if never)."""
    w = np.asarray(omegas, dtype=float)
    hit = np.flatnonzero(w >= 1.0)
    return int(hit[0]) if len(hit) else len(w)


def run_trial(model: RobotModel, ctrl: Controller, state: SimState, target: RigidTransform,
              noise: NoiseModel, timeout: float = 30.0, pos_tol: float = DEFAULT_POS_TOL,
              rot_tol: float = DEFAULT_ROT_TOL, suite: str = "", group: str = "",
              set_index: int = 0, index: int = 0, keep_trace: bool = False) -> Trial:
    """Closed loop from the current state until success or timeout."""
    p = ctrl.params
    ctrl.reset()
    state.target = target
    state.t = 0.0
    state.steps = 0
    state.trace = []
    state.record = keep_trace
    if keep_trace:
        first = new_state(model, state.cfg, target, state.obstacles, state.dt, 0, p, True)
        state.trace = first.trace
    n_max = int(round(timeout / state.dt))
    qdots, omegas, vis = [], [], []
    min_d = math.inf
    n_relaxed = n_infeasible = 0
    h = hashlib.sha256()
    success = False
    e = r = math.nan
    while True:
        tick = ctrl.step(state.cfg, target, state.obstacles)
        e = tick.error_norm
        r = rotation_angle(tick.ee.rotation.T @ target.rotation)
        if e <= pos_tol and r <= rot_tol:
            success = True
            break
        if state.steps >= n_max:
            break
        if tick.solver_status == STATUS_OPTIMAL:
            min_d = min(min_d, tick.min_obstacle_distance)
        elif tick.solver_status == STATUS_RELAXED:
            n_relaxed += 1
        else:
            n_infeasible += 1
        qdots.append(tick.qdot)
        omegas.append(tick.omega_used)
        vis.append(in_frustum(camera_pose(tick.ee, p), target.translation, p.camera_hfov,
                              p.camera_vfov, p.camera_range))
        h.update(tick.qdot.tobytes())
        step(model, state, tick.qdot, noise, p, sig=tick.sig_used, status=tick.solver_status,
             phase=tick.phase, omega=tick.omega_used)
    state.record = False
    n = len(qdots)
    distant = close = None
    k = split_index(omegas)
    if n:
        vel = _phase_velocities(np.array(qdots))
        if k > 0:
            distant = vel[:k].mean(axis=0).tolist()
        if k < n:
            close = vel[k:].mean(axis=0).tolist()
    h.update(np.float64(e).tobytes())
    rec = TrialRecord(
        suite=suite, method=ctrl.method, group=group, set_index=set_index, index=index,
        success=success, time=state.t if success else timeout, ticks=n,
        final_error=e, final_rot_error=r, distant=distant, close=close,
        n_distant=min(k, n), n_close=max(n - k, 0),
        tfm=100.0 * float(np.mean(vis)) if n else 100.0,
        min_distance=min_d, n_relaxed=n_relaxed, n_infeasible=n_infeasible,
        digest=h.hexdigest()[:16],
    )
    return Trial(rec, state.trace if keep_trace else None)


# ---------------------------------------------------------------------------
# summaries and reports

@dataclass
class MethodSummary:
    method: str
    group: str
    trials: int
    successes: int
    failures: int
    success_rate: float
    mean_time: float
    distant: list
    close: list
    tfm: float
    min_distance: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("success_rate", "mean_time", "tfm", "min_distance"):
            d[k] = _num(d[k])
        d["distant"] = [_num(v) for v in d["distant"]]
        d["close"] = [_num(v) for v in d["close"]]
        return d


def summarize(records: list[TrialRecord], method: str, group: str = "") -> MethodSummary:
    rs = [r for r in records if r.method == method and r.group == group]
    ok = [r for r in rs if r.success]
    nan3 = [math.nan] * 3

    def phase_mean(key):
        rows = [getattr(r, key) for r in ok if getattr(r, key) is not None]
        return np.mean(rows, axis=0).tolist() if rows else nan3

    return MethodSummary(
        method=method,
        group=group,
        trials=len(rs),
        successes=len(ok),
        failures=len(rs) - len(ok),
        success_rate=100.0 * len(ok) / len(rs) if rs else math.nan,
        mean_time=float(np.mean([r.time for r in ok])) if ok else math.nan,
        distant=phase_mean("distant"),
        close=phase_mean("close"),
        tfm=float(np.mean([r.tfm for r in rs])) if rs else math.nan,
        min_distance=min((r.min_distance for r in rs), default=math.inf),
    )


@dataclass
class ExperimentReport:
    suite: str
    seed: int
    config: dict
    config_hash: str
    summaries: list
    records: list
    created: str = ""  # wall-clock stamp; excluded from reproducibility comparisons

    def summary(self, method: str, group: str = "") -> MethodSummary:
        method = canonical_method(method)
        for s in self.summaries:
            if s.method == method and s.group == group:
                return s
        raise KeyError((method, group))

    def to_json_dict(self, include_created: bool = True) -> dict:
        d = {
            "suite": self.suite,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "config": self.config,
            "summaries": [s.to_dict() for s in self.summaries],
            "trials": [r.to_dict() for r in self.records],
        }
        if include_created:
            d["created"] = self.created
        return d

    def records_json(self) -> str:
        """Canonical serialisation of the per-trial records."""
        return json.dumps([r.to_dict() for r in self.records], sort_keys=True)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=1, sort_keys=True) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["suite", "method", "group", "metric", "value", "config_hash", "seed"])
            for s in self.summaries:
                metrics = [
                    ("trials", s.trials), ("successes", s.successes), ("failures", s.failures),
                    ("success_rate_pct", s.success_rate), ("mean_time_s", s.mean_time),
                    ("distant_base_t_mps", s.distant[0]), ("distant_base_r_radps", s.distant[1]),
                    ("distant_arm_sum_radps", s.distant[2]),
                    ("close_base_t_mps", s.close[0]), ("close_base_r_radps", s.close[1]),
                    ("close_arm_sum_radps", s.close[2]),
                    ("tfm_pct", s.tfm), ("min_obstacle_distance_m", s.min_distance),
                ]
                for name, v in metrics:
                    w.writerow([self.suite, s.method, s.group, name, _fmt(v),
                                self.config_hash, self.seed])

    def table(self) -> str:
        """Plain-text comparison table."""
        lines = [f"{self.suite}  seed={self.seed}  config={self.config_hash}"]
        hdr = (f"{'method':<11}{'group':<10}{'time s':>8}{'fail':>6}{'/n':>5}"
               f"{'distant T/R/Arm':>22}{'close T/R/Arm':>22}{'TfM %':>8}")
        lines.append(hdr)
        for s in self.summaries:
            lines.append(
                f"{s.method:<11}{s.group:<10}{_fmt(s.mean_time, 2):>8}{s.failures:>6}"
                f"{s.trials:>5}{_triple(s.distant):>22}{_triple(s.close):>22}"
                f"{_fmt(s.tfm, 1):>8}"
            )
        return "\n".join(lines)


def _fmt(v, nd: int | None = None) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf"
    return f"{v:.{nd}f}" if nd is not None else repr(v)


def _triple(v) -> str:
    return "/".join(_fmt(x, 3) for x in v)


def config_digest(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:12]


def _map_fingerprint(rmap: ReachabilityMap | None) -> dict | None:
    if rmap is None:
        return None
    return {
        "voxel_size": rmap.voxel_size,
        "dims": list(rmap.dims),
        "seed": rmap.seed,
        "sample_count": rmap.sample_count,
        "grid_sha256": hashlib.sha256(np.ascontiguousarray(rmap.grid).tobytes()).hexdigest()[:16],
    }


def _report(suite: str, seed: int, args: dict, model: RobotModel, rmap, params,
            records: list, groups: list[str], methods: list[str]) -> ExperimentReport:
    config = {
        "suite_args": args,
        "controller": params.to_dict(),
        "robot": model_to_dict(model),
        "map": _map_fingerprint(rmap),
    }
    summaries = [summarize(records, m, g) for g in groups for m in methods]
    return ExperimentReport(suite, seed, config, config_digest(config), summaries, records,
                            time.strftime("%Y-%m-%dT%H:%M:%S"))


def _seed_int(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# random reach

def random_reach_targets(rng: np.random.Generator, n: int, start_xy=(0.0, 0.0),
                         r_range=(1.0, 3.0), z_range=(0.45, 1.05),
                         pitch_range=(-0.3, 1.2), roll_spread: float = 0.0) -> list[RigidTransform]:
    """Random walk of target poses: each lies 1-3 m (uniform over the annulus) from the last.

    The approach axis has a uniform yaw and a pitch in ``pitch_range``
    (positive = pointing down); the roll about it is uniform in
    [-roll_spread, roll_spread].
    """
    prev = np.asarray(start_xy, dtype=float)
    out = []
    for _ in range(n):
        r = math.sqrt(rng.uniform(r_range[0] ** 2, r_range[1] ** 2))
        a = rng.uniform(-math.pi, math.pi)
        xy = prev + r * np.array([math.cos(a), math.sin(a)])
        z = rng.uniform(*z_range)
        yaw = rng.uniform(-math.pi, math.pi)
        pitch = rng.uniform(*pitch_range)
        roll = roll_spread * rng.uniform(-1.0, 1.0)
        approach = np.array([math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw),
                             -math.sin(pitch)])
        out.append(approach_pose([xy[0], xy[1], z], approach, roll))
        prev = xy
    return out


def _segment_distance(p, a, b) -> float:
    ab = b - a
    t = np.clip((p - a) @ ab / max(ab @ ab, 1e-12), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def random_obstacles(rng: np.random.Generator, targets: list[RigidTransform], start_xy,
                     count: int = 8, clearance: float = 0.6,
                     radius_range=(0.08, 0.15), z_range=(0.2, 1.3)) -> list[Sphere]:
    """Spheres scattered around the target path, kept ``clearance`` off its segments."""
    pts = [np.array([start_xy[0], start_xy[1]])] + [T.translation[:2] for T in targets]
    pts = np.array(pts)
    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    out: list[Sphere] = []
    tries = 0
    while len(out) < count and tries < 200 * count:
        tries += 1
        r = rng.uniform(*radius_range)
        c = np.array([rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(*z_range)])
        gap = min(_segment_distance(c[:2], pts[i], pts[i + 1]) for i in range(len(pts) - 1))
        if gap - r < clearance:
            continue
        out.append(Sphere(c, r))
    return out


def run_random_reach(model: RobotModel, rmap: ReachabilityMap, params: ControllerParams,
                     methods=("ehc-nompbs", "neo-c", "neo-e"), sets: int = 5, points: int = 50,
                     seed: int = 0, noise: NoiseModel | None = None, obstacles: bool = True,
                     timeout: float = 30.0, pos_tol: float = DEFAULT_POS_TOL,
                     rot_tol: float = DEFAULT_ROT_TOL, progress=None,
                     keep_traces: bool = False):
    """Every method reaches the same ``points`` random poses in sequence, per set."""
    noise = NoiseModel() if noise is None else noise
    methods = [canonical_method(m) for m in methods]
    records: list[TrialRecord] = []
    traces = {}
    for s in range(sets):
        rng = np.random.default_rng(_seed_int(seed, 1, s))
        targets = random_reach_targets(rng, points)
        obs = random_obstacles(rng, targets, (0.0, 0.0)) if obstacles else []
        for m in methods:
            ctrl = Controller(model, rmap, params, m)
            state = new_state(model, model.home(), targets[0], obs, params.dt,
                              _seed_int(seed, 2, s), params, record=False)
            for i, T in enumerate(targets):
                tr = run_trial(model, ctrl, state, T, noise, timeout, pos_tol, rot_tol,
                               "random-reach", "", s, i, keep_trace=keep_traces)
                records.append(tr.record)
                if keep_traces:
                    traces[(m, s, i)] = tr.trace
                if progress:
                    progress(tr.record)
    args = {"methods": methods, "sets": sets, "points": points, "obstacles": obstacles,
            "timeout": timeout, "pos_tol": pos_tol, "rot_tol": rot_tol, "noise": asdict(noise)}
    rep = _report("random-reach", seed, args, model, rmap, params, records, [""], methods)
    return (rep, traces) if keep_traces else rep


# ---------------------------------------------------------------------------
# sequential grasp analogue

TABLE_NEAR_EDGE = 1.5
TABLE_TOP = 0.70


def table_spheres(near: float = TABLE_NEAR_EDGE, depth: float = 0.6, width: float = 1.2,
                  top: float = TABLE_TOP, radius: float = 0.06, pitch: float = 0.1) -> list[Sphere]:
    """A table as spheres: a top layer plus a front skirt down to the floor."""
    out = []
    xs = np.arange(near + radius, near + depth - radius + 1e-9, pitch)
    ys = np.arange(-0.5 * width + radius, 0.5 * width - radius + 1e-9, pitch)
    for x in xs:
        for y in ys:
            out.append(Sphere([x, y, top - radius], radius))
    # skirt on the near side so the base cannot drive under the table
    for z in np.arange(radius, top - radius - 1e-9, pitch):
        for y in ys:
            out.append(Sphere([near + radius, y, z], radius))
    return out


def three_objects_scene(table: bool = True, seed: int = 0,
                        noise: NoiseModel | None = None, model: RobotModel | None = None) -> Scene:
    """Three objects at front, middle and back of a table 1.5 m ahead."""
    from .kinematics import default_model

    model = model or default_model()
    z = TABLE_TOP + 0.12
    xs = (TABLE_NEAR_EDGE + 0.10, TABLE_NEAR_EDGE + 0.25, TABLE_NEAR_EDGE + 0.40)
    ys = (0.15, -0.1, 0.05)
    # grasp from the robot side, pitched down
    pitch = math.radians(35.0)
    app = np.array([math.cos(pitch), 0.0, -math.sin(pitch)])
    targets = [approach_pose([x, y, z], app) for x, y in zip(xs, ys)]
    return Scene("three-objects", model.home(), targets, table_spheres() if table else [],
                 NoiseModel() if noise is None else noise, seed)


def run_sequential_grasp_analogue(model: RobotModel, rmap: ReachabilityMap,
                                  params: ControllerParams,
                                  methods=("tsmm", "neo-c", "neo-e", "ehc"), trials: int = 15,
                                  seed: int = 0, table: bool = True,
                                  noise: NoiseModel | None = None, timeout: float = 30.0,
                                  pos_tol: float = DEFAULT_POS_TOL,
                                  rot_tol: float = DEFAULT_ROT_TOL, jitter: float = 0.03,
                                  scene: Scene | None = None, progress=None,
                                  keep_traces: bool = False):
    """Each trial reaches the three objects in order from the same start."""
    scene = scene or three_objects_scene(table, seed, noise, model)
    noise = scene.noise if noise is None else noise
    methods = [canonical_method(m) for m in methods]
    records: list[TrialRecord] = []
    traces = {}
    for k in range(trials):
        rng = np.random.default_rng(_seed_int(seed, 3, k))
        offs = rng.uniform(-jitter, jitter, size=(len(scene.targets), 2))
        targets = [RigidTransform(T.rotation, T.translation + np.array([o[0], o[1], 0.0]))
                   for T, o in zip(scene.targets, offs)]
        for m in methods:
            ctrl = Controller(model, rmap, params, m)
            state = new_state(model, scene.start, targets[0], scene.obstacles, params.dt,
                              _seed_int(seed, 4, k), params, record=False)
            for i, T in enumerate(targets):
                tr = run_trial(model, ctrl, state, T, noise, timeout, pos_tol, rot_tol,
                               "sequential-grasp", "", k, i, keep_trace=keep_traces)
                records.append(tr.record)
                if keep_traces:
                    traces[(m, k, i)] = tr.trace
                if progress:
                    progress(tr.record)
    args = {"methods": methods, "trials": trials, "table": table, "timeout": timeout,
            "pos_tol": pos_tol, "rot_tol": rot_tol, "jitter": jitter, "noise": asdict(noise),
            "scene": scene.name}
    rep = _report("sequential-grasp", seed, args, model, rmap, params, records, [""], methods)
    return (rep, traces) if keep_traces else rep


# ---------------------------------------------------------------------------
# monitoring

MONITOR_DISTANCE = 4.0  # far enough that the tool turns well before the base arrives
MONITOR_HEIGHT = 0.75


def monitoring_target(orientation: str, position=None) -> RigidTransform:
    """Grasp pose for an object ahead of the robot with the named approach."""
    p = np.array([MONITOR_DISTANCE, 0.0, MONITOR_HEIGHT]) if position is None else np.asarray(position)
    if orientation == "forward":
        return approach_pose(p, [1.0, 0.0, 0.0])
    if orientation == "downward":
        return approach_pose(p, [0.0, 0.0, -1.0])
    if orientation == "sideways":
        return approach_pose(p, [0.0, 1.0, 0.0])
    raise ValueError(f"unknown orientation {orientation!r}; choose from {', '.join(ORIENTATIONS)}")


def monitoring_scene(orientation: str, seed: int = 0, noise: NoiseModel | None = None,
                     model: RobotModel | None = None) -> Scene:
    from .kinematics import default_model

    model = model or default_model()
    return Scene(f"monitoring-{orientation}", model.home(), [monitoring_target(orientation)],
                 [], NoiseModel() if noise is None else noise, seed)


def run_monitoring(model: RobotModel, rmap: ReachabilityMap, params: ControllerParams,
                   methods=("neo-e", "ehc-nompbs", "ehc"), orientations=ORIENTATIONS,
                   trials: int = 15, seed: int = 0, noise: NoiseModel | None = None,
                   timeout: float = 30.0, pos_tol: float = DEFAULT_POS_TOL,
                   rot_tol: float = DEFAULT_ROT_TOL, jitter: float = 0.05, progress=None,
                   keep_traces: bool = False):
    noise = NoiseModel() if noise is None else noise
    methods = [canonical_method(m) for m in methods]
    records: list[TrialRecord] = []
    traces = {}
    for o in orientations:
        if o not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {o!r}")
        for k in range(trials):
            rng = np.random.default_rng(_seed_int(seed, 5, ORIENTATIONS.index(o), k))
            base = np.array([MONITOR_DISTANCE, 0.0, MONITOR_HEIGHT])
            pos = base + np.concatenate([rng.uniform(-jitter, jitter, 2), [0.0]])
            T = monitoring_target(o, pos)
            for m in methods:
                ctrl = Controller(model, rmap, params, m)
                state = new_state(model, model.home(), T, [], params.dt,
                                  _seed_int(seed, 6, ORIENTATIONS.index(o), k), params,
                                  record=False)
                tr = run_trial(model, ctrl, state, T, noise, timeout, pos_tol, rot_tol,
                               "monitoring", o, k, 0, keep_trace=keep_traces)
                records.append(tr.record)
                if keep_traces:
                    traces[(m, o, k)] = tr.trace
                if progress:
                    progress(tr.record)
    args = {"methods": methods, "orientations": list(orientations), "trials": trials,
            "timeout": timeout, "pos_tol": pos_tol, "rot_tol": rot_tol, "jitter": jitter,
            "noise": asdict(noise)}
    rep = _report("monitoring", seed, args, model, rmap, params, records, list(orientations),
                  methods)
    return (rep, traces) if keep_traces else rep


def run_episode(model: RobotModel, rmap: ReachabilityMap | None, params: ControllerParams,
                method: str, scene: Scene, pos_tol: float = DEFAULT_POS_TOL,
                rot_tol: float = DEFAULT_ROT_TOL):
    """All targets of a scene in order with full traces; returns (records, traces)."""
    ctrl = Controller(model, rmap, params, method)
    state = new_state(model, scene.start, scene.targets[0], scene.obstacles, scene.dt,
                      scene.seed, params, record=False)
    records, traces = [], []
    for i, T in enumerate(scene.targets):
        tr = run_trial(model, ctrl, state, T, scene.noise, scene.timeout, pos_tol, rot_tol,
                       "episode", scene.name, 0, i, keep_trace=True)
        records.append(tr.record)
        traces.append(tr.trace)
    return records, traces


__all__ = [
    "SUITES", "ORIENTATIONS", "TrialRecord", "MethodSummary", "ExperimentReport",
    "run_trial", "summarize", "split_index", "random_reach_targets", "random_obstacles",
    "run_random_reach", "table_spheres", "three_objects_scene", "run_sequential_grasp_analogue",
    "monitoring_target", "monitoring_scene", "run_monitoring", "run_episode", "trace_digest",
]
