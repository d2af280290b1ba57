"""Voxelised reachability of the arm and the embodied weight derived from it.

The map lives in the arm-base frame.  A voxel's score is the fraction of
26 canonical approach directions (the face, edge and corner directions of
a cube) for which damped-least-squares IK puts the tool point at the voxel
centre with its z-axis along that direction.  IK seeds come from a pool
of uniformly sampled arm configurations: first the pool sample landing in
the voxel whose approach axis is closest, then random restarts.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import InvalidInputError, SchemaError, UnusableMapError
from .kinematics import N_ARM, RobotModel

BOUNDARY_SCORE = 0.95
MAGIC = b"EHRM"
VERSION = 1
_HEADER = struct.Struct("<4sIdddd3Iqq")


def canonical_directions() -> np.ndarray:
    """The 26 unit vectors towards the neighbours of a cube cell."""
    d = np.array([v for v in itertools.product((-1, 0, 1), repeat=3) if any(v)], dtype=float)
    return d / np.linalg.norm(d, axis=1)[:, None]


@dataclass(frozen=True, eq=False)
class ReachabilityMap:
    voxel_size: float
    origin: np.ndarray  # arm-base frame corner of voxel (0, 0, 0)
    grid: np.ndarray  # (nx, ny, nz) scores in [0, 1]
    sample_count: int
    seed: int = 0
    _boundary: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise InvalidInputError("voxel_size must be positive")
        g = np.array(self.grid, dtype=np.float32)
        o = np.array(self.origin, dtype=float).reshape(3)
        if g.ndim != 3:
            raise InvalidInputError("grid must be 3-D")
        if np.any(g < 0) or np.any(g > 1):
            raise InvalidInputError("scores must lie in [0, 1]")
        g.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "_boundary", None)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.grid.shape)

    def voxel_centres(self) -> np.ndarray:
        idx = np.indices(self.grid.shape).reshape(3, -1).T
        return self.origin + (idx + 0.5) * self.voxel_size

    def score_at(self, p) -> float:
        """Score of the voxel containing arm-frame point p (0 outside the grid)."""
        i = np.floor((np.asarray(p, dtype=float) - self.origin) / self.voxel_size).astype(int)
        if np.any(i < 0) or np.any(i >= np.array(self.grid.shape)):
            return 0.0
        return float(self.grid[tuple(i)])

    def boundary_set(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Centres, unit directions and norms of voxels scoring above 0.95."""
        if self._boundary is None:
            mask = self.grid.reshape(-1) > BOUNDARY_SCORE
            p = self.voxel_centres()[mask]
            n = np.linalg.norm(p, axis=1)
            keep = n > 0
            p, n = p[keep], n[keep]
            u = p / n[:, None] if len(p) else np.zeros((0, 3))
            object.__setattr__(self, "_boundary", (p, u, n))
        return self._boundary

    def __eq__(self, other):
        if not isinstance(other, ReachabilityMap):
            return NotImplemented
        return (
            self.voxel_size == other.voxel_size
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.grid, other.grid)
            and self.sample_count == other.sample_count
            and self.seed == other.seed
        )


@dataclass(frozen=True)
class SigParams:
    k: float = 8.0
    omega0: float = 1.0


@dataclass(frozen=True)
class EmbodiedWeight:
    omega: float
    sig_value: float
    threshold_norm: float
    error_norm: float


# ---------------------------------------------------------------------------
# activation and weight

def sig(omega: float, params: SigParams = SigParams()) -> float:
    """Logistic activation 1 / (1 + exp(-k (omega - omega0)))."""
    z = -params.k * (omega - params.omega0)
    if z >= 0:
        ez = math.exp(-z)
        return ez / (1.0 + ez)
    return 1.0 / (1.0 + math.exp(z))


def directional_threshold(rmap: ReachabilityMap, e, tie_angle: float = 0.05) -> np.ndarray:
    """Boundary voxel centre whose direction best matches the error direction.

    Voxels within ``tie_angle`` rad of the best angle count as tied; among
    those the farthest from the arm base wins.
    """
    e = np.asarray(getattr(e, "linear", e), dtype=float).reshape(3)
    ne = float(np.linalg.norm(e))
    if ne == 0.0:
        raise InvalidInputError("error direction undefined for a zero vector")
    p, u, n = rmap.boundary_set()
    if len(p) == 0:
        raise UnusableMapError("reachability map has no voxel above the boundary score")
    c = np.clip(u @ (e / ne), -1.0, 1.0)
    ang = np.arccos(c)
    best = float(ang.min())
    tied = np.flatnonzero(ang <= best + tie_angle)
    j = tied[np.argmax(n[tied])]
    return p[j].copy()


def omega(rmap: ReachabilityMap, e, params: SigParams = SigParams(),
          omega_max: float = 10.0, tie_angle: float = 0.05) -> EmbodiedWeight:
    """Embodied weight for an arm-frame translational error e (target - tool)."""
    e = np.asarray(getattr(e, "linear", e), dtype=float).reshape(3)
    ne = float(np.linalg.norm(e))
    if ne < 1e-9:
        p, _, n = rmap.boundary_set()
        if len(p) == 0:
            raise UnusableMapError("reachability map has no voxel above the boundary score")
        w = omega_max
        return EmbodiedWeight(w, sig(w, params), float(n.max()), ne)
    thr = float(np.linalg.norm(directional_threshold(rmap, e, tie_angle)))
    w = min(thr / ne, omega_max)
    return EmbodiedWeight(w, sig(w, params), thr, ne)


# ---------------------------------------------------------------------------
# batched kinematics kernels

def _dh_constants(model: RobotModel) -> np.ndarray:
    """Per-row (a, cos alpha, sin alpha, d, offset) for the compiled kernels."""
    return np.array([
        [r.a, math.cos(r.alpha), math.sin(r.alpha), r.d, r.offset] for r in model.arm_dh
    ])


@njit(cache=True)
def _fk_jac(dh, tool, q, T, J, zs, os_):
    # T: (4,4) tool pose out; J: (6,6) geometric Jacobian out; zs/os_ scratch
    R00, R01, R02, R10, R11, R12, R20, R21, R22 = 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0
    px, py, pz = 0.0, 0.0, 0.0
    for i in range(6):
        a = dh[i, 0]
        ca = dh[i, 1]
        sa = dh[i, 2]
        d = dh[i, 3]
        th = q[i] + dh[i, 4]
        ct = math.cos(th)
        st = math.sin(th)
        # local MDH transform rows
        l00, l01, l02, l03 = ct, -st, 0.0, a
        l10, l11, l12, l13 = st * ca, ct * ca, -sa, -sa * d
        l20, l21, l22, l23 = st * sa, ct * sa, ca, ca * d
        n00 = R00 * l00 + R01 * l10 + R02 * l20
        n01 = R00 * l01 + R01 * l11 + R02 * l21
        n02 = R00 * l02 + R01 * l12 + R02 * l22
        n10 = R10 * l00 + R11 * l10 + R12 * l20
        n11 = R10 * l01 + R11 * l11 + R12 * l21
        n12 = R10 * l02 + R11 * l12 + R12 * l22
        n20 = R20 * l00 + R21 * l10 + R22 * l20
        n21 = R20 * l01 + R21 * l11 + R22 * l21
        n22 = R20 * l02 + R21 * l12 + R22 * l22
        px, py, pz = (px + R00 * l03 + R01 * l13 + R02 * l23,
                      py + R10 * l03 + R11 * l13 + R12 * l23,
                      pz + R20 * l03 + R21 * l13 + R22 * l23)
        R00, R01, R02, R10, R11, R12, R20, R21, R22 = n00, n01, n02, n10, n11, n12, n20, n21, n22
        zs[i, 0] = R02
        zs[i, 1] = R12
        zs[i, 2] = R22
        os_[i, 0] = px
        os_[i, 1] = py
        os_[i, 2] = pz
    for r in range(3):
        T[0, r] = R00 * tool[0, r] + R01 * tool[1, r] + R02 * tool[2, r]
        T[1, r] = R10 * tool[0, r] + R11 * tool[1, r] + R12 * tool[2, r]
        T[2, r] = R20 * tool[0, r] + R21 * tool[1, r] + R22 * tool[2, r]
    T[0, 3] = px + R00 * tool[0, 3] + R01 * tool[1, 3] + R02 * tool[2, 3]
    T[1, 3] = py + R10 * tool[0, 3] + R11 * tool[1, 3] + R12 * tool[2, 3]
    T[2, 3] = pz + R20 * tool[0, 3] + R21 * tool[1, 3] + R22 * tool[2, 3]
    for i in range(6):
        rx = T[0, 3] - os_[i, 0]
        ry = T[1, 3] - os_[i, 1]
        rz = T[2, 3] - os_[i, 2]
        zx, zy, zz = zs[i, 0], zs[i, 1], zs[i, 2]
        J[0, i] = zy * rz - zz * ry
        J[1, i] = zz * rx - zx * rz
        J[2, i] = zx * ry - zy * rx
        J[3, i] = zx
        J[4, i] = zy
        J[5, i] = zz


@njit(cache=True)
def _cholesky_solve6(A, b, L, y):
    for i in range(6):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(6):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    for i in range(5, -1, -1):
        s = y[i]
        for k in range(i + 1, 6):
            s -= L[k, i] * y[k]
        y[i] = s / L[i, i]


@njit(cache=True)
def _ik_kernel(dh, tool, lo, hi, goals_p, goals_a, seeds, max_iter,
               pos_tol, ang_tol, damping, out_q, out_ok):
    n = goals_p.shape[0]
    T = np.empty((4, 4))
    J = np.empty((6, 6))
    A = np.empty((6, 6))
    L = np.zeros((6, 6))
    zs = np.empty((6, 3))
    os_ = np.empty((6, 3))
    e = np.empty(6)
    y = np.empty(6)
    q = np.empty(6)
    lam2 = damping * damping
    for k in range(n):
        for i in range(6):
            q[i] = seeds[k, i]
        ok = False
        best = 1e300
        stall = 0
        for it in range(max_iter):
            _fk_jac(dh, tool, q, T, J, zs, os_)
            ex = goals_p[k, 0] - T[0, 3]
            ey = goals_p[k, 1] - T[1, 3]
            ez = goals_p[k, 2] - T[2, 3]
            perr = math.sqrt(ex * ex + ey * ey + ez * ez)
            zx, zy, zz = T[0, 2], T[1, 2], T[2, 2]
            ax, ay, az = goals_a[k, 0], goals_a[k, 1], goals_a[k, 2]
            cx = zy * az - zz * ay
            cy = zz * ax - zx * az
            cz = zx * ay - zy * ax
            sn = math.sqrt(cx * cx + cy * cy + cz * cz)
            cs = zx * ax + zy * ay + zz * az
            ang = math.atan2(sn, cs)
            if perr < pos_tol and ang < ang_tol:
                ok = True
                break
            err = perr + 0.2 * ang
            if err < best * 0.995:
                best = err
                stall = 0
            else:
                stall += 1
                if stall > 10:
                    break
            sp = 1.0
            if perr > 0.1:
                sp = 0.1 / perr
            e[0] = ex * sp
            e[1] = ey * sp
            e[2] = ez * sp
            if sn > 1e-12:
                sc = min(ang, 0.5) / sn
                e[3] = cx * sc
                e[4] = cy * sc
                e[5] = cz * sc
            elif cs < 0.0:
                # antiparallel: rotate about any axis orthogonal to z
                if abs(zx) < 0.9:
                    px, py, pz = 0.0, -zz, zy
                else:
                    px, py, pz = zz, 0.0, -zx
                pn = math.sqrt(px * px + py * py + pz * pz)
                e[3] = 0.5 * px / pn
                e[4] = 0.5 * py / pn
                e[5] = 0.5 * pz / pn
            else:
                e[3] = 0.0
                e[4] = 0.0
                e[5] = 0.0
            for r in range(6):
                for c in range(r + 1):
                    s = 0.0
                    for j in range(6):
                        s += J[r, j] * J[c, j]
                    A[r, c] = s
                    A[c, r] = s
                A[r, r] += lam2
            _cholesky_solve6(A, e, L, y)
            for i in range(6):
                dq = 0.0
                for r in range(6):
                    dq += J[r, i] * y[r]
                v = q[i] + dq
                if v < lo[i]:
                    v = lo[i]
                elif v > hi[i]:
                    v = hi[i]
                q[i] = v
        for i in range(6):
            out_q[k, i] = q[i]
        out_ok[k] = ok


@njit(cache=True)
def _fk_points_axes(dh, tool, qs, out_p, out_a):
    T = np.empty((4, 4))
    J = np.empty((6, 6))
    zs = np.empty((6, 3))
    os_ = np.empty((6, 3))
    for k in range(qs.shape[0]):
        _fk_jac(dh, tool, qs[k], T, J, zs, os_)
        for r in range(3):
            out_p[k, r] = T[r, 3]
            out_a[k, r] = T[r, 2]


def sample_tool_poses(model: RobotModel, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arm-frame tool positions and approach (z) axes for a batch of arm configs."""
    q = np.ascontiguousarray(q, dtype=float)
    p = np.empty((len(q), 3))
    a = np.empty((len(q), 3))
    _fk_points_axes(_dh_constants(model), model._T_tool, q, p, a)
    return p, a


def _body_valid(model: RobotModel, p: np.ndarray, body_radius: float) -> np.ndarray:
    """False where the tool point sits inside the arm column, the base body or the floor."""
    col_top = model.arm_dh[0].d
    r_col = np.hypot(p[:, 0], p[:, 1])
    in_col = (r_col < body_radius) & (p[:, 2] < col_top)
    # mobile base body: cylinder from the floor up to the mount plane
    T_av = (model.T_vb @ model.T_ba).inverse()
    c = T_av.apply(np.zeros(3))
    floor_z = c[2]
    r_base = np.hypot(p[:, 0] - c[0], p[:, 1] - c[1])
    in_base = (r_base < model.footprint_radius) & (p[:, 2] < 0.0)
    below_floor = p[:, 2] < floor_z + 0.02
    return ~(in_col | in_base | below_floor)


def build_map(model: RobotModel, samples: int = 200_000, voxel_size: float = 0.05,
              seed: int = 0, restarts: int = 50, body_radius: float = 0.08,
              max_iter: int = 60, pos_tol: float = 2e-3, ang_tol: float = 1e-2,
              damping: float = 0.05) -> ReachabilityMap:
    """Build the arm's reachability map; bit-identical for a fixed argument set."""
    reach = model.reach
    if voxel_size <= 0:
        raise InvalidInputError("voxel_size must be positive")
    if voxel_size > reach:
        raise InvalidInputError(f"voxel_size {voxel_size} exceeds arm reach {reach:.3f}")
    if samples < 1:
        raise InvalidInputError("samples must be positive")
    rng = np.random.default_rng(seed)
    lim = model.joint_limits[3:]
    lo = np.ascontiguousarray(lim[:, 0])
    hi = np.ascontiguousarray(lim[:, 1])

    n_side = int(math.ceil(2.0 * reach / voxel_size))
    origin = np.full(3, -0.5 * n_side * voxel_size)
    dims = np.array([n_side] * 3)

    pool = rng.uniform(lo, hi, size=(samples, N_ARM))
    p, a = sample_tool_poses(model, pool)
    vidx = np.floor((p - origin) / voxel_size).astype(np.int64)
    inside = np.all((vidx >= 0) & (vidx < dims), axis=1)
    flat = np.ravel_multi_index(vidx[inside].T, dims)
    pool_in = np.flatnonzero(inside)
    dirs = canonical_directions()
    nd = len(dirs)

    occupied = np.unique(flat)
    centres = origin + (np.stack(np.unravel_index(occupied, dims), axis=1) + 0.5) * voxel_size
    # FK-seeded first attempt: per (voxel, direction) the pool sample in the
    # voxel with the best-aligned approach axis
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    starts = np.searchsorted(flat_sorted, occupied, side="left")
    ends = np.searchsorted(flat_sorted, occupied, side="right")
    cosines = a[pool_in] @ dirs.T  # (n_in, 26)
    seeds = np.empty((len(occupied) * nd, N_ARM))
    for v in range(len(occupied)):
        members = order[starts[v]:ends[v]]
        best = members[np.argmax(cosines[members], axis=0)]
        seeds[v * nd:(v + 1) * nd] = pool[pool_in[best]]

    goals_p = np.ascontiguousarray(np.repeat(centres, nd, axis=0))
    goals_a = np.ascontiguousarray(np.tile(dirs, (len(occupied), 1)))
    success = np.zeros(len(goals_p), dtype=bool)
    todo = np.arange(len(goals_p))
    args = (_dh_constants(model), model._T_tool, lo, hi)
    body_ok = _body_valid(model, goals_p, body_radius)
    todo = todo[body_ok[todo]]
    for attempt in range(restarts + 1):
        if len(todo) == 0:
            break
        if attempt == 0:
            s = np.ascontiguousarray(seeds[todo])
        else:
            s = rng.uniform(lo, hi, size=(len(todo), N_ARM))
        out_q = np.empty_like(s)
        out_ok = np.zeros(len(todo), dtype=np.bool_)
        _ik_kernel(*args, goals_p[todo], goals_a[todo], s, max_iter, pos_tol, ang_tol,
                   damping, out_q, out_ok)
        success[todo[out_ok]] = True
        todo = todo[~out_ok]

    scores = success.reshape(len(occupied), nd).mean(axis=1)
    grid = np.zeros(int(np.prod(dims)), dtype=np.float32)
    grid[occupied] = scores.astype(np.float32)
    return ReachabilityMap(voxel_size, origin, grid.reshape(tuple(dims)), samples, seed)


def fk_coverage_scores(model: RobotModel, samples: int, voxel_size: float, seed: int,
                       cone: float = 0.35, body_radius: float = 0.08,
                       origin=None, dims=None) -> np.ndarray:
    """Pure forward-sampling estimate of the direction coverage per voxel.

    A (voxel, direction) pair counts as covered when some sampled tool pose
    lands in the voxel with its approach axis within ``cone`` rad of the
    direction.  Used as an independent cross-check of ``build_map``.
    """
    rng = np.random.default_rng(seed)
    lim = model.joint_limits[3:]
    reach = model.reach
    if origin is None:
        n_side = int(math.ceil(2.0 * reach / voxel_size))
        origin = np.full(3, -0.5 * n_side * voxel_size)
        dims = np.array([n_side] * 3)
    dims = np.asarray(dims)
    q = rng.uniform(lim[:, 0], lim[:, 1], size=(samples, N_ARM))
    p, a = sample_tool_poses(model, q)
    ok = _body_valid(model, p, body_radius)
    vidx = np.floor((p - origin) / voxel_size).astype(np.int64)
    ok &= np.all((vidx >= 0) & (vidx < dims), axis=1)
    flat = np.ravel_multi_index(vidx[ok].T, dims)
    hit = (a[ok] @ canonical_directions().T) > math.cos(cone)
    cov = np.zeros((int(np.prod(dims)), 26), dtype=bool)
    for j in range(26):
        cov[flat[hit[:, j]], j] = True
    return cov.mean(axis=1).reshape(tuple(dims))


# ---------------------------------------------------------------------------
# persistence

def save_map(rmap: ReachabilityMap, path: str | Path) -> None:
    nx, ny, nz = rmap.dims
    header = _HEADER.pack(
        MAGIC, VERSION, float(rmap.voxel_size), *map(float, rmap.origin),
        nx, ny, nz, int(rmap.seed), int(rmap.sample_count),
    )
    payload = np.ascontiguousarray(rmap.grid, dtype="<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_map(path: str | Path) -> ReachabilityMap:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SchemaError(f"{path}: truncated reachability map header")
    magic, version, vs, ox, oy, oz, nx, ny, nz, seed, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SchemaError(f"{path}: unsupported map version {version}")
    n = nx * ny * nz
    if len(data) != _HEADER.size + 4 * n:
        raise SchemaError(f"{path}: payload size does not match dims {nx}x{ny}x{nz}")
    grid = np.frombuffer(data, dtype="<f4", count=n, offset=_HEADER.size).reshape(nx, ny, nz)
    return ReachabilityMap(vs, np.array([ox, oy, oz]), grid.astype(np.float32), count, seed)


def map_cache_key(model: RobotModel, samples: int, voxel_size: float, seed: int) -> str:
    from .kinematics import model_to_dict

    doc = {"model": model_to_dict(model), "samples": int(samples),
           "voxel_size": float(voxel_size), "seed": int(seed), "version": VERSION}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def cached_map(model: RobotModel, cache_dir: str | Path, samples: int = 200_000,
               voxel_size: float = 0.05, seed: int = 0) -> ReachabilityMap:
    """Load the map for these build arguments from cache_dir, building it on a miss."""
    d = Path(cache_dir)
    path = d / f"reachmap-{map_cache_key(model, samples, voxel_size, seed)}.bin"
    if path.exists():
        try:
            return load_map(path)
        except SchemaError:
            pass
    rmap = build_map(model, samples, voxel_size, seed)
    d.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    save_map(rmap, tmp)
    tmp.replace(path)
    return rmap
