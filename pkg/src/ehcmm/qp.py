"""Dense convex QP solver.

    minimise   1/2 x'Qx + c'x
    subject to A x  = b
               G x <= h

Dual active-set iteration in the style of Goldfarb & Idnani: start from
the equality-constrained minimiser (dual feasible), repeatedly pick the
most violated inequality and move along the primal/dual step that makes
it active, dropping working-set members whose multipliers would turn
negative.  Each step re-solves the small KKT system directly instead of
maintaining factorisation updates; at 15 variables that is cheaper in
Python than the bookkeeping.

A warm start tries the previous working set first: if the resulting KKT
point is primal feasible with non-negative multipliers it is optimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray  # equality multipliers
    z: np.ndarray  # inequality multipliers (>= 0)
    status: str
    active: list[int] = field(default_factory=list)
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def check_psd(Q: np.ndarray, tol: float = 1e-10) -> None:
    if not np.allclose(Q, Q.T, atol=1e-12 * max(1.0, float(np.abs(Q).max()))):
        raise InvalidInputError("Q must be symmetric")
    ev = np.linalg.eigvalsh(Q)
    if ev[0] < -tol * max(1.0, abs(ev[-1])):
        raise InvalidInputError(f"Q is not positive semidefinite (min eigenvalue {ev[0]:.3e})")


def _kkt_solve(Q, N, rhs_x, rhs_c):
    n = Q.shape[0]
    m = N.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = Q
    K[:n, n:] = N.T
    K[n:, :n] = N
    rhs = np.concatenate([rhs_x, rhs_c])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def kkt_residuals(Q, c, A, b, G, h, x, y, z) -> dict:
    """Stationarity, primal and complementarity residuals (infinity norms)."""
    stat = Q @ x + c
    if A is not None and len(A):
        stat = stat + A.T @ y
    if G is not None and len(G):
        stat = stat + G.T @ z
    out = {"stationarity": float(np.abs(stat).max())}
    out["equality"] = float(np.abs(A @ x - b).max()) if A is not None and len(A) else 0.0
    if G is not None and len(G):
        s = G @ x - h
        out["inequality"] = float(max(0.0, s.max()))
        out["dual"] = float(max(0.0, -z.min()))
        out["complementarity"] = float(np.abs(z * s).max())
    else:
        out["inequality"] = out["dual"] = out["complementarity"] = 0.0
    return out


def solve_qp(Q, c, A=None, b=None, G=None, h=None, warm_active=None,
             tol: float = 1e-10, max_iter: int = 500, check: bool = True) -> QpSolution:
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = Q.shape[0]
    if check:
        check_psd(Q)
    A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
    G = np.zeros((0, n)) if G is None else np.asarray(G, dtype=float).reshape(-1, n)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float).reshape(-1)
    me = A.shape[0]
    mi = G.shape[0]
    if not np.all(np.isfinite(h)):
        raise InvalidInputError("inequality bounds must be finite")

    def eqp(W):
        N = np.vstack([A, G[W]]) if W else A
        rc = np.concatenate([b, h[W]]) if W else b
        x, lam = _kkt_solve(Q, N, -c, rc)
        return x, lam

    def finish(x, lam, W, status, it):
        z = np.zeros(mi)
        if W:
            z[W] = lam[me:]
        return QpSolution(x, lam[:me].copy(), z, status, list(W), it)

    ftol = tol * (1.0 + np.abs(h))  # per-row primal tolerance

    if warm_active:
        W = sorted(set(int(i) for i in warm_active if 0 <= int(i) < mi))
        if W:
            x, lam = eqp(W)
            if np.all(G @ x - h <= ftol) and np.all(lam[me:] >= -tol):
                return finish(x, lam, W, OPTIMAL, 0)

    W: list[int] = []
    x, lam = eqp(W)
    lam_W = np.zeros(0)
    lam_eq = lam.copy()
    it = 0
    while True:
        if mi == 0:
            break
        viol = G @ x - h
        if W:
            viol[W] = -np.inf
        p = int(np.argmax(viol - ftol))
        if viol[p] <= ftol[p]:
            break
        lam_p = 0.0
        while True:
            it += 1
            if it > max_iter:
                return finish(x, np.concatenate([lam_eq, lam_W]), W, MAX_ITER, it)
            N = np.vstack([A, G[W]]) if W else A
            dx, dlam = _kkt_solve(Q, N, -G[p], np.zeros(N.shape[0]))
            slope = float(G[p] @ dx)  # <= 0
            s_p = float(G[p] @ x - h[p])
            t1 = s_p / -slope if slope < -1e-14 else np.inf
            t2 = np.inf
            k_drop = -1
            if W:
                dW = dlam[me:]
                neg = np.flatnonzero(dW < -1e-14)
                if len(neg):
                    ratios = lam_W[neg] / -dW[neg]
                    j = int(np.argmin(ratios))
                    t2 = float(ratios[j])
                    k_drop = int(neg[j])
            if not np.isfinite(t1) and not np.isfinite(t2):
                return finish(x, np.concatenate([lam_eq, lam_W]), W, INFEASIBLE, it)
            t = min(t1, t2)
            x = x + t * dx
            lam_eq = lam_eq + t * dlam[:me]
            if W:
                lam_W = lam_W + t * dlam[me:]
            lam_p += t
            if t2 < t1:
                del W[k_drop]
                lam_W = np.delete(lam_W, k_drop)
                continue
            W.append(p)
            lam_W = np.append(lam_W, lam_p)
            break

    # polish on the final working set
    if W:
        xp, lamp = eqp(W)
        if np.all(G @ xp - h <= ftol) and np.all(lamp[me:] >= -tol):
            return finish(xp, lamp, W, OPTIMAL, it)
    elif me:
        xp, lamp = eqp(W)
        return finish(xp, lamp, W, OPTIMAL, it)
    return finish(x, np.concatenate([lam_eq, lam_W]), W, OPTIMAL, it)
