"""Dense strictly convex QP solver.

    minimize    1/2 x^T H x + f^T x
    subject to  G x >= g,   lb <= x <= ub

Dual active-set method (Goldfarb-Idnani). The iterate starts at the
unconstrained minimiser and violated constraints are added one at a time
while dual feasibility is kept, so every iterate is optimal for the subset
of constraints it has seen. When a violated row cannot be added, the
multipliers at that point form a Farkas certificate: y >= 0 with
C^T y = 0 and b^T y > 0, which is checked before Infeasible is reported.

Work happens in the coordinates x~ = L^T x (H = L L^T), where the Hessian is
the identity and constraint rows are normalised, so tolerances are
distances in the H-metric.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

KKT_TOL = 1e-6
FEAS_TOL = 1e-8
MAX_ITER = 2000

# Box entries equal to +-UNBOUNDED carry no constraint; any finite float is a real bound.
UNBOUNDED = math.inf

_ADD_TOL = 1e-12  # normalised violation below which a row counts as satisfied
_DEP_TOL = 1e-10  # |z| below this means the row is in the span of the active rows


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    G: np.ndarray
    g: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @classmethod
    def build(cls, H, f, G=None, g=None, lb=None, ub=None) -> "QpProblem":
        H = np.asarray(H, dtype=float)
        m = H.shape[0]
        G = np.zeros((0, m)) if G is None else np.asarray(G, dtype=float).reshape(-1, m)
        g = np.zeros(0) if g is None else np.asarray(g, dtype=float).reshape(-1)
        lb = np.full(m, -UNBOUNDED) if lb is None else np.asarray(lb, dtype=float)
        ub = np.full(m, UNBOUNDED) if ub is None else np.asarray(ub, dtype=float)
        return cls(H, np.asarray(f, dtype=float), G, g, lb, ub)

    @property
    def n_vars(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        return float(0.5 * x @ self.H @ x + self.f @ x)

    def validate(self):
        H, f, G, g, lb, ub = self.H, self.f, self.G, self.g, self.lb, self.ub
        m = H.shape[0] if H.ndim == 2 else -1
        if H.shape != (m, m) or f.shape != (m,) or lb.shape != (m,) or ub.shape != (m,):
            raise ValueError("inconsistent QP dimensions")
        if G.shape != (g.shape[0], m):
            raise ValueError("G must be k x m with g of length k")
        if not math.isfinite(float(H.sum() + f.sum() + G.sum() + g.sum())):
            for name, arr in (("H", H), ("f", f), ("G", G), ("g", g)):
                if not np.all(np.isfinite(arr)):
                    raise ValueError(f"{name} contains NaN or infinite entries")
        if not (lb <= ub).all():
            if np.isnan(lb).any() or np.isnan(ub).any():
                raise ValueError("box bounds contain NaN")
            raise ValueError("lb > ub")
        if (lb == np.inf).any() or (ub == -np.inf).any():
            raise ValueError("box bound on the wrong side of infinity")
        if np.abs(H - H.T).max(initial=0.0) > 1e-10:
            raise ValueError("H is not symmetric")

    def dump(self) -> str:
        """Plain-text matrix dump for offline inspection."""
        blocks = []
        for name in ("H", "f", "G", "g", "lb", "ub"):
            arr = np.atleast_2d(getattr(self, name))
            lines = [" ".join(f"{v:.17g}" for v in row) for row in arr]
            blocks.append(f"# {name} {arr.shape[0]}x{arr.shape[1]}\n" + "\n".join(lines))
        return "\n".join(blocks) + "\n"


@dataclass(frozen=True, eq=False)
class QpSolution:
    x: np.ndarray
    status: Status
    kkt_residual: float
    iterations: int
    objective: float
    ineq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lower_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upper_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    certificate: np.ndarray | None = None  # Farkas multipliers over (G rows, lb rows, ub rows)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def kkt_residuals(problem: QpProblem, x, lam, mu_lo, mu_up) -> dict[str, float]:
    """Stationarity, primal violation, complementarity and dual sign residuals."""
    H, f, G, g, lb, ub = problem.H, problem.f, problem.G, problem.g, problem.lb, problem.ub
    grad = H @ x + f - G.T @ lam - mu_lo + mu_up
    s = G @ x - g
    lo = np.isfinite(lb)
    up = np.isfinite(ub)
    viol = [np.maximum(-s, 0.0).max(initial=0.0),
            np.maximum(lb[lo] - x[lo], 0.0).max(initial=0.0),
            np.maximum(x[up] - ub[up], 0.0).max(initial=0.0)]
    comp = [np.abs(lam * s).max(initial=0.0),
            np.abs(mu_lo[lo] * (x[lo] - lb[lo])).max(initial=0.0),
            np.abs(mu_up[up] * (ub[up] - x[up])).max(initial=0.0)]
    dual = -min(lam.min(initial=0.0), mu_lo.min(initial=0.0), mu_up.min(initial=0.0))
    return {
        "stationarity": float(np.abs(grad).max(initial=0.0)),
        "primal": float(max(viol)),
        "complementarity": float(max(comp)),
        "dual": float(max(dual, 0.0)),
    }


class QpSolver:
    """Reusable solver; holds scratch state, so one instance per worker."""

    def __init__(self, max_iter: int = MAX_ITER, feas_tol: float = FEAS_TOL, kkt_tol: float = KKT_TOL):
        self.max_iter = max_iter
        self.feas_tol = feas_tol
        self.kkt_tol = kkt_tol

    def solve(self, problem: QpProblem, warm_start=None) -> QpSolution:
        problem.validate()
        H, f, G, g, lb, ub = problem.H, problem.f, problem.G, problem.g, problem.lb, problem.ub
        m = H.shape[0]
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise ValueError("H is not positive definite") from None

        lo_idx = np.flatnonzero(np.isfinite(lb))
        up_idx = np.flatnonzero(np.isfinite(ub))
        k = G.shape[0]
        C = np.empty((k + lo_idx.size + up_idx.size, m))
        C[:k] = G
        C[k:k + lo_idx.size] = 0.0
        C[k + np.arange(lo_idx.size), lo_idx] = 1.0
        C[k + lo_idx.size:] = 0.0
        C[k + lo_idx.size + np.arange(up_idx.size), up_idx] = -1.0
        b = np.concatenate((g, lb[lo_idx], -ub[up_idx]))

        # rows in the whitened space: c~ = L^-1 c
        Linv = np.linalg.inv(L)
        Ct = C @ Linv.T
        norms = np.sqrt(np.einsum("ij,ij->i", Ct, Ct))
        zero = norms <= 1e-14 * max(1.0, float(np.abs(C).max(initial=0.0)))
        if np.any(zero & (b > self.feas_tol)):
            y = np.zeros(C.shape[0])
            y[int(np.flatnonzero(zero & (b > self.feas_tol))[0])] = 1.0
            return self._finish(problem, L, -(Linv.T @ (Linv @ f)), None, Status.INFEASIBLE, 0, k,
                                lo_idx, up_idx, certificate=y)
        norms[zero] = 1.0
        Cn = Ct / norms[:, None]
        bn = b / norms
        usable = ~zero

        ft = Linv @ f
        prefer = None
        if warm_start is not None:
            x0 = np.asarray(warm_start, dtype=float)
            if x0.shape == (m,) and np.all(np.isfinite(x0)):
                prefer = np.abs(Cn @ (L.T @ x0) - bn) <= 1e-7

        status, xt, active, u, iters, cert = self._dual_active_set(Cn, bn, -ft, usable, prefer)
        lam_all = np.zeros(C.shape[0])
        if active:
            lam_all[active] = np.asarray(u) / norms[active]
        if cert is not None:
            cert = cert / norms
        x = Linv.T @ xt
        return self._finish(problem, L, x, lam_all, status, iters, k, lo_idx, up_idx, certificate=cert)

    def _dual_active_set(self, Cn, bn, x, usable, prefer):
        m = x.shape[0]
        active: list[int] = []
        u: list[float] = []
        Q = np.zeros((m, 0))
        R = np.zeros((0, 0))
        skip = ~usable
        iters = 0
        while True:
            if Cn.shape[0] == 0:
                return Status.OPTIMAL, x, active, u, iters, None
            s = Cn @ x - bn
            s[skip] = np.inf
            if active:
                s[active] = np.inf
            p = -1
            if prefer is not None:
                cand = np.where(prefer, s, np.inf)
                j = int(np.argmin(cand))
                if cand[j] < -_ADD_TOL:
                    p = j
            if p < 0:
                j = int(np.argmin(s))
                if s[j] >= -_ADD_TOL:
                    return Status.OPTIMAL, x, active, u, iters, None
                p = j
            n_plus = Cn[p]
            u_plus = 0.0
            while True:
                iters += 1
                if iters > self.max_iter:
                    return Status.ITERATION_LIMIT, x, active, u, iters, None
                d = Q.T @ n_plus
                z = n_plus - Q @ d
                d2 = Q.T @ z  # one re-orthogonalisation pass
                z -= Q @ d2
                d += d2
                r = np.linalg.solve(R, d) if active else d
                # dual step limit: first active multiplier to reach zero
                t1, drop = np.inf, -1
                for jj in range(len(active)):
                    if r[jj] > 1e-14:
                        ratio = u[jj] / r[jj]
                        if ratio < t1:
                            t1, drop = ratio, jj
                znorm = math.sqrt(float(z @ z))
                sp = float(n_plus @ x - bn[p])
                t2 = -sp / (znorm * znorm) if znorm > _DEP_TOL else np.inf
                if not np.isfinite(t1) and not np.isfinite(t2):
                    y = np.zeros(Cn.shape[0])
                    y[p] = 1.0
                    if active:
                        y[active] = -r
                    # Farkas check: C^T y ~ 0 and b^T y / sum(y) bounds the best achievable violation
                    total = float(y.sum())
                    bound = float(bn @ y) / total
                    residual = float(np.linalg.norm(Cn.T @ y)) / total
                    if bound > self.feas_tol and residual <= 1e-8:
                        return Status.INFEASIBLE, x, active, u, iters, y
                    skip[p] = True  # within tolerance of feasible: leave this row alone
                    break
                t = min(t1, t2)
                if np.isfinite(t2):
                    x = x + t * z
                if active:
                    u = [ui - t * ri for ui, ri in zip(u, r)]
                u_plus += t
                if t2 <= t1:
                    active.append(p)
                    u.append(u_plus)
                    Q = np.column_stack((Q, z / znorm))
                    R_new = np.zeros((len(active), len(active)))
                    R_new[:-1, :-1] = R
                    R_new[:-1, -1] = d
                    R_new[-1, -1] = znorm
                    R = R_new
                    break
                del active[drop]
                del u[drop]
                if active:
                    Q, R = np.linalg.qr(Cn[active].T)
                else:
                    Q, R = np.zeros((m, 0)), np.zeros((0, 0))

    def _finish(self, problem, L, x, lam_all, status, iters, k, lo_idx, up_idx, certificate=None):
        m = problem.n_vars
        lam = np.zeros(k)
        mu_lo = np.zeros(m)
        mu_up = np.zeros(m)
        if lam_all is not None:
            lam = lam_all[:k]
            mu_lo[lo_idx] = lam_all[k:k + lo_idx.size]
            mu_up[up_idx] = lam_all[k + lo_idx.size:]
        res = kkt_residuals(problem, x, lam, mu_lo, mu_up)
        kkt = max(res.values())
        if status is Status.OPTIMAL and res["primal"] > self.feas_tol:
            status = Status.INFEASIBLE
        return QpSolution(
            x=x,
            status=status,
            kkt_residual=kkt,
            iterations=iters,
            objective=problem.objective(x),
            ineq_multipliers=lam,
            lower_multipliers=mu_lo,
            upper_multipliers=mu_up,
            certificate=certificate,
        )


def solve(problem: QpProblem, warm_start=None) -> QpSolution:
    return QpSolver().solve(problem, warm_start)
