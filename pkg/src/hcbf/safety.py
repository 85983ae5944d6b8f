"""Minimal-deviation safety filter around a nominal joint-velocity command.

Strict mode solves

    min  w |qdot - qdot_perf|^2   s.t.  every barrier row,  qdot_min <= qdot <= qdot_max

Relaxed mode adds one slack delta_i >= 0 per relaxable obstacle, penalised by
beta_i delta_i^2, that loosens all of that obstacle's rows. Priority-0
obstacles never receive a slack.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .barrier import DEFAULT_EPSILON, ConstraintBlock, DegenerateDirection, constraint_block, relax_slots
from .chain import KinematicChain, RobotState, point_kinematics
from .qp import KKT_TOL, QpProblem, QpSolver, Status

log = logging.getLogger(__name__)

RELAX_THRESHOLD = 10 * KKT_TOL


class Mode(enum.Enum):
    STRICT = "strict"
    RELAXED = "relaxed"


class FilterStatus(enum.Enum):
    NOMINAL = "Nominal"
    RELAXING = "Relaxing"
    EMERGENCY = "Emergency"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class FilterConfig:
    mode: Mode = Mode.RELAXED
    perf_weight: float = 200.0
    constrained_point_indices: tuple | None = None
    emergency_policy: str = "stop"
    epsilon: float = DEFAULT_EPSILON
    joint_limit_gain: float | None = None   # None: plain velocity box

    def __post_init__(self):
        if not self.perf_weight > 0:
            raise ValueError("perf_weight must be positive")
        if self.emergency_policy != "stop":
            raise ValueError(f"unknown emergency policy {self.emergency_policy!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.joint_limit_gain is not None and not self.joint_limit_gain > 0:
            raise ValueError("joint_limit_gain must be positive")


@dataclass(frozen=True)
class SolveStats:
    iterations: int = 0
    wall_time: float = 0.0
    qp_status: Status | None = None
    kkt_residual: float = 0.0


@dataclass(frozen=True)
class SafeCommand:
    q_dot_safe: np.ndarray
    deltas: dict
    status: FilterStatus
    solve_stats: SolveStats = field(default_factory=SolveStats)
    constraints: ConstraintBlock | None = field(default=None, repr=False)
    cost: float = 0.0
    reason: str = ""


def _stack_rows(constraints, n: int):
    """(G, g, slots) from a ConstraintBlock or a sequence of BarrierConstraint."""
    if isinstance(constraints, ConstraintBlock):
        return constraints.rows, constraints.rhs, constraints.slots
    if not constraints:
        return np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=int)
    slots = np.array([-1 if c.relax_slot is None else c.relax_slot for c in constraints])
    return np.array([c.row for c in constraints]), np.array([c.rhs for c in constraints]), slots


def velocity_box(chain: KinematicChain, q=None, joint_limit_gain: float | None = None):
    """Velocity bounds, optionally tightened so each joint decays no faster than exponentially
    towards its position limit: qdot >= -k (q - q_lo) and qdot <= k (q_hi - q)."""
    if joint_limit_gain is None or q is None:
        return chain.vel_lower.copy(), chain.vel_upper.copy()
    q = np.asarray(q, dtype=float)
    lo = np.maximum(chain.vel_lower, -joint_limit_gain * np.maximum(q - chain.joint_lower, 0.0))
    hi = np.minimum(chain.vel_upper, joint_limit_gain * np.maximum(chain.joint_upper - q, 0.0))
    return lo, hi


def build_strict_qp(q_dot_perf, constraints, chain: KinematicChain, perf_weight: float = 200.0,
                    box=None) -> QpProblem:
    """``box`` overrides the chain's velocity bounds (see velocity_box)."""
    n = chain.n
    G, g, _ = _stack_rows(constraints, n)
    lb, ub = velocity_box(chain) if box is None else box
    return QpProblem(
        H=2.0 * perf_weight * np.eye(n),
        f=-2.0 * perf_weight * np.asarray(q_dot_perf, dtype=float),
        G=G,
        g=g,
        lb=lb,
        ub=ub,
    )


def build_relaxed_qp(q_dot_perf, constraints, chain: KinematicChain, obstacles,
                     perf_weight: float = 200.0, box=None) -> QpProblem:
    """Variables are [qdot (n), delta (one per relaxable obstacle)]."""
    n = chain.n
    relaxable = [ob for ob in obstacles if ob.relaxable]
    if not relaxable:
        return build_strict_qp(q_dot_perf, constraints, chain, perf_weight, box)
    for ob in relaxable:
        if not ob.beta > 0:
            raise ValueError(f"relaxable obstacle {ob.id} needs beta > 0")
    s = len(relaxable)
    G0, g, slots = _stack_rows(constraints, n)
    G = np.zeros((G0.shape[0], n + s))
    G[:, :n] = G0
    soft = np.flatnonzero(slots >= 0)
    G[soft, n + slots[soft]] = 1.0
    H = np.zeros((n + s, n + s))
    H[:n, :n] = 2.0 * perf_weight * np.eye(n)
    H[n:, n:] = np.diag([2.0 * ob.beta for ob in relaxable])
    f = np.zeros(n + s)
    f[:n] = -2.0 * perf_weight * np.asarray(q_dot_perf, dtype=float)
    vlo, vhi = velocity_box(chain) if box is None else box
    lb = np.concatenate((vlo, np.zeros(s)))
    ub = np.concatenate((vhi, [ob.delta_cap for ob in relaxable]))
    return QpProblem(H, f, G, g, lb, ub)


def qp_cost(problem: QpProblem, x, q_dot_perf, perf_weight: float) -> float:
    """w |qdot - qdot_perf|^2 + sum beta delta^2 (the QP objective without its dropped constant)."""
    q_dot_perf = np.asarray(q_dot_perf, dtype=float)
    return problem.objective(x) + perf_weight * float(q_dot_perf @ q_dot_perf)


class SafetyFilter:
    """One instance per rollout: it owns a solver and warm-starts from the previous tick."""

    def __init__(self, chain: KinematicChain, config: FilterConfig = FilterConfig()):
        self.chain = chain
        self.config = config
        self.solver = QpSolver()
        self.last_problem: QpProblem | None = None
        self._warm = None
        self._emergency = False
        idx = config.constrained_point_indices
        self.point_indices = (tuple(range(len(chain.control_points))) if idx is None else tuple(idx))

    def _report(self, t: float, reason: str):
        # warn on entering an emergency episode, then stay quiet until it clears
        if not self._emergency:
            log.warning("t=%.4f emergency stop: %s", t, reason)
        else:
            log.debug("t=%.4f emergency continues: %s", t, reason)
        self._emergency = True

    def filter(self, state: RobotState, q_dot_perf, obstacles, kinematics=None) -> SafeCommand:
        """``kinematics`` may pass precomputed (positions, jacobians) of the constrained points."""
        chain, cfg = self.chain, self.config
        q_dot_perf = np.asarray(q_dot_perf, dtype=float)
        zero_deltas = {ob.id: 0.0 for ob in obstacles}
        t0 = time.perf_counter()
        try:
            if kinematics is None:
                kinematics = point_kinematics(chain, state.q, self.point_indices)
            cons = constraint_block(chain, state, obstacles, self.point_indices, cfg.epsilon, kinematics)
        except DegenerateDirection as exc:
            self._report(state.t, str(exc))
            return SafeCommand(np.zeros(chain.n), zero_deltas, FilterStatus.EMERGENCY,
                               SolveStats(wall_time=time.perf_counter() - t0), reason=str(exc))

        box = velocity_box(chain, state.q, cfg.joint_limit_gain)
        if cfg.mode is Mode.RELAXED:
            problem = build_relaxed_qp(q_dot_perf, cons, chain, obstacles, cfg.perf_weight, box)
        else:
            problem = build_strict_qp(q_dot_perf, cons, chain, cfg.perf_weight, box)
            cons = replace(cons, slots=np.full_like(cons.slots, -1))
        n = chain.n
        x0 = np.zeros(problem.n_vars)
        x0[:n] = q_dot_perf
        if np.all(problem.G @ x0 >= problem.g) and np.all(box[0] <= q_dot_perf) and np.all(q_dot_perf <= box[1]):
            # the nominal command is admissible, hence the unique minimizer: skip the solver
            self._warm = x0
            self._emergency = False
            self.last_problem = problem
            return SafeCommand(q_dot_perf.copy(), zero_deltas, FilterStatus.NOMINAL,
                               SolveStats(0, time.perf_counter() - t0, Status.OPTIMAL, 0.0), cons, 0.0)
        warm = self._warm if self._warm is not None and self._warm.shape == (problem.n_vars,) else None
        sol = self.solver.solve(problem, warm)
        elapsed = time.perf_counter() - t0
        self.last_problem = problem
        stats = SolveStats(sol.iterations, elapsed, sol.status, sol.kkt_residual)

        if not sol.ok:
            self._warm = None
            self._report(state.t, f"{cfg.mode.value} QP returned {sol.status}")
            return SafeCommand(np.zeros(chain.n), zero_deltas, FilterStatus.EMERGENCY, stats, cons,
                               reason=f"{cfg.mode.value} QP {sol.status}")
        self._warm = sol.x
        self._emergency = False
        deltas = dict(zero_deltas)
        if problem.n_vars > n:
            for ob_id, slot in relax_slots(obstacles).items():
                deltas[ob_id] = max(float(sol.x[n + slot]), 0.0)
        relaxing = any(v > RELAX_THRESHOLD for v in deltas.values())
        return SafeCommand(
            q_dot_safe=np.clip(sol.x[:n], box[0], box[1]),
            deltas=deltas,
            status=FilterStatus.RELAXING if relaxing else FilterStatus.NOMINAL,
            solve_stats=stats,
            constraints=cons,
            cost=qp_cost(problem, sol.x, q_dot_perf, cfg.perf_weight),
        )


def filter_command(chain: KinematicChain, state: RobotState, q_dot_perf, obstacles,
                   config: FilterConfig = FilterConfig()) -> SafeCommand:
    """Stateless convenience wrapper around SafetyFilter."""
    return SafetyFilter(chain, config).filter(state, q_dot_perf, obstacles)
