"""Closed-loop simulation: obstacle motion models, the per-tick step, rollouts and coverage search.

Joints are single integrators (qdot is the command) advanced by explicit
Euler; obstacles are advanced with the same step.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .barrier import Obstacle, constraint_block, relax_slots
from .chain import KinematicChain, RobotState, point_kinematics
from .metrics import aggregate, relative_velocity
from .perf import PerfConfig, Trajectory, make_trajectory, performance_command
from .qp import QpSolver, Status
from .safety import FilterStatus, SafetyFilter, build_relaxed_qp, build_strict_qp, velocity_box

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# obstacle motion


def spring_damper_velocity(p_ee, p_obs, v_obs, k: float, b: float, v_max: float) -> np.ndarray:
    """Pursuit velocity k (p_ee - p_obs) - b v_obs, rescaled to norm v_max when faster."""
    if not v_max > 0:
        raise ValueError("v_max must be positive")
    v = k * (np.asarray(p_ee, dtype=float) - np.asarray(p_obs, dtype=float)) - b * np.asarray(v_obs, dtype=float)
    speed = math.sqrt(float(v @ v))
    if speed > v_max:
        v = v * (v_max / speed)
    return v


class Motion:
    """Obstacle motion model. ``start`` gives the initial velocity, ``advance`` one step."""

    kind = "base"

    def start(self, t: float, p, p_ee) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def advance(self, t: float, p, v, dt: float, p_ee_next) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class StaticMotion(Motion):
    kind = "static"

    def start(self, t, p, p_ee):
        return np.array(p, dtype=float), np.zeros(3)

    def advance(self, t, p, v, dt, p_ee_next):
        return p, np.zeros(3)


@dataclass(frozen=True)
class SpringDamperMotion(Motion):
    k: float
    b: float
    v_max: float
    kind = "spring_damper"

    def __post_init__(self):
        if self.k < 0 or self.b < 0 or not self.v_max > 0:
            raise ValueError("spring-damper needs k >= 0, b >= 0, v_max > 0")

    def start(self, t, p, p_ee):
        p = np.array(p, dtype=float)
        return p, spring_damper_velocity(p_ee, p, np.zeros(3), self.k, self.b, self.v_max)

    def advance(self, t, p, v, dt, p_ee_next):
        p_next = p + dt * v
        return p_next, spring_damper_velocity(p_ee_next, p_next, v, self.k, self.b, self.v_max)


class TabulatedMotion(Motion):
    """Piecewise-linear path through timestamped samples; velocity is the segment slope.

    Before the first sample the path holds the first position, after the last it holds the last.
    """

    kind = "scripted"

    def __init__(self, times, points):
        self.times = np.asarray(times, dtype=float)
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.times.ndim != 1 or self.times.size != self.points.shape[0] or self.times.size == 0:
            raise ValueError("need one timestamp per sample")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def sample(self, t: float):
        ts, ps = self.times, self.points
        if ts.size == 1 or t <= ts[0]:
            return ps[0].copy(), np.zeros(3)
        if t >= ts[-1]:
            return ps[-1].copy(), np.zeros(3)
        i = int(np.searchsorted(ts, t, side="right")) - 1
        slope = (ps[i + 1] - ps[i]) / (ts[i + 1] - ts[i])
        return ps[i] + (t - ts[i]) * slope, slope

    def start(self, t, p, p_ee):
        return self.sample(t)

    def advance(self, t, p, v, dt, p_ee_next):
        return self.sample(t + dt)


class ScriptedMotion(TabulatedMotion):
    kind = "scripted"

    @classmethod
    def from_waypoints(cls, waypoints):
        w = np.asarray(waypoints, dtype=float).reshape(-1, 4)
        return cls(w[:, 0], w[:, 1:])


class ReplayMotion(TabulatedMotion):
    """Recorded keypoint track read from a CSV with header t,x,y,z."""

    kind = "replay"

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no samples")
        try:
            data = np.array([[float(r[c]) for c in ("t", "x", "y", "z")] for r in rows])
        except KeyError as exc:
            raise ValueError(f"{path}: missing column {exc.args[0]!r}") from None
        return cls(data[:, 0], data[:, 1:])


def make_motion(mcfg, base_dir: Path | None = None) -> Motion:
    if mcfg.kind == "static":
        return StaticMotion()
    if mcfg.kind == "spring_damper":
        return SpringDamperMotion(mcfg.k, mcfg.b, mcfg.v_max)
    if mcfg.kind == "scripted":
        return ScriptedMotion.from_waypoints(mcfg.waypoints)
    if mcfg.kind == "replay":
        path = Path(mcfg.file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return ReplayMotion.from_csv(path)
    raise ValueError(f"unknown motion kind {mcfg.kind!r}")


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class ObstacleSample:
    id: str
    position: np.ndarray
    velocity: np.ndarray
    h: np.ndarray          # barrier value at each constrained point
    h_min: float
    clearance: float       # min over constrained points of centre distance minus both radii
    distance: float        # centre distance to the end-effector point
    delta: float
    v_rel: float           # end-effector relative velocity along the separation (nan if undefined)


@dataclass(frozen=True)
class StepRecord:
    t: float
    q: np.ndarray
    q_dot_safe: np.ndarray
    q_dot_perf: np.ndarray
    p_ee: np.ndarray
    v_ee: np.ndarray
    p_d: np.ndarray
    obstacles: tuple
    status: FilterStatus
    solve_time: float
    clamped: bool = False


# ---------------------------------------------------------------------------
# the loop


@dataclass
class SimState:
    t: float
    q: np.ndarray
    obstacles: list            # current Obstacle values
    motions: list              # Motion per obstacle, same order
    tick: int = 0


@dataclass
class Controllers:
    chain: KinematicChain
    trajectory: Trajectory
    perf: PerfConfig
    safety: SafetyFilter


def _ee_relative_velocity(p_ee, p_h, v_ee, v_h) -> float:
    try:
        return relative_velocity(p_ee, p_h, v_ee, v_h)
    except ValueError:
        return math.nan  # coincident centres; the tick is left out of ROI statistics


def step(sim: SimState, ctl: Controllers, dt: float) -> StepRecord:
    """Advance the world by one tick and return the record of the state it started from."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    chain, flt = ctl.chain, ctl.safety
    idx = flt.point_indices
    state = RobotState(sim.q, sim.t)

    # one kinematics pass serves the controller, the filter and the log
    ee = chain.ee_index
    all_idx = tuple(sorted(set(idx) | {ee}))
    pos, jac = point_kinematics(chain, sim.q, all_idx)
    k_ee = all_idx.index(ee)
    sel = [all_idx.index(j) for j in idx]
    p_ee, J_ee = pos[k_ee], jac[k_ee]

    target = ctl.trajectory(sim.t)
    qd_perf = performance_command(chain, state, target, ctl.perf, ee=(p_ee, J_ee))
    cmd = flt.filter(state, qd_perf, sim.obstacles, kinematics=(pos[sel], jac[sel]))
    qd = cmd.q_dot_safe
    v_ee = J_ee @ qd

    radii = np.array([chain.control_points[j].radius for j in idx])
    eps = flt.config.epsilon
    samples = []
    for ob in sim.obstacles:
        diff = pos[sel] - ob.position
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        clear = dist - radii - ob.radius
        h = clear - eps
        samples.append(ObstacleSample(
            id=ob.id, position=ob.position, velocity=ob.velocity, h=h, h_min=float(h.min()),
            clearance=float(clear.min()),
            distance=float(np.linalg.norm(p_ee - ob.position)),
            delta=float(cmd.deltas.get(ob.id, 0.0)),
            v_rel=_ee_relative_velocity(p_ee, ob.position, v_ee, ob.velocity),
        ))
    record = StepRecord(
        t=sim.t, q=sim.q, q_dot_safe=qd, q_dot_perf=qd_perf, p_ee=p_ee, v_ee=v_ee, p_d=target.p_d,
        obstacles=tuple(samples), status=cmd.status, solve_time=cmd.solve_stats.wall_time,
    )

    q_next = sim.q + dt * qd
    clipped = np.clip(q_next, chain.joint_lower, chain.joint_upper)
    clamped = bool(np.any(clipped != q_next))
    if clamped:
        log.debug("t=%.4f joint limit clamp", sim.t)
        record = _with_clamp(record)
    p_ee_next = point_kinematics(chain, clipped, (ee,))[0][0]
    moved = []
    for ob, motion in zip(sim.obstacles, sim.motions):
        p_new, v_new = motion.advance(sim.t, ob.position, ob.velocity, dt, p_ee_next)
        moved.append(ob.moved(p_new, v_new))
    sim.q = clipped
    sim.obstacles = moved
    sim.tick += 1
    sim.t = sim.tick * dt
    return record


def _with_clamp(r: StepRecord) -> StepRecord:
    return replace(r, clamped=True)


# ---------------------------------------------------------------------------
# scenario setup


class PlacementError(RuntimeError):
    pass


def _unit_vector(rng: np.random.Generator, planar: bool) -> np.ndarray:
    if planar:
        a = rng.uniform(0.0, 2 * math.pi)
        return np.array([math.cos(a), math.sin(a), 0.0])
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def place_obstacles(cfg, q0, rng: np.random.Generator, base_dir: Path | None = None):
    """Initial obstacle states. Shell placements are redrawn until every constrained point is clear."""
    chain = cfg.chain
    idx = (tuple(range(len(chain.control_points))) if cfg.filter.constrained_point_indices is None
           else cfg.filter.constrained_point_indices)
    pos, _ = point_kinematics(chain, q0)
    p_ee = pos[chain.ee_index]
    radii = np.array([chain.control_points[j].radius for j in idx])
    obstacles, motions = [], []
    for oc in cfg.obstacles:
        motion = make_motion(oc.motion, base_dir)
        if oc.initial_distance is not None:
            lo, hi = oc.initial_distance
            for _ in range(cfg.sim.max_placement_tries):
                p = p_ee + rng.uniform(lo, hi) * _unit_vector(rng, oc.planar)
                h = np.linalg.norm(pos[list(idx)] - p, axis=1) - radii - oc.radius - cfg.filter.epsilon
                if h.min() > cfg.sim.placement_margin:
                    break
            else:
                raise PlacementError(f"no clear start position for obstacle {oc.id}")
        elif oc.offset is not None:
            p = p_ee + np.asarray(oc.offset)
        elif oc.position is not None:
            p = np.asarray(oc.position, dtype=float)
        else:
            p = np.zeros(3)  # tabulated motion supplies its own start
        p, v = motion.start(0.0, p, p_ee)
        obstacles.append(oc.obstacle(p, v))
        motions.append(motion)
    return obstacles, motions


def initial_state(cfg, seed: int | None = None, base_dir: Path | None = None) -> SimState:
    rng = np.random.default_rng(cfg.sim.seed if seed is None else seed)
    q0 = np.array(cfg.q0, dtype=float)
    obstacles, motions = place_obstacles(cfg, q0, rng, base_dir)
    return SimState(0.0, q0, obstacles, motions)


def make_controllers(cfg, q0=None) -> Controllers:
    chain = cfg.chain
    q0 = cfg.q0 if q0 is None else q0
    p0 = point_kinematics(chain, q0, (chain.ee_index,))[0][0]
    tr = cfg.trajectory
    return Controllers(
        chain=chain,
        trajectory=make_trajectory(tr.kind, p0, tr.size, tr.period, tr.displacement),
        perf=cfg.controller,
        safety=SafetyFilter(chain, cfg.filter),
    )


def n_ticks(cfg) -> int:
    return int(round(cfg.sim.duration / cfg.sim.dt))


def rollout(cfg, seed: int | None = None, base_dir: Path | None = None, ticks: int | None = None):
    """Step records of a full rollout (no metrics)."""
    sim = initial_state(cfg, seed, base_dir)
    ctl = make_controllers(cfg, sim.q)
    dt = cfg.sim.dt
    return [step(sim, ctl, dt) for _ in range(n_ticks(cfg) if ticks is None else ticks)]


def run_scenario(cfg, seed: int | None = None, base_dir: Path | None = None):
    """Deterministic in (cfg, seed): returns (records, ScenarioMetrics)."""
    records = rollout(cfg, seed, base_dir)
    return records, aggregate(records, cfg)


# ---------------------------------------------------------------------------
# coverage search


@dataclass(frozen=True)
class CoverageSample:
    index: int
    q: np.ndarray
    obstacles: tuple
    strict_status: Status
    relaxed_status: Status
    hard_slack_ok: bool             # priority-0 rows satisfied by the relaxed solution with no slack
    relaxed_deltas: dict = field(default_factory=dict)


def _coverage_obstacles(chain, template, q, rng, eps):
    pos, _ = point_kinematics(chain, q)
    j = chain.ee_index if template.point is None else template.point
    p = pos[j]
    r_pt = chain.control_points[j].radius
    u = _unit_vector(rng, template.planar)
    if template.kind == "far":
        return [Obstacle("far", p + template.far_distance * u, np.zeros(3), template.red_radius,
                         0, 0.0, math.inf, template.gamma)], (j,)
    h_r = rng.uniform(*template.red_h)
    h_g = rng.uniform(*template.green_h)
    s = rng.uniform(*template.inward_speed)
    d_r = h_r + r_pt + template.red_radius + eps
    d_g = h_g + r_pt + template.green_radius + eps
    red = Obstacle("red", p + d_r * u, np.zeros(3), template.red_radius, 0, 0.0, math.inf, template.gamma)
    # green sits on the opposite side and closes in along the separation
    green = Obstacle("green", p - d_g * u, s * u, template.green_radius, 1, template.beta, math.inf,
                     template.gamma)
    return [red, green], (j,)


def coverage_search(chain: KinematicChain, template, n_samples: int, seed: int,
                    epsilon: float = 0.05) -> tuple[list[CoverageSample], int]:
    """Random (q, obstacle) pairs; returns the strict-infeasible ones and the number sampled.

    Only the template's control point is constrained.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    solver = QpSolver()
    flagged = []
    zero = np.zeros(chain.n)
    for i in range(n_samples):
        q = rng.uniform(chain.joint_lower, chain.joint_upper)
        obstacles, idx = _coverage_obstacles(chain, template, q, rng, epsilon)
        state = RobotState(q)
        block = constraint_block(chain, state, obstacles, idx, epsilon)
        strict = solver.solve(build_strict_qp(zero, block, chain))
        if strict.status is not Status.INFEASIBLE:
            continue
        relaxed_qp = build_relaxed_qp(zero, block, chain, obstacles)
        relaxed = solver.solve(relaxed_qp)
        ok = relaxed.ok
        deltas = {}
        if ok:
            x = relaxed.x
            n = chain.n
            hard = block.slots < 0
            resid = block.rows[hard] @ x[:n] - block.rhs[hard]
            ok = bool(np.all(resid >= -1e-8))
            deltas = {oid: float(x[n + k]) for oid, k in relax_slots(obstacles).items()}
        flagged.append(CoverageSample(i, q, tuple(obstacles), strict.status, relaxed.status, ok, deltas))
    return flagged, n_samples


# ---------------------------------------------------------------------------
# relaxation-weight sweep


@dataclass(frozen=True)
class Snapshot:
    state: RobotState
    q_dot_perf: np.ndarray
    obstacles: tuple


@dataclass(frozen=True)
class SweepRow:
    beta: float
    delta_max: float
    dist_to_strict: float
    relaxed_status: Status
    strict_status: Status
    q_dot: np.ndarray = field(repr=False, default=None)


def snapshot(cfg, seed: int | None = None, t: float = 0.0, base_dir: Path | None = None) -> Snapshot:
    """World state and nominal command after rolling the scenario forward to time t."""
    sim = initial_state(cfg, seed, base_dir)
    ctl = make_controllers(cfg, sim.q)
    for _ in range(int(round(t / cfg.sim.dt))):
        step(sim, ctl, cfg.sim.dt)
    state = RobotState(sim.q.copy(), sim.t)
    qd_perf = performance_command(cfg.chain, state, ctl.trajectory(sim.t), ctl.perf)
    return Snapshot(state, qd_perf, tuple(sim.obstacles))


def sweep_beta(cfg, snap: Snapshot, betas) -> list[SweepRow]:
    """Solve the relaxed QP with every relaxable obstacle's weight set to each beta in turn."""
    chain, fc = cfg.chain, cfg.filter
    block = constraint_block(chain, snap.state, snap.obstacles, fc.constrained_point_indices, fc.epsilon)
    box = velocity_box(chain, snap.state.q, fc.joint_limit_gain)
    solver = QpSolver()
    strict = solver.solve(build_strict_qp(snap.q_dot_perf, block, chain, fc.perf_weight, box))
    rows = []
    for beta in betas:
        obs = [replace(o, beta=float(beta)) if o.relaxable else o for o in snap.obstacles]
        sol = solver.solve(build_relaxed_qp(snap.q_dot_perf, block, chain, obs, fc.perf_weight, box))
        n = chain.n
        dmax = float(max(sol.x[n:].max(initial=0.0), 0.0)) if sol.ok else math.nan
        dist = float(np.linalg.norm(sol.x[:n] - strict.x)) if sol.ok and strict.ok else math.nan
        rows.append(SweepRow(float(beta), dmax, dist, sol.status, strict.status, sol.x[:n].copy()))
    return rows
