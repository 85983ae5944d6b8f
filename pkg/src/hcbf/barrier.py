"""Distance barriers between robot control points and spherical obstacles.

For a control point p_j (radius R_j) and obstacle p_i (radius R_i)

    h_ij = |p_j - p_i| - (R_j + R_i) - eps

and with single-integrator joints its time derivative is
A_ij (J_j qdot - pdot_i), A_ij the unit direction from obstacle to point.
Imposing dh/dt >= -gamma h gives one linear row per (point, obstacle):

    (A_ij J_j) qdot >= -gamma h_ij + A_ij pdot_i
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import KinematicChain, RobotState, point_kinematics

TIE_EPSILON = 1e-6
DEFAULT_EPSILON = 0.05


class DegenerateDirection(ArithmeticError):
    """Control point and obstacle centre coincide; the barrier gradient is undefined."""


@dataclass(frozen=True)
class Obstacle:
    id: str
    position: np.ndarray
    velocity: np.ndarray
    radius: float
    priority: int = 0
    beta: float = 0.0
    delta_cap: float = math.inf
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if self.radius < 0:
            raise ValueError(f"obstacle {self.id}: radius must be >= 0")
        if not self.gamma > 0:
            raise ValueError(f"obstacle {self.id}: gamma must be > 0")
        if self.priority < 0:
            raise ValueError(f"obstacle {self.id}: priority must be >= 0")
        if self.beta < 0:
            raise ValueError(f"obstacle {self.id}: beta must be >= 0")
        if self.delta_cap < 0:
            raise ValueError(f"obstacle {self.id}: delta_cap must be >= 0")

    @property
    def relaxable(self) -> bool:
        return self.priority > 0

    def moved(self, position, velocity) -> "Obstacle":
        return Obstacle(self.id, position, velocity, self.radius, self.priority,
                        self.beta, self.delta_cap, self.gamma)


@dataclass(frozen=True)
class BarrierConstraint:
    row: np.ndarray
    rhs: float
    h: float
    obstacle_id: str
    point_index: int
    direction: np.ndarray = field(repr=False)
    relax_slot: int | None = None


def barrier_value(p_j, p_i, R_j: float, R_i: float, epsilon: float = DEFAULT_EPSILON) -> float:
    d = np.asarray(p_j, dtype=float) - np.asarray(p_i, dtype=float)
    return math.sqrt(float(d @ d)) - (R_j + R_i) - epsilon


def barrier_direction(p_j, p_i) -> np.ndarray:
    d = np.asarray(p_j, dtype=float) - np.asarray(p_i, dtype=float)
    dist = math.sqrt(float(d @ d))
    if dist <= TIE_EPSILON:
        raise DegenerateDirection(f"separation {dist:.3g} m is below {TIE_EPSILON} m")
    return d / dist


def relax_slots(obstacles) -> dict[str, int]:
    """Slack index per relaxable obstacle, in obstacle order."""
    slots = {}
    for ob in obstacles:
        if ob.relaxable:
            slots[ob.id] = len(slots)
    return slots


@dataclass(frozen=True, eq=False)
class ConstraintBlock:
    """All barrier rows of one tick as arrays, obstacle-major (row r = obstacle r // P, point r % P)."""

    rows: np.ndarray          # (K, n)
    rhs: np.ndarray           # (K,)
    h: np.ndarray             # (K,)
    directions: np.ndarray    # (K, 3)
    slots: np.ndarray         # (K,) relax slot, -1 when the row is hard
    obstacle_ids: tuple
    point_indices: tuple

    @property
    def n_points(self) -> int:
        return len(self.point_indices)

    def h_matrix(self) -> np.ndarray:
        """Barrier values shaped (obstacles, points)."""
        return self.h.reshape(len(self.obstacle_ids), self.n_points)

    def as_list(self) -> list[BarrierConstraint]:
        P = self.n_points
        return [
            BarrierConstraint(
                row=self.rows[r],
                rhs=float(self.rhs[r]),
                h=float(self.h[r]),
                obstacle_id=self.obstacle_ids[r // P],
                point_index=self.point_indices[r % P],
                direction=self.directions[r],
                relax_slot=None if self.slots[r] < 0 else int(self.slots[r]),
            )
            for r in range(self.rows.shape[0])
        ]


def constraint_block(chain: KinematicChain, state: RobotState, obstacles,
                     constrained_point_indices=None, epsilon: float = DEFAULT_EPSILON,
                     kinematics=None) -> ConstraintBlock:
    idx = (tuple(range(len(chain.control_points))) if constrained_point_indices is None
           else tuple(constrained_point_indices))
    pos, jac = kinematics if kinematics is not None else point_kinematics(chain, state.q, idx)
    radii = np.array([chain.control_points[j].radius for j in idx])
    n_obs, P = len(obstacles), len(idx)
    if n_obs == 0:
        z = np.zeros(0)
        return ConstraintBlock(np.zeros((0, chain.n)), z, z, np.zeros((0, 3)),
                               np.zeros(0, dtype=int), (), idx)
    centers = np.array([ob.position for ob in obstacles])
    vels = np.array([ob.velocity for ob in obstacles])
    ob_r = np.array([ob.radius for ob in obstacles])
    gam = np.array([ob.gamma for ob in obstacles])
    diff = pos[None, :, :] - centers[:, None, :]                  # (O, P, 3)
    dist = np.sqrt(np.einsum("opi,opi->op", diff, diff))
    if dist.min() <= TIE_EPSILON:
        o, r = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise DegenerateDirection(f"control point {idx[r]} coincides with obstacle {obstacles[o].id}")
    A = diff / dist[..., None]
    h = dist - radii[None, :] - ob_r[:, None] - epsilon
    rows = np.einsum("opi,pij->opj", A, jac)
    rhs = -gam[:, None] * h + np.einsum("opi,oi->op", A, vels)
    slot_of = relax_slots(obstacles)
    slots = np.repeat([slot_of.get(ob.id, -1) for ob in obstacles], P)
    return ConstraintBlock(
        rows=rows.reshape(n_obs * P, -1),
        rhs=rhs.reshape(-1),
        h=h.reshape(-1),
        directions=A.reshape(-1, 3),
        slots=slots,
        obstacle_ids=tuple(ob.id for ob in obstacles),
        point_indices=idx,
    )


def build_constraints(chain: KinematicChain, state: RobotState, obstacles,
                      constrained_point_indices=None, epsilon: float = DEFAULT_EPSILON,
                      kinematics=None) -> list[BarrierConstraint]:
    """One row per (constrained point, obstacle) pair; relaxable obstacles share one slot."""
    return constraint_block(chain, state, obstacles, constrained_point_indices, epsilon,
                            kinematics).as_list()
