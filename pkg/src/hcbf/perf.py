"""Velocity-level tracking controller and desired end-effector trajectories.

The command is resolved-rate tracking through the damped pseudo-inverse of
the end-effector Jacobian, plus a null-space term that pulls each joint
towards the middle of its range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import (
    DEFAULT_DAMPING,
    KinematicChain,
    RobotState,
    damped_pseudo_inverse,
    ee_kinematics,
    null_space_projector,
)


@dataclass(frozen=True)
class TrackingTarget:
    p_d: np.ndarray
    p_d_dot: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.p_d)) and np.all(np.isfinite(self.p_d_dot))):
            raise ValueError("tracking target must be finite")


@dataclass(frozen=True)
class PerfConfig:
    lam: float = 2.0
    kp_joint: float | tuple = 0.5
    mu: float = DEFAULT_DAMPING

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if np.any(np.asarray(self.kp_joint) < 0):
            raise ValueError("kp_joint entries must be non-negative")
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def gains(self, n: int) -> np.ndarray:
        kp = np.asarray(self.kp_joint, dtype=float)
        if kp.ndim == 0:
            return np.full(n, float(kp))
        if kp.shape != (n,):
            raise ValueError(f"kp_joint needs {n} entries")
        return kp


def mid_joint_bias(chain: KinematicChain, q, J_null, kp_joint) -> np.ndarray:
    """-J_null K_p W (q - q_mid): joint-centering motion filtered through the null space."""
    q = np.asarray(q, dtype=float)
    kp = np.broadcast_to(np.asarray(kp_joint, dtype=float), q.shape)
    e_joint = chain.joint_weights * (q - chain.mid_joint)
    return -np.asarray(J_null) @ (kp * e_joint)


def performance_command(chain: KinematicChain, state: RobotState, target: TrackingTarget,
                        cfg: PerfConfig = PerfConfig(), ee=None) -> np.ndarray:
    """``ee`` may pass a precomputed (position, jacobian) of the end-effector point."""
    p, J = ee if ee is not None else ee_kinematics(chain, state.q)
    J_pinv = damped_pseudo_inverse(J, cfg.mu)
    J_null = null_space_projector(J, J_pinv)
    v = target.p_d_dot - cfg.lam * (p - target.p_d)
    return J_pinv @ v + mid_joint_bias(chain, state.q, J_null, cfg.gains(chain.n))


# ---------------------------------------------------------------------------
# desired trajectories
#
# Every generator maps t -> TrackingTarget and is anchored so that p_d(0) is the
# ``start`` point (normally the end-effector's initial position).

class Trajectory:
    kind = "base"

    def __call__(self, t: float) -> TrackingTarget:
        raise NotImplementedError


@dataclass(frozen=True)
class Hold(Trajectory):
    start: np.ndarray
    kind = "hold"

    def __call__(self, t):
        return TrackingTarget(np.array(self.start, dtype=float), np.zeros(3))


@dataclass(frozen=True)
class Line(Trajectory):
    """Cosine-eased move from start to start + displacement over ``period`` seconds, then hold."""

    start: np.ndarray
    displacement: np.ndarray
    period: float
    kind = "line"

    def __call__(self, t):
        s, sd = _ease(min(max(t / self.period, 0.0), 1.0))
        if t >= self.period:
            sd = 0.0
        d = np.asarray(self.displacement, dtype=float)
        return TrackingTarget(np.asarray(self.start) + s * d, (sd / self.period) * d)


@dataclass(frozen=True)
class Circle(Trajectory):
    """Circle of radius ``size`` in a coordinate plane, one revolution per ``period``."""

    start: np.ndarray
    size: float
    period: float
    plane: str = "xy"
    kind = "circle"

    def __call__(self, t):
        u, v = _plane_axes(self.plane)
        w = 2 * math.pi / self.period
        c, s = math.cos(w * t), math.sin(w * t)
        center = np.asarray(self.start) - self.size * u
        p = center + self.size * (c * u + s * v)
        pd = self.size * w * (-s * u + c * v)
        return TrackingTarget(p, pd)


@dataclass(frozen=True)
class Square(Trajectory):
    """Square of side ``size`` in the xy plane traversed at constant speed once per period."""

    start: np.ndarray
    size: float
    period: float
    kind = "square"

    def __call__(self, t):
        corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float) * self.size
        leg = self.period / 4
        phase = (t % self.period) / leg
        k = int(phase) % 4
        frac = phase - int(phase)
        a, b = corners[k], corners[(k + 1) % 4]
        return TrackingTarget(np.asarray(self.start) + a + frac * (b - a), (b - a) / leg)


@dataclass(frozen=True)
class PickPlace(Trajectory):
    """Lift, carry ``size`` along +y, lower, and return; each of the 6 legs eased, one cycle per period."""

    start: np.ndarray
    size: float
    period: float
    kind = "pick_place"

    def __call__(self, t):
        lift = 0.5 * self.size
        pts = np.array([
            [0, 0, 0], [0, 0, lift], [0, self.size, lift], [0, self.size, 0],
            [0, self.size, lift], [0, 0, lift], [0, 0, 0],
        ])
        leg = self.period / 6
        phase = (t % self.period) / leg
        k = min(int(phase), 5)
        s, sd = _ease(phase - k)
        a, b = pts[k], pts[k + 1]
        return TrackingTarget(np.asarray(self.start) + a + s * (b - a), (sd / leg) * (b - a))


def _ease(x: float):
    """Cosine ramp on [0, 1]: value and derivative."""
    return 0.5 - 0.5 * math.cos(math.pi * x), 0.5 * math.pi * math.sin(math.pi * x)


def _plane_axes(plane: str):
    axes = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]), "z": np.array([0, 0, 1.0])}
    if len(plane) != 2 or plane[0] == plane[1] or any(c not in axes for c in plane):
        raise ValueError(f"bad plane {plane!r}")
    return axes[plane[0]], axes[plane[1]]


def make_trajectory(kind: str, start, size: float = 0.1, period: float = 10.0,
                    displacement=None) -> Trajectory:
    start = np.asarray(start, dtype=float)
    if kind == "hold":
        return Hold(start)
    if kind == "line":
        disp = np.zeros(3) if displacement is None else np.asarray(displacement, dtype=float)
        return Line(start, disp, period)
    if kind == "circle_xy":
        return Circle(start, size, period, "xy")
    if kind == "circle_yz":
        return Circle(start, size, period, "yz")
    if kind == "square":
        return Square(start, size, period)
    if kind == "pick_place":
        return PickPlace(start, size, period)
    raise ValueError(f"unknown trajectory kind {kind!r}")


TRAJECTORY_KINDS = ("hold", "line", "circle_xy", "circle_yz", "square", "pick_place")
