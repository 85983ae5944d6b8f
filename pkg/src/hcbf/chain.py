"""Serial-chain kinematics for all-revolute manipulators.

A chain is a product of per-joint transforms: translate by the joint's fixed
offset (expressed in the parent frame), then rotate about the joint axis.
With every link frame aligned to the base at q = 0, this is the
product-of-exponentials form with an identity home orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AXIS_NORM_TOL = 1e-9
DEFAULT_DAMPING = 0.01


class ChainError(ValueError):
    """Invalid chain definition or joint vector."""


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray
    offset: np.ndarray


@dataclass(frozen=True)
class ControlPoint:
    """A sphere rigidly attached to ``link`` (index of the joint that moves it)."""

    link: int
    point: np.ndarray
    radius: float
    end_effector: bool = False
    name: str = ""


@dataclass(frozen=True)
class ControlPointKinematics:
    position: np.ndarray
    jacobian: np.ndarray | None = None


@dataclass(frozen=True)
class RobotState:
    q: np.ndarray
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class KinematicChain:
    joints: tuple[Joint, ...]
    joint_lower: np.ndarray
    joint_upper: np.ndarray
    vel_lower: np.ndarray
    vel_upper: np.ndarray
    control_points: tuple[ControlPoint, ...]
    name: str = "custom"
    home: np.ndarray | None = None
    # stacked copies for the vectorised kernels
    _axes: np.ndarray = field(init=False, repr=False)
    _offsets: np.ndarray = field(init=False, repr=False)
    _skews: np.ndarray = field(init=False, repr=False)
    _skews2: np.ndarray = field(init=False, repr=False)
    _cp_links: np.ndarray = field(init=False, repr=False)
    _cp_points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.joints)
        if n == 0:
            raise ChainError("chain needs at least one joint")
        axes = np.array([np.asarray(j.axis, dtype=float) for j in self.joints])
        offsets = np.array([np.asarray(j.offset, dtype=float) for j in self.joints])
        if axes.shape != (n, 3) or offsets.shape != (n, 3):
            raise ChainError("joint axis and offset must be 3-vectors")
        bad = np.abs(np.linalg.norm(axes, axis=1) - 1.0) > AXIS_NORM_TOL
        if bad.any():
            raise ChainError(f"joint {int(np.argmax(bad))} axis is not unit norm")
        for label in ("joint_lower", "joint_upper", "vel_lower", "vel_upper"):
            arr = np.asarray(getattr(self, label), dtype=float)
            if arr.shape != (n,):
                raise ChainError(f"{label} must have length {n}")
            object.__setattr__(self, label, arr)
        if not np.all(self.joint_lower < self.joint_upper):
            raise ChainError("joint_lower must be strictly below joint_upper")
        if not (np.all(self.vel_lower < 0) and np.all(self.vel_upper > 0)):
            raise ChainError("velocity bounds must straddle zero")
        if not self.control_points:
            raise ChainError("chain needs control points")
        for k, cp in enumerate(self.control_points):
            if not 0 <= cp.link < n:
                raise ChainError(f"control point {k} references link {cp.link}")
            if cp.radius < 0:
                raise ChainError(f"control point {k} has negative radius")
        if not any(cp.end_effector for cp in self.control_points):
            raise ChainError("no control point is flagged as the end-effector")
        if self.home is not None:
            home = np.asarray(self.home, dtype=float)
            if home.shape != (n,):
                raise ChainError(f"home must have length {n}")
            object.__setattr__(self, "home", home)
        object.__setattr__(self, "_axes", axes)
        object.__setattr__(self, "_offsets", offsets)
        skews = np.array([_skew(a) for a in axes])
        object.__setattr__(self, "_skews", skews)
        object.__setattr__(self, "_skews2", skews @ skews)
        object.__setattr__(
            self, "control_points",
            tuple(ControlPoint(cp.link, np.asarray(cp.point, dtype=float), float(cp.radius),
                               cp.end_effector, cp.name) for cp in self.control_points),
        )
        object.__setattr__(self, "_cp_links", np.array([cp.link for cp in self.control_points]))
        object.__setattr__(self, "_cp_points", np.array([cp.point for cp in self.control_points]))

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def ee_index(self) -> int:
        return next(i for i, cp in enumerate(self.control_points) if cp.end_effector)

    @property
    def mid_joint(self) -> np.ndarray:
        return 0.5 * (self.joint_upper + self.joint_lower)

    @property
    def joint_weights(self) -> np.ndarray:
        return 1.0 / (self.joint_upper - self.joint_lower)

    def home_configuration(self) -> np.ndarray:
        return self.mid_joint.copy() if self.home is None else self.home.copy()


def _skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _check_q(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.n,):
        raise ChainError(f"expected {chain.n} joint values, got shape {q.shape}")
    return q


def joint_frames(chain: KinematicChain, q):
    """World-frame joint origins, joint axes and link rotations, each stacked per joint."""
    q = _check_q(chain, q)
    n = chain.n
    # Rodrigues for every joint at once: R_i = I + sin K_i + (1 - cos) K_i^2
    local = (np.eye(3) + np.sin(q)[:, None, None] * chain._skews
             + (1.0 - np.cos(q))[:, None, None] * chain._skews2)
    parent = np.empty((n, 3, 3))
    rots = np.empty((n, 3, 3))
    R = np.eye(3)
    for i in range(n):
        parent[i] = R
        R = R @ local[i]
        rots[i] = R
    origins = np.cumsum(np.einsum("nij,nj->ni", parent, chain._offsets), axis=0)
    axes = np.einsum("nij,nj->ni", parent, chain._axes)
    return origins, axes, rots


def point_kinematics(chain: KinematicChain, q, indices=None):
    """Positions (P, 3) and positional Jacobians (P, 3, n) of selected control points."""
    origins, axes, rots = joint_frames(chain, q)
    if indices is None:
        links, local = chain._cp_links, chain._cp_points
    else:
        indices = list(indices)
        links, local = chain._cp_links[indices], chain._cp_points[indices]
    pos = origins[links] + np.einsum("pij,pj->pi", rots[links], local)
    # column k of J_j is axis_k x (p_j - o_k) for joints proximal to the point's link
    d = pos[:, None, :] - origins
    ax, ay, az = axes[:, 0], axes[:, 1], axes[:, 2]
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    jac = np.stack((ay * dz - az * dy, az * dx - ax * dz, ax * dy - ay * dx), axis=1)
    jac *= (np.arange(chain.n) <= links[:, None])[:, None, :]
    return pos, jac


def forward_kinematics(chain: KinematicChain, q) -> list[ControlPointKinematics]:
    pos, _ = point_kinematics(chain, q)
    return [ControlPointKinematics(position=p) for p in pos]


def control_point_jacobian(chain: KinematicChain, q, point_index: int) -> np.ndarray:
    if not 0 <= point_index < len(chain.control_points):
        raise ChainError(f"no control point {point_index}")
    _, jac = point_kinematics(chain, q, [point_index])
    return jac[0]


def ee_kinematics(chain: KinematicChain, q):
    pos, jac = point_kinematics(chain, q, [chain.ee_index])
    return pos[0], jac[0]


def damped_pseudo_inverse(J, mu: float = DEFAULT_DAMPING) -> np.ndarray:
    """J^T (J J^T + mu I)^-1, well defined at singularities for mu > 0."""
    J = np.asarray(J, dtype=float)
    if mu <= 0:
        raise ValueError("damping must be positive")
    m = J.shape[0]
    return np.linalg.solve(J @ J.T + mu * np.eye(m), J).T


def null_space_projector(J, J_dagger) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    J_dagger = np.asarray(J_dagger, dtype=float)
    if J_dagger.shape != (J.shape[1], J.shape[0]):
        raise ValueError("pseudo-inverse shape does not match J")
    return np.eye(J.shape[1]) - J_dagger @ J


# ---------------------------------------------------------------------------
# presets

def planar_chain(lengths=(1.0, 1.0), radius: float = 0.05, vel_limit: float = 2.0,
                 link_midpoints: bool = False, name: str = "planar2") -> KinematicChain:
    """Planar arm rotating about z with links along x."""
    n = len(lengths)
    z = np.array([0.0, 0.0, 1.0])
    joints = [Joint(z, np.zeros(3))]
    joints += [Joint(z, np.array([lengths[i - 1], 0.0, 0.0])) for i in range(1, n)]
    points = []
    if link_midpoints:
        points += [ControlPoint(i, np.array([lengths[i] / 2, 0.0, 0.0]), radius, name=f"link{i}")
                   for i in range(n)]
    points.append(ControlPoint(n - 1, np.array([lengths[-1], 0.0, 0.0]), radius, True, "ee"))
    return KinematicChain(
        joints=tuple(joints),
        joint_lower=np.full(n, -np.pi),
        joint_upper=np.full(n, np.pi),
        vel_lower=np.full(n, -vel_limit),
        vel_upper=np.full(n, vel_limit),
        control_points=tuple(points),
        name=name,
        home=np.array([0.0] * n),
    )


def franka7() -> KinematicChain:
    """7-DOF arm with Franka Research 3 geometry and datasheet-style limits.

    The joint limits are preset values, not measured from any experiment.
    """
    z, y = np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])
    joints = (
        Joint(z, np.array([0.0, 0.0, 0.333])),
        Joint(y, np.zeros(3)),
        Joint(z, np.array([0.0, 0.0, 0.316])),
        Joint(-y, np.array([0.0825, 0.0, 0.0])),
        Joint(z, np.array([-0.0825, 0.0, 0.384])),
        Joint(-y, np.zeros(3)),
        Joint(-z, np.array([0.088, 0.0, 0.0])),
    )
    ee = np.array([0.0, 0.0, -0.2104])  # flange 0.107 + hand 0.1034
    points = (
        ControlPoint(1, np.array([0.0, 0.0, 0.158]), 0.08, name="upper_arm"),
        ControlPoint(2, np.array([0.04125, 0.0, 0.0]), 0.07, name="elbow"),
        ControlPoint(3, np.array([-0.04125, 0.0, 0.192]), 0.07, name="forearm"),
        ControlPoint(5, np.array([0.044, 0.0, 0.0]), 0.06, name="wrist"),
        ControlPoint(6, ee / 2, 0.05, name="hand"),
        ControlPoint(6, ee, 0.04, end_effector=True, name="ee"),
    )
    return KinematicChain(
        joints=joints,
        joint_lower=np.array([-2.7437, -1.7837, -2.9007, -3.0421, -2.8065, 0.5445, -3.0159]),
        joint_upper=np.array([2.7437, 1.7837, 2.9007, -0.1518, 2.8065, 4.5169, 3.0159]),
        vel_lower=-np.array([2.62, 2.62, 2.62, 2.62, 5.26, 4.18, 5.26]),
        vel_upper=np.array([2.62, 2.62, 2.62, 2.62, 5.26, 4.18, 5.26]),
        control_points=points,
        name="franka7",
        home=np.array([0.0, -np.pi / 4, 0.0, -3 * np.pi / 4, 0.0, np.pi / 2, np.pi / 4]),
    )


CHAIN_PRESETS = {
    "franka7": franka7,
    "planar2": planar_chain,
}
