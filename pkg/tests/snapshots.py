"""Random filter snapshots on the 7-DOF arm: a configuration, a nominal command and three spheres."""

import numpy as np

from hcbf.barrier import Obstacle
from hcbf.chain import RobotState, franka7, point_kinematics

CHAIN = franka7()


def random_snapshot(rng, betas=(500.0, 250.0), spread=(0.0, 0.35)):
    ch = CHAIN
    q = rng.uniform(ch.joint_lower + 0.2, ch.joint_upper - 0.2)
    pos, _ = point_kinematics(ch, q)
    obstacles = []
    for oid, r, pr, beta in (("red", 0.10, 0, 0.0), ("blue", 0.08, 1, betas[0]),
                             ("green", 0.06, 2, betas[1])):
        anchor = pos[rng.integers(len(pos))]
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        # surface-to-surface gap, inflated by the point radius and margin
        gap = rng.uniform(*spread)
        p = anchor + u * (0.05 + r + 0.05 + gap)
        v = -u * rng.uniform(0.0, 0.2) + rng.normal(size=3) * 0.02
        obstacles.append(Obstacle(oid, p, v, r, pr, beta))
    q_dot_perf = rng.normal(size=ch.n) * 0.5
    return RobotState(q), q_dot_perf, obstacles
