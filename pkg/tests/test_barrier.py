import math

import numpy as np
import pytest

from hcbf.barrier import (
    TIE_EPSILON,
    DegenerateDirection,
    Obstacle,
    barrier_direction,
    barrier_value,
    build_constraints,
    constraint_block,
    relax_slots,
)
from hcbf.chain import RobotState, franka7, planar_chain, point_kinematics


def test_barrier_value_examples():
    assert math.isclose(barrier_value([0.5, 0, 0.5], [0.5, 0.3, 0.5], 0.05, 0.1, 0.05), 0.1)
    assert math.isclose(barrier_value([1, 2, 3], [1, 2, 3], 0.05, 0.1, 0.05), -0.2)
    assert barrier_value([0, 0, 0], [0.25, 0, 0], 0.125, 0.0625, 0.0625) == 0.0  # dyadic, exact
    assert abs(barrier_value([0, 0, 0], [0.2, 0, 0], 0.05, 0.1, 0.05)) < 1e-15


def test_barrier_direction_examples():
    assert np.allclose(barrier_direction([3, 4, 0], [0, 0, 0]), [0.6, 0.8, 0])
    assert np.allclose(barrier_direction([1, 1, 2], [1, 1, 0]), [0, 0, 1])
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = rng.normal(size=(2, 3))
        assert abs(np.linalg.norm(barrier_direction(a, b)) - 1.0) <= 1e-9
    with pytest.raises(DegenerateDirection):
        barrier_direction([0, 0, 0], [0, 0, TIE_EPSILON / 2])


def test_obstacle_validation():
    for kw in ({"radius": -0.1}, {"gamma": 0.0}, {"priority": -1}, {"beta": -1.0}, {"delta_cap": -1.0}):
        args = dict(id="o", position=np.zeros(3), velocity=np.zeros(3), radius=0.1) | kw
        with pytest.raises(ValueError):
            Obstacle(**args)


def _obstacles(p):
    return [
        Obstacle("red", p + [0.3, 0, 0], [0.0, 0, 0], 0.1, priority=0),
        Obstacle("blue", p + [0, 0.3, 0], [0.0, -0.1, 0], 0.08, priority=1, beta=500.0),
        Obstacle("green", p + [0, 0, 0.3], [0.0, 0, 0.1], 0.06, priority=2, beta=250.0),
    ]


def test_rows_rhs_and_slots():
    ch = franka7()
    q = ch.home_configuration()
    pos, jac = point_kinematics(ch, q)
    obs = _obstacles(pos[ch.ee_index])
    cons = build_constraints(ch, RobotState(q), obs)
    assert len(cons) == len(obs) * len(ch.control_points)
    slots = relax_slots(obs)
    assert slots == {"blue": 0, "green": 1}
    for c in cons:
        ob = next(o for o in obs if o.id == c.obstacle_id)
        cp = ch.control_points[c.point_index]
        p = pos[c.point_index]
        A = (p - ob.position) / np.linalg.norm(p - ob.position)
        h = np.linalg.norm(p - ob.position) - cp.radius - ob.radius - 0.05
        assert abs(np.linalg.norm(c.direction) - 1.0) <= 1e-9
        assert np.allclose(c.row, A @ jac[c.point_index])
        assert math.isclose(c.h, h, abs_tol=1e-12)
        assert math.isclose(c.rhs, -ob.gamma * h + A @ ob.velocity, abs_tol=1e-12)
        assert c.relax_slot == slots.get(ob.id)
    # one shared slot per relaxable obstacle, none for priority 0
    for ob in obs:
        used = {c.relax_slot for c in cons if c.obstacle_id == ob.id}
        assert used == ({None} if ob.priority == 0 else {slots[ob.id]})


def test_block_matches_list():
    ch = franka7()
    q = ch.home_configuration()
    obs = _obstacles(point_kinematics(ch, q)[0][ch.ee_index])
    blk = constraint_block(ch, RobotState(q), obs, (1, 5))
    lst = build_constraints(ch, RobotState(q), obs, (1, 5))
    assert np.array_equal(blk.rows, np.array([c.row for c in lst]))
    assert blk.h_matrix().shape == (3, 2)


def test_static_boundary_row_has_zero_rhs():
    ch = planar_chain()
    q = np.array([0.2, 0.4])
    p = point_kinematics(ch, q)[0][ch.ee_index]
    d = 0.05 + 0.1 + 0.05
    ob = Obstacle("o", p + [d, 0, 0], np.zeros(3), 0.1)
    (c,) = build_constraints(ch, RobotState(q), [ob])
    assert abs(c.h) < 1e-12 and abs(c.rhs) < 1e-12


def test_receding_far_obstacle_is_inactive():
    ch = planar_chain()
    q = np.array([0.2, 0.4])
    p = point_kinematics(ch, q)[0][ch.ee_index]
    ob = Obstacle("o", p + [5.0, 0, 0], [3.0, 0, 0], 0.1)
    (c,) = build_constraints(ch, RobotState(q), [ob])
    # the most negative attainable row value inside the velocity box still clears rhs
    worst = -np.abs(c.row) @ ch.vel_upper
    assert c.rhs < worst


def test_degenerate_direction_propagates():
    ch = planar_chain()
    q = np.array([0.2, 0.4])
    p = point_kinematics(ch, q)[0][ch.ee_index]
    with pytest.raises(DegenerateDirection):
        build_constraints(ch, RobotState(q), [Obstacle("o", p, np.zeros(3), 0.1)])


def test_time_derivative_matches_finite_difference():
    ch = franka7()
    rng = np.random.default_rng(4)
    dt = 1e-4
    for _ in range(100):
        q = rng.uniform(ch.joint_lower, ch.joint_upper)
        qd = rng.uniform(-1, 1, ch.n)
        p = point_kinematics(ch, q)[0][ch.ee_index]
        ob = Obstacle("o", p + rng.normal(scale=0.4, size=3), rng.normal(scale=0.2, size=3), 0.1)
        c0 = build_constraints(ch, RobotState(q), [ob])
        c1 = build_constraints(ch, RobotState(q + dt * qd), [ob.moved(ob.position + dt * ob.velocity, ob.velocity)])
        for a, b in zip(c0, c1):
            analytic = a.row @ qd - a.direction @ ob.velocity
            fd = (b.h - a.h) / dt
            # second-order remainder: |qd|^2 times a generous curvature bound over the step
            assert abs(fd - analytic) <= 2 * dt * 50.0 * (1 + qd @ qd)
