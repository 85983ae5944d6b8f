import math

import numpy as np
import pytest

from hcbf.chain import (
    ChainError,
    ControlPoint,
    Joint,
    KinematicChain,
    RobotState,
    control_point_jacobian,
    damped_pseudo_inverse,
    ee_kinematics,
    forward_kinematics,
    franka7,
    null_space_projector,
    planar_chain,
    point_kinematics,
)

from chains import random_chain
from oracles import central_difference_jacobian


def one_joint():
    return KinematicChain(
        joints=(Joint(np.array([0.0, 0, 1]), np.zeros(3)),),
        joint_lower=np.array([-np.pi]), joint_upper=np.array([np.pi]),
        vel_lower=np.array([-1.0]), vel_upper=np.array([1.0]),
        control_points=(ControlPoint(0, np.array([1.0, 0, 0]), 0.0, end_effector=True),),
    )


def test_single_joint_positions():
    ch = one_joint()
    assert np.allclose(forward_kinematics(ch, [0.0])[0].position, [1, 0, 0])
    assert np.allclose(forward_kinematics(ch, [np.pi / 2])[0].position, [0, 1, 0], atol=1e-15)


def test_single_joint_jacobian_column():
    assert np.allclose(control_point_jacobian(one_joint(), [0.0], 0), [[0], [1], [0]])


def test_planar_two_link_examples():
    ch = planar_chain()
    p, _ = ee_kinematics(ch, [np.pi / 2, 0.0])
    assert np.allclose(p, [0, 2, 0], atol=1e-15)
    _, J = ee_kinematics(ch, [0.0, 0.0])
    assert np.allclose(J, [[0, 0], [2, 1], [0, 0]])


def test_distal_columns_are_zero():
    ch = franka7()
    q = ch.home_configuration()
    for k, cp in enumerate(ch.control_points):
        J = control_point_jacobian(ch, q, k)
        assert np.all(J[:, cp.link + 1:] == 0.0)


def test_franka_home_pose():
    ch = franka7()
    p, _ = ee_kinematics(ch, ch.home_configuration())
    assert np.allclose(p, [0.3069, 0.0, 0.4869], atol=1e-4)


def test_bad_inputs():
    ch = franka7()
    with pytest.raises(ChainError):
        forward_kinematics(ch, np.zeros(6))
    with pytest.raises(ChainError):
        control_point_jacobian(ch, np.zeros(7), 99)
    with pytest.raises(ChainError):
        KinematicChain((Joint(np.array([0, 0, 2.0]), np.zeros(3)),), [-1], [1], [-1], [1],
                       (ControlPoint(0, np.zeros(3), 0.1, True),))
    with pytest.raises(ChainError):
        KinematicChain((Joint(np.array([0, 0, 1.0]), np.zeros(3)),), [1], [-1], [-1], [1],
                       (ControlPoint(0, np.zeros(3), 0.1, True),))
    with pytest.raises(ChainError):
        KinematicChain((Joint(np.array([0, 0, 1.0]), np.zeros(3)),), [-1], [1], [0.5], [1],
                       (ControlPoint(0, np.zeros(3), 0.1, True),))
    with pytest.raises(ChainError):
        KinematicChain((Joint(np.array([0, 0, 1.0]), np.zeros(3)),), [-1], [1], [-1], [1],
                       (ControlPoint(0, np.zeros(3), -0.1, True),))
    with pytest.raises(ChainError):
        KinematicChain((Joint(np.array([0, 0, 1.0]), np.zeros(3)),), [-1], [1], [-1], [1],
                       (ControlPoint(0, np.zeros(3), 0.1, False),))


def test_jacobians_match_finite_differences_on_random_chains():
    rng = np.random.default_rng(11)
    for _ in range(50):
        ch = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, ch.n)
        _, jac = point_kinematics(ch, q)
        for k in range(len(ch.control_points)):
            fd = central_difference_jacobian(lambda x: point_kinematics(ch, x)[0][k], q)
            scale = max(np.linalg.norm(jac[k]), 1e-3)
            assert np.linalg.norm(jac[k] - fd) / scale <= 1e-5


def test_forward_kinematics_is_pure():
    ch = franka7()
    q = np.random.default_rng(0).uniform(ch.joint_lower, ch.joint_upper)
    a = point_kinematics(ch, q)
    b = point_kinematics(ch, q.copy())
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_damped_pseudo_inverse_examples():
    assert np.allclose(damped_pseudo_inverse(np.eye(3), 0.01), np.eye(3) / 1.01)
    assert np.array_equal(damped_pseudo_inverse(np.zeros((3, 7))), np.zeros((7, 3)))
    with pytest.raises(ValueError):
        damped_pseudo_inverse(np.eye(3), 0.0)


def test_null_space_projector_zero_jacobian_is_identity():
    J = np.zeros((3, 7))
    assert np.allclose(null_space_projector(J, damped_pseudo_inverse(J)), np.eye(7))


def test_projector_spectrum_with_tiny_damping():
    J = np.random.default_rng(3).normal(size=(3, 7))
    P = null_space_projector(J, damped_pseudo_inverse(J, 1e-12))
    ev = np.sort(np.linalg.eigvalsh(0.5 * (P + P.T)))
    assert np.allclose(ev[:3], 0.0, atol=1e-8)
    assert np.allclose(ev[3:], 1.0, atol=1e-8)


def test_damping_leakage_bounds():
    rng = np.random.default_rng(5)
    mu = 0.01
    for _ in range(200):
        J = rng.normal(size=(3, 7)) * rng.uniform(0.1, 2.0)
        s = np.linalg.svd(J, compute_uv=False)
        Jp = damped_pseudo_inverse(J, mu)
        resid = J - J @ Jp @ J
        # closed form of the reconstruction residual
        assert np.allclose(resid, mu * np.linalg.solve(J @ J.T + mu * np.eye(3), J), atol=1e-12)
        recon = np.linalg.norm(resid, 2)
        assert np.isclose(recon, np.max(mu * s / (s ** 2 + mu)))
        if s[-1] <= s[0] ** 2:  # the coarser sigma_max^2 / sigma_min^2 form needs this
            assert recon <= mu * np.linalg.norm(J, 2) / s[-1] ** 2 * s[0] + 1e-12
        leak = np.linalg.norm(J @ null_space_projector(J, Jp), 2)
        assert leak <= mu * s[0] / (s[-1] ** 2 + mu) + 1e-12


def test_robot_state_default_time():
    assert RobotState(np.zeros(2)).t == 0.0
    assert math.isclose(planar_chain().joint_weights[0], 1 / (2 * np.pi))
