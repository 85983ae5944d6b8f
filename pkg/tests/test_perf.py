import numpy as np
import pytest

from hcbf.chain import (
    ControlPoint,
    Joint,
    KinematicChain,
    RobotState,
    damped_pseudo_inverse,
    ee_kinematics,
    franka7,
    null_space_projector,
    planar_chain,
)
from hcbf.perf import (
    TRAJECTORY_KINDS,
    PerfConfig,
    TrackingTarget,
    make_trajectory,
    mid_joint_bias,
    performance_command,
)


def test_zero_command_at_rest_on_target():
    ch = franka7()
    q = ch.mid_joint
    p, _ = ee_kinematics(ch, q)
    cmd = performance_command(ch, RobotState(q), TrackingTarget(p, np.zeros(3)))
    assert np.allclose(cmd, 0.0, atol=1e-15)


def test_mid_joint_bias_vanishes():
    ch = franka7()
    J_null = np.eye(7)
    assert np.allclose(mid_joint_bias(ch, ch.mid_joint, J_null, 0.5), 0.0)
    q = np.random.default_rng(0).uniform(ch.joint_lower, ch.joint_upper)
    assert np.allclose(mid_joint_bias(ch, q, J_null, 0.0), 0.0)


def test_mid_joint_bias_leakage_bound():
    ch = franka7()
    rng = np.random.default_rng(1)
    mu = 0.01
    for _ in range(100):
        q = rng.uniform(ch.joint_lower, ch.joint_upper)
        _, J = ee_kinematics(ch, q)
        Jp = damped_pseudo_inverse(J, mu)
        qd = mid_joint_bias(ch, q, null_space_projector(J, Jp), 0.5)
        s = np.linalg.svd(J, compute_uv=False)
        raw = 0.5 * ch.joint_weights * (q - ch.mid_joint)
        bound = mu * s[0] / (s[-1] ** 2 + mu) * np.linalg.norm(raw)
        assert np.linalg.norm(J @ qd) <= bound + 1e-12


def test_one_joint_hand_evaluation():
    ch = KinematicChain(
        joints=(Joint(np.array([0.0, 0, 1]), np.zeros(3)),),
        joint_lower=np.array([-np.pi]), joint_upper=np.array([np.pi]),
        vel_lower=np.array([-1.0]), vel_upper=np.array([1.0]),
        control_points=(ControlPoint(0, np.array([1.0, 0, 0]), 0.0, end_effector=True),),
    )
    cmd = performance_command(ch, RobotState(np.zeros(1)),
                              TrackingTarget(np.array([1.0, 0.1, 0]), np.zeros(3)),
                              PerfConfig(lam=1.0, kp_joint=0.0))
    # J = (0, 1, 0)^T so J^+ = J^T / (1 + mu) applied to (0, 0.1, 0)
    assert np.isclose(cmd[0], 0.1 / 1.01)


def test_tracking_velocity_matches_within_leakage():
    ch = franka7()
    rng = np.random.default_rng(2)
    cfg = PerfConfig(lam=2.0, kp_joint=0.0)
    for _ in range(50):
        q = rng.uniform(ch.joint_lower, ch.joint_upper)
        p, J = ee_kinematics(ch, q)
        tgt = TrackingTarget(p + rng.normal(scale=0.05, size=3), rng.normal(scale=0.1, size=3))
        v_des = tgt.p_d_dot - cfg.lam * (p - tgt.p_d)
        v = J @ performance_command(ch, RobotState(q), tgt, cfg)
        s = np.linalg.svd(J, compute_uv=False)
        leak = cfg.mu / (s[-1] ** 2 + cfg.mu)
        assert np.linalg.norm(v - v_des) <= leak * np.linalg.norm(v_des) + 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        PerfConfig(lam=0.0)
    with pytest.raises(ValueError):
        PerfConfig(kp_joint=-1.0)
    with pytest.raises(ValueError):
        PerfConfig(mu=0.0)
    with pytest.raises(ValueError):
        PerfConfig(kp_joint=(1.0, 2.0)).gains(3)
    with pytest.raises(ValueError):
        TrackingTarget(np.array([np.nan, 0, 0]), np.zeros(3))


@pytest.mark.parametrize("kind", TRAJECTORY_KINDS)
def test_trajectories_start_at_anchor_and_have_consistent_velocity(kind):
    start = np.array([0.3, 0.1, 0.5])
    tr = make_trajectory(kind, start, size=0.2, period=4.0, displacement=[0.1, 0.0, 0.0])
    assert np.allclose(tr(0.0).p_d, start)
    h = 1e-6
    for t in np.linspace(0.05, 3.9, 17):
        fd = (tr(t + h).p_d - tr(t - h).p_d) / (2 * h)
        assert np.allclose(fd, tr(t).p_d_dot, atol=1e-5)


def test_unknown_trajectory():
    with pytest.raises(ValueError):
        make_trajectory("zigzag", np.zeros(3))


def test_planar_closed_loop_converges():
    ch = planar_chain()
    q = np.array([0.3, 0.9])
    p0, _ = ee_kinematics(ch, q)
    target = TrackingTarget(p0 + np.array([0.1, -0.1, 0.0]), np.zeros(3))
    cfg = PerfConfig(kp_joint=0.0)
    for _ in range(4000):
        q = q + 1e-3 * performance_command(ch, RobotState(q), target, cfg)
    assert np.linalg.norm(ee_kinematics(ch, q)[0] - target.p_d) < 1e-3
