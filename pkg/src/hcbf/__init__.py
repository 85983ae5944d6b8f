"""Prioritized control-barrier-function safety filter for serial manipulators."""

from .barrier import BarrierConstraint, ConstraintBlock, DegenerateDirection, Obstacle, build_constraints
from .chain import ControlPoint, Joint, KinematicChain, RobotState, franka7, planar_chain
from .perf import PerfConfig, TrackingTarget, make_trajectory, performance_command
from .qp import QpProblem, QpSolution, QpSolver, Status, solve
from .safety import FilterConfig, FilterStatus, Mode, SafeCommand, SafetyFilter

__all__ = [
    "BarrierConstraint", "ConstraintBlock", "ControlPoint", "DegenerateDirection", "FilterConfig",
    "FilterStatus", "Joint", "KinematicChain", "Mode", "Obstacle", "PerfConfig", "QpProblem",
    "QpSolution", "QpSolver", "RobotState", "SafeCommand", "SafetyFilter", "Status", "TrackingTarget",
    "build_constraints", "franka7", "make_trajectory", "performance_command", "planar_chain", "solve",
]
