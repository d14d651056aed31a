"""Simulated desktop rotary delta robot learning to turn a potentiometer dial."""

from .device import RobotImperfection, SimRobot
from .dial_env import DialEnv, DialEnvConfig, StepOutcome, reward
from .kinematics import RobotGeometry, WorkspaceCylinder, forward_kinematics, inverse_kinematics
from .policy import GaussianPolicy, RepsConfig

__version__ = "0.1.0"

__all__ = [
    "DialEnv", "DialEnvConfig", "GaussianPolicy", "RepsConfig", "RobotGeometry", "RobotImperfection",
    "SimRobot", "StepOutcome", "WorkspaceCylinder", "forward_kinematics", "inverse_kinematics", "reward",
]
