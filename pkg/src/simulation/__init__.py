"""
仿真模块
低成本机器人噪声模型、仿真机器人和场景
"""

from .noise import PROFILES, NoiseModel
from .robot import SimulatedRobot
from .scenario import (
    DEFAULT_CAMERA_POSE,
    Scenario,
    SimulationStep,
    default_scenario,
    episode_seeds,
    load_scenario_file,
    run_scenario,
    scenario_from_dict,
    simulation_log_document,
    upside_down_camera_pose,
)

__all__ = [
    'PROFILES',
    'NoiseModel',
    'SimulatedRobot',
    'DEFAULT_CAMERA_POSE',
    'Scenario',
    'SimulationStep',
    'default_scenario',
    'episode_seeds',
    'load_scenario_file',
    'run_scenario',
    'scenario_from_dict',
    'simulation_log_document',
    'upside_down_camera_pose',
]
