"""
控制模块
机器人适配器接口、回放机器人和带状态估计的控制回路

RobotFactory 在 src.control.robot_factory 中，需要时单独导入。
"""

from .robot_interface import CommandOutcome, RobotInterface
from .replay_robot import ReplayRobot
from .refine_loop import (
    MODES,
    ControlConfig,
    ControlStepReport,
    EpisodeReport,
    ReachedState,
    calibrate,
    episode_statistics,
    estimate_state,
    naive_move,
    refine_to_target,
    run_episode,
)

__all__ = [
    'CommandOutcome',
    'RobotInterface',
    'ReplayRobot',
    'MODES',
    'ControlConfig',
    'ControlStepReport',
    'EpisodeReport',
    'ReachedState',
    'calibrate',
    'episode_statistics',
    'estimate_state',
    'naive_move',
    'refine_to_target',
    'run_episode',
]
