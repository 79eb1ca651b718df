"""
估计模块
关节恢复（LM 最小二乘）、相机外参、标定偏移和单帧估计流程
"""

from .estimator import (
    EstimateReport,
    LinkResidual,
    SolverConfig,
    compute_calibration,
    joint_error,
    recover_camera_pose,
    recover_joints,
)
from .pipeline import FrameEstimate, InitComparison, estimate_frame, estimate_observation, link_overlay
from .solver import LevenbergMarquardt, SolverResult

__all__ = [
    'EstimateReport',
    'LinkResidual',
    'SolverConfig',
    'compute_calibration',
    'joint_error',
    'recover_camera_pose',
    'recover_joints',
    'FrameEstimate',
    'InitComparison',
    'estimate_frame',
    'estimate_observation',
    'link_overlay',
    'LevenbergMarquardt',
    'SolverResult',
]
