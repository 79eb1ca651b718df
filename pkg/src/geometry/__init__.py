"""
几何模块
SE(3)/SO(3) 刚体变换及其李群运算
"""

from .transforms import (
    DEFAULT_ROT_WEIGHT,
    RigidTransform,
    Rotation,
    Twist,
    compose,
    inverse,
    pose_error,
    rot_x,
    rot_y,
    rot_z,
    se3_distance,
    se3_exp,
    se3_log,
)

__all__ = [
    'DEFAULT_ROT_WEIGHT',
    'RigidTransform',
    'Rotation',
    'Twist',
    'compose',
    'inverse',
    'pose_error',
    'rot_x',
    'rot_y',
    'rot_z',
    'se3_distance',
    'se3_exp',
    'se3_log',
]
