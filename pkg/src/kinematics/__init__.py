"""
运动学模块
串联运动链模型、正运动学和连杆位姿雅可比
"""

from .chain import (
    JointSpec,
    JointVector,
    KinematicChain,
    forward_kinematics,
    joint_axes_in_base,
    link_pose_jacobian,
)
from .chain_loader import (
    BUNDLED_CHAIN_PATH,
    chain_from_dict,
    chain_to_dict,
    load_bundled_chain,
    load_chain,
    load_chain_file,
    save_chain_file,
)

__all__ = [
    'JointSpec',
    'JointVector',
    'KinematicChain',
    'forward_kinematics',
    'joint_axes_in_base',
    'link_pose_jacobian',
    'BUNDLED_CHAIN_PATH',
    'chain_from_dict',
    'chain_to_dict',
    'load_bundled_chain',
    'load_chain',
    'load_chain_file',
    'save_chain_file',
]
