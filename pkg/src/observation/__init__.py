"""
观测模块
外骨骼几何、标记检测到连杆位姿的换算、检测文件读写
"""

from .detections import (
    DetectionFrame,
    MarkerDetection,
    ObservationSet,
    build_observation_set,
    link_pose_from_marker,
    load_detection_file,
    load_encoder_file,
    parse_encoders,
    save_detection_file,
)
from .registry import (
    BUNDLED_REGISTRY_PATH,
    ExoskeletonRegistry,
    RegistryEntry,
    load_bundled_registry,
    load_registry_file,
    save_registry_file,
)

__all__ = [
    'DetectionFrame',
    'MarkerDetection',
    'ObservationSet',
    'build_observation_set',
    'link_pose_from_marker',
    'load_detection_file',
    'load_encoder_file',
    'parse_encoders',
    'save_detection_file',
    'BUNDLED_REGISTRY_PATH',
    'ExoskeletonRegistry',
    'RegistryEntry',
    'load_bundled_registry',
    'load_registry_file',
    'save_registry_file',
]
