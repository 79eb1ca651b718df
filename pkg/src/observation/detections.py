#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
标记检测与连杆位姿观测

把相机坐标系下的标记位姿经外骨骼几何换算为连杆位姿，再借助基座标记
把所有连杆位姿表示到机器人基座坐标系中。

检测帧文件格式:

    {
      "frame_id": "frame_000",
      "detections": [
        {"marker_id": 0, "translation": [x, y, z], "quaternion": [w, x, y, z], "confidence": 1.0}
      ]
    }

编码器读数文件格式: {"encoders": [θ1, ..., θd]}，也接受裸数组。
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.geometry.transforms import RigidTransform
from src.kinematics.chain import JointVector, KinematicChain
from src.observation.registry import ExoskeletonRegistry
from src.utils.exceptions import BaseUnobservedError, ParseError, ValidationError
from src.utils.json_io import load_document, require_field, save_document

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkerDetection:
    """
    单个标记的检测结果

    属性:
        marker_id: 标记ID
        t_cam_aruco: 标记在相机坐标系中的位姿
        confidence: 置信度，[0, 1]
    """

    marker_id: int
    t_cam_aruco: RigidTransform
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= float(self.confidence) <= 1.0:
            raise ValidationError(f"标记 {self.marker_id} 的置信度 {self.confidence} 不在 [0, 1] 内")

    def to_dict(self) -> Dict[str, Any]:
        doc = self.t_cam_aruco.to_dict()
        doc["marker_id"] = self.marker_id
        doc["confidence"] = float(self.confidence)
        return doc

    def premultiplied(self, g: RigidTransform) -> "MarkerDetection":
        """返回位姿左乘 g 之后的检测"""
        return MarkerDetection(self.marker_id, g.compose(self.t_cam_aruco), self.confidence)


@dataclass(frozen=True)
class DetectionFrame:
    """
    一帧检测结果

    属性:
        frame_id: 帧标识
        detections: 检测列表
    """

    frame_id: str
    detections: Tuple[MarkerDetection, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {"frame_id": self.frame_id, "detections": [d.to_dict() for d in self.detections]}

    @classmethod
    def from_dict(cls, document: Dict[str, Any], source: Optional[str] = None) -> "DetectionFrame":
        """
        解析检测帧文档

        异常:
            ParseError: 字段缺失、类型错误或四元数非单位长度
        """
        frame_id = str(require_field(document, "frame_id", "", source))
        raw = require_field(document, "detections", "", source)
        if not isinstance(raw, list):
            raise ParseError("detections 必须是数组", source=source, location="detections")
        detections = []
        for index, item in enumerate(raw):
            location = f"detections[{index}]"
            marker_id = require_field(item, "marker_id", location, source)
            if not isinstance(marker_id, int) or isinstance(marker_id, bool):
                raise ParseError("marker_id 必须是整数", source=source, location=f"{location}.marker_id")
            pose = RigidTransform.from_dict(item, source, location)
            confidence = item.get("confidence", 1.0)
            try:
                detections.append(MarkerDetection(marker_id, pose, float(confidence)))
            except (TypeError, ValueError, ValidationError) as e:
                raise ParseError(str(e), source=source, location=f"{location}.confidence") from e
        return cls(frame_id, tuple(detections))


@dataclass(frozen=True)
class ObservationSet:
    """
    观测到的连杆位姿集合

    属性:
        link_names: 连杆 1..d 的名称
        poses: 每个连杆在机器人基座坐标系中的位姿，不可见为 None
        base_detection: 基座标记的检测（相机坐标系），未看到为 None
        base_in_camera: 基座连杆在相机坐标系中的位姿 T^cam_robot
        frame_id: 帧标识
    """

    link_names: Tuple[str, ...]
    poses: Tuple[Optional[RigidTransform], ...]
    base_detection: Optional[MarkerDetection] = None
    base_in_camera: Optional[RigidTransform] = None
    frame_id: Optional[str] = None

    @property
    def visible(self) -> Tuple[bool, ...]:
        return tuple(p is not None for p in self.poses)

    @property
    def visible_links(self) -> List[int]:
        """可见连杆序号（1..d）"""
        return [j + 1 for j, p in enumerate(self.poses) if p is not None]

    @property
    def camera_pose(self) -> Optional[RigidTransform]:
        """T^robot_cam，基座未观测到时为 None"""
        return None if self.base_in_camera is None else self.base_in_camera.inverse()

    def pose(self, link_index: int) -> Optional[RigidTransform]:
        return self.poses[link_index - 1]

    def masked(self, hidden_links: Iterable[int]) -> "ObservationSet":
        """返回隐藏指定连杆（1..d）后的观测"""
        hidden = set(hidden_links)
        poses = tuple(None if (j + 1) in hidden else p for j, p in enumerate(self.poses))
        return ObservationSet(self.link_names, poses, self.base_detection, self.base_in_camera, self.frame_id)

    @classmethod
    def from_link_poses(cls, chain: KinematicChain, poses: Sequence[Optional[RigidTransform]],
                        frame_id: Optional[str] = None) -> "ObservationSet":
        """直接由基座坐标系下的连杆位姿构造（没有相机信息）"""
        if len(poses) != chain.dof:
            raise ValidationError(f"观测数量 {len(poses)} 与自由度 {chain.dof} 不一致 (dimension mismatch)")
        return cls(tuple(chain.link_names[1:]), tuple(poses), None, None, frame_id)


def link_pose_from_marker(det: MarkerDetection, reg: ExoskeletonRegistry) -> RigidTransform:
    """
    标记位姿换算为连杆位姿（相机坐标系）

    T^cam_link = T^cam_aruco · T^aruco_exo · T^exo_link

    异常:
        UnknownMarkerError: 标记未登记
    """
    entry = reg.entry_for_marker(det.marker_id)
    return det.t_cam_aruco.compose(entry.marker_to_link)


def _best_per_link(dets: Iterable[MarkerDetection], reg: ExoskeletonRegistry,
                   confidence_threshold: float) -> Dict[str, MarkerDetection]:
    """每个连杆保留置信度最高的检测，置信度相同时取较小的标记ID"""
    best: Dict[str, MarkerDetection] = {}
    for det in dets:
        if not reg.has_marker(det.marker_id):
            logger.warning(f"忽略未登记的标记 {det.marker_id}")
            continue
        if det.confidence < confidence_threshold:
            logger.debug(f"标记 {det.marker_id} 置信度 {det.confidence:.3f} 低于阈值，视为不可见")
            continue
        link = reg.entry_for_marker(det.marker_id).link_name
        current = best.get(link)
        if current is None or (det.confidence, -det.marker_id) > (current.confidence, -current.marker_id):
            best[link] = det
    return best


def build_observation_set(dets: Iterable[MarkerDetection], reg: ExoskeletonRegistry, chain: KinematicChain,
                          confidence_threshold: float = 0.0, frame_id: Optional[str] = None) -> ObservationSet:
    """
    由一帧检测构造机器人基座坐标系下的观测集合

    参数:
        dets: 检测列表
        reg: 外骨骼注册表
        chain: 运动链（决定连杆顺序）
        confidence_threshold: 置信度低于该值的检测视为不可见
        frame_id: 帧标识（可选）

    返回:
        ObservationSet: 观测集合

    异常:
        BaseUnobservedError: 看到了连杆标记但没有看到基座标记
    """
    best = _best_per_link(dets, reg, confidence_threshold)
    base_det = best.pop(reg.base_link, None)
    link_names = tuple(chain.link_names[1:])

    if base_det is None:
        if best:
            raise BaseUnobservedError(
                f"基座标记未观测到 (base unobserved)，无法把连杆 {sorted(best)} 表示到机器人坐标系"
            )
        return ObservationSet(link_names, tuple(None for _ in link_names), None, None, frame_id)

    base_in_camera = link_pose_from_marker(base_det, reg)
    camera_to_base = base_in_camera.inverse()
    poses = []
    for name in link_names:
        det = best.get(name)
        poses.append(None if det is None else camera_to_base.compose(link_pose_from_marker(det, reg)))
    obs = ObservationSet(link_names, tuple(poses), base_det, base_in_camera, frame_id)
    logger.debug(f"帧 {frame_id}: 可见连杆 {obs.visible_links}")
    return obs


def load_detection_file(path: str) -> DetectionFrame:
    """从文件加载一帧检测"""
    return DetectionFrame.from_dict(load_document(path), source=path)


def save_detection_file(frame: DetectionFrame, path: str) -> None:
    save_document(frame.to_dict(), path)


def parse_encoders(document: Any, dof: Optional[int] = None, source: Optional[str] = None) -> JointVector:
    """
    解析编码器读数

    参数:
        document: {"encoders": [...]} 或数值数组
        dof: 期望维度（可选）
        source: 来源名称

    异常:
        ParseError: 格式错误
        ValidationError: 维度不匹配
    """
    values = document.get("encoders") if isinstance(document, dict) else document
    if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise ParseError("编码器读数必须是数值数组", source=source, location="encoders")
    encoders = JointVector(np.asarray(values, dtype=float))
    if dof is not None and len(encoders) != dof:
        raise ValidationError(f"编码器读数维度 {len(encoders)} 与自由度 {dof} 不一致 (dimension mismatch)")
    return encoders


def load_encoder_file(path: str, dof: Optional[int] = None) -> JointVector:
    return parse_encoders(load_document(path), dof, source=path)
