#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
单帧估计流程

检测 → 观测集合 → 关节恢复 → 外参与标定偏移。
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, Iterable, List, Optional

from src.estimation.estimator import (
    EstimateReport,
    SolverConfig,
    compute_calibration,
    encoder_fallback_report,
    joint_error,
    recover_camera_pose,
    recover_joints,
)
from src.geometry.transforms import RigidTransform
from src.kinematics.chain import JointVector, KinematicChain, forward_kinematics
from src.observation.detections import MarkerDetection, ObservationSet, build_observation_set
from src.observation.registry import ExoskeletonRegistry
from src.utils.exceptions import UnobservableError

logger = logging.getLogger(__name__)


@dataclass
class InitComparison:
    """零初值与编码器初值两次求解的对比"""

    zeros: EstimateReport
    encoders: EstimateReport

    @property
    def joint_distance(self) -> float:
        return joint_error(self.zeros.theta_star, self.encoders.theta_star)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "zeros": self.zeros.to_dict(),
            "encoders": self.encoders.to_dict(),
            "joint_distance": self.joint_distance,
        }


@dataclass
class FrameEstimate:
    """
    单帧估计结果

    属性:
        report: 主估计（有编码器读数且允许热启动时使用编码器初值）
        observation: 使用的观测集合
        comparison: 两种初值的对比（compare_init 时）
    """

    report: EstimateReport
    observation: ObservationSet
    comparison: Optional[InitComparison] = None

    def to_dict(self) -> Dict[str, Any]:
        doc = {"report": self.report.to_dict(), "frame_id": self.observation.frame_id,
               "visible_links": self.observation.visible_links}
        if self.comparison is not None:
            doc["compare_init"] = self.comparison.to_dict()
        return doc


def _with_calibration(report: EstimateReport, encoders: Optional[JointVector]) -> EstimateReport:
    if encoders is None:
        return report
    return replace(report, calibration_offset=compute_calibration(report.theta_star, encoders))


def estimate_observation(chain: KinematicChain, obs: ObservationSet, encoders: Optional[JointVector] = None,
                         cfg: Optional[SolverConfig] = None, init_from_encoders: bool = True,
                         compare_init: bool = False) -> FrameEstimate:
    """
    对已经表示在机器人坐标系下的观测做估计

    参数:
        chain: 运动链
        obs: 观测集合
        encoders: 编码器读数（可选）
        cfg: 求解器配置
        init_from_encoders: 有编码器读数时用其作为初值
        compare_init: 同时报告零初值和编码器初值两次求解

    异常:
        UnobservableError: 没有可见连杆，且无法退回编码器读数
    """
    cfg = cfg or SolverConfig()
    if encoders is not None:
        encoders = chain.check_dimension(encoders)

    if not obs.visible_links:
        if encoders is not None and cfg.fallback_to_encoders:
            return FrameEstimate(encoder_fallback_report(chain, obs, encoders), obs)
        raise UnobservableError("没有可见连杆，关节状态不可观测 (unobservable)")

    comparison = None
    if compare_init and encoders is not None:
        zeros_report = _with_calibration(recover_joints(chain, obs, None, cfg, "zeros"), encoders)
        enc_report = _with_calibration(recover_joints(chain, obs, encoders, cfg, "encoders"), encoders)
        comparison = InitComparison(zeros_report, enc_report)
        report = enc_report if init_from_encoders else zeros_report
        logger.info(f"两种初值的解相差 {comparison.joint_distance:.3e} rad")
    elif compare_init:
        logger.warning("没有编码器读数，--compare-init 只运行零初值求解")
        report = recover_joints(chain, obs, None, cfg, "zeros")
    elif encoders is not None and init_from_encoders:
        report = _with_calibration(recover_joints(chain, obs, encoders, cfg, "encoders"), encoders)
    else:
        report = _with_calibration(recover_joints(chain, obs, None, cfg, "zeros"), encoders)
    return FrameEstimate(report, obs, comparison)


def estimate_frame(chain: KinematicChain, registry: ExoskeletonRegistry, detections: Iterable[MarkerDetection],
                   encoders: Optional[JointVector] = None, cfg: Optional[SolverConfig] = None,
                   init_from_encoders: bool = True, compare_init: bool = False,
                   confidence_threshold: float = 0.0, frame_id: Optional[str] = None) -> FrameEstimate:
    """
    由一帧标记检测估计关节角、相机外参和标定偏移

    返回:
        FrameEstimate: 估计结果

    异常:
        BaseUnobservedError: 看到连杆标记但没有基座标记
        UnobservableError: 没有可见连杆且没有编码器读数
    """
    obs = build_observation_set(detections, registry, chain, confidence_threshold, frame_id)
    estimate = estimate_observation(chain, obs, encoders, cfg, init_from_encoders, compare_init)
    if obs.base_detection is not None:
        estimate.report.camera_pose = recover_camera_pose(obs, registry)
    return estimate


def link_overlay(chain: KinematicChain, theta: JointVector,
                 camera_pose: Optional[RigidTransform] = None) -> List[Dict[str, Any]]:
    """
    估计关节角下每个连杆的位姿，供外部工具叠加到图像上

    返回 d+1 行，第一行是基座连杆（单位位姿），其后按运动链顺序排列。

    参数:
        chain: 运动链
        theta: 关节角
        camera_pose: T^robot_cam，给定时同时输出相机坐标系下的位姿
    """
    poses = [RigidTransform.identity()] + forward_kinematics(chain, theta)
    cam_from_robot = None if camera_pose is None else camera_pose.inverse()
    rows = []
    for name, pose in zip(chain.link_names, poses):
        row = {"link_name": name, "pose_in_robot": pose.to_dict()}
        if cam_from_robot is not None:
            row["pose_in_camera"] = cam_from_robot.compose(pose).to_dict()
        rows.append(row)
    return rows
