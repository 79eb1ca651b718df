#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
仿真低成本机器人

指令在编码器坐标系下给出：舵机把电机转到编码器读数等于指令的位置，
所以电机角 = 指令 - 编码器零偏。输出连杆经回差跟随电机（间隙算子）:

    θ_new = clip(min(max(θ_old, m - b), m + b), 限位)

单调逼近时 θ 落后电机 b；换向时先消耗最多 2b 的间隙，连杆才开始移动。
编码器读取电机侧的值，对回差不可见。
"""

import logging
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from src.control.robot_interface import CommandOutcome, RobotInterface
from src.geometry.transforms import RigidTransform, Twist, se3_exp
from src.kinematics.chain import JointVector, KinematicChain, forward_kinematics
from src.observation.detections import DetectionFrame, MarkerDetection
from src.observation.registry import ExoskeletonRegistry
from src.simulation.noise import NoiseModel
from src.utils.exceptions import ValidationError

logger = logging.getLogger(__name__)


class SimulatedRobot(RobotInterface):
    """
    带回差、编码器零偏和标记噪声的仿真机器人

    参数:
        chain: 运动链
        registry: 外骨骼注册表
        noise: 噪声模型
        camera_pose: 相机在机器人基座坐标系中的位姿 T^robot_cam
        initial_theta: 初始关节角，缺省为零（截断到限位内）
    """

    def __init__(self, chain: KinematicChain, registry: ExoskeletonRegistry, noise: NoiseModel,
                 camera_pose: RigidTransform, initial_theta: Optional[Union[JointVector, Sequence[float]]] = None):
        if noise.dof != chain.dof:
            raise ValidationError(f"噪声模型维度 {noise.dof} 与自由度 {chain.dof} 不一致 (dimension mismatch)")
        registry.validate_against(chain)
        self._chain = chain
        self._registry = registry
        self.noise = noise
        self.camera_pose = camera_pose
        self._camera_from_robot = camera_pose.inverse()
        self._rng = np.random.default_rng(noise.rng_seed)
        self._frame_counter = 0

        start = JointVector.zeros(chain.dof) if initial_theta is None else initial_theta
        start, _ = chain.clamp(start)
        self._theta = start.as_array()
        self._motor = start.as_array()

    @property
    def chain(self) -> KinematicChain:
        return self._chain

    @property
    def registry(self) -> ExoskeletonRegistry:
        return self._registry

    @property
    def true_theta(self) -> JointVector:
        return JointVector(self._theta)

    @property
    def motor_theta(self) -> JointVector:
        return JointVector(self._motor)

    @property
    def slack(self) -> np.ndarray:
        """连杆相对电机的间隙位置 θ - m"""
        return self._theta - self._motor

    def true_state(self) -> JointVector:
        return self.true_theta

    def true_end_effector_pose(self) -> RigidTransform:
        return forward_kinematics(self._chain, self._theta)[-1]

    def command(self, target: Union[JointVector, Sequence[float]]) -> CommandOutcome:
        """
        下发关节指令（编码器坐标系）

        超出限位的指令被截断并标记，不视为错误。
        """
        commanded, clamped = self._chain.clamp(target)
        if clamped:
            logger.warning(f"关节指令超出限位，已截断: {JointVector.of(target)} -> {commanded}")
        motor = commanded.values - self.noise.encoder_offset.values
        b = self.noise.backlash_halfwidth
        theta = np.minimum(np.maximum(self._theta, motor - b), motor + b)
        self._theta = np.clip(theta, self._chain.lower_limits, self._chain.upper_limits)
        self._motor = motor
        logger.debug(f"指令 {commanded} -> 真实关节角 {self.true_theta}")
        return CommandOutcome(commanded, clamped)

    def read_encoders(self) -> JointVector:
        """编码器读数 = 电机角 + 零偏，按分辨率量化"""
        reading = self._motor + self.noise.encoder_offset.values
        resolution = self.noise.encoder_resolution
        if resolution > 0.0:
            reading = np.round(reading / resolution) * resolution
        return JointVector(reading)

    def exact_marker_poses(self) -> List[MarkerDetection]:
        """无噪声、无遮挡的标记位姿（相机坐标系），按标记ID排序"""
        poses = forward_kinematics(self._chain, self._theta)
        detections = []
        for marker_id in self._registry.marker_ids:
            entry = self._registry.entry_for_marker(marker_id)
            if self._registry.is_base(entry):
                link_in_camera = self._camera_from_robot
            else:
                link_in_camera = self._camera_from_robot.compose(poses[self._chain.link_index(entry.link_name) - 1])
            detections.append(MarkerDetection(marker_id, link_in_camera.compose(entry.marker_to_link.inverse())))
        return detections

    def simulate_detections(self, hidden_links: Optional[Iterable[int]] = None) -> List[MarkerDetection]:
        """
        生成一帧带噪声的标记检测

        每个标记位姿左乘 exp(ξ)，ξ 的旋转和平移分量分别服从各向同性高斯分布。
        每帧为所有标记抽取噪声和随机遮挡，遮挡只决定是否输出，
        因此不同遮挡下可见标记的噪声相同。

        参数:
            hidden_links: 本帧额外遮挡的连杆（1..d）

        返回:
            List[MarkerDetection]: 未被遮挡的标记检测
        """
        exact = self.exact_marker_poses()
        sigma_r = self.noise.marker_rotation_sigma
        sigma_t = self.noise.marker_translation_sigma
        perturbations = self._rng.standard_normal((len(exact), 6))
        dropout_draws = self._rng.random(self._chain.dof)

        hidden = set(self.noise.occluded_links)
        hidden.update(j + 1 for j in range(self._chain.dof) if dropout_draws[j] < self.noise.dropout_probability[j])
        if hidden_links is not None:
            hidden.update(hidden_links)

        detections = []
        for det, n in zip(exact, perturbations):
            entry = self._registry.entry_for_marker(det.marker_id)
            if not self._registry.is_base(entry) and self._chain.link_index(entry.link_name) in hidden:
                continue
            if sigma_r > 0.0 or sigma_t > 0.0:
                xi = Twist(np.concatenate([sigma_r * n[:3], sigma_t * n[3:]]))
                det = MarkerDetection(det.marker_id, se3_exp(xi).compose(det.t_cam_aruco), det.confidence)
            detections.append(det)
        return detections

    def acquire_detections(self, hidden_links: Optional[Iterable[int]] = None) -> DetectionFrame:
        """生成一帧检测并编号"""
        frame = DetectionFrame(f"frame_{self._frame_counter:03d}", tuple(self.simulate_detections(hidden_links)))
        self._frame_counter += 1
        return frame
