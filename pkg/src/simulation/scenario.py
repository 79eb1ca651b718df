#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
仿真场景

场景文件格式（JSON 或 YAML）:

    {
      "name": "low_cost",
      "chain_ref": "../robots/so100_like_chain.json",
      "registry_ref": "../robots/so100_like_registry.json",
      "noise_model": {"profile": "low_cost"},
      "camera_pose": {"translation": [...], "quaternion": [...]},
      "initial_theta": [...],
      "episode": [[θ1, ..., θd], ...],
      "occlusion_schedule": [[2, 3], [], ...]
    }

chain_ref / registry_ref 相对场景文件所在目录解析，缺省为随仓库附带的示例机器人。
camera_pose 缺省为 DEFAULT_CAMERA_POSE。occlusion_schedule 的第 k 项是第 k 步
额外遮挡的连杆序号（1..d），可以比 episode 短。
"""

import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.geometry.transforms import RigidTransform, Rotation, rot_x
from src.kinematics.chain import JointVector, KinematicChain, forward_kinematics
from src.kinematics.chain_loader import BUNDLED_CHAIN_PATH, load_chain_file
from src.observation.detections import DetectionFrame
from src.observation.registry import BUNDLED_REGISTRY_PATH, ExoskeletonRegistry, load_registry_file
from src.simulation.noise import NoiseModel
from src.simulation.robot import SimulatedRobot
from src.utils.exceptions import ParseError, ValidationError
from src.utils.json_io import load_document

logger = logging.getLogger(__name__)

# 相机位于机器人前上方，光轴沿 -X，图像 y 轴朝下
DEFAULT_CAMERA_POSE = RigidTransform(
    Rotation.from_quaternion([0.5, -0.5, -0.5, 0.5]),
    np.array([0.4, 0.0, 0.3]),
)

SCENARIO_KEYS = {"name", "chain_ref", "registry_ref", "noise_model", "camera_pose", "initial_theta", "episode",
                 "occlusion_schedule"}


def upside_down_camera_pose(camera_pose: RigidTransform) -> RigidTransform:
    """基座绕X轴翻转π安装、相机在世界中不动时，相机在机器人坐标系中的位姿"""
    return rot_x(math.pi).inverse().compose(camera_pose)


def episode_seeds(seed: int) -> Tuple[np.random.Generator, int]:
    """由一个种子派生零偏抽样的随机数生成器和检测噪声种子"""
    offset_seq, detection_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(offset_seq), int(detection_seq.generate_state(1)[0])


@dataclass
class Scenario:
    """
    仿真场景

    属性:
        name: 场景名
        chain: 运动链
        registry: 外骨骼注册表
        noise_config: 噪声模型配置（零偏按种子抽取）
        camera_pose: T^robot_cam
        initial_theta: 初始关节角
        episode: 指令序列
        occlusion_schedule: 每步额外遮挡的连杆
        chain_ref / registry_ref: 引用路径（写入报告）
    """

    name: str
    chain: KinematicChain
    registry: ExoskeletonRegistry
    noise_config: Dict[str, Any] = field(default_factory=dict)
    camera_pose: RigidTransform = DEFAULT_CAMERA_POSE
    initial_theta: Optional[JointVector] = None
    episode: List[JointVector] = field(default_factory=list)
    occlusion_schedule: List[Tuple[int, ...]] = field(default_factory=list)
    chain_ref: Optional[str] = None
    registry_ref: Optional[str] = None

    def noise_model(self, seed: int) -> NoiseModel:
        """按种子实例化噪声模型"""
        offset_rng, detection_seed = episode_seeds(seed)
        return NoiseModel.from_dict(self.noise_config, self.chain.dof, offset_rng, detection_seed)

    def build_robot(self, seed: int, initial_theta: Optional[JointVector] = None,
                    camera_pose: Optional[RigidTransform] = None) -> SimulatedRobot:
        """构造一个新的仿真机器人，完全由种子决定"""
        return SimulatedRobot(
            self.chain,
            self.registry,
            self.noise_model(seed),
            camera_pose or self.camera_pose,
            initial_theta if initial_theta is not None else self.initial_theta,
        )

    def hidden_links_at(self, step: int) -> Tuple[int, ...]:
        if step < len(self.occlusion_schedule):
            return self.occlusion_schedule[step]
        return ()

    def upside_down(self) -> "Scenario":
        """基座倒装的变体"""
        return replace(self, name=f"{self.name}_upside_down", camera_pose=upside_down_camera_pose(self.camera_pose))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "chain_ref": self.chain_ref,
            "registry_ref": self.registry_ref,
            "noise_model": dict(self.noise_config),
            "camera_pose": self.camera_pose.to_dict(),
            "initial_theta": None if self.initial_theta is None else self.initial_theta.to_list(),
            "episode": [c.to_list() for c in self.episode],
            "occlusion_schedule": [list(h) for h in self.occlusion_schedule],
        }


def _resolve_ref(ref: Optional[str], base_dir: Optional[str], default: str) -> str:
    if ref is None:
        return default
    if os.path.isabs(ref) or base_dir is None:
        return ref
    return os.path.normpath(os.path.join(base_dir, ref))


def _joint_list(value: Any, dof: int, location: str, source: Optional[str]) -> JointVector:
    if not isinstance(value, list):
        raise ParseError("关节向量必须是数组", source=source, location=location)
    try:
        vec = JointVector.of(value)
    except (TypeError, ValueError, ValidationError) as e:
        raise ParseError(f"关节向量非法: {e}", source=source, location=location) from e
    if len(vec) != dof:
        raise ValidationError(f"{location} 维度不匹配 (dimension mismatch): 期望 {dof}，实际 {len(vec)}")
    return vec


def scenario_from_dict(document: Dict[str, Any], source: Optional[str] = None,
                       base_dir: Optional[str] = None) -> Scenario:
    """
    解析场景文档

    异常:
        ParseError: 字段缺失或类型错误
        ValidationError: 维度不匹配、连杆序号越界、注册表与运动链不一致
    """
    if not isinstance(document, dict):
        raise ParseError("场景文档必须是对象", source=source)
    unknown = set(document) - SCENARIO_KEYS
    if unknown:
        raise ParseError(f"未知的场景字段: {sorted(unknown)}", source=source)

    chain_path = _resolve_ref(document.get("chain_ref"), base_dir, BUNDLED_CHAIN_PATH)
    registry_path = _resolve_ref(document.get("registry_ref"), base_dir, BUNDLED_REGISTRY_PATH)
    chain = load_chain_file(chain_path)
    registry = load_registry_file(registry_path, chain)

    noise_config = document.get("noise_model") or {}
    if not isinstance(noise_config, dict):
        raise ParseError("noise_model 必须是对象", source=source, location="noise_model")
    # 提前校验噪声配置
    NoiseModel.from_dict(noise_config, chain.dof, np.random.default_rng(0))

    camera_doc = document.get("camera_pose")
    camera_pose = DEFAULT_CAMERA_POSE if camera_doc is None else RigidTransform.from_dict(
        camera_doc, source, "camera_pose")

    initial = document.get("initial_theta")
    initial_theta = None if initial is None else _joint_list(initial, chain.dof, "initial_theta", source)

    raw_episode = document.get("episode") or []
    if not isinstance(raw_episode, list):
        raise ParseError("episode 必须是数组", source=source, location="episode")
    episode = [_joint_list(c, chain.dof, f"episode[{i}]", source) for i, c in enumerate(raw_episode)]

    raw_schedule = document.get("occlusion_schedule") or []
    if not isinstance(raw_schedule, list):
        raise ParseError("occlusion_schedule 必须是数组", source=source, location="occlusion_schedule")
    schedule = []
    for i, hidden in enumerate(raw_schedule):
        location = f"occlusion_schedule[{i}]"
        if not isinstance(hidden, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in hidden):
            raise ParseError("遮挡项必须是连杆序号数组", source=source, location=location)
        if any(j < 1 or j > chain.dof for j in hidden):
            raise ValidationError(f"{location} 中的连杆序号越界 (index out of range)，有效范围 1..{chain.dof}")
        schedule.append(tuple(sorted(set(hidden))))

    return Scenario(
        name=str(document.get("name", "scenario")),
        chain=chain,
        registry=registry,
        noise_config=dict(noise_config),
        camera_pose=camera_pose,
        initial_theta=initial_theta,
        episode=episode,
        occlusion_schedule=schedule,
        chain_ref=document.get("chain_ref"),
        registry_ref=document.get("registry_ref"),
    )


def load_scenario_file(path: str) -> Scenario:
    """从文件加载场景"""
    scenario = scenario_from_dict(load_document(path), source=path, base_dir=os.path.dirname(os.path.abspath(path)))
    logger.info(f"已加载场景 {scenario.name}: {len(scenario.episode)} 条指令，噪声 {scenario.noise_config}")
    return scenario


def default_scenario(profile: str = "low_cost") -> Scenario:
    """随仓库附带的示例机器人加上指定噪声配置档"""
    chain = load_chain_file(BUNDLED_CHAIN_PATH)
    return Scenario(
        name=profile,
        chain=chain,
        registry=load_registry_file(BUNDLED_REGISTRY_PATH, chain),
        noise_config={"profile": profile},
    )


@dataclass
class SimulationStep:
    """仿真中的一步：指令、真值、编码器读数和检测"""

    step: int
    command: JointVector
    clamped: bool
    true_theta: JointVector
    encoders: JointVector
    end_effector: RigidTransform
    frame: DetectionFrame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "command": self.command.to_list(),
            "clamped": self.clamped,
            "true_theta": self.true_theta.to_list(),
            "encoders": self.encoders.to_list(),
            "end_effector": self.end_effector.to_dict(),
            "frame": self.frame.to_dict(),
        }


def run_scenario(scenario: Scenario, seed: int) -> Tuple[SimulatedRobot, List[SimulationStep]]:
    """
    按场景执行指令序列，每步之后记录真值和一帧检测

    没有指令时记录初始状态的一帧。
    """
    robot = scenario.build_robot(seed)
    commands: List[Optional[JointVector]] = list(scenario.episode) or [None]
    steps = []
    for k, target in enumerate(commands):
        if target is None:
            commanded, clamped = robot.read_encoders(), False
        else:
            outcome = robot.command(target)
            commanded, clamped = outcome.commanded, outcome.clamped
        frame = robot.acquire_detections(scenario.hidden_links_at(k))
        steps.append(SimulationStep(
            step=k,
            command=commanded,
            clamped=clamped,
            true_theta=robot.true_theta,
            encoders=robot.read_encoders(),
            end_effector=forward_kinematics(scenario.chain, robot.true_theta)[-1],
            frame=frame,
        ))
    logger.info(f"场景 {scenario.name} 执行完成: {len(steps)} 步，种子 {seed}")
    return robot, steps


def simulation_log_document(scenario: Scenario, seed: int, robot: SimulatedRobot,
                            steps: Sequence[SimulationStep]) -> Dict[str, Any]:
    """仿真日志文档，可被回放机器人和 estimate 命令使用"""
    return {
        "scenario": scenario.to_dict(),
        "seed": seed,
        "noise_model": robot.noise.to_dict(),
        "camera_pose": robot.camera_pose.to_dict(),
        "steps": [s.to_dict() for s in steps],
    }
