#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
回放机器人

按顺序回放已经记录的检测帧和编码器读数，代替实物机器人接入控制回路。
回放无法执行指令，收到指令时只记录告警。
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Union

from src.control.robot_interface import CommandOutcome, RobotInterface
from src.kinematics.chain import JointVector, KinematicChain
from src.observation.detections import DetectionFrame, load_detection_file, load_encoder_file, parse_encoders
from src.observation.registry import ExoskeletonRegistry
from src.utils.exceptions import ParseError, ReplayExhaustedError, ValidationError

logger = logging.getLogger(__name__)


class ReplayRobot(RobotInterface):
    """
    回放机器人

    参数:
        chain: 运动链
        registry: 外骨骼注册表
        frames: 检测帧序列
        encoders: 与检测帧一一对应的编码器读数
    """

    def __init__(self, chain: KinematicChain, registry: ExoskeletonRegistry, frames: Sequence[DetectionFrame],
                 encoders: Sequence[JointVector]):
        if len(frames) != len(encoders):
            raise ValidationError(f"检测帧数 {len(frames)} 与编码器读数数 {len(encoders)} 不一致")
        registry.validate_against(chain)
        self._chain = chain
        self._registry = registry
        self._frames: List[DetectionFrame] = list(frames)
        self._encoders = [chain.check_dimension(e) for e in encoders]
        self._cursor = 0
        self.ignored_commands: List[JointVector] = []

    @property
    def chain(self) -> KinematicChain:
        return self._chain

    @property
    def registry(self) -> ExoskeletonRegistry:
        return self._registry

    @property
    def remaining(self) -> int:
        return len(self._frames) - self._cursor

    def command(self, target: Union[JointVector, Sequence[float]]) -> CommandOutcome:
        target = self._chain.check_dimension(target)
        logger.warning(f"回放机器人忽略关节指令 {target}")
        self.ignored_commands.append(target)
        return CommandOutcome(target, False)

    def read_encoders(self) -> JointVector:
        """当前帧（最近取出的一帧，尚未取帧时为第一帧）对应的编码器读数"""
        if not self._encoders:
            raise ReplayExhaustedError("回放数据为空")
        return self._encoders[max(self._cursor - 1, 0)]

    def acquire_detections(self) -> DetectionFrame:
        if self._cursor >= len(self._frames):
            raise ReplayExhaustedError(f"回放检测帧已用完（共 {len(self._frames)} 帧）")
        frame = self._frames[self._cursor]
        self._cursor += 1
        return frame

    @classmethod
    def from_simulation_log(cls, document: Dict[str, Any], chain: KinematicChain, registry: ExoskeletonRegistry,
                            source: Optional[str] = None) -> "ReplayRobot":
        """
        由 simulate 命令输出的仿真日志构造（带报告外壳或不带均可）

        异常:
            ParseError: 日志格式错误
        """
        if isinstance(document, dict) and document.get("kind") == "simulation":
            document = document.get("result")
        steps = document.get("steps") if isinstance(document, dict) else None
        if not isinstance(steps, list):
            raise ParseError("仿真日志缺少 steps 数组", source=source, location="steps")
        frames, encoders = [], []
        for index, step in enumerate(steps):
            location = f"steps[{index}]"
            if not isinstance(step, dict) or "frame" not in step or "encoders" not in step:
                raise ParseError("仿真步缺少 frame 或 encoders", source=source, location=location)
            frames.append(DetectionFrame.from_dict(step["frame"], source))
            encoders.append(parse_encoders(step["encoders"], chain.dof, source))
        return cls(chain, registry, frames, encoders)

    @classmethod
    def from_files(cls, chain: KinematicChain, registry: ExoskeletonRegistry, detection_paths: Sequence[str],
                   encoder_paths: Sequence[str]) -> "ReplayRobot":
        """由成对的检测文件和编码器文件构造"""
        frames = [load_detection_file(p) for p in detection_paths]
        encoders = [load_encoder_file(p, chain.dof) for p in encoder_paths]
        return cls(chain, registry, frames, encoders)
