from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from src.geometry.transforms import RigidTransform
from src.kinematics.chain import JointVector, KinematicChain
from src.observation.detections import DetectionFrame
from src.observation.registry import ExoskeletonRegistry


@dataclass(frozen=True)
class CommandOutcome:
    """一次关节指令的执行结果"""

    commanded: JointVector
    clamped: bool


class RobotInterface(ABC):
    """机器人适配器基类，仿真机器人和实物/回放机器人共用"""

    @property
    @abstractmethod
    def chain(self) -> KinematicChain:
        """运动链"""
        pass

    @property
    @abstractmethod
    def registry(self) -> ExoskeletonRegistry:
        """外骨骼注册表"""
        pass

    @abstractmethod
    def command(self, target: Union[JointVector, Sequence[float]]) -> CommandOutcome:
        """下发编码器坐标系下的关节目标"""
        pass

    @abstractmethod
    def read_encoders(self) -> JointVector:
        """读取编码器"""
        pass

    @abstractmethod
    def acquire_detections(self) -> DetectionFrame:
        """获取一帧标记检测"""
        pass

    def true_state(self) -> Optional[JointVector]:
        """真实关节角，只有仿真机器人知道"""
        return None

    def true_end_effector_pose(self) -> Optional[RigidTransform]:
        """真实末端位姿，只有仿真机器人知道"""
        return None
