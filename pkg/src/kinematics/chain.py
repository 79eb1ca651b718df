#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
串联运动链模型

关节模型: 先施加固定的父变换，再绕关节轴旋转 θ（类似URDF的约定）。
连杆0是基座，在机器人坐标系中位姿恒为单位变换；连杆 j (1..d) 是关节 j 的子连杆。
正运动学和雅可比都是纯函数，可以并发调用。
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.geometry.transforms import RigidTransform, Rotation
from src.utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

AXIS_NORM_TOLERANCE = 1e-9
SUPPORTED_JOINT_TYPES = ("revolute",)


@dataclass(frozen=True, eq=False)
class JointVector:
    """
    关节角向量（弧度）

    属性:
        values: d 个有限标量
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValidationError("关节向量包含非有限值")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, dof: int) -> "JointVector":
        return cls(np.zeros(dof))

    @classmethod
    def of(cls, value: Union["JointVector", Iterable[float]]) -> "JointVector":
        """接受 JointVector 或任意数值序列"""
        if isinstance(value, JointVector):
            return value
        return cls(np.asarray(list(value), dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(float(v) for v in self.values)

    def __getitem__(self, index: int) -> float:
        return float(self.values[index])

    def __add__(self, other: "JointVector") -> "JointVector":
        _require_same_length(self, other)
        return JointVector(self.values + JointVector.of(other).values)

    def __sub__(self, other: "JointVector") -> "JointVector":
        _require_same_length(self, other)
        return JointVector(self.values - JointVector.of(other).values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def to_list(self) -> List[float]:
        return [float(v) for v in self.values]

    def __repr__(self) -> str:
        return f"JointVector({np.round(self.values, 9).tolist()})"


def _require_same_length(a, b) -> None:
    if len(a) != len(b):
        raise ValidationError(f"关节向量维度不匹配 (dimension mismatch): {len(a)} != {len(b)}")


@dataclass(frozen=True, eq=False)
class JointSpec:
    """
    单个关节的描述

    属性:
        name: 关节名
        parent_transform: θ=0 时父连杆坐标系到本关节坐标系的固定变换
        axis: 关节坐标系中的单位旋转轴
        limits: (最小值, 最大值)，弧度
        joint_type: 关节类型，目前只支持 "revolute"
        exclude_from_residuals: 为True时子连杆不参与位姿残差（例如夹爪）
    """

    name: str
    parent_transform: RigidTransform
    axis: np.ndarray
    limits: Tuple[float, float]
    joint_type: str = "revolute"
    exclude_from_residuals: bool = False

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float).reshape(-1)
        if axis.shape != (3,):
            raise ValidationError(f"关节 '{self.name}' 的轴必须是3维向量", subject=self.name)
        norm = float(np.linalg.norm(axis))
        if abs(norm - 1.0) > AXIS_NORM_TOLERANCE:
            raise ValidationError(
                f"关节 '{self.name}' 的旋转轴不是单位向量 (non-unit axis): 范数={norm:.12f}",
                subject=self.name,
            )
        lo, hi = (float(v) for v in self.limits)
        if lo > hi:
            raise ValidationError(
                f"关节 '{self.name}' 的限位上下颠倒 (inverted limits): [{lo}, {hi}]",
                subject=self.name,
            )
        if self.joint_type not in SUPPORTED_JOINT_TYPES:
            raise ValidationError(
                f"关节 '{self.name}' 的类型 '{self.joint_type}' 不受支持，只支持 {SUPPORTED_JOINT_TYPES}",
                subject=self.name,
            )
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "limits", (lo, hi))

    def local_transform(self, theta: float) -> RigidTransform:
        """parent_transform · rot(axis, θ)"""
        return self.parent_transform.compose(
            RigidTransform(Rotation.about_axis(self.axis, theta), np.zeros(3))
        )


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """
    串联运动链

    属性:
        name: 机器人名称
        joints: 有序关节列表，长度为自由度 d
        link_names: d+1 个连杆名（基座 + 每个关节的子连杆）
    """

    name: str
    joints: Tuple[JointSpec, ...]
    link_names: Tuple[str, ...]

    def __post_init__(self):
        joints = tuple(self.joints)
        link_names = tuple(self.link_names)
        if len(joints) < 1:
            raise ValidationError("运动链至少需要一个关节")
        if len(link_names) != len(joints) + 1:
            raise ValidationError(
                f"连杆名数量应为关节数+1 ({len(joints) + 1})，实际为 {len(link_names)}"
            )
        if len(set(link_names)) != len(link_names):
            raise ValidationError(f"连杆名重复 (duplicate names): {list(link_names)}")
        joint_names = [j.name for j in joints]
        if len(set(joint_names)) != len(joint_names):
            raise ValidationError(f"关节名重复 (duplicate names): {joint_names}")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "link_names", link_names)

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def base_link_name(self) -> str:
        return self.link_names[0]

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    @property
    def residual_links(self) -> List[int]:
        """参与残差的连杆序号（1..d）"""
        return [i + 1 for i, j in enumerate(self.joints) if not j.exclude_from_residuals]

    def link_index(self, link_name: str) -> int:
        """
        连杆名到序号（基座为0）

        异常:
            ValidationError: 连杆名不存在
        """
        try:
            return self.link_names.index(link_name)
        except ValueError:
            raise ValidationError(f"运动链 '{self.name}' 中没有连杆 '{link_name}'", subject=link_name)

    def check_dimension(self, theta: Union[JointVector, Sequence[float]]) -> JointVector:
        """校验关节向量维度并转换为 JointVector"""
        theta = JointVector.of(theta)
        if len(theta) != self.dof:
            raise ValidationError(
                f"关节向量维度不匹配 (dimension mismatch): 期望 {self.dof}，实际 {len(theta)}"
            )
        return theta

    def within_limits(self, theta: Union[JointVector, Sequence[float]], tol: float = 0.0) -> bool:
        values = self.check_dimension(theta).values
        return bool(np.all(values >= self.lower_limits - tol) and np.all(values <= self.upper_limits + tol))

    def clamp(self, theta: Union[JointVector, Sequence[float]]) -> Tuple[JointVector, bool]:
        """
        把关节向量截断到限位内

        返回:
            Tuple[JointVector, bool]: 截断后的向量, 是否发生截断
        """
        values = self.check_dimension(theta).values
        clamped = np.clip(values, self.lower_limits, self.upper_limits)
        return JointVector(clamped), bool(np.any(clamped != values))

    def sample_configuration(self, rng: np.random.Generator, margin: float = 0.0) -> JointVector:
        """在收缩 margin 后的限位内均匀采样"""
        lo = self.lower_limits + margin
        hi = self.upper_limits - margin
        hi = np.maximum(hi, lo)
        return JointVector(rng.uniform(lo, hi))


def forward_kinematics(chain: KinematicChain, theta: Union[JointVector, Sequence[float]]) -> List[RigidTransform]:
    """
    正运动学

    pose_j = pose_{j-1} · parent_transform_j · rot(axis_j, θ_j)，逐个前缀复合。
    限位只作参考，正运动学对任意 θ 都有定义。

    参数:
        chain: 运动链
        theta: 关节角，长度为 d

    返回:
        List[RigidTransform]: 连杆 1..d 在基座坐标系中的位姿

    异常:
        ValidationError: 维度不匹配
    """
    theta = chain.check_dimension(theta)
    poses: List[RigidTransform] = []
    current = RigidTransform.identity()
    for joint, angle in zip(chain.joints, theta):
        current = current.compose(joint.local_transform(angle))
        poses.append(current)
    return poses


def joint_axes_in_base(chain: KinematicChain, poses: Sequence[RigidTransform]) -> Tuple[np.ndarray, np.ndarray]:
    """
    各关节轴在基座坐标系中的方向和轴上一点

    关节 i 的旋转轴经过连杆 i 坐标系原点。

    返回:
        Tuple[np.ndarray, np.ndarray]: (d, 3) 轴方向, (d, 3) 轴上点
    """
    axes = np.array([pose.rotation.matrix @ joint.axis for joint, pose in zip(chain.joints, poses)])
    origins = np.array([pose.translation for pose in poses])
    return axes, origins


def link_pose_jacobian(chain: KinematicChain, theta: Union[JointVector, Sequence[float]], link_index: int,
                       poses: Optional[Sequence[RigidTransform]] = None) -> np.ndarray:
    """
    连杆位姿对关节角的体坐标系雅可比

    第 i 列是旋量 ξ = (ω; v)，满足 T_j(θ + h·e_i) ≈ T_j(θ) · exp(h·ξ)。
    i > j 的列为零（下游关节不影响上游连杆）。

    参数:
        chain: 运动链
        theta: 关节角
        link_index: 连杆序号 j，1 <= j <= d
        poses: 已计算好的正运动学结果（可选）

    返回:
        np.ndarray: 6 x d 矩阵

    异常:
        ValidationError: 维度不匹配或序号越界
    """
    theta = chain.check_dimension(theta)
    if not 1 <= link_index <= chain.dof:
        raise ValidationError(f"连杆序号越界 (index out of range): {link_index}，有效范围 1..{chain.dof}")
    if poses is None:
        poses = forward_kinematics(chain, theta)
    axes, origins = joint_axes_in_base(chain, poses)
    target = poses[link_index - 1]
    r_t = target.rotation.matrix.T
    jac = np.zeros((6, chain.dof))
    count = link_index
    jac[:3, :count] = r_t @ axes[:count].T
    jac[3:, :count] = r_t @ np.cross(axes[:count], target.translation - origins[:count]).T
    return jac
