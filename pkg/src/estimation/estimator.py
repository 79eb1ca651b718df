#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
关节状态估计

从观测到的连杆位姿恢复关节角（非线性最小二乘），从基座标记恢复相机外参，
以及由估计值和编码器读数计算标定偏移。

每个可见连杆 j 贡献一个6维残差:

    sqrt(w_j) · [t_j(θ) - t_j^obs ; rot_weight · log(R_j^obs ᵀ R_j(θ))]

它的平方范数恰好等于 w_j · se3_distance(T_j(θ), P_j^obs, rot_weight)²。
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from src.estimation.solver import LevenbergMarquardt
from src.geometry.transforms import RigidTransform, rotation_angle, so3_log, so3_right_jacobian_inverse
from src.kinematics.chain import JointVector, KinematicChain, forward_kinematics, joint_axes_in_base
from src.observation.detections import ObservationSet
from src.observation.registry import ExoskeletonRegistry
from src.utils.exceptions import BaseUnobservedError, ConfigError, UnobservableError, ValidationError

logger = logging.getLogger(__name__)

# 奇异值比低于该值视为秩亏
RANK_RATIO_THRESHOLD = 1e-8
# 雅可比列范数低于该值视为该关节不可观测
UNOBSERVED_COLUMN_NORM = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """
    求解器配置

    属性:
        max_iterations: 最大迭代次数
        gradient_tolerance: 梯度范数阈值
        step_tolerance: 步长范数阈值
        rot_weight: 旋转权重（米/弧度），同 se3_distance
        enforce_joint_limits: 把关节限位作为盒约束
        damping_init: LM 初始阻尼比例
        max_step: 单步关节步长（弧度，L2范数）上限，None 表示不限制
        link_weights: 按连杆名的残差权重，未列出的连杆权重为1
        fallback_to_encoders: 没有可见连杆时按编码器读数输出估计
    """

    max_iterations: int = 100
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    rot_weight: float = 0.1
    enforce_joint_limits: bool = True
    damping_init: float = 1e-3
    max_step: Optional[float] = 0.5
    link_weights: Dict[str, float] = field(default_factory=dict)
    fallback_to_encoders: bool = True

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ConfigError(f"max_iterations 必须 >= 1，实际为 {self.max_iterations}")
        for name in ("gradient_tolerance", "step_tolerance", "rot_weight", "damping_init"):
            if not float(getattr(self, name)) > 0.0:
                raise ConfigError(f"{name} 必须为正，实际为 {getattr(self, name)}")
        if self.max_step is not None and not float(self.max_step) > 0.0:
            raise ConfigError(f"max_step 必须为正或为空，实际为 {self.max_step}")
        for link, weight in self.link_weights.items():
            if not float(weight) > 0.0:
                raise ConfigError(f"连杆 '{link}' 的权重必须为正，实际为 {weight}")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "SolverConfig":
        """
        从配置字典构造

        异常:
            ConfigError: 出现未知配置项或取值非法
        """
        config = dict(config or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(config) - known
        if unknown:
            raise ConfigError(f"未知的求解器配置项: {sorted(unknown)}")
        if "link_weights" in config:
            config["link_weights"] = dict(config["link_weights"] or {})
        return cls(**config)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def with_overrides(self, **overrides: Any) -> "SolverConfig":
        """返回覆盖部分字段后的新配置，值为 None 的覆盖项被忽略"""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def make_solver(self) -> LevenbergMarquardt:
        return LevenbergMarquardt(
            max_iterations=self.max_iterations,
            gradient_tolerance=self.gradient_tolerance,
            step_tolerance=self.step_tolerance,
            damping_init=self.damping_init,
            max_step=self.max_step,
        )


@dataclass(frozen=True)
class LinkResidual:
    """单个可见连杆在最优解处的残差"""

    link_index: int
    link_name: str
    translation: float
    rotation: float

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class EstimateReport:
    """
    状态估计报告

    属性:
        theta_star: 估计的关节角
        converged: 是否收敛
        iterations: 迭代次数
        final_cost: 最优解处的目标函数值
        per_link_residuals: 每个可见连杆的 (平移 米, 旋转 弧度) 残差
        camera_pose: 相机在机器人基座坐标系中的位姿（基座可见时）
        calibration_offset: 标定偏移 Δθ = θ* - θ^Enc（有编码器读数时）
        initialization: 初值来源 zeros / encoders / custom / encoder_fallback
        termination: 终止原因
        cost_trace: 被接受步的代价序列
        unobserved_joints: 不可观测、停留在初值的关节名
        rank_deficient: 可观测部分的雅可比是否秩亏
        degenerate_risk: 是否可能陷入退化极小值（只有一个连杆可见且零初值）
        warnings: 告警信息
    """

    theta_star: JointVector
    converged: bool
    iterations: int
    final_cost: float
    per_link_residuals: List[LinkResidual]
    camera_pose: Optional[RigidTransform] = None
    calibration_offset: Optional[JointVector] = None
    initialization: str = "zeros"
    termination: str = ""
    cost_trace: List[float] = field(default_factory=list)
    unobserved_joints: List[str] = field(default_factory=list)
    rank_deficient: bool = False
    degenerate_risk: bool = False
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta_star": self.theta_star.to_list(),
            "converged": self.converged,
            "iterations": self.iterations,
            "final_cost": float(self.final_cost),
            "per_link_residuals": [r.to_dict() for r in self.per_link_residuals],
            "camera_pose": None if self.camera_pose is None else self.camera_pose.to_dict(),
            "calibration_offset": None if self.calibration_offset is None else self.calibration_offset.to_list(),
            "initialization": self.initialization,
            "termination": self.termination,
            "cost_trace": [float(c) for c in self.cost_trace],
            "unobserved_joints": list(self.unobserved_joints),
            "rank_deficient": self.rank_deficient,
            "degenerate_risk": self.degenerate_risk,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "EstimateReport":
        """从报告文档还原"""
        camera = document.get("camera_pose")
        offset = document.get("calibration_offset")
        return cls(
            theta_star=JointVector.of(document["theta_star"]),
            converged=bool(document["converged"]),
            iterations=int(document["iterations"]),
            final_cost=float(document["final_cost"]),
            per_link_residuals=[LinkResidual(**r) for r in document.get("per_link_residuals", [])],
            camera_pose=None if camera is None else RigidTransform.from_dict(camera),
            calibration_offset=None if offset is None else JointVector.of(offset),
            initialization=document.get("initialization", "zeros"),
            termination=document.get("termination", ""),
            cost_trace=list(document.get("cost_trace", [])),
            unobserved_joints=list(document.get("unobserved_joints", [])),
            rank_deficient=bool(document.get("rank_deficient", False)),
            degenerate_risk=bool(document.get("degenerate_risk", False)),
            warnings=list(document.get("warnings", [])),
        )


class JointResidualModel:
    """
    关节恢复问题的残差与雅可比

    参数:
        chain: 运动链
        obs: 观测集合
        links: 参与残差的连杆序号（1..d）
        rot_weight: 旋转权重
        weights: 与 links 对应的权重
    """

    def __init__(self, chain: KinematicChain, obs: ObservationSet, links: Sequence[int], rot_weight: float,
                 weights: Sequence[float]):
        self.chain = chain
        self.links = list(links)
        self.rot_weight = rot_weight
        self.sqrt_weights = np.sqrt(np.asarray(weights, dtype=float))
        targets = [obs.pose(j) for j in self.links]
        self._target_rotations_t = [p.rotation.matrix.T for p in targets]
        self._target_translations = [p.translation for p in targets]

    def __call__(self, theta: np.ndarray):
        """
        返回 (残差, 雅可比)

        平移行: ∂t_j/∂θ_i = a_i × (t_j - p_i)
        旋转行: ∂φ_j/∂θ_i = Jr⁻¹(φ_j) · R_jᵀ a_i
        """
        poses = forward_kinematics(self.chain, theta)
        axes, origins = joint_axes_in_base(self.chain, poses)
        d = self.chain.dof
        residual = np.zeros(6 * len(self.links))
        jac = np.zeros((6 * len(self.links), d))
        for row, (j, r_obs_t, t_obs, s) in enumerate(
                zip(self.links, self._target_rotations_t, self._target_translations, self.sqrt_weights)):
            pose = poses[j - 1]
            r_j = pose.rotation.matrix
            phi = so3_log(r_obs_t @ r_j)
            base = 6 * row
            residual[base:base + 3] = s * (pose.translation - t_obs)
            residual[base + 3:base + 6] = s * self.rot_weight * phi
            jac[base:base + 3, :j] = s * np.cross(axes[:j], pose.translation - origins[:j]).T
            jac[base + 3:base + 6, :j] = s * self.rot_weight * (so3_right_jacobian_inverse(phi) @ r_j.T @ axes[:j].T)
        return residual, jac


def _visible_residual_links(chain: KinematicChain, obs: ObservationSet) -> List[int]:
    allowed = set(chain.residual_links)
    return [j for j in obs.visible_links if j in allowed]


def _link_weights(chain: KinematicChain, links: Sequence[int], cfg: SolverConfig) -> List[float]:
    unknown = set(cfg.link_weights) - set(chain.link_names[1:])
    if unknown:
        raise ConfigError(f"link_weights 中的连杆不在运动链中: {sorted(unknown)}")
    return [float(cfg.link_weights.get(chain.link_names[j], 1.0)) for j in links]


def recover_joints(chain: KinematicChain, obs: ObservationSet,
                   init: Optional[Union[JointVector, Sequence[float]]] = None,
                   cfg: Optional[SolverConfig] = None, initialization: Optional[str] = None) -> EstimateReport:
    """
    由观测连杆位姿恢复关节角

    θ* = argmin Σ_j w_j · d(T_j(θ), P_j^obs)²，对可见连杆求和。

    参数:
        chain: 运动链
        obs: 机器人基座坐标系下的观测
        init: 初值，缺省为零向量
        cfg: 求解器配置
        initialization: 报告中记录的初值来源（缺省按 init 是否给出推断）

    返回:
        EstimateReport: 估计报告

    异常:
        UnobservableError: 没有可见连杆
        ValidationError: 初值维度不匹配
        NumericalFailureError: 迭代中代价出现非有限值
    """
    cfg = cfg or SolverConfig()
    links = _visible_residual_links(chain, obs)
    if not links:
        raise UnobservableError("没有可见连杆，关节状态不可观测 (unobservable)")
    if len(obs.poses) != chain.dof:
        raise ValidationError(f"观测连杆数 {len(obs.poses)} 与自由度 {chain.dof} 不一致 (dimension mismatch)")

    if init is None:
        theta0 = np.zeros(chain.dof)
        label = initialization or "zeros"
    else:
        theta0 = chain.check_dimension(init).as_array()
        label = initialization or "custom"

    warnings: List[str] = []
    lower, upper = chain.lower_limits, chain.upper_limits
    bounds = None
    if cfg.enforce_joint_limits:
        bounds = (lower, upper)
        if np.any(theta0 < lower) or np.any(theta0 > upper):
            warnings.append("初值超出关节限位，已截断")
            logger.warning("初值超出关节限位，已截断到限位内")

    model = JointResidualModel(chain, obs, links, cfg.rot_weight, _link_weights(chain, links, cfg))
    result = cfg.make_solver().solve(model, theta0, bounds)
    theta_star = JointVector(result.x)

    poses = forward_kinematics(chain, theta_star)
    residuals = []
    for j in links:
        pose, target = poses[j - 1], obs.pose(j)
        residuals.append(LinkResidual(
            link_index=j,
            link_name=chain.link_names[j],
            translation=float(np.linalg.norm(pose.translation - target.translation)),
            rotation=rotation_angle(target.rotation.matrix.T @ pose.rotation.matrix),
        ))

    column_norms = np.linalg.norm(result.jacobian, axis=0)
    observed = column_norms > UNOBSERVED_COLUMN_NORM
    unobserved = [chain.joints[i].name for i in range(chain.dof) if not observed[i]]
    rank_deficient = False
    if np.any(observed):
        singular = np.linalg.svd(result.jacobian[:, observed], compute_uv=False)
        rank_deficient = bool(singular[-1] < RANK_RATIO_THRESHOLD * singular[0])
    if unobserved:
        warnings.append(f"关节 {unobserved} 不可观测，停留在初值")
    if rank_deficient:
        warnings.append("可观测部分的雅可比秩亏，解不唯一")
    degenerate_risk = len(links) == 1 and label == "zeros"
    if degenerate_risk:
        warnings.append("只有一个连杆可见且使用零初值，可能陷入退化极小值 (degenerate minimum)")
    if not result.converged:
        warnings.append(f"求解未收敛: {result.termination}")
    for message in warnings:
        logger.warning(message)

    logger.info(
        f"关节恢复完成: 可见连杆 {links}，初值 {label}，迭代 {result.iterations}，"
        f"代价 {result.cost:.3e}，收敛={result.converged} ({result.termination})"
    )
    return EstimateReport(
        theta_star=theta_star,
        converged=result.converged,
        iterations=result.iterations,
        final_cost=result.cost,
        per_link_residuals=residuals,
        camera_pose=obs.camera_pose,
        initialization=label,
        termination=result.termination,
        cost_trace=result.cost_trace,
        unobserved_joints=unobserved,
        rank_deficient=rank_deficient,
        degenerate_risk=degenerate_risk,
        warnings=warnings,
    )


def recover_camera_pose(obs: ObservationSet, reg: ExoskeletonRegistry) -> RigidTransform:
    """
    由基座标记恢复相机外参

    T^robot_cam = (T^cam_aruco · T^aruco_exo · T^exo_robot)⁻¹

    异常:
        BaseUnobservedError: 基座标记未观测到
    """
    if obs.base_detection is None:
        raise BaseUnobservedError("基座标记未观测到 (base unobserved)，无法恢复相机外参")
    entry = reg.entry_for_marker(obs.base_detection.marker_id)
    base_in_camera = obs.base_detection.t_cam_aruco.compose(entry.t_aruco_exo).compose(entry.t_exo_link)
    return base_in_camera.inverse()


def compute_calibration(theta_star: Union[JointVector, Sequence[float]],
                        theta_enc: Union[JointVector, Sequence[float]]) -> JointVector:
    """
    标定偏移 Δθ = θ* - θ^Enc

    异常:
        ValidationError: 维度不匹配
    """
    return JointVector.of(theta_star) - JointVector.of(theta_enc)


def encoder_fallback_report(chain: KinematicChain, obs: ObservationSet, encoders: JointVector) -> EstimateReport:
    """没有可见连杆时，以编码器读数作为估计结果"""
    message = "没有可见连杆，估计结果等于编码器读数 (no visible links; estimate equals encoder readings)"
    logger.warning(message)
    encoders = chain.check_dimension(encoders)
    return EstimateReport(
        theta_star=encoders,
        converged=False,
        iterations=0,
        final_cost=0.0,
        per_link_residuals=[],
        camera_pose=obs.camera_pose,
        calibration_offset=JointVector.zeros(chain.dof),
        initialization="encoder_fallback",
        termination="no_visible_links",
        unobserved_joints=[j.name for j in chain.joints],
        warnings=[message],
    )


def joint_error(a: Union[JointVector, Sequence[float]], b: Union[JointVector, Sequence[float]]) -> float:
    """两个关节向量之差的L2范数"""
    return float(math.sqrt(float(np.sum((JointVector.of(a) - JointVector.of(b)).values ** 2))))
