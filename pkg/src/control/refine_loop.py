#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
带状态估计的控制回路

每个目标 θ^Targ 依次执行:
    1. 在线标定: 由当前帧估计 θ*，Δθ = θ* - θ^Enc
    2. 朴素移动: 下发编码器指令 θ^Targ - Δθ
    3. 状态估计: 估计到达的状态 θ*′
    4. 增量修正: 关节目标 θ^Targ - (θ*′ - θ^Targ)，换算为编码器指令后下发

三种模式: naive（只下发目标），calibrate-only（1-3），full（1-4）。
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from src.control.robot_interface import CommandOutcome, RobotInterface
from src.estimation.estimator import EstimateReport, SolverConfig, joint_error
from src.estimation.pipeline import estimate_frame
from src.geometry.transforms import RigidTransform, pose_error
from src.kinematics.chain import JointVector, forward_kinematics
from src.utils.exceptions import ConfigError, ControlStepError, StateEstimationError, ValidationError

logger = logging.getLogger(__name__)

MODES = ("naive", "calibrate-only", "full")
RECALIBRATE_OPTIONS = ("step_start", "after_delta")


@dataclass(frozen=True)
class ControlConfig:
    """
    控制回路配置

    属性:
        delta_iterations: 每个目标的增量修正次数
        recalibrate: step_start 在每步开始时由当前帧重新标定；
            after_delta 在修正之后估计标定偏移，留给下一个目标使用
    """

    delta_iterations: int = 1
    recalibrate: str = "step_start"

    def __post_init__(self):
        if int(self.delta_iterations) < 1:
            raise ConfigError(f"delta_iterations 必须 >= 1，实际为 {self.delta_iterations}")
        if self.recalibrate not in RECALIBRATE_OPTIONS:
            raise ConfigError(f"recalibrate 必须是 {list(RECALIBRATE_OPTIONS)} 之一，实际为 {self.recalibrate}")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "ControlConfig":
        config = dict(config or {})
        unknown = set(config) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"未知的控制配置项: {sorted(unknown)}")
        return cls(**config)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class ReachedState:
    """
    一次移动之后到达的状态

    ground truth 字段只有仿真机器人才有，回放/实物为 None。
    """

    command: JointVector
    clamped: bool
    theta: Optional[JointVector] = None
    end_effector: Optional[RigidTransform] = None
    translation_error: Optional[float] = None
    rotation_error: Optional[float] = None
    joint_error: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command.to_list(),
            "clamped": self.clamped,
            "theta": None if self.theta is None else self.theta.to_list(),
            "end_effector": None if self.end_effector is None else self.end_effector.to_dict(),
            "translation_error": self.translation_error,
            "rotation_error": self.rotation_error,
            "joint_error": self.joint_error,
        }


@dataclass
class ControlStepReport:
    """
    单个目标的控制报告

    refined 只在执行了增量修正时存在。
    """

    step: int
    mode: str
    target: JointVector
    naive: ReachedState
    calibration_offset: Optional[JointVector] = None
    estimate: Optional[JointVector] = None
    estimate_converged: Optional[bool] = None
    delta_targets: List[JointVector] = field(default_factory=list)
    refined: Optional[ReachedState] = None
    next_calibration: Optional[JointVector] = None
    warnings: List[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def final(self) -> ReachedState:
        return self.refined if self.refined is not None else self.naive

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "mode": self.mode,
            "target": self.target.to_list(),
            "calibration_offset": None if self.calibration_offset is None else self.calibration_offset.to_list(),
            "naive": self.naive.to_dict(),
            "estimate": None if self.estimate is None else self.estimate.to_list(),
            "estimate_converged": self.estimate_converged,
            "delta_targets": [d.to_list() for d in self.delta_targets],
            "refined": None if self.refined is None else self.refined.to_dict(),
            "next_calibration": None if self.next_calibration is None else self.next_calibration.to_list(),
            "warnings": list(self.warnings),
            "error": self.error,
        }


@dataclass
class EpisodeReport:
    """一个回合的控制报告和汇总统计"""

    mode: str
    steps: List[ControlStepReport]
    statistics: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {"mode": self.mode, "steps": [s.to_dict() for s in self.steps], "statistics": dict(self.statistics)}


def _measure(robot: RobotInterface, outcome: CommandOutcome, target: JointVector,
             target_pose: RigidTransform) -> ReachedState:
    """记录移动结果，仿真机器人附带与目标的真实误差"""
    theta = robot.true_state()
    if theta is None:
        return ReachedState(outcome.commanded, outcome.clamped)
    reached = forward_kinematics(robot.chain, theta)[-1]
    dt, dr = pose_error(reached, target_pose)
    return ReachedState(outcome.commanded, outcome.clamped, theta, reached, dt, dr, joint_error(theta, target))


def _to_encoder_command(joint_target: JointVector, calibration: Optional[JointVector]) -> JointVector:
    """关节目标换算为编码器指令: θ - Δθ"""
    return joint_target if calibration is None else joint_target - calibration


def estimate_state(robot: RobotInterface, cfg: Optional[SolverConfig] = None,
                   confidence_threshold: float = 0.0) -> Tuple[EstimateReport, JointVector]:
    """
    由机器人当前帧估计关节状态（编码器初值）

    控制回路中不退回编码器读数，没有可见连杆时直接报错。

    返回:
        Tuple[EstimateReport, JointVector]: 估计报告（含标定偏移）, 编码器读数
    """
    cfg = (cfg or SolverConfig()).with_overrides(fallback_to_encoders=False)
    frame = robot.acquire_detections()
    encoders = robot.read_encoders()
    estimate = estimate_frame(robot.chain, robot.registry, frame.detections, encoders, cfg,
                              init_from_encoders=True, confidence_threshold=confidence_threshold,
                              frame_id=frame.frame_id)
    return estimate.report, encoders


def calibrate(robot: RobotInterface, cfg: Optional[SolverConfig] = None,
              confidence_threshold: float = 0.0) -> JointVector:
    """在线标定，返回 Δθ = θ* - θ^Enc"""
    report, _ = estimate_state(robot, cfg, confidence_threshold)
    logger.info(f"在线标定偏移: {report.calibration_offset}")
    return report.calibration_offset


def naive_move(robot: RobotInterface, target: Union[JointVector, Sequence[float]], step: int = 0) -> ControlStepReport:
    """直接下发目标，不标定、不估计"""
    target = robot.chain.check_dimension(target)
    target_pose = forward_kinematics(robot.chain, target)[-1]
    outcome = robot.command(target)
    return ControlStepReport(step=step, mode="naive", target=target, naive=_measure(robot, outcome, target, target_pose))


def refine_to_target(robot: RobotInterface, target: Union[JointVector, Sequence[float]],
                     cfg: Optional[SolverConfig] = None, use_delta: bool = True,
                     control_cfg: Optional[ControlConfig] = None, calibration: Optional[JointVector] = None,
                     calibrate_first: bool = True, step: int = 0, confidence_threshold: float = 0.0) -> ControlStepReport:
    """
    把机器人移动到目标关节状态

    参数:
        robot: 仿真或回放机器人
        target: 目标关节角 θ^Targ
        cfg: 求解器配置
        use_delta: 是否执行增量修正
        control_cfg: 控制回路配置
        calibration: 已知的标定偏移（calibrate_first 为 False 或标定失败时使用）
        calibrate_first: 移动前由当前帧重新标定
        step: 步序号
        confidence_threshold: 检测置信度阈值

    返回:
        ControlStepReport: 控制报告

    异常:
        ControlStepError: 朴素移动之后的状态估计失败，report 中保留朴素移动结果
    """
    cfg = cfg or SolverConfig()
    control_cfg = control_cfg or ControlConfig()
    chain = robot.chain
    target = chain.check_dimension(target)
    if not chain.within_limits(target):
        logger.warning(f"目标 {target} 超出关节限位，指令将被截断")
    target_pose = forward_kinematics(chain, target)[-1]
    warnings: List[str] = []

    offset = calibration
    if calibrate_first:
        try:
            offset = calibrate(robot, cfg, confidence_threshold)
        except StateEstimationError as e:
            message = f"在线标定失败，沿用已有标定偏移: {e}"
            logger.warning(message)
            warnings.append(message)

    outcome = robot.command(_to_encoder_command(target, offset))
    report = ControlStepReport(
        step=step,
        mode="full" if use_delta else "calibrate-only",
        target=target,
        naive=_measure(robot, outcome, target, target_pose),
        calibration_offset=offset,
        warnings=warnings,
    )

    joint_target = target
    last_estimate: Optional[EstimateReport] = None
    rounds = control_cfg.delta_iterations if use_delta else 0
    for i in range(rounds + 1):
        try:
            last_estimate, _ = estimate_state(robot, cfg, confidence_threshold)
        except StateEstimationError as e:
            report.error = str(e)
            logger.warning(f"第 {step} 步状态估计失败: {e}")
            raise ControlStepError(e, report) from e
        if i == 0:
            report.estimate = last_estimate.theta_star
            report.estimate_converged = last_estimate.converged
        if i == rounds:
            break
        joint_target = joint_target - (last_estimate.theta_star - target)
        report.delta_targets.append(joint_target)
        outcome = robot.command(_to_encoder_command(joint_target, offset))
        report.refined = _measure(robot, outcome, target, target_pose)
        # 最后一次修正之后的估计只在需要为下一步标定时才进行
        if i == rounds - 1 and control_cfg.recalibrate != "after_delta":
            break
    if control_cfg.recalibrate == "after_delta" and last_estimate is not None:
        report.next_calibration = last_estimate.calibration_offset

    logger.info(
        f"第 {step} 步完成: 朴素误差 {report.naive.translation_error}，"
        f"修正后误差 {None if report.refined is None else report.refined.translation_error}"
    )
    return report


def episode_statistics(steps: Sequence[ControlStepReport]) -> Dict[str, Any]:
    """汇总一个回合的最终误差（修正后，没有修正时为朴素移动）"""
    rows = [
        {"translation": s.final.translation_error, "rotation": s.final.rotation_error, "joint": s.final.joint_error}
        for s in steps if s.error is None and s.final.translation_error is not None
    ]
    stats: Dict[str, Any] = {"steps": len(steps), "failures": sum(1 for s in steps if s.error is not None),
                             "measured": len(rows)}
    if not rows:
        return stats
    df = pd.DataFrame(rows)
    stats.update({
        "median_translation_error": float(df["translation"].median()),
        "p90_translation_error": float(df["translation"].quantile(0.9)),
        "median_rotation_error": float(df["rotation"].median()),
        "p90_rotation_error": float(df["rotation"].quantile(0.9)),
        "rms_joint_error": float((df["joint"] ** 2).mean() ** 0.5),
    })
    return stats


def run_episode(robot: RobotInterface, targets: Sequence[Union[JointVector, Sequence[float]]],
                cfg: Optional[SolverConfig] = None, mode: str = "full",
                control_cfg: Optional[ControlConfig] = None, confidence_threshold: float = 0.0) -> EpisodeReport:
    """
    依次把机器人移动到每个目标

    机器人状态（回差历史）跨步保留。单步的估计失败被记录，回合继续。

    异常:
        ConfigError: 未知模式
        ValidationError: 目标维度不匹配或超出关节限位
    """
    if mode not in MODES:
        raise ConfigError(f"未知的控制模式: {mode}，可选 {list(MODES)}")
    control_cfg = control_cfg or ControlConfig()
    chain = robot.chain
    checked = [chain.check_dimension(t) for t in targets]
    for k, target in enumerate(checked):
        if not chain.within_limits(target):
            raise ValidationError(f"第 {k} 个目标 {target} 超出关节限位")

    steps: List[ControlStepReport] = []
    carried: Optional[JointVector] = None
    for k, target in enumerate(checked):
        if mode == "naive":
            steps.append(naive_move(robot, target, k))
            continue
        calibrate_first = control_cfg.recalibrate == "step_start" or carried is None
        try:
            report = refine_to_target(robot, target, cfg, mode == "full", control_cfg, carried, calibrate_first, k,
                                      confidence_threshold)
        except ControlStepError as e:
            report = e.report
        report.mode = mode
        if report.next_calibration is not None:
            carried = report.next_calibration
        elif calibrate_first and report.calibration_offset is not None:
            carried = report.calibration_offset
        steps.append(report)

    statistics = episode_statistics(steps)
    logger.info(f"回合完成 ({mode}): {statistics}")
    return EpisodeReport(mode, steps, statistics)
