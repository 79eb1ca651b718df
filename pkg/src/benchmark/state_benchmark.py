#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
状态估计基准测试

每次试验: 从随机起点把仿真机器人指令到随机目标，读取编码器、生成一帧检测，
比较三种方法的末端位姿误差:

    encoder-only  编码器读数直接做正运动学
    ours-no-enc   视觉估计，零初值
    ours-enc      视觉估计，编码器初值

遮挡扫描: 除末端连杆外随机排列其余连杆，可见集合随可见数嵌套增长，
同一帧检测在各遮挡级别间共享噪声。可见数为 0 时只有基座可见，
估计退回编码器读数。
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.benchmark.metrics import BenchmarkSummary, summarize_levels, summarize_records
from src.estimation.estimator import SolverConfig, recover_camera_pose
from src.estimation.pipeline import estimate_observation
from src.geometry.transforms import pose_error
from src.kinematics.chain import forward_kinematics
from src.observation.detections import build_observation_set
from src.simulation.scenario import Scenario
from src.utils.exceptions import ConfigError, StateEstimationError

logger = logging.getLogger(__name__)

STATE_METHODS = ("encoder-only", "ours-no-enc", "ours-enc")


@dataclass(frozen=True)
class StateTrialSpec:
    """单次试验的输入，可以被序列化到工作进程"""

    scenario: Scenario
    trial: int
    seed_sequence: np.random.SeedSequence
    cfg: SolverConfig
    levels: tuple
    target_margin: float
    upside_down: bool = False


@dataclass
class StateBenchmarkResult:
    """状态估计基准测试结果"""

    seed: int
    trials: int
    summary: BenchmarkSummary
    occlusion: Dict[int, BenchmarkSummary] = field(default_factory=dict)
    records: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ratio(self) -> Optional[float]:
        """视觉估计（编码器初值）与纯编码器的末端平移误差中位数之比"""
        enc = self.summary.methods.get("encoder-only")
        ours = self.summary.methods.get("ours-enc")
        if enc is None or ours is None or not enc.median_translation or ours.median_translation is None:
            return None
        return ours.median_translation / enc.median_translation

    def to_dict(self) -> Dict[str, Any]:
        return {
            "summary": self.summary.to_dict(),
            "occlusion": {str(level): s.to_dict() for level, s in sorted(self.occlusion.items())},
            "ratio_ours_enc_to_encoder_only": self.ratio,
        }


def _nested_visible_sets(dof: int, levels: Sequence[int], rng: np.random.Generator) -> Dict[int, List[int]]:
    """可见连杆集合，末端连杆总是最先可见，其余按随机顺序加入"""
    order = [dof] + [int(j) for j in rng.permutation(np.arange(1, dof))]
    return {k: sorted(order[:k]) for k in levels}


def _joint_columns(theta: np.ndarray, truth: np.ndarray) -> Dict[str, float]:
    err = theta - truth
    cols = {f"joint_err_{i}": float(e) for i, e in enumerate(err)}
    cols["joint_l2"] = float(np.linalg.norm(err))
    return cols


def run_state_trial(spec: StateTrialSpec) -> List[Dict[str, Any]]:
    """
    执行一次试验

    返回:
        List[Dict[str, Any]]: 每个 (遮挡级别, 方法) 一行记录
    """
    scenario = spec.scenario
    chain = scenario.chain
    trial_seq, robot_seq = spec.seed_sequence.spawn(2)
    rng = np.random.default_rng(trial_seq)
    start = chain.sample_configuration(rng, spec.target_margin)
    target = chain.sample_configuration(rng, spec.target_margin)

    camera_pose = scenario.upside_down().camera_pose if spec.upside_down else scenario.camera_pose
    robot = scenario.build_robot(int(robot_seq.generate_state(1)[0]), initial_theta=start, camera_pose=camera_pose)
    robot.command(target)
    truth = robot.true_theta.as_array()
    true_ee = forward_kinematics(chain, truth)[-1]
    encoders = robot.read_encoders()
    detections = robot.simulate_detections()
    visible_sets = _nested_visible_sets(chain.dof, spec.levels, rng)

    rows: List[Dict[str, Any]] = []
    enc_dt, enc_dr = pose_error(forward_kinematics(chain, encoders)[-1], true_ee)
    for level in spec.levels:
        rows.append(dict(trial=spec.trial, level=level, method="encoder-only", ok=True, flagged=False,
                         translation=enc_dt, rotation=enc_dr, camera_translation=None, camera_rotation=None,
                         **_joint_columns(encoders.as_array(), truth)))

    obs_full = build_observation_set(detections, scenario.registry, chain)
    camera = recover_camera_pose(obs_full, scenario.registry)
    cam_dt, cam_dr = pose_error(camera, robot.camera_pose)

    for level, visible in visible_sets.items():
        obs = obs_full.masked(j for j in range(1, chain.dof + 1) if j not in visible)
        for method, use_encoders in (("ours-no-enc", False), ("ours-enc", True)):
            row = dict(trial=spec.trial, level=level, method=method, camera_translation=cam_dt, camera_rotation=cam_dr)
            try:
                estimate = estimate_observation(chain, obs, encoders, spec.cfg, init_from_encoders=use_encoders)
                report = estimate.report
                dt, dr = pose_error(forward_kinematics(chain, report.theta_star)[-1], true_ee)
                row.update(ok=True, flagged=bool(report.degenerate_risk), translation=dt, rotation=dr,
                           **_joint_columns(report.theta_star.as_array(), truth))
            except StateEstimationError as e:
                logger.warning(f"试验 {spec.trial} 可见 {level} 方法 {method} 失败: {e}")
                row.update(ok=False, flagged=False, translation=None, rotation=None, joint_l2=None,
                           **{f"joint_err_{i}": None for i in range(chain.dof)})
            rows.append(row)
    return rows


def run_state_benchmark(scenario: Scenario, trials: int, seed: int, cfg: Optional[SolverConfig] = None,
                        occlusion_levels: Optional[Sequence[int]] = None, upside_down: bool = False,
                        workers: int = 1, target_margin: float = 0.25) -> StateBenchmarkResult:
    """
    运行状态估计基准测试

    参数:
        scenario: 仿真场景（噪声配置）
        trials: 试验次数
        seed: 随机种子，每次试验使用 SeedSequence(seed) 派生的子种子
        cfg: 求解器配置
        occlusion_levels: 遮挡扫描的可见连杆数，None 表示只测全部可见
        upside_down: 基座倒装变体
        workers: 并行进程数，1 为串行
        target_margin: 目标采样时相对关节限位的收缩量

    返回:
        StateBenchmarkResult: 汇总结果（与并行方式无关）
    """
    if trials < 1:
        raise ConfigError(f"试验次数必须 >= 1，实际为 {trials}")
    cfg = cfg or SolverConfig()
    dof = scenario.chain.dof
    levels = sorted(set(occlusion_levels or ()) | {dof})
    if any(k < 0 or k > dof for k in levels):
        raise ConfigError(f"可见连杆数必须在 0..{dof} 内: {levels}")
    children = np.random.SeedSequence(seed).spawn(trials)
    specs = [StateTrialSpec(scenario, i, child, cfg, tuple(levels), target_margin, upside_down)
             for i, child in enumerate(children)]

    logger.info(f"状态估计基准测试: 场景 {scenario.name}，{trials} 次试验，种子 {seed}，可见级别 {levels}，"
                f"倒装={upside_down}，进程数 {workers}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            batches = list(executor.map(run_state_trial, specs))
    else:
        batches = [run_state_trial(spec) for spec in specs]
    records = [row for batch in batches for row in batch]

    full = [r for r in records if r["level"] == dof]
    summary = summarize_records(full, seed, trials)
    occlusion = summarize_levels(records, seed, trials) if occlusion_levels else {}
    result = StateBenchmarkResult(seed, trials, summary, occlusion, records)
    logger.info(f"ours-enc / encoder-only 末端平移误差中位数之比: {result.ratio}")
    return result
