#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
命令行入口

子命令:
    estimate            由一帧检测估计关节角、外参和标定偏移
    extrinsics          由基座标记恢复相机外参
    calibrate           由一帧检测和编码器读数计算标定偏移
    simulate            执行仿真场景，输出可回放的仿真日志
    benchmark-state     状态估计基准测试（遮挡扫描、倒装变体）
    benchmark-control   控制基准测试（naive / no-delta / delta）
    validate            校验任意输入文件

退出码:
    0 成功；1 未预期的错误；2 命令行用法错误；3 解析/校验错误或未知标记；
    4 基座未观测或没有可见连杆；5 估计未收敛；6 数值失败或对数映射分支不唯一

报告文档写到 stdout（--format json）或 --out 指定的文件，表格写到 stdout，
诊断信息只写到 stderr。
"""

import functools
import logging
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np
import pandas as pd

from src import __version__
from src.benchmark.control_benchmark import METHOD_NAMES, run_control_benchmark
from src.benchmark.metrics import BenchmarkConfig, summary_table
from src.benchmark.state_benchmark import STATE_METHODS, run_state_benchmark
from src.control.refine_loop import MODES, ControlConfig
from src.control.replay_robot import ReplayRobot
from src.estimation.estimator import SolverConfig, recover_camera_pose
from src.estimation.pipeline import estimate_frame, link_overlay
from src.kinematics.chain import JointVector, KinematicChain
from src.kinematics.chain_loader import BUNDLED_CHAIN_PATH, chain_from_dict, load_chain_file
from src.observation.detections import DetectionFrame, build_observation_set, load_encoder_file, parse_encoders
from src.observation.registry import BUNDLED_REGISTRY_PATH, ExoskeletonRegistry, load_registry_file
from src.simulation.noise import PROFILES, NoiseModel
from src.simulation.scenario import (
    Scenario,
    default_scenario,
    load_scenario_file,
    run_scenario,
    scenario_from_dict,
    simulation_log_document,
)
from src.utils.config_manager import DEFAULT_CONFIG, ConfigManager, config_manager, setup_logging
from src.utils.exceptions import ConfigError, ParseError, StateEstimationError, ValidationError
from src.utils.json_io import dumps_document, load_document, report_document, save_document

logger = logging.getLogger(__name__)

EXIT_UNEXPECTED = 1
EXIT_NOT_CONVERGED = 5

FILE_KINDS = ("auto", "chain", "registry", "detections", "encoders", "scenario", "simulation-log", "config")


def handle_errors(func):
    """把工具包异常映射为退出码，诊断信息写到 stderr"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except StateEstimationError as e:
            logger.debug("命令失败", exc_info=True)
            click.echo(f"错误: {e}", err=True)
            sys.exit(e.exit_code)
        except Exception as e:
            logger.exception(f"未预期的错误: {e}")
            click.echo(f"未预期的错误: {e}", err=True)
            sys.exit(EXIT_UNEXPECTED)

    return wrapper


def _emit(document: Dict[str, Any], out: Optional[str], fmt: str, table: str) -> None:
    if out:
        save_document(document, out)
        logger.info(f"报告已写入 {out}")
    if fmt == "table":
        click.echo(table)
    else:
        click.echo(dumps_document(document), nl=False)


def _manager(ctx: click.Context) -> ConfigManager:
    return ctx.obj if isinstance(ctx.obj, ConfigManager) else config_manager


def _solver_config(ctx: click.Context, **overrides: Any) -> SolverConfig:
    return SolverConfig.from_dict(_manager(ctx).get_solver_config()).with_overrides(**overrides)


def _confidence_threshold(ctx: click.Context, value: Optional[float]) -> float:
    if value is not None:
        return value
    return float(_manager(ctx).get_observation_config().get("confidence_threshold", 0.0))


def _load_robot(chain_path: Optional[str], registry_path: Optional[str]) -> Tuple[KinematicChain, ExoskeletonRegistry]:
    chain = load_chain_file(chain_path or BUNDLED_CHAIN_PATH)
    registry = load_registry_file(registry_path or BUNDLED_REGISTRY_PATH, chain)
    return chain, registry


def _is_simulation_log(document: Any) -> bool:
    return isinstance(document, dict) and (document.get("kind") == "simulation" or "steps" in document)


def _load_frame(path: str, chain: KinematicChain, registry: ExoskeletonRegistry,
                step: Optional[int]) -> Tuple[DetectionFrame, Optional[JointVector]]:
    """
    读取一帧检测

    path 可以是单帧检测文件，也可以是 simulate 输出的仿真日志（此时取第 step 步，
    并同时返回该步的编码器读数）。
    """
    document = load_document(path)
    if _is_simulation_log(document):
        robot = ReplayRobot.from_simulation_log(document, chain, registry, source=path)
        index = 0 if step is None else step
        if not 0 <= index < robot.remaining:
            raise ValidationError(f"--step {index} 越界，仿真日志共 {robot.remaining} 步")
        for _ in range(index + 1):
            frame = robot.acquire_detections()
        return frame, robot.read_encoders()
    if step is not None:
        logger.warning("--step 只对仿真日志有效，已忽略")
    return DetectionFrame.from_dict(document, source=path), None


def _encoders(path: Optional[str], fallback: Optional[JointVector], chain: KinematicChain) -> Optional[JointVector]:
    if path:
        return load_encoder_file(path, chain.dof)
    return fallback


def _scenario(ctx: click.Context, scenario_path: Optional[str], profile: Optional[str]) -> Scenario:
    if scenario_path and profile:
        raise click.UsageError("--scenario 和 --profile 只能指定一个")
    if scenario_path:
        return load_scenario_file(scenario_path)
    if profile:
        return default_scenario(profile)
    simulation = _manager(ctx).get_simulation_config()
    return replace(default_scenario(simulation.get("profile", "low_cost")), noise_config=dict(simulation))


def _benchmark_config(ctx: click.Context, **overrides: Any) -> BenchmarkConfig:
    config = BenchmarkConfig.from_dict(_manager(ctx).get_benchmark_config())
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})


def _joint_table(chain: KinematicChain, columns: Dict[str, Optional[JointVector]]) -> str:
    data = {"joint": [j.name for j in chain.joints]}
    for name, values in columns.items():
        if values is not None:
            data[name] = values.to_list()
    return pd.DataFrame(data).to_string(index=False, float_format=lambda v: f"{v:.5f}")


# 命令行组


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="输出DEBUG级别日志")
@click.option("--config-dir", type=click.Path(file_okay=False), default=None,
              help="配置目录（包含 config.yaml），默认为仓库的 configs/")
@click.version_option(version=__version__, prog_name="marker-state")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, config_dir: Optional[str]):
    """基于标记的机器人运动学状态估计工具"""
    manager = ConfigManager(config_dir) if config_dir else config_manager
    setup_logging(manager.get_logging_config(), verbose)
    ctx.obj = manager


def _frame_options(func):
    func = click.option("--step", type=int, default=None, help="detections 为仿真日志时使用的步序号（默认0）")(func)
    func = click.option("--detections", required=True, type=click.Path(dir_okay=False),
                        help="检测帧文件或仿真日志")(func)
    func = click.option("--registry", type=click.Path(dir_okay=False), default=None,
                        help="外骨骼注册表（默认随仓库附带的示例）")(func)
    func = click.option("--chain", type=click.Path(dir_okay=False), default=None,
                        help="运动链描述文件（默认随仓库附带的示例）")(func)
    return func


def _output_options(func):
    func = click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json",
                        help="stdout 输出格式")(func)
    func = click.option("--out", type=click.Path(dir_okay=False), default=None, help="报告输出文件")(func)
    return func


@cli.command()
@_frame_options
@click.option("--encoders", type=click.Path(dir_okay=False), default=None, help="编码器读数文件")
@click.option("--init-from-encoders/--zeros", default=True, help="以编码器读数或零向量作为初值")
@click.option("--compare-init", is_flag=True, help="同时输出零初值和编码器初值两份报告")
@click.option("--rot-weight", type=float, default=None, help="旋转残差权重")
@click.option("--max-iterations", type=int, default=None, help="最大迭代次数")
@click.option("--confidence-threshold", type=float, default=None, help="检测置信度阈值")
@_output_options
@click.pass_context
@handle_errors
def estimate(ctx, chain, registry, detections, step, encoders, init_from_encoders, compare_init, rot_weight,
             max_iterations, confidence_threshold, out, fmt):
    """
    由一帧检测估计关节角、相机外参和标定偏移

    只有基座可见时: 给出编码器读数则输出退回编码器读数的报告并以 5 退出（有结果但未收敛），
    没有编码器读数则无法给出估计，以 4 退出（不可观测）。
    """
    kinematic_chain, exo_registry = _load_robot(chain, registry)
    frame, log_encoders = _load_frame(detections, kinematic_chain, exo_registry, step)
    readings = _encoders(encoders, log_encoders, kinematic_chain)
    cfg = _solver_config(ctx, rot_weight=rot_weight, max_iterations=max_iterations)

    result = estimate_frame(kinematic_chain, exo_registry, frame.detections, readings, cfg,
                            init_from_encoders=init_from_encoders, compare_init=compare_init,
                            confidence_threshold=_confidence_threshold(ctx, confidence_threshold),
                            frame_id=frame.frame_id)
    report = result.report
    body = result.to_dict()
    body["encoders"] = None if readings is None else readings.to_list()
    body["overlay"] = link_overlay(kinematic_chain, report.theta_star, report.camera_pose)

    table = _joint_table(kinematic_chain, {"theta_star": report.theta_star, "encoders": readings,
                                           "calibration": report.calibration_offset})
    table += (f"\nconverged={report.converged} iterations={report.iterations} "
              f"final_cost={report.final_cost:.3e} termination={report.termination}")
    _emit(report_document("estimate", body, cfg), out, fmt, table)

    for warning in report.warnings:
        click.echo(f"警告: {warning}", err=True)
    if not report.converged:
        click.echo(f"估计未收敛: {report.termination}", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


@cli.command()
@_frame_options
@click.option("--confidence-threshold", type=float, default=None, help="检测置信度阈值")
@_output_options
@click.pass_context
@handle_errors
def extrinsics(ctx, chain, registry, detections, step, confidence_threshold, out, fmt):
    """由基座标记恢复相机在机器人坐标系中的位姿"""
    kinematic_chain, exo_registry = _load_robot(chain, registry)
    frame, _ = _load_frame(detections, kinematic_chain, exo_registry, step)
    threshold = _confidence_threshold(ctx, confidence_threshold)
    obs = build_observation_set(frame.detections, exo_registry, kinematic_chain, threshold, frame.frame_id)
    camera_pose = recover_camera_pose(obs, exo_registry)

    body = {
        "frame_id": frame.frame_id,
        "camera_pose": camera_pose.to_dict(),
        "base_marker_id": obs.base_detection.marker_id,
    }
    table = pd.DataFrame({
        "component": ["x", "y", "z", "qw", "qx", "qy", "qz"],
        "value": list(camera_pose.translation) + list(camera_pose.rotation.as_quaternion()),
    }).to_string(index=False, float_format=lambda v: f"{v:.6f}")
    _emit(report_document("extrinsics", body, {"confidence_threshold": threshold}), out, fmt, table)


@cli.command()
@_frame_options
@click.option("--encoders", type=click.Path(dir_okay=False), default=None,
              help="编码器读数文件（detections 为仿真日志时可省略）")
@click.option("--rot-weight", type=float, default=None, help="旋转残差权重")
@click.option("--confidence-threshold", type=float, default=None, help="检测置信度阈值")
@_output_options
@click.pass_context
@handle_errors
def calibrate(ctx, chain, registry, detections, step, encoders, rot_weight, confidence_threshold, out, fmt):
    """计算标定偏移 Δθ = θ* - θ^Enc"""
    kinematic_chain, exo_registry = _load_robot(chain, registry)
    frame, log_encoders = _load_frame(detections, kinematic_chain, exo_registry, step)
    readings = _encoders(encoders, log_encoders, kinematic_chain)
    if readings is None:
        raise click.UsageError("calibrate 需要 --encoders，或者使用带编码器读数的仿真日志")
    cfg = _solver_config(ctx, rot_weight=rot_weight, fallback_to_encoders=False)

    report = estimate_frame(kinematic_chain, exo_registry, frame.detections, readings, cfg,
                            confidence_threshold=_confidence_threshold(ctx, confidence_threshold),
                            frame_id=frame.frame_id).report
    body = {
        "frame_id": frame.frame_id,
        "joint_names": [j.name for j in kinematic_chain.joints],
        "encoders": readings.to_list(),
        "theta_star": report.theta_star.to_list(),
        "calibration_offset": report.calibration_offset.to_list(),
        "converged": report.converged,
        "unobserved_joints": list(report.unobserved_joints),
    }
    table = _joint_table(kinematic_chain, {"encoders": readings, "theta_star": report.theta_star,
                                           "calibration": report.calibration_offset})
    _emit(report_document("calibration", body, cfg), out, fmt, table)
    if report.unobserved_joints:
        click.echo(f"警告: 关节 {report.unobserved_joints} 不可观测，其标定偏移无意义", err=True)
    if not report.converged:
        click.echo(f"估计未收敛: {report.termination}", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


@cli.command()
@click.option("--scenario", "scenario_path", type=click.Path(dir_okay=False), default=None, help="场景文件")
@click.option("--profile", type=click.Choice(PROFILES), default=None, help="噪声配置档（不使用场景文件时）")
@click.option("--seed", type=int, default=0, show_default=True, help="随机种子")
@_output_options
@click.pass_context
@handle_errors
def simulate(ctx, scenario_path, profile, seed, out, fmt):
    """执行仿真场景，输出每步真值、编码器读数和检测帧"""
    scenario = _scenario(ctx, scenario_path, profile)
    robot, steps = run_scenario(scenario, seed)
    body = simulation_log_document(scenario, seed, robot, steps)
    table = pd.DataFrame([{
        "step": s.step,
        "clamped": s.clamped,
        "markers": len(s.frame.detections),
        "ee_x": s.end_effector.translation[0],
        "ee_y": s.end_effector.translation[1],
        "ee_z": s.end_effector.translation[2],
        "max_encoder_error": float(np.max(np.abs((s.encoders - s.true_theta).as_array()))),
    } for s in steps]).to_string(index=False, float_format=lambda v: f"{v:.5f}")
    _emit(report_document("simulation", body, scenario.to_dict(), seed), out, fmt, table)


def _parse_masked_counts(ctx, param, value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return sorted({int(item) for item in value.split(",") if item.strip()})
    except ValueError:
        raise click.BadParameter("应为逗号分隔的整数，例如 1,3,4")


@cli.command("benchmark-state")
@click.option("--scenario", "scenario_path", type=click.Path(dir_okay=False), default=None, help="场景文件")
@click.option("--profile", type=click.Choice(PROFILES), default=None, help="噪声配置档")
@click.option("--seed", type=int, default=0, show_default=True, help="随机种子")
@click.option("--trials", type=int, default=None, help="试验次数（默认取配置）")
@click.option("--occlusion-sweep", callback=_parse_masked_counts, default=None,
              help="遮挡扫描：被遮挡的连杆数，逗号分隔，例如 1,3,4")
@click.option("--upside-down", is_flag=True, help="基座倒装变体")
@click.option("--workers", type=int, default=None, help="并行进程数")
@click.option("--rot-weight", type=float, default=None, help="旋转残差权重")
@_output_options
@click.pass_context
@handle_errors
def benchmark_state(ctx, scenario_path, profile, seed, trials, occlusion_sweep, upside_down, workers, rot_weight,
                    out, fmt):
    """状态估计基准测试: encoder-only / ours-no-enc / ours-enc"""
    scenario = _scenario(ctx, scenario_path, profile)
    bench = _benchmark_config(ctx, trials=trials, workers=workers)
    cfg = _solver_config(ctx, rot_weight=rot_weight)
    dof = scenario.chain.dof
    levels = None
    if occlusion_sweep is not None:
        if any(k < 0 or k > dof for k in occlusion_sweep):
            raise ConfigError(f"被遮挡的连杆数必须在 0..{dof} 内: {occlusion_sweep}")
        levels = [dof - k for k in occlusion_sweep]

    result = run_state_benchmark(scenario, bench.trials, seed, cfg, occlusion_levels=levels,
                                 upside_down=upside_down, workers=bench.workers,
                                 target_margin=bench.target_margin)
    config = {
        "solver": cfg.to_dict(),
        "scenario": scenario.to_dict(),
        "trials": bench.trials,
        "target_margin": bench.target_margin,
        "occlusion_sweep": occlusion_sweep,
        "upside_down": upside_down,
    }
    sections = [summary_table(result.summary, STATE_METHODS), f"ratio ours-enc / encoder-only: {result.ratio}"]
    for level, summary in sorted(result.occlusion.items()):
        sections.append(f"\n可见连杆 {level} / 遮挡 {dof - level}")
        sections.append(summary_table(summary, STATE_METHODS))
    _emit(report_document("benchmark-state", result.to_dict(), config, seed), out, fmt, "\n".join(sections))


@cli.command("benchmark-control")
@click.option("--scenario", "scenario_path", type=click.Path(dir_okay=False), default=None, help="场景文件")
@click.option("--profile", type=click.Choice(PROFILES), default=None, help="噪声配置档")
@click.option("--seed", type=int, default=0, show_default=True, help="随机种子")
@click.option("--targets", "--trials", "targets", type=int, default=None, help="目标个数（默认取配置）")
@click.option("--modes", type=click.Choice(MODES), multiple=True, help="参与比较的模式，可重复，默认全部")
@click.option("--delta-iterations", type=int, default=None, help="每个目标的增量修正次数")
@click.option("--recalibrate", type=click.Choice(["step_start", "after_delta"]), default=None,
              help="标定时机")
@click.option("--summary-only", is_flag=True, help="报告中不包含逐步的控制步报告")
@click.option("--workers", type=int, default=None, help="并行进程数")
@_output_options
@click.pass_context
@handle_errors
def benchmark_control(ctx, scenario_path, profile, seed, targets, modes, delta_iterations, recalibrate,
                      summary_only, workers, out, fmt):
    """控制基准测试: naive / no-delta / delta"""
    scenario = _scenario(ctx, scenario_path, profile)
    bench = _benchmark_config(ctx, targets=targets, workers=workers)
    cfg = _solver_config(ctx)
    control_settings = _manager(ctx).get_control_config()
    control_settings.update({k: v for k, v in {"delta_iterations": delta_iterations,
                                               "recalibrate": recalibrate}.items() if v is not None})
    control_cfg = ControlConfig.from_dict(control_settings)
    selected = tuple(m for m in MODES if m in modes) if modes else MODES

    result = run_control_benchmark(scenario, bench.targets, seed, cfg, control_cfg, modes=selected,
                                   workers=bench.workers, target_margin=bench.target_margin)
    config = {
        "solver": cfg.to_dict(),
        "control": control_cfg.to_dict(),
        "scenario": scenario.to_dict(),
        "targets": bench.targets,
        "target_margin": bench.target_margin,
        "modes": list(selected),
    }
    table = summary_table(result.summary, [METHOD_NAMES[m] for m in selected])
    table += f"\nordering delta <= no-delta < naive: {result.ordering_holds}, reduction vs naive: {result.reduction}"
    body = result.to_dict(include_steps=not summary_only)
    _emit(report_document("benchmark-control", body, config, seed), out, fmt, table)


def _guess_kind(document: Any) -> str:
    if isinstance(document, list):
        return "encoders"
    if not isinstance(document, dict):
        raise ParseError("无法识别文件类型：顶层应为对象或数组")
    if _is_simulation_log(document):
        return "simulation-log"
    if "joints" in document:
        return "chain"
    if "entries" in document:
        return "registry"
    if "detections" in document:
        return "detections"
    if "encoders" in document:
        return "encoders"
    if set(document) & {"episode", "noise_model", "occlusion_schedule", "chain_ref", "registry_ref"}:
        return "scenario"
    if set(document) & set(DEFAULT_CONFIG):
        return "config"
    raise ParseError(f"无法识别文件类型，顶层字段为 {sorted(document)}")


def validate_config_document(document: Dict[str, Any], dof: int) -> None:
    """
    校验 config.yaml 风格的配置文档

    异常:
        ConfigError: 未知配置段或配置项取值非法
    """
    unknown = set(document) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"未知的配置段: {sorted(unknown)}")
    SolverConfig.from_dict(document.get("solver"))
    ControlConfig.from_dict(document.get("control"))
    BenchmarkConfig.from_dict(document.get("benchmark"))
    NoiseModel.from_dict(document.get("simulation") or {}, dof, np.random.default_rng(0))
    threshold = (document.get("observation") or {}).get("confidence_threshold", 0.0)
    if not 0.0 <= float(threshold) <= 1.0:
        raise ConfigError(f"confidence_threshold 必须在 [0, 1] 内: {threshold}")


@cli.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice(FILE_KINDS), default="auto", show_default=True, help="文件类型")
@click.option("--chain", type=click.Path(dir_okay=False), default=None,
              help="交叉校验用的运动链（默认随仓库附带的示例）")
@click.option("--registry", type=click.Path(dir_okay=False), default=None,
              help="校验仿真日志时使用的注册表（默认随仓库附带的示例）")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="报告输出文件")
@click.pass_context
@handle_errors
def validate(ctx, path, kind, chain, registry, out):
    """校验输入文件的格式和内容"""
    document = load_document(path)
    kind = _guess_kind(document) if kind == "auto" else kind
    details: Dict[str, Any] = {}

    if kind == "chain":
        parsed = chain_from_dict(document, source=path)
        details = {"name": parsed.name, "dof": parsed.dof, "links": list(parsed.link_names)}
    else:
        reference = load_chain_file(chain or BUNDLED_CHAIN_PATH)
        if kind == "registry":
            parsed = ExoskeletonRegistry.from_dict(document, source=path)
            parsed.validate_against(reference)
            details = {"markers": parsed.marker_ids}
        elif kind == "detections":
            frame = DetectionFrame.from_dict(document, source=path)
            details = {"frame_id": frame.frame_id, "markers": sorted(d.marker_id for d in frame.detections)}
        elif kind == "encoders":
            details = {"encoders": parse_encoders(document, reference.dof, source=path).to_list()}
        elif kind == "scenario":
            parsed = scenario_from_dict(document, source=path, base_dir=os.path.dirname(os.path.abspath(path)))
            details = {"name": parsed.name, "commands": len(parsed.episode)}
        elif kind == "simulation-log":
            exo_registry = load_registry_file(registry or BUNDLED_REGISTRY_PATH, reference)
            details = {"steps": ReplayRobot.from_simulation_log(document, reference, exo_registry, source=path).remaining}
        else:
            if not isinstance(document, dict):
                raise ParseError("配置文档必须是对象", source=path)
            validate_config_document(document, reference.dof)

    body = {"path": path, "kind": kind, "valid": True, "details": details}
    if out:
        save_document(body, out)
    click.echo(dumps_document(body), nl=False)
    logger.info(f"{path} 校验通过 ({kind})")


def main():
    """控制台脚本入口"""
    cli(prog_name="marker-state")


if __name__ == "__main__":
    main()
