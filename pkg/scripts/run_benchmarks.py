#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
基准测试批量运行脚本

对一组随机种子依次运行状态估计基准和控制基准，每个种子的报告写成一个JSON文件，
最后打印跨种子的汇总表。

用法示例:
    # 低成本噪声配置，4个种子，每个种子200次状态估计试验和50个控制目标
    python run_benchmarks.py --seeds 0,1,2,3 --trials 200 --targets 50 --output-dir reports

    # 只跑状态估计基准，带遮挡扫描和倒装变体
    python run_benchmarks.py --seeds 0,1 --skip-control --occlusion-sweep 1,3,4 --upside-down
"""

import os
import sys
import argparse
import logging
from typing import Any, Dict, List

import pandas as pd

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.benchmark.control_benchmark import run_control_benchmark
from src.benchmark.state_benchmark import run_state_benchmark
from src.control.refine_loop import ControlConfig
from src.estimation.estimator import SolverConfig
from src.simulation.scenario import default_scenario, load_scenario_file
from src.utils.config_manager import config_manager, setup_logging
from src.utils.json_io import report_document, save_document

logger = logging.getLogger(__name__)


def parse_args():
    """解析命令行参数"""
    parser = argparse.ArgumentParser(description='批量运行状态估计和控制基准测试')

    parser.add_argument('--seeds', type=str, default='0,1,2,3',
                        help='随机种子，多个种子用逗号分隔 (default: 0,1,2,3)')

    parser.add_argument('--scenario', type=str, default=None,
                        help='场景文件 (default: 随仓库附带的机器人 + --profile)')

    parser.add_argument('--profile', type=str, default='low_cost',
                        help='噪声配置档 (default: low_cost)')

    parser.add_argument('--trials', type=int, default=None,
                        help='每个种子的状态估计试验次数 (default: 从配置文件获取)')

    parser.add_argument('--targets', type=int, default=None,
                        help='每个种子的控制目标个数 (default: 从配置文件获取)')

    parser.add_argument('--occlusion-sweep', type=str, default=None,
                        help='被遮挡的连杆数，逗号分隔，例如 1,3,4 (default: 不扫描)')

    parser.add_argument('--upside-down', action='store_true',
                        help='额外运行基座倒装变体')

    parser.add_argument('--skip-state', action='store_true',
                        help='跳过状态估计基准')

    parser.add_argument('--skip-control', action='store_true',
                        help='跳过控制基准')

    parser.add_argument('--workers', type=int, default=None,
                        help='并行进程数 (default: 从配置文件获取)')

    parser.add_argument('--output-dir', type=str, default='reports',
                        help='报告输出目录 (default: reports)')

    parser.add_argument('--verbose', action='store_true',
                        help='显示详细信息')

    return parser.parse_args()


def parse_int_list(text: str) -> List[int]:
    """逗号分隔的整数列表"""
    return [int(item) for item in text.split(',') if item.strip()]


def run_state(scenario, seed: int, trials: int, cfg: SolverConfig, levels, upside_down: bool,
              workers: int, margin: float, output_dir: str) -> Dict[str, Any]:
    """
    运行一个种子的状态估计基准并写出报告

    返回:
        Dict[str, Any]: 汇总行
    """
    result = run_state_benchmark(scenario, trials, seed, cfg, occlusion_levels=levels,
                                 upside_down=upside_down, workers=workers, target_margin=margin)
    config = {"solver": cfg.to_dict(), "scenario": scenario.to_dict(), "trials": trials,
              "target_margin": margin, "occlusion_levels": levels, "upside_down": upside_down}
    suffix = '_upside_down' if upside_down else ''
    path = os.path.join(output_dir, f"state{suffix}_seed{seed}.json")
    save_document(report_document('benchmark-state', result.to_dict(), config, seed), path)
    logger.info(f"已写入 {path}")

    encoder_only = result.summary.methods['encoder-only']
    ours = result.summary.methods['ours-enc']
    return {
        'seed': seed,
        'variant': 'upside_down' if upside_down else 'upright',
        'encoder_only_mm': encoder_only.median_translation * 1000.0,
        'ours_enc_mm': None if ours.median_translation is None else ours.median_translation * 1000.0,
        'ratio': result.ratio,
        'pass': result.ratio is not None and result.ratio <= 0.4,
    }


def run_control(scenario, seed: int, targets: int, cfg: SolverConfig, control_cfg: ControlConfig,
                workers: int, margin: float, output_dir: str) -> Dict[str, Any]:
    """
    运行一个种子的控制基准并写出报告

    返回:
        Dict[str, Any]: 汇总行
    """
    result = run_control_benchmark(scenario, targets, seed, cfg, control_cfg, workers=workers,
                                   target_margin=margin)
    config = {"solver": cfg.to_dict(), "control": control_cfg.to_dict(), "scenario": scenario.to_dict(),
              "targets": targets, "target_margin": margin}
    path = os.path.join(output_dir, f"control_seed{seed}.json")
    save_document(report_document('benchmark-control', result.to_dict(), config, seed), path)
    logger.info(f"已写入 {path}")

    def mm(method):
        value = result.median(method)
        return None if value is None else value * 1000.0

    return {
        'seed': seed,
        'naive_mm': mm('naive'),
        'no_delta_mm': mm('no-delta'),
        'delta_mm': mm('delta'),
        'reduction': result.reduction,
        'ordering_holds': result.ordering_holds,
    }


def main():
    """主函数"""
    args = parse_args()
    setup_logging(config_manager.get_logging_config(), args.verbose)

    seeds = parse_int_list(args.seeds)
    if not seeds:
        logger.error("至少需要一个种子")
        return 1

    benchmark = config_manager.get_benchmark_config()
    trials = args.trials or int(benchmark.get('trials', 200))
    targets = args.targets or int(benchmark.get('targets', 50))
    workers = args.workers or int(benchmark.get('workers', 1))
    margin = float(benchmark.get('target_margin', 0.25))

    scenario = load_scenario_file(args.scenario) if args.scenario else default_scenario(args.profile)
    cfg = SolverConfig.from_dict(config_manager.get_solver_config())
    control_cfg = ControlConfig.from_dict(config_manager.get_control_config())
    levels = None
    if args.occlusion_sweep:
        levels = [scenario.chain.dof - k for k in parse_int_list(args.occlusion_sweep)]

    os.makedirs(args.output_dir, exist_ok=True)
    state_rows, control_rows = [], []

    for seed in seeds:
        if not args.skip_state:
            logger.info(f"种子 {seed}: 状态估计基准")
            state_rows.append(run_state(scenario, seed, trials, cfg, levels, False, workers, margin,
                                        args.output_dir))
            if args.upside_down:
                state_rows.append(run_state(scenario, seed, trials, cfg, levels, True, workers, margin,
                                            args.output_dir))
        if not args.skip_control:
            logger.info(f"种子 {seed}: 控制基准")
            control_rows.append(run_control(scenario, seed, targets, cfg, control_cfg, workers, margin,
                                            args.output_dir))

    if state_rows:
        df = pd.DataFrame(state_rows)
        print("\n状态估计（末端平移误差中位数）:")
        print(df.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
        upright = df[df['variant'] == 'upright']
        print(f"ratio <= 0.4 的种子: {int(upright['pass'].sum())}/{len(upright)}")

    if control_rows:
        df = pd.DataFrame(control_rows)
        print("\n控制（末端平移误差中位数）:")
        print(df.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
        print(f"delta <= no-delta < naive 成立的种子: {int(df['ordering_holds'].sum())}/{len(df)}")

    return 0


if __name__ == "__main__":
    sys.exit(main())
