"""
基准测试模块
状态估计基准（含遮挡扫描和倒装变体）、控制基准、汇总指标
"""

from .control_benchmark import METHOD_NAMES, ControlBenchmarkResult, run_control_benchmark, sample_targets
from .metrics import BenchmarkConfig, BenchmarkSummary, MethodSummary, summarize_records, summary_table
from .state_benchmark import STATE_METHODS, StateBenchmarkResult, run_state_benchmark, run_state_trial

__all__ = [
    'METHOD_NAMES',
    'ControlBenchmarkResult',
    'run_control_benchmark',
    'sample_targets',
    'BenchmarkConfig',
    'BenchmarkSummary',
    'MethodSummary',
    'summarize_records',
    'summary_table',
    'STATE_METHODS',
    'StateBenchmarkResult',
    'run_state_benchmark',
    'run_state_trial',
]
