#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
基准测试指标

每个试验（或控制步）产生一行记录，按方法分组汇总为:
末端平移误差（米）和旋转误差（弧度）的中位数与90分位数、每个关节的均方根误差（弧度）、
关节误差L2范数中位数、相机外参误差。

汇总前按 (方法, 试验) 排序，结果与记录的到达顺序无关。
"""

import logging
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.utils.exceptions import ConfigError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkConfig:
    """
    基准测试配置（configs/config.yaml 的 benchmark 段）

    属性:
        trials: 状态估计基准的试验次数
        targets: 控制基准的目标个数
        workers: 并行进程数
        target_margin: 随机目标相对关节限位的收缩量（弧度）
    """

    trials: int = 200
    targets: int = 50
    workers: int = 1
    target_margin: float = 0.25

    def __post_init__(self):
        if self.trials < 1 or self.targets < 1:
            raise ConfigError(f"trials 和 targets 必须 >= 1，实际为 {self.trials} / {self.targets}")
        if self.workers < 1:
            raise ConfigError(f"workers 必须 >= 1，实际为 {self.workers}")
        if self.target_margin < 0:
            raise ConfigError(f"target_margin 不能为负: {self.target_margin}")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "BenchmarkConfig":
        config = dict(config or {})
        unknown = set(config) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"未知的基准测试配置项: {sorted(unknown)}")
        return cls(**config)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class MethodSummary:
    """单个方法的汇总指标"""

    method: str
    trials: int
    failures: int
    flagged: int
    median_translation: Optional[float]
    p90_translation: Optional[float]
    median_rotation: Optional[float]
    p90_rotation: Optional[float]
    joint_rms: List[float] = field(default_factory=list)
    median_joint_l2: Optional[float] = None
    median_camera_translation: Optional[float] = None
    median_camera_rotation: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "trials": self.trials,
            "failures": self.failures,
            "flagged": self.flagged,
            "median_translation": self.median_translation,
            "p90_translation": self.p90_translation,
            "median_rotation": self.median_rotation,
            "p90_rotation": self.p90_rotation,
            "joint_rms": list(self.joint_rms),
            "median_joint_l2": self.median_joint_l2,
            "median_camera_translation": self.median_camera_translation,
            "median_camera_rotation": self.median_camera_rotation,
        }


@dataclass
class BenchmarkSummary:
    """
    基准测试汇总

    属性:
        seed: 随机种子
        trials: 试验次数（控制基准为目标数）
        methods: 按方法名的汇总
    """

    seed: int
    trials: int
    methods: Dict[str, MethodSummary]

    def __post_init__(self):
        if self.trials <= 0:
            raise ValidationError(f"试验次数必须 > 0，实际为 {self.trials}")

    def median_translation(self, method: str) -> float:
        return self.methods[method].median_translation

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "methods": {name: m.to_dict() for name, m in sorted(self.methods.items())},
        }


def _optional(value: Any) -> Optional[float]:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    return float(value)


def records_frame(records: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """记录列表转为按 (方法, 试验) 排序的 DataFrame"""
    df = pd.DataFrame(list(records))
    if df.empty:
        return df
    sort_cols = [c for c in ("level", "method", "trial") if c in df.columns]
    return df.sort_values(sort_cols, kind="mergesort").reset_index(drop=True)


def summarize_method(method: str, group: pd.DataFrame) -> MethodSummary:
    """
    汇总一个方法的记录

    参数:
        method: 方法名
        group: 该方法的记录，列 ok / translation / rotation / joint_l2 / joint_err_i / flagged
            以及可选的 camera_translation / camera_rotation
    """
    ok = group[group["ok"]]
    joint_cols = sorted((c for c in group.columns if c.startswith("joint_err_")), key=lambda c: int(c.rsplit("_", 1)[1]))
    joint_rms = [float(np.sqrt((ok[c] ** 2).mean())) for c in joint_cols] if len(ok) else []
    summary = MethodSummary(
        method=method,
        trials=int(len(group)),
        failures=int((~group["ok"]).sum()),
        flagged=int(group["flagged"].sum()) if "flagged" in group.columns else 0,
        median_translation=_optional(ok["translation"].median()) if len(ok) else None,
        p90_translation=_optional(ok["translation"].quantile(0.9)) if len(ok) else None,
        median_rotation=_optional(ok["rotation"].median()) if len(ok) else None,
        p90_rotation=_optional(ok["rotation"].quantile(0.9)) if len(ok) else None,
        joint_rms=joint_rms,
        median_joint_l2=_optional(ok["joint_l2"].median()) if len(ok) else None,
    )
    if "camera_translation" in ok.columns and ok["camera_translation"].notna().any():
        summary.median_camera_translation = _optional(ok["camera_translation"].median())
        summary.median_camera_rotation = _optional(ok["camera_rotation"].median())
    if summary.failures:
        logger.warning(f"方法 {method}: {summary.failures}/{summary.trials} 次试验失败")
    return summary


def summarize_records(records: Sequence[Dict[str, Any]], seed: int, trials: int) -> BenchmarkSummary:
    """按方法分组汇总"""
    df = records_frame(records)
    methods = {str(name): summarize_method(str(name), group) for name, group in df.groupby("method", sort=True)}
    return BenchmarkSummary(seed=seed, trials=trials, methods=methods)


def summarize_levels(records: Sequence[Dict[str, Any]], seed: int, trials: int) -> Dict[int, BenchmarkSummary]:
    """按可见连杆数分组，每组再按方法汇总"""
    df = records_frame(records)
    return {
        int(level): BenchmarkSummary(
            seed=seed,
            trials=trials,
            methods={str(name): summarize_method(str(name), g) for name, g in group.groupby("method", sort=True)},
        )
        for level, group in df.groupby("level", sort=True)
    }


def summary_table(summary: BenchmarkSummary, order: Optional[Sequence[str]] = None) -> str:
    """人类可读的汇总表"""
    names = list(order) if order else sorted(summary.methods)
    rows = []
    for name in names:
        m = summary.methods.get(name)
        if m is None:
            continue
        rows.append({
            "method": name,
            "trials": m.trials,
            "failures": m.failures,
            "median_trans_mm": None if m.median_translation is None else m.median_translation * 1000.0,
            "p90_trans_mm": None if m.p90_translation is None else m.p90_translation * 1000.0,
            "median_rot_rad": m.median_rotation,
            "p90_rot_rad": m.p90_rotation,
            "median_joint_l2": m.median_joint_l2,
        })
    return pd.DataFrame(rows).to_string(index=False, float_format=lambda v: f"{v:.4f}")
