#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
异常定义模块

所有模块共用的异常层次结构。每个异常类都带有命令行退出码，
命令行层根据异常类型映射退出码。
"""

from typing import Optional, Sequence


class StateEstimationError(Exception):
    """状态估计工具包的异常基类"""

    exit_code = 1


class ParseError(StateEstimationError):
    """
    文件解析失败

    参数:
        message: 错误描述
        source: 出错的文件或文档名称（可选）
        location: 出错的字段路径，例如 "joints[2].axis"（可选）
    """

    exit_code = 3

    def __init__(self, message: str, source: Optional[str] = None, location: Optional[str] = None):
        self.source = source
        self.location = location
        prefix = ""
        if source:
            prefix += f"{source}: "
        if location:
            prefix += f"[{location}] "
        super().__init__(f"{prefix}{message}")


class ValidationError(StateEstimationError):
    """数据校验失败（关节轴、关节限位、维度不匹配等）"""

    exit_code = 3

    def __init__(self, message: str, subject: Optional[str] = None):
        self.subject = subject
        super().__init__(message)


class ConfigError(ValidationError):
    """配置项错误"""


class UnknownMarkerError(StateEstimationError):
    """检测到的标记ID未在外骨骼注册表中登记"""

    exit_code = 3

    def __init__(self, marker_id: int):
        self.marker_id = marker_id
        super().__init__(f"未知标记ID (unknown marker): {marker_id}")


class BaseUnobservedError(StateEstimationError):
    """基座标记未被观测到，无法把连杆位姿表示在机器人坐标系中"""

    exit_code = 4


class UnobservableError(StateEstimationError):
    """没有任何可见连杆，关节状态不可观测"""

    exit_code = 4


class NumericalFailureError(StateEstimationError):
    """
    优化过程中出现非有限代价

    参数:
        message: 错误描述
        last_theta: 最后一个有效迭代点
        iterations: 失败前完成的迭代次数
    """

    exit_code = 6

    def __init__(self, message: str, last_theta: Sequence[float], iterations: int = 0):
        self.last_theta = list(last_theta)
        self.iterations = iterations
        super().__init__(message)


class BranchAmbiguityError(StateEstimationError):
    """SE(3)对数映射在旋转角接近π时分支不唯一"""

    exit_code = 6


class ControlStepError(StateEstimationError):
    """
    控制步中的估计失败

    参数:
        cause: 原始异常
        report: 已完成部分（朴素移动结果）的控制步报告
    """

    def __init__(self, cause: StateEstimationError, report):
        self.cause = cause
        self.report = report
        self.exit_code = cause.exit_code
        super().__init__(f"控制步估计失败: {cause}")


class ReplayExhaustedError(StateEstimationError):
    """回放机器人的检测帧已用完"""
