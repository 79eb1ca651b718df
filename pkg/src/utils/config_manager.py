#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
配置管理器

该模块提供了加载和访问配置信息的功能，以及按配置初始化日志。
"""

import copy
import hashlib
import json
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Any, Dict, Optional

import yaml

logger = logging.getLogger(__name__)

# 仓库根目录下的 configs/
DEFAULT_CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), "configs")

DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# 配置文件缺失时使用的内置默认值，与 configs/config.yaml 保持一致
DEFAULT_CONFIG: Dict[str, Any] = {
    "system": {
        "logging": {
            "level": "INFO",
            "format": DEFAULT_LOG_FORMAT,
            "file": None,
            "max_size_mb": 10,
            "backup_count": 5,
        },
    },
    "solver": {
        "max_iterations": 100,
        "gradient_tolerance": 1e-10,
        "step_tolerance": 1e-12,
        "rot_weight": 0.1,
        "enforce_joint_limits": True,
        "damping_init": 1e-3,
        "max_step": 0.5,
        "link_weights": {},
        "fallback_to_encoders": True,
    },
    "observation": {
        "confidence_threshold": 0.0,
    },
    "simulation": {
        "profile": "low_cost",
    },
    "control": {
        "delta_iterations": 1,
        "recalibrate": "step_start",
    },
    "benchmark": {
        "trials": 200,
        "targets": 50,
        "workers": 1,
        "target_margin": 0.25,
    },
}


class ConfigManager:
    """
    配置管理器类

    负责加载和管理配置信息。配置文件不存在时退回到内置默认值。
    """

    def __init__(self, config_dir: str = DEFAULT_CONFIG_DIR):
        """
        初始化配置管理器

        参数:
            config_dir: 配置文件目录
        """
        self.config_dir = config_dir
        self.config_file = os.path.join(config_dir, "config.yaml")
        self.config: Dict[str, Any] = copy.deepcopy(DEFAULT_CONFIG)
        self.load_config()

    def load_config(self) -> bool:
        """
        加载配置文件，并与内置默认值合并

        返回:
            bool: 是否成功加载
        """
        try:
            if not os.path.exists(self.config_file):
                logger.warning(f"配置文件不存在，使用内置默认配置: {self.config_file}")
                self.config = copy.deepcopy(DEFAULT_CONFIG)
                return False

            with open(self.config_file, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}

            self.config = _deep_merge(copy.deepcopy(DEFAULT_CONFIG), loaded)
            logger.debug(f"成功加载配置文件: {self.config_file}")
            return True

        except (OSError, yaml.YAMLError) as e:
            logger.error(f"加载配置文件失败: {str(e)}")
            self.config = copy.deepcopy(DEFAULT_CONFIG)
            return False

    def reload_config(self) -> bool:
        """
        重新加载配置文件

        返回:
            bool: 是否成功加载
        """
        return self.load_config()

    def get_config(self) -> Dict[str, Any]:
        """
        获取完整配置

        返回:
            Dict[str, Any]: 配置信息
        """
        return self.config

    def get_logging_config(self) -> Dict[str, Any]:
        """获取日志配置"""
        return self.config.get('system', {}).get('logging', {})

    def get_solver_config(self) -> Dict[str, Any]:
        """获取求解器配置"""
        return dict(self.config.get('solver', {}))

    def get_observation_config(self) -> Dict[str, Any]:
        """获取观测配置"""
        return dict(self.config.get('observation', {}))

    def get_simulation_config(self) -> Dict[str, Any]:
        """获取仿真器配置（噪声模型）"""
        return dict(self.config.get('simulation', {}))

    def get_control_config(self) -> Dict[str, Any]:
        """获取控制回路配置"""
        return dict(self.config.get('control', {}))

    def get_benchmark_config(self) -> Dict[str, Any]:
        """获取基准测试配置"""
        return dict(self.config.get('benchmark', {}))


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并两个配置字典，override 中的值优先"""
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def config_hash(config: Any) -> str:
    """
    计算配置的哈希值

    参数:
        config: 可JSON序列化的配置（字典或带 to_dict 方法的对象）

    返回:
        str: 规范化JSON的SHA-256十六进制摘要
    """
    if hasattr(config, "to_dict"):
        config = config.to_dict()
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def setup_logging(logging_config: Optional[Dict[str, Any]] = None, verbose: bool = False) -> None:
    """
    按配置初始化根日志器

    控制台日志只写入stderr，stdout留给报告数据。

    参数:
        logging_config: system.logging 配置段
        verbose: 为True时强制使用DEBUG级别
    """
    logging_config = logging_config or {}
    level_name = "DEBUG" if verbose else str(logging_config.get("level", "INFO")).upper()
    fmt = logging_config.get("format", DEFAULT_LOG_FORMAT)

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter(fmt))
    root.addHandler(console)

    log_file = logging_config.get("file")
    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=int(logging_config.get("max_size_mb", 10)) * 1024 * 1024,
            backupCount=int(logging_config.get("backup_count", 5)),
            encoding="utf-8",
        )
        file_handler.setFormatter(logging.Formatter(fmt))
        root.addHandler(file_handler)


# 创建全局配置管理器实例
config_manager = ConfigManager()
