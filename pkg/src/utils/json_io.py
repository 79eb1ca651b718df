#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
JSON文档读写

所有输入文件（运动链、注册表、检测帧、场景）和输出报告都使用JSON参考编码。
输出统一按键排序，保证相同输入得到逐字节相同的文档。
"""

import json
import logging
import os
from typing import Any, Dict

import numpy as np
import yaml

from src.utils.exceptions import ParseError

logger = logging.getLogger(__name__)


def _to_builtin(value: Any) -> Any:
    """把numpy标量和数组转换为JSON可序列化的内置类型"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "to_dict"):
        return value.to_dict()
    raise TypeError(f"无法序列化类型: {type(value).__name__}")


def dumps_document(document: Any) -> str:
    """
    把文档序列化为规范化JSON文本

    参数:
        document: 字典或列表

    返回:
        str: 以换行结尾的JSON文本
    """
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False, default=_to_builtin) + "\n"


def save_document(document: Any, path: str) -> None:
    """
    把文档写入文件

    参数:
        document: 字典或列表
        path: 目标文件路径
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_document(document))
    logger.debug(f"已写入文档: {path}")


def parse_document_text(text: str, source: str = "<text>", fmt: str = "json") -> Any:
    """
    解析文档文本

    参数:
        text: 文档内容
        source: 来源名称（用于错误定位）
        fmt: "json" 或 "yaml"（YAML是JSON的超集，两种写法都接受）

    返回:
        解析后的文档

    异常:
        ParseError: 语法错误，错误信息带行列位置
    """
    if fmt == "yaml":
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            location = f"line {mark.line + 1}, column {mark.column + 1}" if mark else None
            logger.error(f"YAML解析失败: {source}: {e}")
            raise ParseError(str(getattr(e, "problem", e)), source=source, location=location) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"JSON解析失败: {source}: {e.msg}")
        raise ParseError(e.msg, source=source, location=f"line {e.lineno}, column {e.colno}") from e


def load_document(path: str) -> Dict[str, Any]:
    """
    读取文档文件，按扩展名选择JSON或YAML

    参数:
        path: 文件路径

    返回:
        Dict[str, Any]: 解析后的文档

    异常:
        ParseError: 文件不存在或格式错误，错误信息带行列位置
    """
    if not os.path.exists(path):
        logger.error(f"文件不存在: {path}")
        raise ParseError("文件不存在", source=path)
    fmt = "yaml" if path.lower().endswith((".yaml", ".yml")) else "json"
    with open(path, "r", encoding="utf-8") as f:
        return parse_document_text(f.read(), source=path, fmt=fmt)


def require_field(document: Dict[str, Any], key: str, location: str, source: str = None) -> Any:
    """
    取出必填字段

    参数:
        document: 当前层级的字典
        key: 字段名
        location: 当前层级的路径（用于错误定位）
        source: 文件名（可选）

    返回:
        字段值

    异常:
        ParseError: 字段缺失或当前层级不是对象
    """
    path = f"{location}.{key}" if location else key
    if not isinstance(document, dict):
        raise ParseError("应为JSON对象", source=source, location=location or "<root>")
    if key not in document:
        raise ParseError("缺少必填字段", source=source, location=path)
    return document[key]


def report_document(kind: str, body: Dict[str, Any], config: Any, seed: Any = None) -> Dict[str, Any]:
    """
    报告文档外壳

    报告带有工具版本、随机种子和配置哈希，不包含时间戳，
    相同输入和种子得到逐字节相同的文档。
    """
    from src import __version__
    from src.utils.config_manager import config_hash

    return {
        "kind": kind,
        "tool_version": __version__,
        "seed": seed,
        "config_hash": config_hash(config),
        "config": config.to_dict() if hasattr(config, "to_dict") else config,
        "result": body,
    }
