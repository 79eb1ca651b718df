#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
运动链描述文件的读写

文件格式（JSON参考编码，YAML写法同样接受）:

    {
      "name": "so100_like",
      "base_link": "base",
      "joints": [
        {
          "name": "shoulder_pan",
          "child_link": "shoulder",
          "type": "revolute",
          "parent_transform": {"translation": [x, y, z], "quaternion": [w, x, y, z]},
          "axis": [0, 0, 1],
          "limits_rad": [-1.9, 1.9],
          "exclude_from_residuals": false
        }
      ]
    }

type、child_link、exclude_from_residuals 可省略，默认分别为 "revolute"、
"<name>_link" 和 false。
"""

import logging
import os
from typing import Any, Dict, List, Optional

from src.geometry.transforms import RigidTransform
from src.kinematics.chain import JointSpec, KinematicChain
from src.utils.exceptions import ParseError, ValidationError
from src.utils.json_io import load_document, parse_document_text, require_field, save_document

logger = logging.getLogger(__name__)

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
BUNDLED_CHAIN_PATH = os.path.join(REPO_ROOT, "data", "robots", "so100_like_chain.json")


def chain_from_dict(document: Dict[str, Any], source: Optional[str] = None) -> KinematicChain:
    """
    从字典构造并校验运动链

    参数:
        document: 运动链文档
        source: 来源名称（用于错误定位）

    返回:
        KinematicChain: 校验后的运动链

    异常:
        ParseError: 字段缺失或类型错误，带字段路径
        ValidationError: 非单位轴、名称重复、限位颠倒等，错误信息包含关节名
    """
    name = require_field(document, "name", "", source)
    base_link = document.get("base_link", "base")
    raw_joints = require_field(document, "joints", "", source)
    if not isinstance(raw_joints, list) or not raw_joints:
        raise ParseError("joints 必须是非空数组", source=source, location="joints")

    joints: List[JointSpec] = []
    link_names = [base_link]
    for index, raw in enumerate(raw_joints):
        location = f"joints[{index}]"
        joint_name = require_field(raw, "name", location, source)
        parent = RigidTransform.from_dict(
            require_field(raw, "parent_transform", location, source), source, f"{location}.parent_transform"
        )
        axis = require_field(raw, "axis", location, source)
        limits = require_field(raw, "limits_rad", location, source)
        for key, value in (("axis", axis), ("limits_rad", limits)):
            size = 3 if key == "axis" else 2
            if not isinstance(value, list) or len(value) != size or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise ParseError(f"应为长度为{size}的数值数组", source=source, location=f"{location}.{key}")
        try:
            joints.append(JointSpec(
                name=str(joint_name),
                parent_transform=parent,
                axis=axis,
                limits=(limits[0], limits[1]),
                joint_type=raw.get("type", "revolute"),
                exclude_from_residuals=bool(raw.get("exclude_from_residuals", False)),
            ))
        except ValidationError as e:
            logger.error(f"运动链校验失败: {location} ({joint_name}): {e}")
            raise ValidationError(f"{location} ({joint_name}): {e}", subject=str(joint_name)) from e
        link_names.append(str(raw.get("child_link", f"{joint_name}_link")))

    chain = KinematicChain(name=str(name), joints=tuple(joints), link_names=tuple(link_names))
    logger.debug(f"已加载运动链 '{chain.name}'，自由度 {chain.dof}")
    return chain


def chain_to_dict(chain: KinematicChain) -> Dict[str, Any]:
    """把运动链序列化为文档"""
    return {
        "name": chain.name,
        "base_link": chain.base_link_name,
        "joints": [
            {
                "name": joint.name,
                "child_link": chain.link_names[i + 1],
                "type": joint.joint_type,
                "parent_transform": joint.parent_transform.to_dict(),
                "axis": [float(v) for v in joint.axis],
                "limits_rad": [float(joint.limits[0]), float(joint.limits[1])],
                "exclude_from_residuals": joint.exclude_from_residuals,
            }
            for i, joint in enumerate(chain.joints)
        ],
    }


def load_chain(text: str, source: str = "<chain>", fmt: str = "json") -> KinematicChain:
    """
    从文本解析运动链

    参数:
        text: 运动链描述文本
        source: 来源名称
        fmt: "json" 或 "yaml"

    返回:
        KinematicChain: 校验后的运动链
    """
    return chain_from_dict(parse_document_text(text, source=source, fmt=fmt), source=source)


def load_chain_file(path: str) -> KinematicChain:
    """从文件加载运动链"""
    return chain_from_dict(load_document(path), source=path)


def save_chain_file(chain: KinematicChain, path: str) -> None:
    """把运动链写入文件"""
    save_document(chain_to_dict(chain), path)
    logger.info(f"运动链 '{chain.name}' 已保存到 {path}")


def load_bundled_chain() -> KinematicChain:
    """加载随仓库附带的6自由度示例运动链"""
    return load_chain_file(BUNDLED_CHAIN_PATH)
