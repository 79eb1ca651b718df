#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
外骨骼注册表

记录每个连杆（以及基座）上标记的ID，以及标记→外骨骼、外骨骼→连杆两段固定变换。

文件格式:

    {
      "base_link": "base",
      "entries": [
        {"link_name": "base", "marker_id": 0,
         "t_aruco_exo": {"translation": [...], "quaternion": [...]},
         "t_exo_link": {"translation": [...], "quaternion": [...]}}
      ]
    }

base_link 可省略，默认为 "base"。同一连杆可以登记多个标记（多面外骨骼）。
"""

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from src.geometry.transforms import RigidTransform
from src.kinematics.chain import KinematicChain
from src.utils.exceptions import ParseError, UnknownMarkerError, ValidationError
from src.utils.json_io import load_document, require_field, save_document

logger = logging.getLogger(__name__)

DEFAULT_BASE_LINK = "base"
REPO_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
BUNDLED_REGISTRY_PATH = os.path.join(REPO_ROOT, "data", "robots", "so100_like_registry.json")


@dataclass(frozen=True)
class RegistryEntry:
    """
    单个标记的登记信息

    属性:
        link_name: 标记所在连杆名（基座为 base_link）
        marker_id: 标记ID
        t_aruco_exo: 标记坐标系到外骨骼坐标系的变换
        t_exo_link: 外骨骼坐标系到连杆坐标系的变换
    """

    link_name: str
    marker_id: int
    t_aruco_exo: RigidTransform
    t_exo_link: RigidTransform

    @property
    def marker_to_link(self) -> RigidTransform:
        """T^aruco_link = T^aruco_exo · T^exo_link"""
        return self.t_aruco_exo.compose(self.t_exo_link)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "link_name": self.link_name,
            "marker_id": self.marker_id,
            "t_aruco_exo": self.t_aruco_exo.to_dict(),
            "t_exo_link": self.t_exo_link.to_dict(),
        }


class ExoskeletonRegistry:
    """
    外骨骼注册表，构造后不可修改

    参数:
        entries: 登记条目
        base_link: 基座连杆名
    """

    def __init__(self, entries: List[RegistryEntry], base_link: str = DEFAULT_BASE_LINK):
        self.base_link = base_link
        self._entries: Tuple[RegistryEntry, ...] = tuple(entries)
        self._by_marker: Dict[int, RegistryEntry] = {}
        for entry in self._entries:
            if entry.marker_id in self._by_marker:
                raise ValidationError(f"标记ID重复: {entry.marker_id}", subject=entry.link_name)
            self._by_marker[entry.marker_id] = entry

    @property
    def entries(self) -> Tuple[RegistryEntry, ...]:
        return self._entries

    @property
    def marker_ids(self) -> List[int]:
        return sorted(self._by_marker)

    def entry_for_marker(self, marker_id: int) -> RegistryEntry:
        """
        按标记ID查找条目

        异常:
            UnknownMarkerError: 标记未登记
        """
        try:
            return self._by_marker[marker_id]
        except KeyError:
            raise UnknownMarkerError(marker_id)

    def has_marker(self, marker_id: int) -> bool:
        return marker_id in self._by_marker

    def is_base(self, entry: RegistryEntry) -> bool:
        return entry.link_name == self.base_link

    def base_entries(self) -> List[RegistryEntry]:
        return [e for e in self._entries if self.is_base(e)]

    def entries_for_link(self, link_name: str) -> List[RegistryEntry]:
        return [e for e in self._entries if e.link_name == link_name]

    def validate_against(self, chain: KinematicChain) -> None:
        """
        检查所有登记的连杆名都存在于运动链中

        异常:
            ValidationError: 连杆名不存在或缺少基座条目
        """
        known = set(chain.link_names[1:])
        for entry in self._entries:
            if self.is_base(entry):
                continue
            if entry.link_name not in known:
                raise ValidationError(
                    f"注册表中的连杆 '{entry.link_name}' (标记 {entry.marker_id}) 不在运动链 '{chain.name}' 中",
                    subject=entry.link_name,
                )
        if not self.base_entries():
            raise ValidationError(f"注册表缺少基座 '{self.base_link}' 的标记条目")

    def to_dict(self) -> Dict[str, Any]:
        return {"base_link": self.base_link, "entries": [e.to_dict() for e in self._entries]}

    @classmethod
    def from_dict(cls, document: Dict[str, Any], source: Optional[str] = None) -> "ExoskeletonRegistry":
        """
        从文档构造注册表

        异常:
            ParseError: 字段缺失或类型错误
            ValidationError: 标记ID重复
        """
        raw_entries = require_field(document, "entries", "", source)
        if not isinstance(raw_entries, list):
            raise ParseError("entries 必须是数组", source=source, location="entries")
        entries = []
        for index, raw in enumerate(raw_entries):
            location = f"entries[{index}]"
            marker_id = require_field(raw, "marker_id", location, source)
            if not isinstance(marker_id, int) or isinstance(marker_id, bool):
                raise ParseError("marker_id 必须是整数", source=source, location=f"{location}.marker_id")
            entries.append(RegistryEntry(
                link_name=str(require_field(raw, "link_name", location, source)),
                marker_id=marker_id,
                t_aruco_exo=RigidTransform.from_dict(
                    require_field(raw, "t_aruco_exo", location, source), source, f"{location}.t_aruco_exo"),
                t_exo_link=RigidTransform.from_dict(
                    require_field(raw, "t_exo_link", location, source), source, f"{location}.t_exo_link"),
            ))
        return cls(entries, base_link=str(document.get("base_link", DEFAULT_BASE_LINK)))

    def __len__(self) -> int:
        return len(self._entries)


def load_registry_file(path: str, chain: Optional[KinematicChain] = None) -> ExoskeletonRegistry:
    """
    从文件加载注册表，给定运动链时同时做交叉校验

    参数:
        path: 注册表文件
        chain: 运动链（可选）

    返回:
        ExoskeletonRegistry: 注册表
    """
    registry = ExoskeletonRegistry.from_dict(load_document(path), source=path)
    if chain is not None:
        registry.validate_against(chain)
    logger.debug(f"已加载外骨骼注册表 {path}，共 {len(registry)} 个标记")
    return registry


def save_registry_file(registry: ExoskeletonRegistry, path: str) -> None:
    save_document(registry.to_dict(), path)


def load_bundled_registry(chain: Optional[KinematicChain] = None) -> ExoskeletonRegistry:
    """加载随仓库附带的示例注册表"""
    return load_registry_file(BUNDLED_REGISTRY_PATH, chain)
