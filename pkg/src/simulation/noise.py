#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
低成本机器人噪声模型

编码器零偏、关节回差、标记位姿噪声、遮挡。内置配置档:

    noiseless      全部为零
    low_cost       回差 0.02 rad，零偏 U(±0.2) rad，标记噪声 2 mm / 0.01 rad，
                   编码器分辨率 2π/4096
    backlash_only  只有回差 0.02 rad
    offset_only    只有零偏 U(±0.2) rad

零偏量级使纯编码器的末端误差落在几厘米的范围内，并且大于回差换向造成的 2b 误差。

所有数值都是合成配置，不代表任何实物机器人。
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.kinematics.chain import JointVector
from src.utils.exceptions import ConfigError, ValidationError

logger = logging.getLogger(__name__)

LOW_COST_BACKLASH = 0.02
LOW_COST_OFFSET_RANGE = 0.2
LOW_COST_TRANSLATION_SIGMA = 0.002
LOW_COST_ROTATION_SIGMA = 0.01
LOW_COST_ENCODER_RESOLUTION = 2.0 * math.pi / 4096

PROFILES = ("noiseless", "low_cost", "backlash_only", "offset_only")


def _per_joint(value: Union[float, Sequence[float]], dof: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dof, float(arr))
    if arr.shape != (dof,):
        raise ValidationError(f"{name} 维度不匹配 (dimension mismatch): 期望 {dof}，实际 {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """
    噪声模型

    属性:
        encoder_offset: 编码器零偏（弧度），每个回合内恒定
        backlash_halfwidth: 每个关节的回差半宽（弧度）
        marker_translation_sigma: 标记平移噪声标准差（米）
        marker_rotation_sigma: 标记旋转噪声标准差（弧度）
        occlusion_mask: 每个连杆（1..d）是否被遮挡，None 表示都不遮挡
        dropout_probability: 每个连杆每帧被随机遮挡的概率
        encoder_resolution: 编码器分辨率（弧度/刻度），0 表示不量化
        rng_seed: 检测噪声和随机遮挡的种子
    """

    encoder_offset: JointVector
    backlash_halfwidth: np.ndarray
    marker_translation_sigma: float = 0.0
    marker_rotation_sigma: float = 0.0
    occlusion_mask: Optional[Tuple[bool, ...]] = None
    dropout_probability: np.ndarray = None
    encoder_resolution: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        offset = JointVector.of(self.encoder_offset)
        dof = len(offset)
        object.__setattr__(self, "encoder_offset", offset)
        backlash = _per_joint(self.backlash_halfwidth, dof, "backlash_halfwidth")
        if np.any(backlash < 0.0):
            raise ValidationError("回差半宽必须 >= 0")
        object.__setattr__(self, "backlash_halfwidth", backlash)
        if self.marker_translation_sigma < 0.0 or self.marker_rotation_sigma < 0.0:
            raise ValidationError("标记噪声标准差必须 >= 0")
        if self.encoder_resolution < 0.0:
            raise ValidationError("编码器分辨率必须 >= 0")
        dropout = _per_joint(0.0 if self.dropout_probability is None else self.dropout_probability, dof,
                             "dropout_probability")
        if np.any(dropout < 0.0) or np.any(dropout > 1.0):
            raise ValidationError("遮挡概率必须在 [0, 1] 内")
        object.__setattr__(self, "dropout_probability", dropout)
        if self.occlusion_mask is not None:
            mask = tuple(bool(m) for m in self.occlusion_mask)
            if len(mask) != dof:
                raise ValidationError(f"occlusion_mask 维度不匹配 (dimension mismatch): 期望 {dof}，实际 {len(mask)}")
            object.__setattr__(self, "occlusion_mask", mask)

    @property
    def dof(self) -> int:
        return len(self.encoder_offset)

    @property
    def occluded_links(self) -> Tuple[int, ...]:
        """固定遮挡的连杆序号（1..d）"""
        if self.occlusion_mask is None:
            return ()
        return tuple(j + 1 for j, hidden in enumerate(self.occlusion_mask) if hidden)

    @property
    def is_noiseless(self) -> bool:
        return (not np.any(self.encoder_offset.values) and not np.any(self.backlash_halfwidth)
                and self.marker_translation_sigma == 0.0 and self.marker_rotation_sigma == 0.0
                and self.encoder_resolution == 0.0)

    @classmethod
    def noiseless(cls, dof: int, rng_seed: int = 0) -> "NoiseModel":
        return cls(JointVector.zeros(dof), np.zeros(dof), rng_seed=rng_seed)

    @classmethod
    def low_cost(cls, dof: int, rng: np.random.Generator, rng_seed: int = 0) -> "NoiseModel":
        """低成本配置档，零偏从 rng 中抽取"""
        return cls(
            encoder_offset=JointVector(rng.uniform(-LOW_COST_OFFSET_RANGE, LOW_COST_OFFSET_RANGE, dof)),
            backlash_halfwidth=np.full(dof, LOW_COST_BACKLASH),
            marker_translation_sigma=LOW_COST_TRANSLATION_SIGMA,
            marker_rotation_sigma=LOW_COST_ROTATION_SIGMA,
            encoder_resolution=LOW_COST_ENCODER_RESOLUTION,
            rng_seed=rng_seed,
        )

    @classmethod
    def from_profile(cls, profile: str, dof: int, rng: np.random.Generator, rng_seed: int = 0) -> "NoiseModel":
        """
        按配置档名构造

        异常:
            ConfigError: 未知配置档
        """
        if profile == "noiseless":
            return cls.noiseless(dof, rng_seed)
        if profile == "low_cost":
            return cls.low_cost(dof, rng, rng_seed)
        if profile == "backlash_only":
            return cls(JointVector.zeros(dof), np.full(dof, LOW_COST_BACKLASH), rng_seed=rng_seed)
        if profile == "offset_only":
            return cls(JointVector(rng.uniform(-LOW_COST_OFFSET_RANGE, LOW_COST_OFFSET_RANGE, dof)),
                       np.zeros(dof), rng_seed=rng_seed)
        raise ConfigError(f"未知的噪声配置档: {profile}，可选 {list(PROFILES)}")

    @classmethod
    def from_dict(cls, document: Dict[str, Any], dof: int, rng: Optional[np.random.Generator] = None,
                  rng_seed: int = 0) -> "NoiseModel":
        """
        从配置字典构造

        可以给出 "profile" 作为基础，再用其余字段覆盖；encoder_offset 缺省时
        由配置档从 rng 抽取。

        异常:
            ConfigError: 出现未知配置项或取值非法
        """
        document = dict(document or {})
        known = {f.name for f in dataclasses.fields(cls)} | {"profile"}
        unknown = set(document) - known
        if unknown:
            raise ConfigError(f"未知的噪声模型配置项: {sorted(unknown)}")
        rng = rng if rng is not None else np.random.default_rng(rng_seed)
        base = cls.from_profile(document.pop("profile", "noiseless"), dof, rng, rng_seed)
        overrides = {k: v for k, v in document.items()}
        if "rng_seed" not in overrides:
            overrides["rng_seed"] = rng_seed
        try:
            return dataclasses.replace(base, **overrides)
        except (TypeError, ValueError, ValidationError) as e:
            raise ConfigError(f"噪声模型配置非法: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            "encoder_offset": self.encoder_offset.to_list(),
            "backlash_halfwidth": self.backlash_halfwidth.tolist(),
            "marker_translation_sigma": float(self.marker_translation_sigma),
            "marker_rotation_sigma": float(self.marker_rotation_sigma),
            "occlusion_mask": None if self.occlusion_mask is None else list(self.occlusion_mask),
            "dropout_probability": self.dropout_probability.tolist(),
            "encoder_resolution": float(self.encoder_resolution),
            "rng_seed": int(self.rng_seed),
        }

    def with_occlusion(self, hidden_links: Sequence[int]) -> "NoiseModel":
        """返回固定遮挡指定连杆（1..d）的副本"""
        hidden = set(hidden_links)
        return dataclasses.replace(self, occlusion_mask=tuple((j + 1) in hidden for j in range(self.dof)))
