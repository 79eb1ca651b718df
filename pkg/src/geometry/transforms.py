#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
SE(3)/SO(3) 刚体变换

提供旋转、刚体变换和旋量（twist）三种值类型，以及复合、求逆、指数/对数映射
和SE(3)距离。所有值在构造后不可变，可以在线程和进程之间自由共享。

约定:
    - 旋量坐标顺序为 (ω; v)：前三维是旋转（弧度），后三维是平移（米）
    - 四元数序列化顺序为 [w, x, y, z]，并规范为 w >= 0
    - 每次复合之后都重新正交化旋转矩阵
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from src.utils.exceptions import BranchAmbiguityError, ParseError, ValidationError

# 小于该角度时使用泰勒展开
SMALL_ANGLE = 1e-7
# 对数映射主分支要求旋转角 < π - LOG_BRANCH_MARGIN
LOG_BRANCH_MARGIN = 1e-6
# 解析四元数时允许的模长偏差
QUATERNION_NORM_TOLERANCE = 1e-6
# 构造旋转矩阵时允许的正交性偏差
ORTHONORMAL_TOLERANCE = 1e-6
# 接近π时改用四元数路径求旋转对数
_NEAR_PI = math.pi - 1e-4

DEFAULT_ROT_WEIGHT = 0.1


def hat(v: Sequence[float]) -> np.ndarray:
    """三维向量的反对称矩阵"""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """反对称矩阵对应的三维向量"""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def orthonormalize(m: np.ndarray) -> np.ndarray:
    """
    Gram-Schmidt 正交化，结果的行列式为 +1

    参数:
        m: 近似正交的3x3矩阵

    返回:
        np.ndarray: 正交矩阵
    """
    x = m[:, 0] / np.linalg.norm(m[:, 0])
    y = m[:, 1] - x * np.dot(x, m[:, 1])
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    return np.column_stack((x, y, z))


def rotation_angle(r: np.ndarray) -> float:
    """旋转矩阵的测地角，取值 [0, π]"""
    s = 0.5 * np.linalg.norm(vee(r - r.T))
    c = 0.5 * (np.trace(r) - 1.0)
    return math.atan2(s, c)


def _sinc_terms(theta: float):
    """
    返回 (A, B, C) = (sinθ/θ, (1-cosθ)/θ², (θ-sinθ)/θ³)

    θ < SMALL_ANGLE 时使用泰勒展开。
    """
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    half = 0.5 * theta
    a = math.sin(theta) / theta
    b = 0.5 * (math.sin(half) / half) ** 2
    c = (1.0 - a) / (theta * theta)
    return a, b, c


def _inverse_jacobian_coefficient(theta: float) -> float:
    """1/θ² - cot(θ/2)/(2θ)，用于 V⁻¹ 和右雅可比逆"""
    if theta < SMALL_ANGLE:
        return 1.0 / 12.0 + theta * theta / 720.0
    return 1.0 / (theta * theta) - 1.0 / (2.0 * theta * math.tan(0.5 * theta))


def so3_exp(omega: Sequence[float]) -> np.ndarray:
    """
    SO(3)指数映射（Rodrigues公式）

    参数:
        omega: 旋转向量（弧度）

    返回:
        np.ndarray: 3x3旋转矩阵
    """
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    a, b, _ = _sinc_terms(theta)
    w = hat(omega)
    return np.eye(3) + a * w + b * (w @ w)


def so3_log(r: np.ndarray) -> np.ndarray:
    """
    SO(3)对数映射，在 [0, π] 全范围内有定义

    θ 接近π时，反对称部分失去精度，改用scipy的四元数路径。

    参数:
        r: 3x3旋转矩阵

    返回:
        np.ndarray: 旋转向量
    """
    theta = rotation_angle(r)
    skew = vee(r - r.T)
    if theta < SMALL_ANGLE:
        return (0.5 + theta * theta / 12.0) * skew
    if theta > _NEAR_PI:
        return ScipyRotation.from_matrix(r).as_rotvec()
    return (theta / (2.0 * math.sin(theta))) * skew


def so3_right_jacobian_inverse(phi: Sequence[float]) -> np.ndarray:
    """
    SO(3)右雅可比的逆

    log(exp(φ)·exp(δ)) ≈ φ + Jr⁻¹(φ)·δ
    """
    phi = np.asarray(phi, dtype=float)
    theta = min(float(np.linalg.norm(phi)), _NEAR_PI)
    w = hat(phi)
    return np.eye(3) + 0.5 * w + _inverse_jacobian_coefficient(theta) * (w @ w)


class Rotation:
    """
    SO(3)元素，内部存储为正交化后的3x3矩阵
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix: np.ndarray):
        """
        初始化旋转

        参数:
            matrix: 近似正交、行列式为+1的3x3矩阵

        异常:
            ValidationError: 形状错误、存在反射或偏离正交过大
        """
        m = np.array(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValidationError(f"旋转矩阵必须是3x3，实际为 {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("旋转矩阵包含非有限值")
        if np.linalg.det(m) <= 0.0:
            raise ValidationError("旋转矩阵行列式必须为+1（不允许反射）")
        if np.max(np.abs(m.T @ m - np.eye(3))) > ORTHONORMAL_TOLERANCE:
            raise ValidationError("旋转矩阵不满足正交性")
        m = orthonormalize(m)
        m.setflags(write=False)
        object.__setattr__(self, "_matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("Rotation 不可变")

    def __reduce__(self):
        return (_restore_rotation, (np.array(self._matrix),))

    @classmethod
    def _trusted(cls, matrix: np.ndarray) -> "Rotation":
        """跳过校验，直接正交化（仅用于内部复合结果）"""
        obj = cls.__new__(cls)
        m = orthonormalize(matrix)
        m.setflags(write=False)
        object.__setattr__(obj, "_matrix", m)
        return obj

    @classmethod
    def identity(cls) -> "Rotation":
        return cls._trusted(np.eye(3))

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float]) -> "Rotation":
        """由旋转向量构造"""
        return cls._trusted(so3_exp(rotvec))

    @classmethod
    def about_axis(cls, axis: Sequence[float], angle: float) -> "Rotation":
        """绕单位轴旋转 angle 弧度"""
        axis = np.asarray(axis, dtype=float)
        return cls._trusted(so3_exp(axis / np.linalg.norm(axis) * angle))

    @classmethod
    def from_quaternion(cls, quaternion: Sequence[float]) -> "Rotation":
        """
        由单位四元数 [w, x, y, z] 构造

        异常:
            ValidationError: 长度不是4或模长偏离1超过1e-6
        """
        q = np.asarray(quaternion, dtype=float)
        if q.shape != (4,) or not np.all(np.isfinite(q)):
            raise ValidationError("四元数必须是4个有限数 [w, x, y, z]")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUATERNION_NORM_TOLERANCE:
            raise ValidationError(f"四元数不是单位长度 (non-unit quaternion): 模长={norm:.9f}")
        w, x, y, z = q
        return cls._trusted(ScipyRotation.from_quat([x, y, z, w]).as_matrix())

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        """在SO(3)上均匀采样"""
        return cls._trusted(ScipyRotation.random(random_state=rng).as_matrix())

    @property
    def matrix(self) -> np.ndarray:
        """只读的3x3矩阵"""
        return self._matrix

    def as_quaternion(self) -> np.ndarray:
        """返回 [w, x, y, z]，w >= 0"""
        x, y, z, w = ScipyRotation.from_matrix(self._matrix).as_quat()
        q = np.array([w, x, y, z])
        if q[0] < 0.0:
            q = -q
        return q

    def as_rotvec(self) -> np.ndarray:
        return so3_log(self._matrix)

    def angle(self) -> float:
        """测地旋转角（弧度）"""
        return rotation_angle(self._matrix)

    def inverse(self) -> "Rotation":
        return Rotation._trusted(self._matrix.T)

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation._trusted(self._matrix @ other._matrix)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """旋转向量或 (N, 3) 向量组"""
        vectors = np.asarray(vectors, dtype=float)
        return vectors @ self._matrix.T

    def orthonormality_defect(self) -> float:
        """max |RᵀR - I|"""
        return float(np.max(np.abs(self._matrix.T @ self._matrix - np.eye(3))))

    def __repr__(self) -> str:
        return f"Rotation(quaternion={np.round(self.as_quaternion(), 9).tolist()})"



def _restore_rotation(matrix: np.ndarray) -> Rotation:
    """反序列化时原样恢复矩阵，不再正交化，保证逐位一致"""
    m = np.array(matrix, dtype=float)
    m.setflags(write=False)
    obj = Rotation.__new__(Rotation)
    object.__setattr__(obj, "_matrix", m)
    return obj


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """
    SE(3)元素：先旋转后平移，T·p = R·p + t

    属性:
        rotation: 旋转部分
        translation: 平移部分（米）
    """

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        t = np.array(self.translation, dtype=float).reshape(-1)
        if t.shape != (3,):
            raise ValidationError(f"平移向量必须是3维，实际为 {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValidationError("平移向量包含非有限值")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "RigidTransform":
        return cls(Rotation.identity(), np.array([x, y, z], dtype=float))

    @classmethod
    def from_rotation(cls, rotation: Rotation, translation: Optional[Sequence[float]] = None) -> "RigidTransform":
        return cls(rotation, np.zeros(3) if translation is None else np.asarray(translation, dtype=float))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        """
        由4x4齐次矩阵构造

        异常:
            ValidationError: 形状错误或最后一行不是 [0, 0, 0, 1]
        """
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValidationError(f"齐次矩阵必须是4x4，实际为 {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise ValidationError("齐次矩阵最后一行必须是 [0, 0, 0, 1]")
        return cls(Rotation(m[:3, :3]), m[:3, 3])

    @classmethod
    def random(cls, rng: np.random.Generator, translation_scale: float = 1.0) -> "RigidTransform":
        """随机旋转 + 各轴 N(0, translation_scale²) 平移"""
        return cls(Rotation.random(rng), rng.normal(0.0, translation_scale, size=3))

    def as_matrix(self) -> np.ndarray:
        """4x4齐次矩阵"""
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self·other，旋转重新正交化"""
        r = self.rotation.matrix
        return RigidTransform(
            Rotation._trusted(r @ other.rotation.matrix),
            r @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        """(Rᵀ, -Rᵀt)"""
        rt = self.rotation.matrix.T
        return RigidTransform(Rotation._trusted(rt), -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """变换点或 (N, 3) 点组"""
        return self.rotation.apply(points) + self.translation

    def almost_equal(self, other: "RigidTransform", translation_tol: float = 1e-9,
                     rotation_tol: float = 1e-9) -> bool:
        """平移差和旋转角差都在容差内"""
        dt = float(np.linalg.norm(self.translation - other.translation))
        dr = rotation_angle(self.rotation.matrix.T @ other.rotation.matrix)
        return dt <= translation_tol and dr <= rotation_tol

    def to_dict(self) -> Dict[str, Any]:
        """序列化为 {translation: [x,y,z], quaternion: [w,x,y,z]}"""
        return {
            "translation": [float(v) for v in self.translation],
            "quaternion": [float(v) for v in self.rotation.as_quaternion()],
        }

    @classmethod
    def from_dict(cls, document: Dict[str, Any], source: Optional[str] = None,
                  location: str = "") -> "RigidTransform":
        """
        从 {translation, quaternion} 解析

        参数:
            document: 字典
            source: 文件名，用于错误定位（可选）
            location: 字段路径，用于错误定位

        异常:
            ParseError: 字段缺失、长度错误或四元数非单位长度
        """
        if not isinstance(document, dict):
            raise ParseError("变换应为JSON对象", source=source, location=location or "<root>")
        for key, size in (("translation", 3), ("quaternion", 4)):
            value = document.get(key)
            path = f"{location}.{key}" if location else key
            if value is None:
                raise ParseError("缺少必填字段", source=source, location=path)
            if not isinstance(value, (list, tuple)) or len(value) != size:
                raise ParseError(f"应为长度为{size}的数组", source=source, location=path)
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise ParseError("数组元素必须是数值", source=source, location=path)
        try:
            rotation = Rotation.from_quaternion(document["quaternion"])
            return cls(rotation, np.asarray(document["translation"], dtype=float))
        except ValidationError as e:
            path = f"{location}.quaternion" if location else "quaternion"
            raise ParseError(str(e), source=source, location=path) from e

    def __repr__(self) -> str:
        return (f"RigidTransform(translation={np.round(self.translation, 9).tolist()}, "
                f"quaternion={np.round(self.rotation.as_quaternion(), 9).tolist()})")


@dataclass(frozen=True, eq=False)
class Twist:
    """
    SE(3)切空间坐标 (ω; v)

    属性:
        vector: 6维向量，前3维旋转（弧度），后3维平移（米）
    """

    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=float).reshape(-1)
        if v.shape != (6,):
            raise ValidationError(f"旋量必须是6维，实际为 {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(6))

    @classmethod
    def from_parts(cls, rotational: Iterable[float], translational: Iterable[float]) -> "Twist":
        return cls(np.concatenate([np.asarray(list(rotational), float), np.asarray(list(translational), float)]))

    @property
    def rotational(self) -> np.ndarray:
        return self.vector[:3]

    @property
    def translational(self) -> np.ndarray:
        return self.vector[3:]


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """a·b"""
    return a.compose(b)


def inverse(t: RigidTransform) -> RigidTransform:
    """群逆"""
    return t.inverse()


def se3_distance(a: RigidTransform, b: RigidTransform, rot_weight: float = DEFAULT_ROT_WEIGHT) -> float:
    """
    SE(3)上的距离

    d(a, b) = sqrt(‖t_a - t_b‖² + rot_weight² · angle(R_aᵀR_b)²)

    参数:
        a, b: 两个刚体变换
        rot_weight: 旋转权重（米/弧度），必须为正

    返回:
        float: 距离
    """
    if not rot_weight > 0.0:
        raise ValidationError(f"rot_weight 必须为正，实际为 {rot_weight}")
    dt = a.translation - b.translation
    angle = rotation_angle(a.rotation.matrix.T @ b.rotation.matrix)
    return math.sqrt(float(dt @ dt) + (rot_weight * angle) ** 2)


def se3_exp(twist: Twist) -> RigidTransform:
    """
    SE(3)指数映射

    参数:
        twist: 切空间坐标 (ω; v)

    返回:
        RigidTransform: exp(ξ)
    """
    omega = twist.rotational
    theta = float(np.linalg.norm(omega))
    a, b, c = _sinc_terms(theta)
    w = hat(omega)
    w2 = w @ w
    rotation = np.eye(3) + a * w + b * w2
    v = np.eye(3) + b * w + c * w2
    return RigidTransform(Rotation._trusted(rotation), v @ twist.translational)


def se3_log(t: RigidTransform) -> Twist:
    """
    SE(3)对数映射（主分支）

    异常:
        BranchAmbiguityError: 旋转角 >= π - 1e-6
    """
    r = t.rotation.matrix
    theta = rotation_angle(r)
    if theta >= math.pi - LOG_BRANCH_MARGIN:
        raise BranchAmbiguityError(f"旋转角 {theta:.9f} 过于接近π，对数映射分支不唯一")
    omega = so3_log(r)
    w = hat(omega)
    v_inv = np.eye(3) - 0.5 * w + _inverse_jacobian_coefficient(theta) * (w @ w)
    return Twist(np.concatenate([omega, v_inv @ t.translation]))


def rot_x(angle: float) -> RigidTransform:
    return RigidTransform(Rotation.about_axis([1.0, 0.0, 0.0], angle), np.zeros(3))


def rot_y(angle: float) -> RigidTransform:
    return RigidTransform(Rotation.about_axis([0.0, 1.0, 0.0], angle), np.zeros(3))


def rot_z(angle: float) -> RigidTransform:
    return RigidTransform(Rotation.about_axis([0.0, 0.0, 1.0], angle), np.zeros(3))


def pose_error(estimated: RigidTransform, reference: RigidTransform):
    """
    返回 (平移误差 米, 旋转误差 弧度)

    旋转误差统一使用弧度。
    """
    dt = float(np.linalg.norm(estimated.translation - reference.translation))
    dr = rotation_angle(estimated.rotation.matrix.T @ reference.rotation.matrix)
    return dt, dr
