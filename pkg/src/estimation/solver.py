#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Levenberg-Marquardt 最小二乘求解器

小规模稠密问题（变量数 d <= 8）。阻尼为加性 λI：在雅可比零空间方向上
步长恒为零，因此欠约束的变量停留在初值处。阻尼更新采用增益比规则。
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.utils.exceptions import NumericalFailureError

logger = logging.getLogger(__name__)

ResidualFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]
Bounds = Tuple[np.ndarray, np.ndarray]

# 阻尼上限，超过后认为无法继续下降
MAX_DAMPING = 1e16


@dataclass
class SolverResult:
    """
    求解结果

    属性:
        x: 最优解
        cost: 残差平方和 ‖r‖²
        iterations: 迭代次数（包括被拒绝的步）
        converged: 是否满足梯度或步长收敛条件
        termination: 终止原因 gradient / step / max_iterations / damping
        cost_trace: 初值及每个被接受步之后的代价
        jacobian: 最优解处的残差雅可比
        gradient_norm: 最优解处代价梯度 2Jᵀr 在自由坐标上的范数
    """

    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    termination: str
    cost_trace: List[float] = field(default_factory=list)
    jacobian: Optional[np.ndarray] = None
    gradient_norm: float = 0.0


class LevenbergMarquardt:
    """
    Levenberg-Marquardt 求解器，支持盒约束

    有界时采用有效集策略：位于边界且梯度指向外侧的坐标在本步中固定，
    其余坐标上求解阻尼正规方程，因此迭代点可以沿自由坐标移动并离开边界。

    参数:
        max_iterations: 最大迭代次数
        gradient_tolerance: （投影）梯度范数阈值
        step_tolerance: 步长范数阈值
        damping_init: 初始阻尼相对于 max(diag(JᵀJ)) 的比例
        max_step: 单步步长（L2范数）上限，None 表示不限制
    """

    def __init__(self, max_iterations: int = 100, gradient_tolerance: float = 1e-10,
                 step_tolerance: float = 1e-12, damping_init: float = 1e-3,
                 max_step: Optional[float] = None):
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance
        self.step_tolerance = step_tolerance
        self.damping_init = damping_init
        self.max_step = max_step

    @staticmethod
    def free_coordinates(x: np.ndarray, gradient: np.ndarray, bounds: Optional[Bounds]) -> np.ndarray:
        """
        本步可以移动的坐标

        位于下界且下降方向 -g 指向下方、或位于上界且 -g 指向上方的坐标被固定。
        """
        if bounds is None:
            return np.ones(x.size, dtype=bool)
        lower, upper = bounds
        blocked = ((x <= lower) & (gradient > 0.0)) | ((x >= upper) & (gradient < 0.0))
        return ~blocked

    def solve(self, fn: ResidualFunction, x0: np.ndarray, bounds: Optional[Bounds] = None) -> SolverResult:
        """
        最小化 ‖r(x)‖²，可选 lower <= x <= upper

        参数:
            fn: 返回 (残差, 雅可比) 的函数
            x0: 初值，有界时先截断到边界内
            bounds: (lower, upper)，可选

        返回:
            SolverResult: 求解结果

        异常:
            NumericalFailureError: 代价出现非有限值，携带最后一个有效迭代点
        """
        x = np.array(x0, dtype=float)
        if bounds is not None:
            lower, upper = (np.asarray(b, dtype=float) for b in bounds)
            bounds = (lower, upper)
            x = np.clip(x, lower, upper)
        r, jac = fn(x)
        cost = float(r @ r)
        if not np.isfinite(cost):
            raise NumericalFailureError("初始代价为非有限值", last_theta=x, iterations=0)

        n = x.size
        hessian = jac.T @ jac
        gradient = jac.T @ r
        diag_max = float(np.max(np.diag(hessian))) if n else 0.0
        damping = self.damping_init * (diag_max if diag_max > 0.0 else 1.0)
        nu = 2.0

        trace = [cost]
        iterations = 0
        converged = False
        termination = "max_iterations"
        free = self.free_coordinates(x, gradient, bounds)

        while iterations < self.max_iterations:
            if 2.0 * np.linalg.norm(gradient[free]) < self.gradient_tolerance:
                converged, termination = True, "gradient"
                break
            iterations += 1

            delta = np.zeros(n)
            reduced = hessian[np.ix_(free, free)] + damping * np.eye(int(free.sum()))
            delta[free] = np.linalg.solve(reduced, -gradient[free])
            delta_norm = float(np.linalg.norm(delta))
            if self.max_step is not None and delta_norm > self.max_step:
                delta *= self.max_step / delta_norm
            candidate = x + delta
            if bounds is not None:
                candidate = np.clip(candidate, *bounds)
            step = candidate - x
            step_norm = float(np.linalg.norm(step))

            r_new, jac_new = fn(candidate)
            cost_new = float(r_new @ r_new)
            if not np.isfinite(cost_new):
                logger.error(f"第 {iterations} 次迭代代价为非有限值，保留上一个有效迭代点")
                raise NumericalFailureError(f"第 {iterations} 次迭代代价为非有限值", last_theta=x,
                                            iterations=iterations)

            model = r + jac @ step
            predicted = cost - float(model @ model)
            if cost_new < cost and predicted > 0.0:
                rho = (cost - cost_new) / predicted
                x, r, jac, cost = candidate, r_new, jac_new, cost_new
                hessian = jac.T @ jac
                gradient = jac.T @ r
                free = self.free_coordinates(x, gradient, bounds)
                trace.append(cost)
                damping *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                logger.debug(f"迭代 {iterations}: 接受，代价 {cost:.6e}，步长 {step_norm:.3e}，阻尼 {damping:.3e}")
                if step_norm < self.step_tolerance:
                    converged, termination = True, "step"
                    break
            else:
                damping *= nu
                nu *= 2.0
                logger.debug(f"迭代 {iterations}: 拒绝，阻尼增至 {damping:.3e}")
                if step_norm < self.step_tolerance:
                    converged, termination = True, "step"
                    break
                if damping > MAX_DAMPING:
                    termination = "damping"
                    break

        return SolverResult(
            x=x,
            cost=cost,
            iterations=iterations,
            converged=converged,
            termination=termination,
            cost_trace=trace,
            jacobian=jac,
            gradient_norm=float(2.0 * np.linalg.norm(gradient[free])),
        )
