"""
二維 QP 求解模組

每個機器人每步求解
    min ‖u - u_nom‖²  s.t.  a_ij·u >= b_ij (∀ j ≠ i),  u ∈ U_i^acc
只有兩個變數，以 active-set 精確列舉求解：
無約束點、各約束投影點、約束兩兩交點中取最佳可行者。
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from calculators.kinematics import KinematicClass, KinematicSpec, acceleration_set
from calculators.opspace import AgentState
from calculators.polytope import Polytope2, nearest_point


class QpStatus(str, Enum):
    SOLVED = "solved"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class QpProblem:
    """
    Attributes:
        u_nom: 名目輸入
        rows: (a, b) 列表，約束為 a·u >= b
        bounds: 加速度可行集合
    """
    u_nom: np.ndarray
    rows: Sequence[tuple[np.ndarray, float]]
    bounds: Polytope2

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """
        所有約束轉成 n·u <= c 形式，約束列在前、集合邊界在後

        a·u >= b  <=>  (-a)·u <= -b
        """
        if self.rows:
            A_rows = -np.array([np.asarray(a, dtype=float) for a, _ in self.rows]).reshape(-1, 2)
            c_rows = -np.array([float(b) for _, b in self.rows])
        else:
            A_rows = np.empty((0, 2))
            c_rows = np.empty(0)
        normals = np.vstack([A_rows, self.bounds.normals])
        offsets = np.concatenate([c_rows, self.bounds.offsets])
        return normals, offsets


@dataclass(frozen=True, eq=False)
class QpOutcome:
    """
    Attributes:
        status: 求解結果
        u: 最佳解（Infeasible 時為 None）
        active: active 約束索引（約束列在前、集合邊界在後）
    """
    status: QpStatus
    u: Optional[np.ndarray] = None
    active: tuple[int, ...] = field(default_factory=tuple)

    @property
    def solved(self) -> bool:
        return self.status is QpStatus.SOLVED


def solve(problem: QpProblem) -> QpOutcome:
    """
    求解 QP

    交集為空時回傳 Infeasible；平行約束保留較緊者

    Args:
        problem: QP 問題

    Returns:
        QpOutcome
    """
    normals, offsets = problem.stacked()
    u, active = nearest_point(normals, offsets, problem.u_nom)
    if u is None:
        logger.debug(f"QP 不可行: {len(problem.rows)} 條約束列")
        return QpOutcome(QpStatus.INFEASIBLE)
    return QpOutcome(QpStatus.SOLVED, u, active)


def braking_input(
    state: AgentState,
    spec: KinematicSpec,
    dt: float
) -> np.ndarray:
    """
    最後手段的全力煞車：讓 ν 盡快趨向 0

    u = -ν/Δt 各軸截斷至加速度上限；DD 則等比例縮放進輪加速度菱形。
    結果一定在不含轉向下限的精確集合內，執行時不會被速度投影改變。
    """
    nu = state.nu
    if not np.any(nu):
        return np.zeros(2)

    raw = -nu / dt
    if spec.kinematic_class is KinematicClass.DD:
        half = spec.wheelbase / 2
        wheel = max(abs(raw[0] + half * raw[1]), abs(raw[0] - half * raw[1]))
        scale = min(1.0, spec.wheel_accel_max / wheel) if wheel > 0 else 1.0
        u = raw * scale
    else:
        u = np.array([
            np.clip(raw[0], -spec.a_max, spec.a_max),
            np.clip(raw[1], -spec.omega_dot_max, spec.omega_dot_max),
        ])

    U = acceleration_set(spec, nu, dt, gear=state.gear, with_floor=False)
    if not U.contains(u, tol=1e-7):
        logger.debug(f"{spec.kinematic_class.value} 煞車輸入不在加速度集合內，改用投影")
        u = U.project(u)
    return u
