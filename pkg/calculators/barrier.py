"""
成對 barrier 計算模組

h_ij = ‖Δp‖² - R²，以 backstepping 擴增 ψ = ḣ + λ₁h，
二階條件中與輸入無關的項合併為共同需求 Υ_ij，
再依責任比例 α 拆成每個機器人各自的線性約束 a·u >= b。
函式皆可作用於最後一維為 2 的批次陣列。
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from calculators.kinematics import KinematicSpec
from calculators.opspace import AgentState, OpState, op_state
from utils.errors import DegeneratePairError, ParameterError

# 參考點重合門檻
DEGENERATE_DIST = 1e-9


@dataclass(frozen=True)
class CbfGains:
    """backstepping 增益 λ₁ 與外層 CBF 增益 λ₂"""
    lambda1: float = 2.0
    lambda2: float = 2.0

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ParameterError(f"CBF 增益必須為正: λ₁={self.lambda1}, λ₂={self.lambda2}")


@dataclass(frozen=True, eq=False)
class PairGeometry:
    """
    成對幾何量

    Attributes:
        radius: 成對安全距離 R_ij
        delta_p: p_i - p_j
        delta_p_dot: ṗ_i - ṗ_j
    """
    radius: float
    delta_p: np.ndarray
    delta_p_dot: np.ndarray

    @classmethod
    def from_op(cls, op_i: OpState, op_j: OpState, radius: float) -> "PairGeometry":
        return cls(radius, op_i.p - op_j.p, op_i.p_dot - op_j.p_dot)

    def swapped(self) -> "PairGeometry":
        return PairGeometry(self.radius, -self.delta_p, -self.delta_p_dot)


@dataclass(frozen=True, eq=False)
class PairConstraint:
    """
    單向 CBF 約束列 a·u >= b

    h / h_dot / psi 為診斷用
    """
    a: np.ndarray
    b: float
    upsilon: float
    alpha: float
    h: float
    h_dot: float
    psi: float


def pair_radius(spec_i: KinematicSpec, spec_j: KinematicSpec) -> float:
    """R_ij = (x_r,i + r_i) + (x_r,j + r_j)"""
    return spec_i.cbf_radius + spec_j.cbf_radius


def h(geom: PairGeometry):
    """平方距離 barrier ‖Δp‖² - R²"""
    return np.sum(np.square(geom.delta_p), axis=-1) - np.square(geom.radius)


def h_dot(geom: PairGeometry):
    """ḣ = 2 Δp·Δṗ"""
    return 2.0 * np.sum(geom.delta_p * geom.delta_p_dot, axis=-1)


def psi(geom: PairGeometry, gains: CbfGains):
    """速度層級安全餘裕 ψ = ḣ + λ₁h"""
    return h_dot(geom) + gains.lambda1 * h(geom)


def upsilon(geom: PairGeometry, gains: CbfGains):
    """
    共同需求 Υ = 2‖Δṗ‖² + (λ₁+λ₂)ḣ + λ₁λ₂h

    對 (i, j) 互換對稱
    """
    l1, l2 = gains.lambda1, gains.lambda2
    return (
        2.0 * np.sum(np.square(geom.delta_p_dot), axis=-1)
        + (l1 + l2) * h_dot(geom)
        + l1 * l2 * h(geom)
    )


def agent_rows(
    op_i: OpState,
    delta_p,
    alpha,
    upsilon_values,
    holonomic_model: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """
    agent i 對多個鄰居的約束列（批次）

    Args:
        op_i: agent i 的操作空間狀態
        delta_p: (M, 2) p_i - p_j
        alpha: (M,) 責任比例
        upsilon_values: (M,) 共同需求 Υ_ij
        holonomic_model: 視 G = I、η = 0

    Returns:
        (A, b)，約束為 A[k]·u >= b[k]
    """
    dp = np.asarray(delta_p, dtype=float).reshape(-1, 2)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    ups = np.asarray(upsilon_values, dtype=float).reshape(-1)
    if np.any((alpha < 0.0) | (alpha > 1.0)):
        raise ParameterError(f"α 必須介於 [0, 1]: {alpha.tolist()}")

    if holonomic_model:
        return 2.0 * dp, -alpha * ups
    return 2.0 * (dp @ op_i.G), -2.0 * (dp @ op_i.eta) - alpha * ups


def row_from_op(
    op_i: OpState,
    geom: PairGeometry,
    gains: CbfGains,
    alpha: float,
    upsilon_value: Optional[float] = None,
    holonomic_model: bool = False
) -> PairConstraint:
    """
    由操作空間狀態組出 agent i 的約束列

    a = 2Δpᵀ G_i，b = -2Δp·η_i - α Υ。
    holonomic_model 為真時視 G = I、η = 0（HOCBF 基準）。

    Raises:
        DegeneratePairError: 參考點重合
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"α 必須介於 [0, 1]: {alpha}")
    dp = geom.delta_p
    if np.linalg.norm(dp) < DEGENERATE_DIST:
        raise DegeneratePairError("參考點重合，無法建立約束")

    ups = float(upsilon(geom, gains)) if upsilon_value is None else float(upsilon_value)
    A, b = agent_rows(op_i, dp, [alpha], [ups], holonomic_model)

    hv = float(h(geom))
    hd = float(h_dot(geom))
    return PairConstraint(
        a=A[0],
        b=float(b[0]),
        upsilon=ups,
        alpha=float(alpha),
        h=hv,
        h_dot=hd,
        psi=hd + gains.lambda1 * hv,
    )


def constraint_row(
    state_i: AgentState,
    spec_i: KinematicSpec,
    state_j: AgentState,
    spec_j: KinematicSpec,
    gains: CbfGains,
    alpha: float
) -> PairConstraint:
    """agent i 對 agent j 承擔 α 比例的解耦約束"""
    op_i = op_state(state_i, spec_i)
    op_j = op_state(state_j, spec_j)
    geom = PairGeometry.from_op(op_i, op_j, pair_radius(spec_i, spec_j))
    return row_from_op(op_i, geom, gains, alpha)


def joint_constraint_value(
    op_i: OpState,
    op_j: OpState,
    geom: PairGeometry,
    gains: CbfGains,
    u_i,
    u_j
) -> float:
    """
    耦合約束左式 2Δpᵀ(G_i u_i - G_j u_j) + 2Δpᵀ(η_i - η_j) + Υ

    >= 0 等價於 ψ̇ + λ₂ψ >= 0
    """
    dp = geom.delta_p
    u_i = np.asarray(u_i, dtype=float)
    u_j = np.asarray(u_j, dtype=float)
    return float(
        2.0 * dp @ (op_i.G @ u_i - op_j.G @ u_j)
        + 2.0 * dp @ (op_i.eta - op_j.eta)
        + upsilon(geom, gains)
    )
