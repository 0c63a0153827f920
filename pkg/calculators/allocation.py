"""
能力感知責任分配模組

以加速度集合的支撐函數量化機器人沿特定方向的能力：
- 分離能力 ρ：沿避碰方向能產生的最大分離加速度
- 前進能力 σ：朝名目運動方向加速的能力
α_prog 依前進能力分配，再以可行區間 [α_min, α_max] 截斷，
區間為空時退回平均分配。
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from loguru import logger

from calculators.kinematics import KinematicSpec, acceleration_set
from calculators.opspace import AgentState, jacobian, drift
from utils.errors import AllocationContractError, GeometryError, ParameterError


class AllocationStrategy(str, Enum):
    """消融實驗的三種分配策略"""
    EQUAL = "equal"
    CAPABILITY_ONLY = "cap"
    FULL = "full"


@dataclass(frozen=True)
class AllocationConfig:
    """
    Attributes:
        epsilon: 除零保護
        strategy: 分配策略
    """
    epsilon: float = 1e-6
    strategy: AllocationStrategy = AllocationStrategy.FULL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon 必須為正: {self.epsilon}")
        object.__setattr__(self, "strategy", AllocationStrategy(self.strategy))


@dataclass(frozen=True)
class CapabilityReport:
    """
    單向配對的能力指標

    Attributes:
        rho: 原始分離能力
        rho_bar: 扣除漂移後的有效淨能力（>= 0）
        sigma: 前進能力
    """
    rho: float
    rho_bar: float
    sigma: float = 0.0


def support(vertices, d) -> float:
    """
    支撐函數 S_U(d) = max_{u ∈ U} d·u

    多邊形的線性函數最大值必在頂點取得

    Raises:
        GeometryError: 頂點列表為空
    """
    V = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if V.shape[0] == 0:
        raise GeometryError("頂點列表為空")
    return float(np.max(V @ np.asarray(d, dtype=float).reshape(2)))


def rho_many(vertices, G, eta, delta_p) -> tuple[np.ndarray, np.ndarray]:
    """
    對多個鄰居同時計算 (ρ, ρ̄)

    Args:
        vertices: (k, 2) 加速度集合頂點
        G: agent i 的輸入矩陣
        eta: agent i 的漂移
        delta_p: (M, 2) p_i - p_j

    Returns:
        (ρ, ρ̄)，各為 (M,)
    """
    V = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if V.shape[0] == 0:
        raise GeometryError("頂點列表為空")
    dp = np.asarray(delta_p, dtype=float).reshape(-1, 2)
    rho = np.max(V @ (2.0 * (dp @ G)).T, axis=0)
    rho_bar = np.maximum(rho + 2.0 * (dp @ np.asarray(eta, dtype=float)), 0.0)
    return rho, rho_bar


def rho_from_vertices(vertices, G, eta, delta_p) -> tuple[float, float]:
    """由頂點計算 (ρ, ρ̄)，ρ = S(2Gᵀ Δp)，ρ̄ = max(ρ + 2Δp·η, 0)"""
    rho, rho_bar = rho_many(vertices, G, eta, delta_p)
    return float(rho[0]), float(rho_bar[0])


def sigma_from_vertices(vertices, G, p_dot, p_dot_nom) -> float:
    """由頂點計算前進能力 σ = max(S(Gᵀ d), 0)，d = ṗ_nom - ṗ"""
    d = np.asarray(p_dot_nom, dtype=float) - np.asarray(p_dot, dtype=float)
    if not np.any(d):
        return 0.0
    return max(support(vertices, G.T @ d), 0.0)


def separating_capability(
    state: AgentState,
    spec: KinematicSpec,
    delta_p,
    dt: float
) -> CapabilityReport:
    """
    agent i 沿 Δp 方向的分離能力

    Args:
        state: agent i 狀態
        spec: agent i 參數
        delta_p: p_i - p_j
        dt: 時間步長

    Returns:
        ρ 與 ρ̄（σ 為 0）
    """
    U = acceleration_set(spec, state.nu, dt, gear=state.gear, with_floor=False)
    rho, rho_bar = rho_from_vertices(U.vertices, jacobian(state, spec), drift(state, spec), delta_p)
    return CapabilityReport(rho=rho, rho_bar=rho_bar)


def progress_capability(
    state: AgentState,
    spec: KinematicSpec,
    p_dot_nom,
    dt: float
) -> float:
    """agent i 朝名目速度 ṗ_nom 加速的能力 σ（截斷於 0）"""
    U = acceleration_set(spec, state.nu, dt, gear=state.gear, with_floor=False)
    G = jacobian(state, spec)
    return sigma_from_vertices(U.vertices, G, G @ state.nu, p_dot_nom)


def alpha_prog(sigma_i: float, sigma_j: float, epsilon: float) -> float:
    """
    依前進能力分配 α = (σ_i + ε/2) / (σ_i + σ_j + ε)

    ε 平分給兩端：兩者皆為 0 時為 ½，且對 σ_i 嚴格遞增，
    與 σ_i / (σ_i + σ_j + ε) 相差不超過 ε/2 的量級
    """
    if sigma_i < 0 or sigma_j < 0:
        raise AllocationContractError(f"σ 必須非負: {sigma_i}, {sigma_j}")
    return (sigma_i + epsilon / 2) / (sigma_i + sigma_j + epsilon)


def alpha_interval(rho_bar_i: float, rho_bar_j: float, upsilon_value: float) -> tuple[float, float]:
    """
    可行區間 [α_min, α_max]

    α_min = max(0, 1 - ρ̄_j/(-Υ))，α_max = min(1, ρ̄_i/(-Υ))

    Raises:
        AllocationContractError: Υ >= 0（不需要分離時區間無意義）
    """
    if upsilon_value >= 0:
        raise AllocationContractError(f"Υ 必須為負才能計算可行區間: {upsilon_value}")
    demand = -upsilon_value
    alpha_min = max(0.0, 1.0 - rho_bar_j / demand)
    alpha_max = min(1.0, rho_bar_i / demand)
    return alpha_min, alpha_max


def alpha_final(
    alpha_progress: float,
    interval: tuple[float, float] | None,
    upsilon_value: float,
    strategy: AllocationStrategy
) -> float:
    """
    依策略決定最終 α

    Equal: ½；CapabilityOnly: α_prog；
    Full: Υ >= 0 時為 α_prog，區間非空時截斷，否則退回 ½
    """
    strategy = AllocationStrategy(strategy)
    if strategy is AllocationStrategy.EQUAL:
        return 0.5
    if strategy is AllocationStrategy.CAPABILITY_ONLY or upsilon_value >= 0:
        return alpha_progress

    if interval is None:
        raise AllocationContractError("Full 策略在 Υ < 0 時需要可行區間")
    alpha_min, alpha_max = interval
    if alpha_min <= alpha_max:
        return float(np.clip(alpha_progress, alpha_min, alpha_max))

    logger.debug(f"可行區間為空 [{alpha_min:.4f}, {alpha_max:.4f}]，退回平均分配")
    return 0.5


def allocate_pair(
    sigma_i: float,
    sigma_j: float,
    rho_bar_i: float,
    rho_bar_j: float,
    upsilon_value: float,
    cfg: AllocationConfig
) -> tuple[float, float]:
    """
    對無序配對 (i < j) 只計算一次 α_ij，α_ji = 1 - α_ij

    Returns:
        (α_ij, α_ji)
    """
    if cfg.strategy is AllocationStrategy.EQUAL:
        return 0.5, 0.5

    a_prog = alpha_prog(sigma_i, sigma_j, cfg.epsilon)
    interval = None
    if cfg.strategy is AllocationStrategy.FULL and upsilon_value < 0:
        interval = alpha_interval(rho_bar_i, rho_bar_j, upsilon_value)
    alpha = alpha_final(a_prog, interval, upsilon_value, cfg.strategy)
    return alpha, 1.0 - alpha
