"""
名目控制器模組

分散式人工位能場 (APF) 產生期望參考點速度：
    ṗ_nom = w·f_att + (1 - w)·f_rep
再以比例控制轉為名目加速度；非完整約束類別經由
速度 / 航向追蹤控制器追蹤。
另提供 HOCBF 基準所用、忽略異質性的約束列。
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from calculators.barrier import CbfGains, PairConstraint, PairGeometry, pair_radius, row_from_op
from calculators.kinematics import KinematicSpec, acceleration_box
from calculators.opspace import AgentState, inverse_velocity_map, op_state
from config.settings import NOMINAL_PARAMS
from utils.errors import ParameterError

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2
COINCIDENT_DIST = 1e-9


@dataclass(frozen=True)
class NominalConfig:
    """
    Attributes:
        w: 吸引力權重 [0, 1]
        k_att: 吸引增益 (1/s)
        k_rep: 排斥增益 (m⁴/s)
        d_cut: 排斥作用半徑 (m)
        k_p: DI 速度追蹤增益 (1/s)
        k_v: 速度追蹤增益
        k_phi: 角速度追蹤增益
    """
    w: float = NOMINAL_PARAMS["w"]
    k_att: float = NOMINAL_PARAMS["k_att"]
    k_rep: float = NOMINAL_PARAMS["k_rep"]
    d_cut: float = NOMINAL_PARAMS["d_cut"]
    k_p: float = NOMINAL_PARAMS["k_p"]
    k_v: float = NOMINAL_PARAMS["k_v"]
    k_phi: float = NOMINAL_PARAMS["k_phi"]

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ParameterError(f"w 必須介於 [0, 1]: {self.w}")
        for name in ("k_att", "k_rep", "d_cut", "k_p", "k_v", "k_phi"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} 必須非負: {getattr(self, name)}")


def saturate(vec, limit: float) -> np.ndarray:
    """將向量長度限制在 limit 以內"""
    vec = np.asarray(vec, dtype=float)
    norm = float(np.linalg.norm(vec))
    if norm > limit > 0:
        return vec * (limit / norm)
    return vec


def apf_velocity(
    p_i,
    goal,
    neighbors,
    cfg: NominalConfig,
    v_max: float,
    agent_index: int = 0
) -> np.ndarray:
    """
    APF 期望參考點速度

    Args:
        p_i: 自身參考點
        goal: 目標位置
        neighbors: (M, 2) 鄰居參考點
        cfg: 名目控制器參數
        v_max: 速度上限
        agent_index: 自身索引，用於重合時的確定性排斥方向

    Returns:
        ṗ_nom，長度不超過 v_max
    """
    p_i = np.asarray(p_i, dtype=float)
    f_att = saturate(cfg.k_att * (np.asarray(goal, dtype=float) - p_i), v_max)

    f_rep = np.zeros(2)
    others = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    if others.shape[0] > 0:
        diff = p_i[None, :] - others
        dist = np.linalg.norm(diff, axis=1)

        coincident = dist < COINCIDENT_DIST
        if np.any(coincident):
            angle = (agent_index * GOLDEN_RATIO) % (2 * math.pi)
            f_rep += int(np.sum(coincident)) * v_max * np.array([math.cos(angle), math.sin(angle)])

        near = (~coincident) & (dist < cfg.d_cut)
        if np.any(near):
            d = dist[near]
            # 單位方向 / d³
            f_rep += np.sum(cfg.k_rep * diff[near] / d[:, None] ** 4, axis=0)

    blended = cfg.w * f_att + (1.0 - cfg.w) * f_rep
    return saturate(blended, v_max)


def clamp_to_box(spec: KinematicSpec, u) -> np.ndarray:
    """截斷至加速度外框（DD 為輪加速度菱形）"""
    return acceleration_box(spec).project(u)


def velocity_to_accel(
    state: AgentState,
    spec: KinematicSpec,
    p_dot_nom,
    cfg: NominalConfig
) -> np.ndarray:
    """
    期望參考點速度轉名目加速度

    DI: u = k_p (ṗ_nom - ṗ)；
    非完整約束: ν_des = J⁻¹ ṗ_nom，u = (k_v (v_des - v), k_φ (ω_des - ω))。
    無倒車檔的類別遇到 v_des < 0 時改為以最大曲率前進迴轉，
    轉向依 ω_des 的正負（為 0 時向左）。
    結果截斷至加速度外框。
    """
    p_dot_nom = np.asarray(p_dot_nom, dtype=float)
    if spec.kinematic_class.holonomic:
        u = cfg.k_p * (p_dot_nom - state.nu)
    else:
        nu_des = inverse_velocity_map(state, spec, p_dot_nom)
        v_des, omega_des = nu_des.v, nu_des.omega
        if v_des < 0 and not spec.kinematic_class.reversible:
            v_des = min(-v_des, spec.v_max)
            turn = -1.0 if omega_des < 0 else 1.0
            omega_des = turn * spec.curvature_gain * v_des
        u = np.array([cfg.k_v * (v_des - state.v), cfg.k_phi * (omega_des - state.omega)])
    return clamp_to_box(spec, u)


def hocbf_baseline_row(
    state_i: AgentState,
    spec_i: KinematicSpec,
    state_j: AgentState,
    spec_j: KinematicSpec,
    gains: CbfGains,
    alpha: float = 0.5
) -> PairConstraint:
    """
    HOCBF 基準的約束列：所有機器人視為雙積分器

    G = I、η = 0，決策變數為參考點加速度
    """
    op_i = op_state(state_i, spec_i)
    op_j = op_state(state_j, spec_j)
    geom = PairGeometry.from_op(op_i, op_j, pair_radius(spec_i, spec_j))
    return row_from_op(op_i, geom, gains, alpha, holonomic_model=True)
