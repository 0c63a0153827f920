"""
操作空間模組

透過參考點轉換，將所有機器人映射到共同的二維操作空間，
得到統一的二階控制仿射形式 p̈ = η + G·u。
DI 為特例：p 為本體位置、G = I、η = 0。
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from calculators.kinematics import FORWARD, KinematicSpec, VelocityState


def wrap_angle(phi: float) -> float:
    """將角度正規化至 (-π, π]"""
    return math.pi - ((math.pi - phi) % (2 * math.pi))


@dataclass(frozen=True)
class AgentState:
    """
    機器人完整狀態 x = [φ, x, y, v, ω]

    Attributes:
        phi: 航向角 (rad)，範圍 (-π, π]
        x, y: 本體位置 (m)
        v, omega: 速度狀態；DI 時為 (vx, vy)
        gear: 檔位（僅 CL 有意義）
    """
    phi: float
    x: float
    y: float
    v: float = 0.0
    omega: float = 0.0
    gear: int = FORWARD

    @property
    def velocity(self) -> VelocityState:
        return VelocityState(self.v, self.omega)

    @property
    def nu(self) -> np.ndarray:
        return np.array([self.v, self.omega], dtype=float)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def with_velocity(self, nu) -> "AgentState":
        return replace(self, v=float(nu[0]), omega=float(nu[1]))


@dataclass(frozen=True, eq=False)
class OpState:
    """
    操作空間狀態

    Attributes:
        p: 參考點位置
        p_dot: 參考點速度，恆等於 G·ν
        eta: 漂移加速度
        G: 2x2 輸入矩陣
    """
    p: np.ndarray
    p_dot: np.ndarray
    eta: np.ndarray
    G: np.ndarray


def reference_point(state: AgentState, spec: KinematicSpec) -> np.ndarray:
    """參考點 (x + x_r cos φ, y + x_r sin φ)；DI 回傳 (x, y)"""
    if spec.kinematic_class.holonomic:
        return state.position
    x_r = spec.x_r
    return np.array([state.x + x_r * math.cos(state.phi), state.y + x_r * math.sin(state.phi)])


def jacobian(state: AgentState, spec: KinematicSpec) -> np.ndarray:
    """
    參考點速度映射 J = [[cos φ, -x_r sin φ], [sin φ, x_r cos φ]]

    det(J) = x_r；DI 回傳單位矩陣
    """
    if spec.kinematic_class.holonomic:
        return np.eye(2)
    c, s = math.cos(state.phi), math.sin(state.phi)
    x_r = spec.x_r
    return np.array([[c, -x_r * s], [s, x_r * c]])


def drift(state: AgentState, spec: KinematicSpec) -> np.ndarray:
    """
    轉向造成的向心漂移加速度 η = J̇·ν

    η = ω · [[-sin φ, -x_r cos φ], [cos φ, -x_r sin φ]] · ν
    """
    if spec.kinematic_class.holonomic or state.omega == 0.0:
        return np.zeros(2)
    c, s = math.cos(state.phi), math.sin(state.phi)
    x_r = spec.x_r
    M = np.array([[-s, -x_r * c], [c, -x_r * s]])
    return state.omega * (M @ state.nu)


def op_accel(state: AgentState, spec: KinematicSpec, u) -> np.ndarray:
    """參考點加速度 p̈ = η + G·u"""
    return drift(state, spec) + jacobian(state, spec) @ np.asarray(u, dtype=float)


def inverse_velocity_map(state: AgentState, spec: KinematicSpec, p_dot_des) -> VelocityState:
    """
    由期望參考點速度求 ν = J⁻¹·ṗ_des（不做截斷，由呼叫端處理）

    J 的反矩陣有解析形式：[[cos φ, sin φ], [-sin φ / x_r, cos φ / x_r]]
    """
    target = np.asarray(p_dot_des, dtype=float).reshape(2)
    if spec.kinematic_class.holonomic:
        return VelocityState.from_array(target)
    c, s = math.cos(state.phi), math.sin(state.phi)
    x_r = spec.x_r
    v = c * target[0] + s * target[1]
    omega = (-s * target[0] + c * target[1]) / x_r
    return VelocityState(float(v), float(omega))


def op_state(state: AgentState, spec: KinematicSpec) -> OpState:
    """計算單一機器人的操作空間狀態"""
    G = jacobian(state, spec)
    return OpState(
        p=reference_point(state, spec),
        p_dot=G @ state.nu,
        eta=drift(state, spec),
        G=G,
    )


def integrate_pose(state: AgentState, spec: KinematicSpec, nu, dt: float) -> AgentState:
    """
    以保持不變的速度沿運動學模型精確積分一步

    非完整約束類別沿圓弧前進（ω ≈ 0 時退化為直線），
    DI 直接以 (vx, vy) 積分位置，航向不變。
    """
    nu = np.asarray(nu, dtype=float).reshape(2)
    v, omega = float(nu[0]), float(nu[1])

    if spec.kinematic_class.holonomic:
        return replace(state, x=state.x + v * dt, y=state.y + omega * dt, v=v, omega=omega)

    phi0 = state.phi
    phi1 = phi0 + omega * dt
    if abs(omega) > 1e-9:
        x = state.x + v / omega * (math.sin(phi1) - math.sin(phi0))
        y = state.y - v / omega * (math.cos(phi1) - math.cos(phi0))
    else:
        x = state.x + v * dt * math.cos(phi0)
        y = state.y + v * dt * math.sin(phi0)
    return replace(state, phi=wrap_angle(phi1), x=x, y=y, v=v, omega=omega)
