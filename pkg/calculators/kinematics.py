"""
運動學類別模組

定義五種運動學類別 (DI / UNI / DD / CL / FO) 的參數、
速度層級可行集合 U_i 與其導出的加速度層級集合 U_i^acc。
所有集合皆為 (v, ω) 平面上的凸多邊形；DI 的兩個分量為 (vx, vy)。
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Optional

import numpy as np
from loguru import logger

from calculators.polytope import Polytope2
from config.settings import AGENT_PARAMS
from utils.errors import ParameterError, StateError

# 速度狀態的成員容差
STATE_SLACK = 1e-6
# 前進 / 倒車檔位
FORWARD = 1
REVERSE = -1


class KinematicClass(str, Enum):
    """運動學類別，DI 為唯一的完整約束 (holonomic) 類別"""
    DI = "DI"
    UNI = "UNI"
    DD = "DD"
    CL = "CL"
    FO = "FO"

    @property
    def holonomic(self) -> bool:
        return self is KinematicClass.DI

    @property
    def steerable(self) -> bool:
        """具轉向角限制（曲率錐）的類別"""
        return self in (KinematicClass.CL, KinematicClass.FO)

    @property
    def reversible(self) -> bool:
        """可倒車（FO 無倒車檔）"""
        return self is not KinematicClass.FO


@dataclass(frozen=True)
class KinematicSpec:
    """
    單一機器人的運動學與外形參數

    Attributes:
        kinematic_class: 運動學類別
        x_r: look-ahead 距離 (m)，DI 為 0
        v_max: 最大前進速度 (m/s)
        omega_max: 最大角速度 (rad/s，僅 UNI)
        a_max: 最大線加速度 (m/s²)
        omega_dot_max: 最大角加速度 (rad/s²)
        wheelbase: 軸距 ℓ (m，DD / CL / FO)
        psi_max: 最大轉向角 (rad，CL / FO)
        r_phys: 外接圓半徑 (m)
        steer_floor: 角加速度半寬下限 (rad/s²，CL / FO)
        wheel_accel_max: 輪加速度上限 a_w (m/s²，僅 DD)
    """
    kinematic_class: KinematicClass
    x_r: float
    v_max: float
    omega_max: float
    a_max: float
    omega_dot_max: float
    wheelbase: float
    psi_max: float
    r_phys: float
    steer_floor: float
    wheel_accel_max: float

    def __post_init__(self):
        self.validate()

    @classmethod
    def default(cls, kinematic_class: KinematicClass | str, **overrides) -> "KinematicSpec":
        """以設定檔的預設參數建立"""
        kc = KinematicClass(kinematic_class)
        params = dict(AGENT_PARAMS[kc.value])
        params.update(overrides)
        return cls(kinematic_class=kc, **params)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KinematicSpec":
        """
        由情境 JSON 的 spec 區塊建立，未提供的欄位使用預設值

        JSON 中的 `class` 對應 kinematic_class
        """
        data = dict(data)
        if "class" not in data:
            raise ParameterError("spec 缺少 class 欄位")
        try:
            kc = KinematicClass(str(data.pop("class")).upper())
        except ValueError as e:
            raise ParameterError(f"未知的運動學類別: {e}") from e

        known = {f.name for f in fields(cls)} - {"kinematic_class"}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"spec 含未知欄位: {sorted(unknown)}")
        return cls.default(kc, **{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict[str, Any]:
        """轉換為情境 JSON 格式"""
        out: dict[str, Any] = {"class": self.kinematic_class.value}
        for f in fields(self):
            if f.name != "kinematic_class":
                out[f.name] = getattr(self, f.name)
        return out

    def with_overrides(self, **overrides) -> "KinematicSpec":
        return replace(self, **overrides)

    def validate(self):
        """
        檢查參數合法性

        Raises:
            ParameterError: 參數為負、非有限值或必要參數為 0
        """
        for f in fields(self):
            if f.name == "kinematic_class":
                continue
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise ParameterError(f"{self.kinematic_class.value}.{f.name} 必須為非負有限值: {value}")

        kc = self.kinematic_class
        if self.v_max <= 0 or self.a_max <= 0 or self.omega_dot_max <= 0:
            raise ParameterError(f"{kc.value}: v_max / a_max / omega_dot_max 必須為正")
        if not kc.holonomic and self.x_r <= 0:
            raise ParameterError(f"{kc.value}: 非完整約束類別的 x_r 必須為正")
        if kc is KinematicClass.UNI and self.omega_max <= 0:
            raise ParameterError("UNI: omega_max 必須為正")
        if kc in (KinematicClass.DD, KinematicClass.CL, KinematicClass.FO) and self.wheelbase <= 0:
            raise ParameterError(f"{kc.value}: wheelbase 必須為正")
        if kc is KinematicClass.DD and self.wheel_accel_max <= 0:
            raise ParameterError("DD: wheel_accel_max 必須為正")
        if kc.steerable and not (0 < self.psi_max < math.pi / 2):
            raise ParameterError(f"{kc.value}: psi_max 必須介於 (0, π/2)")

    @property
    def look_ahead(self) -> float:
        """有效 look-ahead（DI 視為 0）"""
        return 0.0 if self.kinematic_class.holonomic else self.x_r

    @property
    def curvature_gain(self) -> float:
        """曲率錐斜率 k = tan(psi_max) / ℓ，|ω| <= k|v|"""
        return math.tan(self.psi_max) / self.wheelbase

    @property
    def cbf_radius(self) -> float:
        """r_cbf = x_r + r_phys"""
        return self.look_ahead + self.r_phys


@dataclass(frozen=True)
class VelocityState:
    """速度狀態 (v, ω)；DI 時為 (vx, vy)"""
    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "VelocityState":
        return cls(float(arr[0]), float(arr[1]))


def _as_vector(nu) -> np.ndarray:
    if isinstance(nu, VelocityState):
        return nu.as_array()
    return np.asarray(nu, dtype=float).reshape(2)


def _cone_rows(spec: KinematicSpec, gear: int) -> tuple[np.ndarray, np.ndarray]:
    """
    曲率錐 g·v >= |ω|/k 的兩條半平面

    ω - k·g·v <= 0 與 -ω - k·g·v <= 0
    """
    k = spec.curvature_gain
    normals = np.array([[-k * gear, 1.0], [-k * gear, -1.0]])
    return normals, np.zeros(2)


def _velocity_halfspaces(spec: KinematicSpec, gear: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    速度集合的半平面與曲率錐標記

    Returns:
        (normals, offsets, is_cone)
    """
    kc = spec.kinematic_class
    v_max = spec.v_max

    if kc in (KinematicClass.DI, KinematicClass.UNI):
        half_w = v_max if kc is KinematicClass.DI else spec.omega_max
        normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        offsets = np.array([v_max, v_max, half_w, half_w])
        return normals, offsets, np.zeros(4, dtype=bool)

    if kc is KinematicClass.DD:
        # 輪速菱形 |v ± (ℓ/2)ω| <= v_max
        half = spec.wheelbase / 2
        normals = np.array([[1.0, half], [1.0, -half], [-1.0, half], [-1.0, -half]])
        offsets = np.full(4, v_max)
        return normals, offsets, np.zeros(4, dtype=bool)

    # CL / FO：選定檔位的曲率楔形加上速度上限
    if kc is KinematicClass.FO:
        gear = FORWARD
    cone_n, cone_c = _cone_rows(spec, gear)
    normals = np.vstack([cone_n, [[float(gear), 0.0]]])
    offsets = np.concatenate([cone_c, [v_max]])
    return normals, offsets, np.array([True, True, False])


def velocity_set(spec: KinematicSpec, gear: int = FORWARD) -> Polytope2:
    """
    速度層級可行集合 U_i

    UNI: 矩形；DD: 輪速菱形；CL: 依檔位選擇前進或倒車曲率楔形；
    FO: 前進曲率楔形；DI: 各軸速度矩形。

    Args:
        spec: 運動學參數
        gear: 檔位（僅 CL 使用）

    Returns:
        (v, ω) 平面上的多邊形
    """
    spec.validate()
    normals, offsets, _ = _velocity_halfspaces(spec, _check_gear(gear))
    return Polytope2.from_halfspaces(normals, offsets)


def _check_gear(gear: int) -> int:
    if gear not in (FORWARD, REVERSE):
        raise ParameterError(f"檔位必須為 +1 或 -1: {gear}")
    return gear


def _acceleration_bound_rows(spec: KinematicSpec) -> tuple[np.ndarray, np.ndarray]:
    """加速度外框：DD 為輪加速度菱形，其餘為矩形"""
    if spec.kinematic_class is KinematicClass.DD:
        half = spec.wheelbase / 2
        normals = np.array([[1.0, half], [1.0, -half], [-1.0, half], [-1.0, -half]])
        return normals, np.full(4, spec.wheel_accel_max)

    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    offsets = np.array([spec.a_max, spec.a_max, spec.omega_dot_max, spec.omega_dot_max])
    return normals, offsets


@lru_cache(maxsize=256)
def acceleration_box(spec: KinematicSpec) -> Polytope2:
    """只含加速度上限、不含速度耦合的集合"""
    normals, offsets = _acceleration_bound_rows(spec)
    return Polytope2.from_halfspaces(normals, offsets)


def acceleration_set(
    spec: KinematicSpec,
    nu,
    dt: float,
    gear: int = FORWARD,
    with_floor: bool = True
) -> Polytope2:
    """
    加速度層級可行集合 U_i^acc

    {u : u 在加速度外框內，且 ν + u·Δt ∈ U_i}。
    CL / FO 的曲率錐列之 offset 以 steer_floor 為下限，
    使靜止時仍保有最小轉向角加速度；此時 ν + u·Δt 可能落在 U_i 外，
    實際執行的輸入由速度投影決定。with_floor=False 回傳不含下限的精確集合。

    Args:
        spec: 運動學參數
        nu: 目前速度狀態
        dt: 時間步長 (s)
        gear: 檔位（僅 CL 使用）
        with_floor: 是否套用 steer_floor

    Raises:
        StateError: ν 不在 U_i 內（超過容差）
    """
    if dt <= 0:
        raise ParameterError(f"dt 必須為正: {dt}")
    gear = _check_gear(gear)
    v = _as_vector(nu)

    vel_n, vel_c, is_cone = _velocity_halfspaces(spec, gear)
    excess = vel_n @ v - vel_c
    if np.any(excess > STATE_SLACK * np.maximum(np.linalg.norm(vel_n, axis=1), 1.0)):
        raise StateError(
            f"{spec.kinematic_class.value} 速度 {v.tolist()} 不在可行集合內 (gear={gear})"
        )

    # n·(ν + uΔt) <= c  =>  n·u <= (c - n·ν)/Δt
    shift_c = (vel_c - vel_n @ v) / dt
    if with_floor and has_steer_floor(spec):
        shift_c = np.where(is_cone, np.maximum(shift_c, spec.steer_floor), shift_c)

    bound_n, bound_c = _acceleration_bound_rows(spec)
    normals = np.vstack([bound_n, vel_n])
    offsets = np.concatenate([bound_c, shift_c])
    return Polytope2.from_halfspaces(normals, offsets)


def clamp_velocity(spec: KinematicSpec, nu, gear: int = FORWARD) -> VelocityState:
    """將速度投影回 U_i（歐氏最近點），已在內部時不變"""
    projected = velocity_set(spec, gear).project(_as_vector(nu))
    return VelocityState.from_array(projected)


def gear_for(spec: KinematicSpec, nu, current: int = FORWARD, desired_v: Optional[float] = None) -> int:
    """
    決定下一步的檔位

    只有 CL 會換檔，且只在靜止時依名目前進速度的正負換檔；
    行進中檔位與速度方向一致。
    """
    if spec.kinematic_class is not KinematicClass.CL:
        return FORWARD

    v = float(_as_vector(nu)[0])
    if v > STATE_SLACK:
        return FORWARD
    if v < -STATE_SLACK:
        return REVERSE
    if desired_v is not None and abs(desired_v) > STATE_SLACK:
        new_gear = FORWARD if desired_v > 0 else REVERSE
        if new_gear != current:
            logger.debug(f"CL 靜止換檔: {current} -> {new_gear}")
        return new_gear
    return current


def has_steer_floor(spec: KinematicSpec) -> bool:
    """加速度集合是否含轉向角加速度下限（此時與精確集合不同）"""
    return spec.kinematic_class.steerable and spec.steer_floor > 0


def executed_input(spec: KinematicSpec, nu, u, dt: float, gear: int = FORWARD) -> np.ndarray:
    """
    實際執行的輸入 (clamp(ν + uΔt) - ν) / Δt

    u 在精確加速度集合內時與 u 相同（誤差為投影容差）
    """
    v = _as_vector(nu)
    nu_next = clamp_velocity(spec, v + np.asarray(u, dtype=float) * dt, gear).as_array()
    return (nu_next - v) / dt
