"""
情境模組

情境 = 每個機器人的 (KinematicSpec, 起始姿態, 目標位置)。
提供隨機混合隊伍情境、對蹠交換情境，以及 JSON 讀寫。
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from loguru import logger

from calculators.kinematics import KinematicClass, KinematicSpec
from calculators.opspace import AgentState, reference_point, wrap_angle
from config.settings import CLASS_ORDER, SCENARIO_PARAMS
from utils.errors import CahcbfError, ConfigError, ScenarioError
from utils.rng import trial_rng


@dataclass(frozen=True)
class AgentSetup:
    """
    單一機器人的情境設定

    Attributes:
        spec: 運動學參數
        start: 起始姿態 (φ, x, y)，位置為本體中心
        goal: 參考點的目標位置 (x, y)
    """
    spec: KinematicSpec
    start: tuple[float, float, float]
    goal: tuple[float, float]

    def initial_state(self) -> AgentState:
        phi, x, y = self.start
        return AgentState(phi=wrap_angle(phi), x=x, y=y)

    def start_reference(self) -> np.ndarray:
        return reference_point(self.initial_state(), self.spec)

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "start": [float(v) for v in self.start],
            "goal": [float(v) for v in self.goal],
        }


@dataclass(frozen=True)
class Scenario:
    """
    完整情境

    Attributes:
        agents: 機器人設定
        region_half_width: 取樣區域半寬 (m)
        sim: 模擬參數覆寫（dt、max_steps、goal_tol ...）
        nominal: 名目控制器參數覆寫
    """
    agents: tuple[AgentSetup, ...]
    region_half_width: float = SCENARIO_PARAMS["region_half_width"]
    sim: dict[str, Any] = field(default_factory=dict)
    nominal: dict[str, Any] = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def specs(self) -> tuple[KinematicSpec, ...]:
        return tuple(a.spec for a in self.agents)

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for a in self.agents:
            name = a.spec.kinematic_class.value
            counts[name] = counts.get(name, 0) + 1
        return counts

    def to_dict(self) -> dict[str, Any]:
        return {
            "agents": [a.to_dict() for a in self.agents],
            "region_half_width": self.region_half_width,
            "sim": dict(self.sim),
            "nominal": dict(self.nominal),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scenario":
        """
        由 JSON 物件建立情境

        Raises:
            ScenarioError: 欄位缺漏或格式錯誤
        """
        if not isinstance(data, dict) or "agents" not in data:
            raise ScenarioError("情境缺少 agents 欄位")

        agents = []
        for k, item in enumerate(data["agents"]):
            try:
                spec = KinematicSpec.from_dict(item["spec"])
                start = tuple(float(v) for v in item["start"])
                goal = tuple(float(v) for v in item["goal"])
            except (KeyError, TypeError, ValueError, CahcbfError) as e:
                raise ScenarioError(f"第 {k} 個機器人設定錯誤: {e}") from e
            if len(start) != 3 or len(goal) != 2:
                raise ScenarioError(f"第 {k} 個機器人 start 需為 [phi, x, y]、goal 需為 [x, y]")
            agents.append(AgentSetup(spec, start, goal))

        if not agents:
            raise ScenarioError("情境中沒有任何機器人")

        sim = data.get("sim") or {}
        nominal = data.get("nominal") or {}
        if not isinstance(sim, dict) or not isinstance(nominal, dict):
            raise ScenarioError("sim / nominal 區塊必須為物件")

        return cls(
            agents=tuple(agents),
            region_half_width=float(data.get("region_half_width", SCENARIO_PARAMS["region_half_width"])),
            sim=dict(sim),
            nominal=dict(nominal),
        )


def class_sequence(n: int, class_mix: Optional[Sequence[str]] = None) -> list[KinematicClass]:
    """
    依序循環類別清單，產生 n 個機器人的類別

    Raises:
        ConfigError: n 不為正，或無法平均分配到各類別
    """
    mix = [KinematicClass(str(c).upper()) for c in (class_mix or CLASS_ORDER)]
    if n <= 0:
        raise ConfigError(f"機器人數量必須為正: {n}")
    if not mix:
        raise ConfigError("類別清單不可為空")
    if n % len(mix) != 0:
        raise ConfigError(f"機器人數量 {n} 必須為類別數 {len(mix)} 的倍數")
    return [mix[k % len(mix)] for k in range(n)]


def _body_from_reference(ref: np.ndarray, phi: float, spec: KinematicSpec) -> tuple[float, float]:
    """由參考點位置與航向反推本體中心"""
    x_r = spec.look_ahead
    return float(ref[0] - x_r * math.cos(phi)), float(ref[1] - x_r * math.sin(phi))


def generate_scenario(
    n: int,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    region_half_width: float = SCENARIO_PARAMS["region_half_width"],
    class_mix: Optional[Sequence[str]] = None,
    min_start_goal: float = SCENARIO_PARAMS["min_start_goal"],
    min_separation: float = SCENARIO_PARAMS["min_separation"],
    max_rejection: int = SCENARIO_PARAMS["max_rejection"],
) -> Scenario:
    """
    隨機混合隊伍情境（拒絕取樣）

    依序為每個機器人在區域內均勻取樣參考點起點、目標與航向，
    直到起終點距離 >= min_start_goal，且與先前機器人的起點、
    目標距離皆 >= min_separation。

    Args:
        n: 機器人數量（預設類別組合下須為 5 的倍數）
        seed: 種子（未提供 rng 時使用）
        rng: 亂數產生器
        region_half_width: 區域半寬 (m)
        class_mix: 類別循環清單
        min_start_goal: 最小起終點距離
        min_separation: 最小起點間距（參考點）
        max_rejection: 拒絕次數上限

    Raises:
        ScenarioError: 拒絕次數超過上限（區域太擁擠）
    """
    classes = class_sequence(n, class_mix)
    rng = rng if rng is not None else trial_rng(seed, 0)
    hw = float(region_half_width)

    starts: list[np.ndarray] = []
    goals: list[np.ndarray] = []
    agents: list[AgentSetup] = []
    attempts = 0

    for kc in classes:
        spec = KinematicSpec.default(kc)
        while True:
            attempts += 1
            if attempts > max_rejection:
                raise ScenarioError(
                    f"拒絕取樣超過 {max_rejection} 次，區域 {2 * hw:.1f} m 內無法放置 {n} 個機器人"
                )
            ref = rng.uniform(-hw, hw, size=2)
            goal = rng.uniform(-hw, hw, size=2)
            phi = wrap_angle(float(rng.uniform(-math.pi, math.pi)))

            if np.linalg.norm(goal - ref) < min_start_goal:
                continue
            if starts and np.min(np.linalg.norm(np.asarray(starts) - ref, axis=1)) < min_separation:
                continue
            if goals and np.min(np.linalg.norm(np.asarray(goals) - goal, axis=1)) < min_separation:
                continue
            break

        starts.append(ref)
        goals.append(goal)
        x, y = _body_from_reference(ref, phi, spec)
        agents.append(AgentSetup(spec, (phi, x, y), (float(goal[0]), float(goal[1]))))

    logger.debug(f"情境生成完成: N={n}, 取樣次數 {attempts}")
    return Scenario(agents=tuple(agents), region_half_width=hw)


def generate_antipodal_scenario(
    n: int,
    radius: float = SCENARIO_PARAMS["antipodal_radius"],
    class_mix: Optional[Sequence[str]] = None,
    min_separation: float = SCENARIO_PARAMS["min_separation"],
) -> Scenario:
    """
    對蹠交換情境：參考點平均分布於圓上，面向圓心，目標為正對面

    Raises:
        ScenarioError: 相鄰起點間距小於 min_separation
    """
    classes = class_sequence(n, class_mix)
    if n > 1:
        chord = 2.0 * radius * math.sin(math.pi / n)
        if chord < min_separation:
            raise ScenarioError(f"半徑 {radius} m 的圓上放不下 {n} 個機器人（間距 {chord:.3f} m）")

    agents = []
    for k, kc in enumerate(classes):
        spec = KinematicSpec.default(kc)
        theta = 2.0 * math.pi * k / n
        ref = radius * np.array([math.cos(theta), math.sin(theta)])
        phi = wrap_angle(theta + math.pi)
        x, y = _body_from_reference(ref, phi, spec)
        agents.append(AgentSetup(spec, (phi, x, y), (float(-ref[0]), float(-ref[1]))))

    return Scenario(agents=tuple(agents), region_half_width=radius + 1.0)


def load_scenario(path: str | Path) -> Scenario:
    """
    讀取情境 JSON

    Raises:
        ScenarioError: 檔案不存在或格式錯誤
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ScenarioError(f"找不到情境檔: {path}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"情境檔 JSON 格式錯誤: {e}") from e

    scenario = Scenario.from_dict(data)
    logger.info(f"讀取情境 {path}: {scenario.n_agents} 個機器人 {scenario.class_counts()}")
    return scenario


def save_scenario(scenario: Scenario, path: str | Path) -> Path:
    """寫出情境 JSON（UTF-8）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(scenario.to_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    logger.info(f"情境已寫出: {path}")
    return path
