"""
同步多機器人模擬

每一步（tick）分為五個階段，各階段只讀取前一階段的快照：
1. 名目控制：APF 期望速度 → 名目加速度（CL 於靜止時換檔）
2. 加速度集合：每個機器人的 U_i^acc（CL / FO 另備不含轉向下限的精確集合）
3. 責任分配：每個無序配對計算一次 Υ 與 α（能力以精確集合計算）
4. QP：各自求解；實際執行的輸入必須滿足約束列，否則在精確集合上重解；
   仍不可行時全力煞車並計數
5. 積分：ν ← clamp(ν + uΔt)，再以新 ν 沿運動學模型積分姿態；
   抵達目標者凍結於原地，之後仍以靜止障礙物參與配對約束
"""
from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Optional

import numpy as np
from loguru import logger

from calculators.allocation import (
    AllocationConfig,
    AllocationStrategy,
    allocate_pair,
    rho_many,
    sigma_from_vertices,
)
from calculators.barrier import (
    DEGENERATE_DIST,
    CbfGains,
    PairGeometry,
    agent_rows,
    h,
    pair_radius,
    psi,
    upsilon,
)
from calculators.kinematics import (
    KinematicClass,
    KinematicSpec,
    acceleration_set,
    clamp_velocity,
    executed_input,
    gear_for,
    has_steer_floor,
)
from calculators.nominal import NominalConfig, apf_velocity, velocity_to_accel
from calculators.opspace import (
    AgentState,
    inverse_velocity_map,
    integrate_pose,
    op_state,
    reference_point,
)
from calculators.polytope import Polytope2
from calculators.qp_solver import QpProblem, braking_input, solve
from config.settings import ALLOCATION_PARAMS, CBF_PARAMS, NOMINAL_PARAMS, SIM_PARAMS
from data.scenario import Scenario
from utils.errors import CahcbfError, ConfigError, StateError
from utils.performance import PerformanceMonitor


class Method(str, Enum):
    """比較的控制方法"""
    CAHCBF = "cahcbf"   # 異質感知 CBF + 能力感知分配
    APF = "apf"         # 純 APF + 追蹤，無安全濾波
    HOCBF = "hocbf"     # 視所有機器人為雙積分器的 CBF 基準


# 每個 (step, agent) 的 QP 狀態標記
STATUS_INITIAL = "initial"
STATUS_SOLVED = "solved"
STATUS_INFEASIBLE = "infeasible"
STATUS_NOMINAL = "nominal"
STATUS_FROZEN = "frozen"

_SIM_KEYS = {"dt", "max_steps", "goal_tol", "neighbor_radius", "lambda1", "lambda2", "epsilon", "strategy"}
# 實際輸入滿足約束列的容差（相對）
ROW_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """
    模擬設定

    Attributes:
        dt: 時間步長 (s)
        max_steps: 最大步數
        goal_tol: 抵達判定距離 (m)
        gains: CBF 增益
        alloc: 責任分配設定
        method: 控制方法
        nominal: 名目控制器設定（含 APF 權重 w）
        seed: 情境種子
        neighbor_radius: 參與配對約束的參考點距離上限
        record_pairs: 是否記錄逐配對診斷
    """
    dt: float = SIM_PARAMS["dt"]
    max_steps: int = SIM_PARAMS["max_steps"]
    goal_tol: float = SIM_PARAMS["goal_tol"]
    gains: CbfGains = field(default_factory=lambda: CbfGains(**CBF_PARAMS))
    alloc: AllocationConfig = field(default_factory=lambda: AllocationConfig(**ALLOCATION_PARAMS))
    method: Method = Method.CAHCBF
    nominal: NominalConfig = field(default_factory=NominalConfig)
    seed: int = 0
    neighbor_radius: float = SIM_PARAMS["neighbor_radius"]
    record_pairs: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError as e:
            raise ConfigError(f"未知的方法: {self.method}") from e
        if not self.dt > 0:
            raise ConfigError(f"dt 必須為正: {self.dt}")
        if int(self.max_steps) <= 0:
            raise ConfigError(f"max_steps 必須為正: {self.max_steps}")
        if not self.goal_tol > 0:
            raise ConfigError(f"goal_tol 必須為正: {self.goal_tol}")
        if not self.neighbor_radius > 0:
            raise ConfigError(f"neighbor_radius 必須為正: {self.neighbor_radius}")
        if int(self.seed) < 0:
            raise ConfigError(f"seed 必須非負: {self.seed}")
        if self.method is Method.HOCBF and not self.nominal.k_p > 0:
            raise ConfigError("HOCBF 基準需要 k_p > 0")

    @property
    def w(self) -> float:
        return self.nominal.w

    @property
    def strategy(self) -> AllocationStrategy:
        return self.alloc.strategy

    @classmethod
    def build(
        cls,
        sim: Optional[dict[str, Any]] = None,
        nominal: Optional[dict[str, Any]] = None,
        **overrides
    ) -> "SimConfig":
        """
        合併預設值、情境檔的 sim / nominal 區塊與命令列覆寫

        優先順序：預設 < 情境檔 < overrides。
        overrides 可含 method、strategy、w、seed、max_steps、record_pairs 等。

        Raises:
            ConfigError: 未知欄位或參數不合法
        """
        sim = dict(sim or {})
        unknown = set(sim) - _SIM_KEYS
        if unknown:
            raise ConfigError(f"sim 區塊含未知欄位: {sorted(unknown)}")

        merged = {**SIM_PARAMS, **CBF_PARAMS, **ALLOCATION_PARAMS, **sim}
        nominal_params = {**NOMINAL_PARAMS, **(nominal or {})}
        if overrides.get("w") is not None:
            nominal_params["w"] = overrides.pop("w")
        overrides.pop("w", None)
        for key in ("dt", "max_steps", "goal_tol", "neighbor_radius", "strategy"):
            if overrides.get(key) is not None:
                merged[key] = overrides.pop(key)
            overrides.pop(key, None)

        try:
            return cls(
                dt=float(merged["dt"]),
                max_steps=int(merged["max_steps"]),
                goal_tol=float(merged["goal_tol"]),
                gains=CbfGains(float(merged["lambda1"]), float(merged["lambda2"])),
                alloc=AllocationConfig(float(merged["epsilon"]), merged["strategy"]),
                nominal=NominalConfig(**{k: float(v) for k, v in nominal_params.items()}),
                neighbor_radius=float(merged["neighbor_radius"]),
                **{k: v for k, v in overrides.items() if v is not None},
            )
        except ConfigError:
            raise
        except (CahcbfError, TypeError, ValueError) as e:
            raise ConfigError(f"模擬設定錯誤: {e}") from e

    def describe(self) -> dict[str, Any]:
        """可序列化的設定摘要"""
        return {
            "method": self.method.value,
            "alloc": self.alloc.strategy.value,
            "w": self.nominal.w,
            "dt": self.dt,
            "max_steps": int(self.max_steps),
            "goal_tol": self.goal_tol,
            "lambda1": self.gains.lambda1,
            "lambda2": self.gains.lambda2,
            "seed": int(self.seed),
        }


@dataclass(frozen=True, eq=False)
class World:
    """
    模擬世界快照

    Attributes:
        specs: 各機器人參數
        goals: (N, 2) 目標位置
        states: 各機器人狀態
        arrived: 是否已抵達（凍結）
        arrival_step: 抵達步數，未抵達為 -1
        pair_radii: (N, N) R_ij
        body_radii: (N, N) r_i^phys + r_j^phys
        step_index: 已執行步數
    """
    specs: tuple[KinematicSpec, ...]
    goals: np.ndarray
    states: tuple[AgentState, ...]
    arrived: tuple[bool, ...]
    arrival_step: tuple[int, ...]
    pair_radii: np.ndarray
    body_radii: np.ndarray
    step_index: int = 0

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "World":
        specs = scenario.specs
        n = len(specs)
        radii = np.array([[pair_radius(a, b) for b in specs] for a in specs])
        phys = np.array([s.r_phys for s in specs])
        return cls(
            specs=specs,
            goals=np.array([a.goal for a in scenario.agents], dtype=float),
            states=tuple(a.initial_state() for a in scenario.agents),
            arrived=(False,) * n,
            arrival_step=(-1,) * n,
            pair_radii=radii,
            body_radii=phys[:, None] + phys[None, :],
        )

    @property
    def n(self) -> int:
        return len(self.specs)

    @property
    def all_arrived(self) -> bool:
        return all(self.arrived)

    def reference_points(self) -> np.ndarray:
        return np.array([reference_point(s, sp) for s, sp in zip(self.states, self.specs)])

    def centers(self) -> np.ndarray:
        return np.array([s.position for s in self.states])


@dataclass(frozen=True, eq=False)
class StepRecord:
    """
    單步紀錄

    Attributes:
        step: 此步執行後的步數
        inputs: (N, 2) 實際施加的 u
        qp_status: 各機器人 QP 狀態
        infeasible: 本步 QP 不可行次數
        degenerate_pairs: 參考點重合而略過的配對數
        pairs: 逐配對診斷 (i, j, α_ij, α_ji, Υ, h, ψ, 距離)，僅 record_pairs 時提供
    """
    step: int
    inputs: np.ndarray
    qp_status: tuple[str, ...]
    infeasible: int
    degenerate_pairs: int = 0
    pairs: Optional[list[tuple]] = None


@lru_cache(maxsize=64)
def _op_space_box(a_max: float) -> Polytope2:
    """HOCBF 基準的參考點加速度外框"""
    return Polytope2.box(a_max, a_max)


def _timed(perf: Optional[PerformanceMonitor], name: str):
    return perf.measure(name) if perf is not None else nullcontext()


def _acceleration_sets(
    state: AgentState,
    spec: KinematicSpec,
    dt: float
) -> tuple[AgentState, Polytope2, Polytope2]:
    """
    計算 QP 用的 U_i^acc（含轉向下限）與精確集合；速度超出可行集合時先投影回去

    Returns:
        (狀態, QP 集合, 精確集合)，無轉向下限的類別兩者為同一物件
    """
    try:
        acceleration_set(spec, state.nu, dt, gear=state.gear, with_floor=False)
    except StateError as e:
        logger.warning(f"{e}，投影回速度集合")
        state = state.with_velocity(clamp_velocity(spec, state.nu, state.gear).as_array())

    exact = acceleration_set(spec, state.nu, dt, gear=state.gear, with_floor=False)
    if not has_steer_floor(spec):
        return state, exact, exact
    return state, acceleration_set(spec, state.nu, dt, gear=state.gear), exact


def _rows_hold(A: np.ndarray, b: np.ndarray, u: np.ndarray) -> bool:
    """實際輸入是否仍滿足所有約束列 A·u >= b"""
    if A.shape[0] == 0:
        return True
    return bool(np.all(A @ u >= b - ROW_TOL * np.maximum(1.0, np.abs(b))))


def _allocate(
    world: World,
    cfg: SimConfig,
    neighbor: np.ndarray,
    ups: np.ndarray,
    delta_p: np.ndarray,
    ops: list,
    sets: list[Optional[Polytope2]],
    p_dot_nom: np.ndarray,
) -> np.ndarray:
    """
    計算責任比例矩陣 α[i, j]（agent i 對配對 (i, j) 的份額）

    凍結的機器人不承擔責任，對方取 α = 1；
    HOCBF 基準固定 ½。
    """
    n = world.n
    alpha = np.zeros((n, n))
    active = ~np.asarray(world.arrived)

    strategy = cfg.alloc.strategy
    sigma = np.zeros(n)
    rho_bar = np.zeros((n, n))
    if cfg.method is Method.CAHCBF and strategy is not AllocationStrategy.EQUAL:
        for i in np.flatnonzero(active):
            V = sets[i].vertices
            sigma[i] = sigma_from_vertices(V, ops[i].G, ops[i].p_dot, p_dot_nom[i])
            if strategy is AllocationStrategy.FULL:
                _, rho_bar[i] = rho_many(V, ops[i].G, ops[i].eta, delta_p[i])

    rows, cols = np.nonzero(np.triu(neighbor, k=1))
    for i, j in zip(rows.tolist(), cols.tolist()):
        if active[i] and active[j]:
            if cfg.method is Method.CAHCBF:
                alpha[i, j], alpha[j, i] = allocate_pair(
                    sigma[i], sigma[j], rho_bar[i, j], rho_bar[j, i], ups[i, j], cfg.alloc
                )
            else:
                alpha[i, j] = alpha[j, i] = 0.5
        elif active[i]:
            alpha[i, j] = 1.0
        elif active[j]:
            alpha[j, i] = 1.0
    return alpha


def step(
    world: World,
    cfg: SimConfig,
    perf: Optional[PerformanceMonitor] = None
) -> tuple[World, StepRecord]:
    """
    執行一個同步 tick

    Args:
        world: 目前世界
        cfg: 模擬設定
        perf: 階段計時器（可省略）

    Returns:
        (下一步世界, 本步紀錄)
    """
    n = world.n
    dt = cfg.dt
    specs = world.specs
    states = list(world.states)
    active = ~np.asarray(world.arrived)

    # 1. 名目控制
    with _timed(perf, "step.nominal"):
        ops = [op_state(s, sp) for s, sp in zip(states, specs)]
        P = np.array([o.p for o in ops])
        delta_p = P[:, None, :] - P[None, :, :]
        dist = np.linalg.norm(delta_p, axis=2)

        p_dot_nom = np.zeros((n, 2))
        u_nom = np.zeros((n, 2))
        for i in np.flatnonzero(active):
            spec = specs[i]
            others = (dist[i] < cfg.neighbor_radius)
            others[i] = False
            p_dot_nom[i] = apf_velocity(P[i], world.goals[i], P[others], cfg.nominal, spec.v_max, int(i))

            if spec.kinematic_class is KinematicClass.CL:
                desired_v = inverse_velocity_map(states[i], spec, p_dot_nom[i]).v
                gear = gear_for(spec, states[i].nu, states[i].gear, desired_v)
                if gear != states[i].gear:
                    states[i] = replace(states[i], gear=gear)

            u_nom[i] = velocity_to_accel(states[i], spec, p_dot_nom[i], cfg.nominal)

    # 2. 加速度集合
    with _timed(perf, "step.sets"):
        sets: list[Optional[Polytope2]] = [None] * n
        exact_sets: list[Optional[Polytope2]] = [None] * n
        for i in np.flatnonzero(active):
            states[i], sets[i], exact_sets[i] = _acceleration_sets(states[i], specs[i], dt)
        ops = [op_state(s, sp) for s, sp in zip(states, specs)]

    # 3. 配對需求與責任分配
    with _timed(perf, "step.allocation"):
        P_dot = np.array([o.p_dot for o in ops])
        geom = PairGeometry(world.pair_radii, delta_p, P_dot[:, None, :] - P_dot[None, :, :])
        ups = upsilon(geom, cfg.gains)

        degenerate = dist < DEGENERATE_DIST
        np.fill_diagonal(degenerate, False)
        n_degenerate = int(np.count_nonzero(np.triu(degenerate, k=1)))
        if n_degenerate:
            logger.warning(f"第 {world.step_index + 1} 步有 {n_degenerate} 組參考點重合，略過其約束")

        neighbor = (dist < cfg.neighbor_radius) & ~degenerate
        np.fill_diagonal(neighbor, False)

        alpha = np.zeros((n, n))
        if cfg.method is not Method.APF:
            alpha = _allocate(world, cfg, neighbor, ups, delta_p, ops, exact_sets, p_dot_nom)

    # 4. QP
    inputs = np.zeros((n, 2))
    status = [STATUS_FROZEN] * n
    infeasible = 0
    with _timed(perf, "step.qp"):
        for i in np.flatnonzero(active):
            spec, state, U = specs[i], states[i], sets[i]
            if cfg.method is Method.APF:
                inputs[i] = executed_input(spec, state.nu, U.project(u_nom[i]), dt, state.gear)
                status[i] = STATUS_NOMINAL
                continue

            mask = neighbor[i]
            holonomic_model = cfg.method is Method.HOCBF
            A, b = agent_rows(ops[i], delta_p[i, mask], alpha[i, mask], ups[i, mask], holonomic_model)
            rows = list(zip(A, b))
            if holonomic_model:
                box = _op_space_box(spec.a_max)
                target = box.project(cfg.nominal.k_p * (p_dot_nom[i] - ops[i].p_dot))
                outcome = solve(QpProblem(target, rows, box))
            else:
                outcome = solve(QpProblem(u_nom[i], rows, U))
                if outcome.solved and U is not exact_sets[i]:
                    u_exec = executed_input(spec, state.nu, outcome.u, dt, state.gear)
                    if not _rows_hold(A, b, u_exec):
                        # 轉向下限的解被速度投影改變且破壞約束，改在精確集合上重解
                        logger.debug(f"第 {world.step_index + 1} 步 agent {i} 轉向下限解不滿足約束，改用精確集合")
                        outcome = solve(QpProblem(u_nom[i], rows, exact_sets[i]))

            if not outcome.solved:
                infeasible += 1
                inputs[i] = braking_input(state, spec, dt)
                status[i] = STATUS_INFEASIBLE
                logger.debug(f"第 {world.step_index + 1} 步 agent {i} QP 不可行，全力煞車")
                continue

            u = outcome.u
            if holonomic_model:
                # 以速度 / 航向控制器追蹤濾波後的參考點加速度
                p_dot_target = ops[i].p_dot + outcome.u / cfg.nominal.k_p
                u = U.project(velocity_to_accel(state, spec, p_dot_target, cfg.nominal))
            inputs[i] = executed_input(spec, state.nu, u, dt, state.gear)
            status[i] = STATUS_SOLVED

    # 5. 積分與抵達判定（inputs 已是投影後實際執行的輸入）
    with _timed(perf, "step.integrate"):
        next_step = world.step_index + 1
        arrived = list(world.arrived)
        arrival_step = list(world.arrival_step)
        for i in np.flatnonzero(active):
            spec, state = specs[i], states[i]
            nu = clamp_velocity(spec, state.nu + inputs[i] * dt, state.gear).as_array()
            state = integrate_pose(state, spec, nu, dt)
            if np.linalg.norm(reference_point(state, spec) - world.goals[i]) <= cfg.goal_tol:
                state = state.with_velocity((0.0, 0.0))
                arrived[i] = True
                arrival_step[i] = next_step
                logger.debug(f"agent {i} ({spec.kinematic_class.value}) 於第 {next_step} 步抵達")
            states[i] = state

    pairs = None
    if cfg.record_pairs:
        h_mat = h(geom)
        psi_mat = psi(geom, cfg.gains)
        rows, cols = np.nonzero(np.triu(neighbor, k=1))
        pairs = [
            (i, j, float(alpha[i, j]), float(alpha[j, i]), float(ups[i, j]),
             float(h_mat[i, j]), float(psi_mat[i, j]), float(dist[i, j]))
            for i, j in zip(rows.tolist(), cols.tolist())
        ]

    new_world = replace(
        world,
        states=tuple(states),
        arrived=tuple(arrived),
        arrival_step=tuple(arrival_step),
        step_index=next_step,
    )
    record = StepRecord(
        step=next_step,
        inputs=inputs,
        qp_status=tuple(status),
        infeasible=infeasible,
        degenerate_pairs=n_degenerate,
        pairs=pairs,
    )
    return new_world, record
