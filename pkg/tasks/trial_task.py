"""
單次試驗任務

執行一個情境直到全員抵達或達到步數上限，並計算評估指標：
- 抵達率 AR
- 違規事件數：每一配對參考點距離 < R_ij 的最大連續區間數
- 平均違規深度：所有違規 (配對, 步) 樣本的 R_ij - 距離 平均
- QP 不可行次數：(agent, step) 為單位
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pandas as pd
from loguru import logger

from data.scenario import Scenario
from tasks.simulation import STATUS_INITIAL, SimConfig, World, step
from utils.errors import CahcbfError
from utils.performance import PerformanceMonitor

TRAJECTORY_COLUMNS = [
    "trial", "step", "agent", "class", "phi", "x", "y", "v", "omega", "u1", "u2", "qp_status",
]
PAIR_COLUMNS = [
    "trial", "step", "i", "j", "alpha_ij", "alpha_ji", "upsilon", "h", "psi", "distance",
]


@dataclass(frozen=True)
class TrialMetrics:
    """
    單次試驗指標

    Attributes:
        arrival_rate: 抵達比例
        violation_events: 違規事件數
        mean_violation_depth: 平均違規深度 (m)
        qp_infeasible_events: QP 不可行次數
        steps_run: 實際執行步數
        wall_time: 執行時間 (s)，不寫入 metrics.json
        mean_arrival_time: 已抵達者的平均抵達時間 (s)
        physical_safety_exceptions: 參考距離 >= R_ij 但本體相交的 (配對, 影格) 數
        min_pair_margin: 全程最小 ‖Δp‖ - R_ij
    """
    arrival_rate: float
    violation_events: int
    mean_violation_depth: float
    qp_infeasible_events: int
    steps_run: int
    wall_time: float = 0.0
    mean_arrival_time: float = 0.0
    physical_safety_exceptions: int = 0
    min_pair_margin: float = float("inf")

    def to_dict(self, include_wall_time: bool = True) -> dict:
        data = asdict(self)
        if not include_wall_time:
            data.pop("wall_time")
        return data


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    """試驗結果：指標、軌跡（可選）與配對診斷（可選）"""
    metrics: TrialMetrics
    trajectory: Optional[pd.DataFrame] = None
    pairs: Optional[pd.DataFrame] = None


def count_violation_events(violating: np.ndarray) -> int:
    """
    計算違規事件數

    Args:
        violating: (T, P) 布林陣列，每欄為一個配對

    Returns:
        所有配對的最大連續違規區間總數
    """
    v = np.asarray(violating, dtype=bool)
    if v.size == 0:
        return 0
    v = v.reshape(v.shape[0], -1)
    # 區間起點：本影格違規且前一影格未違規
    starts = v[1:] & ~v[:-1]
    return int(np.count_nonzero(v[0]) + np.count_nonzero(starts))


def compute_metrics(
    reference: np.ndarray,
    centers: np.ndarray,
    pair_radii: np.ndarray,
    body_radii: np.ndarray,
    arrival_step: np.ndarray,
    infeasible: int,
    steps_run: int,
    dt: float,
    wall_time: float = 0.0,
) -> TrialMetrics:
    """
    由逐影格位置計算指標

    Args:
        reference: (T, N, 2) 參考點位置
        centers: (T, N, 2) 本體中心位置
        pair_radii: (N, N) R_ij
        body_radii: (N, N) r_i + r_j
        arrival_step: (N,) 抵達步數，未抵達為 -1
        infeasible: QP 不可行次數
        steps_run: 執行步數
        dt: 時間步長
        wall_time: 執行時間
    """
    reference = np.asarray(reference, dtype=float)
    n = reference.shape[1]
    arrival_step = np.asarray(arrival_step)
    arrived = arrival_step >= 0

    violation_events = 0
    mean_depth = 0.0
    exceptions = 0
    min_margin = float("inf")

    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        ref_dist = np.linalg.norm(reference[:, iu] - reference[:, ju], axis=2)
        center_dist = np.linalg.norm(np.asarray(centers)[:, iu] - np.asarray(centers)[:, ju], axis=2)
        R = pair_radii[iu, ju][None, :]

        violating = ref_dist < R
        violation_events = count_violation_events(violating)
        if np.any(violating):
            mean_depth = float(np.mean((R - ref_dist)[violating]))
        exceptions = int(np.count_nonzero(~violating & (center_dist < body_radii[iu, ju][None, :])))
        min_margin = float(np.min(ref_dist - R))

    return TrialMetrics(
        arrival_rate=float(np.count_nonzero(arrived)) / n,
        violation_events=violation_events,
        mean_violation_depth=mean_depth,
        qp_infeasible_events=int(infeasible),
        steps_run=int(steps_run),
        wall_time=float(wall_time),
        mean_arrival_time=float(np.mean(arrival_step[arrived]) * dt) if np.any(arrived) else 0.0,
        physical_safety_exceptions=exceptions,
        min_pair_margin=min_margin,
    )


def _trajectory_frame(world: World, trial: int, inputs: np.ndarray, status) -> dict:
    """單一影格的軌跡欄位（每個機器人一列）"""
    states = world.states
    return {
        "trial": np.full(world.n, trial),
        "step": np.full(world.n, world.step_index),
        "agent": np.arange(world.n),
        "class": [sp.kinematic_class.value for sp in world.specs],
        "phi": [s.phi for s in states],
        "x": [s.x for s in states],
        "y": [s.y for s in states],
        "v": [s.v for s in states],
        "omega": [s.omega for s in states],
        "u1": inputs[:, 0],
        "u2": inputs[:, 1],
        "qp_status": list(status),
    }


def run_trial(
    scenario: Scenario,
    cfg: SimConfig,
    trial: int = 0,
    record_trajectory: bool = False,
) -> TrialOutcome:
    """
    執行單次試驗

    Args:
        scenario: 情境
        cfg: 模擬設定（record_pairs 決定是否記錄配對診斷）
        trial: 試驗編號（寫入日誌欄位）
        record_trajectory: 是否保留完整軌跡

    Returns:
        TrialOutcome
    """
    perf = PerformanceMonitor()
    world = World.from_scenario(scenario)

    reference = [world.reference_points()]
    centers = [world.centers()]
    frames = []
    pair_rows: list[tuple] = []
    infeasible = 0
    if record_trajectory:
        frames.append(_trajectory_frame(world, trial, np.zeros((world.n, 2)), [STATUS_INITIAL] * world.n))

    with perf.measure("trial"):
        while world.step_index < cfg.max_steps and not world.all_arrived:
            world, record = step(world, cfg, perf)
            infeasible += record.infeasible
            reference.append(world.reference_points())
            centers.append(world.centers())
            if record_trajectory:
                frames.append(_trajectory_frame(world, trial, record.inputs, record.qp_status))
            if record.pairs:
                pair_rows.extend((trial, record.step) + row for row in record.pairs)

    metrics = compute_metrics(
        np.stack(reference),
        np.stack(centers),
        world.pair_radii,
        world.body_radii,
        np.asarray(world.arrival_step),
        infeasible,
        world.step_index,
        cfg.dt,
        wall_time=perf.last("trial"),
    )
    logger.debug(perf.report())

    trajectory = None
    if record_trajectory:
        trajectory = pd.concat([pd.DataFrame(f) for f in frames], ignore_index=True)[TRAJECTORY_COLUMNS]
    pairs = pd.DataFrame(pair_rows, columns=PAIR_COLUMNS) if cfg.record_pairs else None
    return TrialOutcome(metrics=metrics, trajectory=trajectory, pairs=pairs)


class TrialTask:
    """
    單次試驗任務

    執行流程:
    1. 建立世界快照
    2. 逐步執行同步 tick
    3. 計算指標，依需要輸出軌跡與配對診斷
    """

    def __init__(self, cfg: SimConfig, record_trajectory: bool = False):
        """
        初始化試驗任務

        Args:
            cfg: 模擬設定
            record_trajectory: 是否保留完整軌跡
        """
        self.cfg = cfg
        self.record_trajectory = record_trajectory

    def run(self, scenario: Scenario, trial: int = 0) -> dict:
        """
        執行試驗

        Returns:
            執行結果，含 success、errors、metrics、trajectory、pairs
        """
        result = {
            "trial": trial,
            "success": False,
            "metrics": None,
            "trajectory": None,
            "pairs": None,
            "errors": [],
        }

        logger.info(
            f"=== 開始執行試驗 {trial}: N={scenario.n_agents}, "
            f"方法 {self.cfg.method.value}, 分配 {self.cfg.alloc.strategy.value}, w={self.cfg.w} ==="
        )
        try:
            outcome = run_trial(scenario, self.cfg, trial, self.record_trajectory)
            m = outcome.metrics
            result.update(
                success=True,
                metrics=m,
                trajectory=outcome.trajectory,
                pairs=outcome.pairs,
            )
            logger.info(
                f"=== 試驗 {trial} 完成: AR {m.arrival_rate:.1%}, 違規 {m.violation_events} 次, "
                f"不可行 {m.qp_infeasible_events} 次, {m.steps_run} 步, {m.wall_time:.2f}s ==="
            )
        except CahcbfError as e:
            logger.error(f"試驗 {trial} 失敗: {e}")
            result["errors"].append(str(e))
        except Exception as e:
            logger.error(f"試驗 {trial} 發生未預期錯誤: {e}")
            result["errors"].append(str(e))

        return result
