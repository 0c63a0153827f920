"""
批次實驗任務

對 {方法 × 分配策略 × w} × 隊伍規模 × 試驗 執行所有組合，
同一 (N, trial) 在各方法間共用同一情境（成對比較），
以 pandas 彙整各指標的 mean / std。
"""
from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import pandas as pd
from loguru import logger

from config.settings import DEFAULT_TRIALS, SUITE_PRESETS, WORKERS
from data.scenario import generate_scenario
from tasks.simulation import SimConfig
from tasks.trial_task import run_trial
from utils.errors import CahcbfError, ConfigError
from utils.rng import trial_rng, trial_seed

METRIC_COLUMNS = [
    "arrival_rate",
    "violation_events",
    "mean_violation_depth",
    "qp_infeasible_events",
    "steps_run",
    "mean_arrival_time",
    "physical_safety_exceptions",
    "min_pair_margin",
]
VARIANT_COLUMNS = ["method", "alloc", "w"]
# 子 process 只輸出警告以上
WORKER_LOG_LEVEL = "WARNING"

# 以 --variant 自訂變體時的實驗名稱
CUSTOM_PRESET = "custom"


@dataclass(frozen=True)
class TrialJob:
    """單一 (變體, N, trial) 工作，可跨 process 傳遞"""
    variant: int
    method: str
    alloc: str
    w: float
    n_agents: int
    trial: int
    seed: int
    max_steps: Optional[int] = None


def parse_variant(text: str) -> dict[str, Any]:
    """
    解析 method:alloc:w 形式的方法變體，例如 cahcbf:full:0.9

    Raises:
        ConfigError: 格式錯誤或參數不合法（沿用 SimConfig 的檢查）
    """
    parts = [p.strip() for p in text.split(":")]
    if len(parts) != 3:
        raise ConfigError(f"變體格式錯誤: {text}，請使用 method:alloc:w")
    method, alloc, w_text = parts
    try:
        w = float(w_text)
    except ValueError:
        raise ConfigError(f"變體的 w 必須為數值: {text}")
    SimConfig.build(method=method, strategy=alloc, w=w)
    return {"method": method, "alloc": alloc, "w": w}


def resolve_preset(
    preset: str,
    sizes: Optional[Sequence[int]] = None,
    variants: Optional[Sequence[dict[str, Any]]] = None,
) -> tuple[list[dict[str, Any]], list[int]]:
    """
    取得實驗組合

    preset 為 custom 時使用呼叫端給定的 variants，
    未指定隊伍規模時沿用主比較表的規模

    Raises:
        ConfigError: 未知的 preset、custom 缺少變體或隊伍規模不合法
    """
    if preset == CUSTOM_PRESET:
        if not variants:
            raise ConfigError("custom 實驗需要至少一個變體")
        default_sizes = SUITE_PRESETS["table"]["sizes"]
        chosen = [dict(v) for v in variants]
    elif preset in SUITE_PRESETS:
        if variants:
            raise ConfigError(f"preset {preset} 不接受自訂變體")
        default_sizes = SUITE_PRESETS[preset]["sizes"]
        chosen = [dict(v) for v in SUITE_PRESETS[preset]["variants"]]
    else:
        raise ConfigError(
            f"未知的 preset: {preset}（可用: {', '.join([*SUITE_PRESETS, CUSTOM_PRESET])}）"
        )

    sizes = list(sizes) if sizes else list(default_sizes)
    bad = [n for n in sizes if n <= 0 or n % 5 != 0]
    if bad:
        raise ConfigError(f"隊伍規模必須為 5 的正倍數: {bad}")
    return chosen, sizes


def build_jobs(
    variants: Sequence[dict[str, Any]],
    sizes: Sequence[int],
    trials: int,
    seed: int,
    max_steps: Optional[int] = None,
) -> list[TrialJob]:
    """展開所有工作，順序為 (N, 變體, trial)"""
    if trials <= 0:
        raise ConfigError(f"trials 必須為正: {trials}")
    return [
        TrialJob(k, v["method"], v["alloc"], float(v["w"]), int(n), t, int(seed), max_steps)
        for n in sizes
        for k, v in enumerate(variants)
        for t in range(trials)
    ]


def _init_worker():
    logger.remove()
    logger.add(sys.stderr, level=WORKER_LOG_LEVEL)


def run_job(job: TrialJob) -> dict[str, Any]:
    """
    執行單一工作（供 process pool 呼叫）

    情境由 (seed, trial) 決定，與方法無關
    """
    scenario = generate_scenario(job.n_agents, rng=trial_rng(job.seed, job.trial))
    cfg = SimConfig.build(
        method=job.method,
        strategy=job.alloc,
        w=job.w,
        seed=trial_seed(job.seed, job.trial),
        max_steps=job.max_steps,
    )
    outcome = run_trial(scenario, cfg, job.trial)
    return {
        "variant": job.variant,
        "method": job.method,
        "alloc": job.alloc,
        "w": job.w,
        "n_agents": job.n_agents,
        "trial": job.trial,
        "seed": trial_seed(job.seed, job.trial),
        **outcome.metrics.to_dict(),
    }


def summarize(trials: pd.DataFrame) -> pd.DataFrame:
    """
    依 (變體, N) 彙整 mean / std（母體標準差，單一試驗時為 0）

    Returns:
        欄位為 variant、method、alloc、w、n_agents、trials 及 <metric>_mean / <metric>_std
    """
    if trials.empty:
        return pd.DataFrame()

    keys = ["variant", *VARIANT_COLUMNS, "n_agents"]
    grouped = trials.groupby(keys, sort=True)
    mean = grouped[METRIC_COLUMNS].mean().add_suffix("_mean")
    std = grouped[METRIC_COLUMNS].std(ddof=0).add_suffix("_std")
    count = grouped.size().rename("trials")
    summary = pd.concat([count, mean, std], axis=1).reset_index()
    return summary.sort_values(["n_agents", "variant"], kind="stable").reset_index(drop=True)


def run_suite(
    variants: Sequence[dict[str, Any]],
    sizes: Sequence[int],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    max_steps: Optional[int] = None,
    workers: int = WORKERS,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    執行整組實驗

    Args:
        variants: 方法變體 [{"method", "alloc", "w"}, ...]
        sizes: 隊伍規模
        trials: 每組試驗數
        seed: 基礎種子
        max_steps: 步數上限（None 使用預設）
        workers: process 數，1 為循序執行

    Returns:
        (逐試驗指標, 彙整表)；順序與執行順序無關
    """
    jobs = build_jobs(variants, sizes, trials, seed, max_steps)
    logger.info(f"共 {len(jobs)} 個試驗，{workers} 個 process")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
            rows = list(pool.map(run_job, jobs, chunksize=max(1, len(jobs) // (workers * 4))))
    else:
        rows = []
        for k, job in enumerate(jobs, start=1):
            rows.append(run_job(job))
            if k % 10 == 0 or k == len(jobs):
                logger.info(f"進度 {k}/{len(jobs)}")

    df = pd.DataFrame(rows)
    df = df.sort_values(["n_agents", "variant", "trial"], kind="stable").reset_index(drop=True)
    return df, summarize(df)


class SuiteTask:
    """
    批次實驗任務

    執行流程:
    1. 解析 preset（或自訂變體）與隊伍規模
    2. 平行執行所有試驗
    3. 彙整 mean / std
    """

    def __init__(self, workers: int = WORKERS):
        """
        Args:
            workers: process 數
        """
        self.workers = max(1, int(workers))

    def run(
        self,
        preset: str,
        sizes: Optional[Sequence[int]] = None,
        trials: int = DEFAULT_TRIALS,
        seed: int = 0,
        max_steps: Optional[int] = None,
        variants: Optional[Sequence[dict[str, Any]]] = None,
    ) -> dict:
        """
        執行批次實驗

        Args:
            preset: 預設組合名稱，或 custom 搭配 variants
            variants: 自訂方法變體 [{"method", "alloc", "w"}, ...]

        Returns:
            執行結果，含 success、errors、trials、summary
        """
        result = {
            "preset": preset,
            "success": False,
            "trials": pd.DataFrame(),
            "summary": pd.DataFrame(),
            "errors": [],
        }

        try:
            variants, sizes = resolve_preset(preset, sizes, variants)
        except ConfigError as e:
            logger.error(f"批次實驗設定錯誤: {e}")
            result["errors"].append(str(e))
            return result

        logger.info(f"=== 開始執行批次實驗 {preset}: N={sizes}, 每組 {trials} 次 ===")
        try:
            df, summary = run_suite(variants, sizes, trials, seed, max_steps, self.workers)
            result.update(success=True, trials=df, summary=summary)
            logger.info(f"=== 批次實驗完成: {len(df)} 個試驗 ===")
        except CahcbfError as e:
            logger.error(f"批次實驗失敗: {e}")
            result["errors"].append(str(e))
        except Exception as e:
            logger.error(f"批次實驗發生未預期錯誤: {e}")
            result["errors"].append(str(e))

        return result
