"""
效能監控工具

記錄每個 trial 的總耗時與每步各階段（名目、集合、分配、QP、積分）耗時。
"""
import time
from contextlib import contextmanager
from typing import Iterator

import numpy as np
import pandas as pd
from loguru import logger

# 模擬步驟階段的指標前綴
STEP_PREFIX = "step."


class PerformanceMonitor:
    """
    效能監控器

    提供:
    - 程式區段計時（context manager）
    - 單一指標統計（次數、總計、平均、p95、最大）
    - 模擬步驟各階段佔比
    """

    def __init__(self):
        self.metrics: dict[str, list[float]] = {}

    @contextmanager
    def measure(self, name: str) -> Iterator[None]:
        """區段計時，不輸出日誌（每步呼叫次數多）"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.metrics.setdefault(name, []).append(time.perf_counter() - start)

    def last(self, name: str) -> float:
        """最近一次的耗時，無紀錄時為 0"""
        values = self.metrics.get(name)
        return values[-1] if values else 0.0

    def get_stats(self, name: str) -> dict:
        if name not in self.metrics:
            return {}
        values = np.asarray(self.metrics[name])
        return {
            "count": int(values.size),
            "total": float(values.sum()),
            "avg": float(values.mean()),
            "p95": float(np.percentile(values, 95)),
            "max": float(values.max()),
        }

    def get_all_stats(self) -> dict:
        return {name: self.get_stats(name) for name in self.metrics}

    def phase_breakdown(self) -> pd.DataFrame:
        """
        模擬步驟各階段耗時

        Returns:
            DataFrame，index 為階段名稱（去掉 step. 前綴），
            欄位 count / total / avg_ms / share，依 total 由大到小排序
        """
        rows = {
            name[len(STEP_PREFIX):]: self.get_stats(name)
            for name in self.metrics
            if name.startswith(STEP_PREFIX)
        }
        if not rows:
            return pd.DataFrame(columns=["count", "total", "avg_ms", "share"])

        df = pd.DataFrame.from_dict(rows, orient="index")[["count", "total", "avg"]]
        df["avg_ms"] = df.pop("avg") * 1000.0
        grand = df["total"].sum()
        df["share"] = df["total"] / grand if grand > 0 else 0.0
        return df.sort_values("total", ascending=False)

    def clear(self):
        self.metrics.clear()

    def report(self) -> str:
        """產生效能報告"""
        lines = ["=== 效能報告 ==="]
        for name in sorted(self.metrics):
            if name.startswith(STEP_PREFIX):
                continue
            stats = self.get_stats(name)
            lines.append(f"{name}: 次數={stats['count']}, 總時間={stats['total']:.3f}s")

        phases = self.phase_breakdown()
        for phase, row in phases.iterrows():
            lines.append(
                f"  {phase}: 平均={row['avg_ms']:.3f}ms, 佔比={row['share']:.1%}"
            )
        if phases.empty:
            logger.debug("無步驟階段計時")
        return "\n".join(lines)
