"""
結果匯出器

輸出檔案:
- trajectory.csv: 每 (trial, step, agent) 一列
- pairs.csv: 逐配對診斷
- metrics.json: 逐試驗指標與 mean / std 彙整（不含執行時間，確保可逐位元重現）
- report.txt: 方法比較表與分配策略消融序列
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
import pandas as pd
from loguru import logger

from config.settings import OUTPUT_CONFIG
from tasks.suite_task import METRIC_COLUMNS

REPORT_METRICS = [
    ("arrival_rate", "AR", 100.0, "{:.1f}"),
    ("violation_events", "#Viol", 1.0, "{:.1f}"),
    ("mean_violation_depth", "MeanV", 1.0, "{:.3f}"),
    ("qp_infeasible_events", "Infeas", 1.0, "{:.1f}"),
]


def _clean(value: Any) -> Any:
    """轉為 JSON 可表示的 Python 值，非有限浮點數改為 None"""
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def aggregate(records: Iterable[dict], metrics: Iterable[str]) -> dict[str, dict[str, Optional[float]]]:
    """單組試驗的 mean / std（母體標準差）"""
    df = pd.DataFrame(list(records))
    out = {}
    for name in metrics:
        if df.empty or name not in df:
            continue
        col = df[name].astype(float)
        col = col[np.isfinite(col)]
        if col.empty:
            out[name] = {"mean": None, "std": None}
        else:
            out[name] = {"mean": _clean(col.mean()), "std": _clean(col.std(ddof=0))}
    return out


class ResultExporter:
    """
    結果匯出器

    所有浮點數 CSV 以 9 位有效數字輸出
    """

    def __init__(self, out_dir: Optional[str | Path] = None):
        """
        Args:
            out_dir: 輸出目錄（預設為設定檔 out_dir）
        """
        self.out_dir = Path(out_dir or OUTPUT_CONFIG["out_dir"])
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.float_format = OUTPUT_CONFIG["float_format"]

    def export_trajectory(self, df: pd.DataFrame, filename: str = "trajectory.csv") -> Path:
        """匯出軌跡 CSV"""
        path = self.out_dir / filename
        df.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
        logger.info(f"軌跡已匯出: {path} ({len(df)} 列)")
        return path

    def export_pairs(self, df: pd.DataFrame, filename: str = "pairs.csv") -> Path:
        """匯出逐配對診斷 CSV"""
        path = self.out_dir / filename
        df.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
        logger.info(f"配對診斷已匯出: {path} ({len(df)} 列)")
        return path

    def export_metrics(
        self,
        records: list[dict],
        config: dict[str, Any],
        summary: Optional[pd.DataFrame] = None,
        filename: str = "metrics.json",
    ) -> Path:
        """
        匯出 metrics.json

        Args:
            records: 逐試驗指標（wall_time 會被移除）
            config: 執行設定摘要
            summary: 批次實驗彙整表（可選）
        """
        trials = [
            {k: _clean(v) for k, v in r.items() if k != "wall_time"}
            for r in records
        ]
        payload: dict[str, Any] = {
            "schema": OUTPUT_CONFIG["schema_version"],
            "config": {k: _clean(v) for k, v in config.items()},
            "trials": trials,
        }
        if summary is not None and not summary.empty:
            payload["aggregate"] = [
                {k: _clean(v) for k, v in row.items() if not k.startswith("wall_time")}
                for row in summary.to_dict(orient="records")
            ]
        else:
            payload["aggregate"] = aggregate(trials, METRIC_COLUMNS)

        path = self.out_dir / filename
        path.write_text(
            json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n",
            encoding="utf-8",
        )
        logger.info(f"指標已匯出: {path}")
        return path

    def export_report(self, text: str, filename: str = "report.txt") -> Path:
        """匯出文字報告"""
        path = self.out_dir / filename
        path.write_text(text, encoding="utf-8")
        logger.info(f"報告已匯出: {path}")
        return path


def _cell(row: pd.Series, metric: str, scale: float, fmt: str) -> str:
    mean = row.get(f"{metric}_mean")
    std = row.get(f"{metric}_std")
    if mean is None or pd.isna(mean):
        return "-"
    return f"{fmt.format(mean * scale)} ({fmt.format(std * scale)})"


def _variant_label(row: pd.Series) -> str:
    method = row["method"]
    if method == "cahcbf":
        return f"CA-HCBF [{row['alloc']}]"
    if method == "apf":
        return f"APF+Tracking (w={row['w']:g})"
    return f"APF+HOCBF (w={row['w']:g})"


def format_report(summary: pd.DataFrame, title: str = "方法比較") -> str:
    """
    產生比較表：每列一個 (變體, N)，每欄為 mean (std)

    並附上各分配策略在不同 N 的平均 QP 不可行次數序列
    """
    if summary.empty:
        return f"=== {title} ===\n（無資料）\n"

    header = ["方法", "N"] + [label for _, label, _, _ in REPORT_METRICS]
    rows = []
    for _, row in summary.iterrows():
        rows.append(
            [_variant_label(row), str(int(row["n_agents"]))]
            + [_cell(row, m, scale, fmt) for m, _, scale, fmt in REPORT_METRICS]
        )

    widths = [max(len(header[k]), *(len(r[k]) for r in rows)) for k in range(len(header))]
    lines = [f"=== {title} ===", "  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows)

    cahcbf = summary[summary["method"] == "cahcbf"]
    if cahcbf["alloc"].nunique() > 1:
        lines.append("")
        lines.append("=== 分配策略消融：平均 QP 不可行次數 ===")
        for alloc, group in cahcbf.groupby("alloc", sort=False):
            series = ", ".join(
                f"N={int(r['n_agents'])}: {r['qp_infeasible_events_mean']:.1f}"
                for _, r in group.sort_values("n_agents").iterrows()
            )
            lines.append(f"{alloc:<6} {series}")

    return "\n".join(lines) + "\n"
