"""
SQLAlchemy 資料模型
批次實驗結果的持久化
"""
from __future__ import annotations

from datetime import datetime
from typing import Optional

from sqlalchemy import (
    DateTime,
    Float,
    ForeignKey,
    Index,
    Integer,
    String,
    UniqueConstraint,
    func,
)
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


class Base(DeclarativeBase):
    """SQLAlchemy Base"""
    pass


class SuiteRun(Base):
    """
    批次實驗紀錄表

    一次 `run` 或 `suite` 指令對應一筆
    """
    __tablename__ = "suite_run"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    preset: Mapped[str] = mapped_column(String(20), nullable=False, comment="preset 名稱或 run")
    seed: Mapped[int] = mapped_column(Integer, nullable=False, comment="基礎種子")
    trials: Mapped[int] = mapped_column(Integer, nullable=False, comment="每組試驗數")
    max_steps: Mapped[Optional[int]] = mapped_column(Integer, nullable=True, comment="步數上限")
    note: Mapped[Optional[str]] = mapped_column(String(200), nullable=True, comment="備註")
    created_at: Mapped[datetime] = mapped_column(
        DateTime, server_default=func.now(), comment="建立時間"
    )

    def __repr__(self):
        return f"<SuiteRun({self.id}, {self.preset}, seed={self.seed})>"


class TrialResult(Base):
    """
    單次試驗指標表

    wall_time 只存在資料庫與日誌，不寫入 metrics.json
    """
    __tablename__ = "trial_result"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    suite_id: Mapped[int] = mapped_column(
        ForeignKey("suite_run.id", ondelete="CASCADE"), nullable=False, comment="所屬批次"
    )
    method: Mapped[str] = mapped_column(String(10), nullable=False, comment="cahcbf / apf / hocbf")
    alloc: Mapped[str] = mapped_column(String(10), nullable=False, comment="equal / cap / full")
    w: Mapped[float] = mapped_column(Float, nullable=False, comment="APF 吸引權重")
    n_agents: Mapped[int] = mapped_column(Integer, nullable=False, comment="機器人數量")
    trial: Mapped[int] = mapped_column(Integer, nullable=False, comment="試驗編號")
    seed: Mapped[int] = mapped_column(Integer, nullable=False, comment="試驗種子")
    arrival_rate: Mapped[float] = mapped_column(Float, nullable=False, comment="抵達率")
    violation_events: Mapped[int] = mapped_column(Integer, nullable=False, comment="違規事件數")
    mean_violation_depth: Mapped[float] = mapped_column(Float, nullable=False, comment="平均違規深度 (m)")
    qp_infeasible_events: Mapped[int] = mapped_column(Integer, nullable=False, comment="QP 不可行次數")
    steps_run: Mapped[int] = mapped_column(Integer, nullable=False, comment="執行步數")
    wall_time: Mapped[float] = mapped_column(Float, nullable=False, comment="執行時間 (s)")
    mean_arrival_time: Mapped[float] = mapped_column(Float, nullable=False, comment="平均抵達時間 (s)")
    physical_safety_exceptions: Mapped[int] = mapped_column(Integer, nullable=False, comment="本體相交例外數")
    min_pair_margin: Mapped[Optional[float]] = mapped_column(Float, nullable=True, comment="最小配對餘裕 (m)")

    __table_args__ = (
        UniqueConstraint("suite_id", "method", "alloc", "w", "n_agents", "trial", name="uq_trial_result"),
        Index("ix_trial_result_suite", "suite_id"),
    )

    def __repr__(self):
        return f"<TrialResult({self.suite_id}, {self.method}/{self.alloc}, N={self.n_agents}, #{self.trial})>"
