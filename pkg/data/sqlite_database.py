"""
SQLite 結果資料庫
儲存批次實驗的逐試驗指標
"""
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Generator, Optional

import pandas as pd
from loguru import logger
from sqlalchemy import create_engine, event, select
from sqlalchemy.orm import Session, sessionmaker

from config.settings import OUTPUT_CONFIG
from data.models import Base, SuiteRun, TrialResult

_RESULT_FIELDS = [
    "method", "alloc", "w", "n_agents", "trial", "seed",
    "arrival_rate", "violation_events", "mean_violation_depth", "qp_infeasible_events",
    "steps_run", "wall_time", "mean_arrival_time", "physical_safety_exceptions", "min_pair_margin",
]


class ResultsDatabase:
    """
    結果資料庫操作類別

    特點:
    - 檔案型 SQLite，WAL 模式
    - 一次批次實驗寫入一筆 SuiteRun 與多筆 TrialResult
    """

    def __init__(self, db_path: Optional[str] = None):
        """
        初始化資料庫連線

        Args:
            db_path: 資料庫檔案路徑（預設為設定檔 db_path）
        """
        db_path = db_path or OUTPUT_CONFIG["db_path"]
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)

        self.db_path = db_path
        self.engine = create_engine(
            f"sqlite:///{db_path}",
            echo=False,
            connect_args={"check_same_thread": False},
        )

        @event.listens_for(self.engine, "connect")
        def set_sqlite_pragma(dbapi_conn, connection_record):
            cursor = dbapi_conn.cursor()
            cursor.execute("PRAGMA journal_mode=WAL")
            cursor.execute("PRAGMA synchronous=NORMAL")
            cursor.execute("PRAGMA foreign_keys=ON")
            cursor.close()

        self.SessionLocal = sessionmaker(
            bind=self.engine,
            autocommit=False,
            autoflush=False,
        )

        logger.debug(f"結果資料庫初始化完成: {db_path}")

    def create_tables(self):
        """建立所有資料表"""
        Base.metadata.create_all(self.engine)

    @contextmanager
    def get_session(self) -> Generator[Session, None, None]:
        """取得資料庫 Session（Context Manager）"""
        session = self.SessionLocal()
        try:
            yield session
            session.commit()
        except Exception as e:
            session.rollback()
            logger.error(f"資料庫操作失敗: {e}")
            raise
        finally:
            session.close()

    def save_suite(
        self,
        preset: str,
        seed: int,
        trials: int,
        results: pd.DataFrame,
        max_steps: Optional[int] = None,
        note: Optional[str] = None,
    ) -> int:
        """
        寫入一次批次實驗

        Args:
            preset: preset 名稱（單次執行為 run）
            seed: 基礎種子
            trials: 每組試驗數
            results: 逐試驗指標，欄位需包含 _RESULT_FIELDS
            max_steps: 步數上限
            note: 備註

        Returns:
            suite_id
        """
        self.create_tables()
        with self.get_session() as session:
            suite = SuiteRun(preset=preset, seed=int(seed), trials=int(trials), max_steps=max_steps, note=note)
            session.add(suite)
            session.flush()

            for row in results[_RESULT_FIELDS].to_dict(orient="records"):
                margin = row["min_pair_margin"]
                row["min_pair_margin"] = float(margin) if margin is not None and math.isfinite(margin) else None
                session.add(TrialResult(suite_id=suite.id, **row))
            suite_id = suite.id

        logger.info(f"已寫入批次實驗 #{suite_id}: {len(results)} 筆試驗")
        return suite_id

    def get_trials(self, suite_id: int) -> pd.DataFrame:
        """取得指定批次的逐試驗指標"""
        with self.get_session() as session:
            stmt = (
                select(TrialResult)
                .where(TrialResult.suite_id == suite_id)
                .order_by(TrialResult.n_agents, TrialResult.method, TrialResult.alloc, TrialResult.w, TrialResult.trial)
            )
            df = pd.read_sql(stmt, session.bind)
        return df

    def list_suites(self) -> pd.DataFrame:
        """列出所有批次實驗"""
        with self.get_session() as session:
            df = pd.read_sql(select(SuiteRun).order_by(SuiteRun.id), session.bind)
        return df
