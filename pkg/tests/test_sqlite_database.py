"""結果資料庫測試"""
import math

import pytest

from data.sqlite_database import ResultsDatabase
from tasks.suite_task import run_suite


@pytest.fixture
def suite_df():
    df, _ = run_suite(
        [{"method": "cahcbf", "alloc": "full", "w": 0.9}, {"method": "apf", "alloc": "full", "w": 0.5}],
        [5], trials=2, seed=1, max_steps=5, workers=1,
    )
    return df


class TestResultsDatabase:
    def test_save_and_read_back(self, tmp_path, suite_df):
        db = ResultsDatabase(str(tmp_path / "db" / "results.db"))
        suite_id = db.save_suite("custom", 1, 2, suite_df, max_steps=5, note="smoke")

        trials = db.get_trials(suite_id)
        assert len(trials) == 4
        assert set(trials["method"]) == {"cahcbf", "apf"}
        assert (trials["steps_run"] == 5).all()

        suites = db.list_suites()
        assert suites.loc[0, "preset"] == "custom"
        assert suites.loc[0, "note"] == "smoke"

    def test_infinite_margin_stored_as_null(self, tmp_path, suite_df):
        df = suite_df.copy()
        df["min_pair_margin"] = math.inf
        db = ResultsDatabase(str(tmp_path / "results.db"))
        suite_id = db.save_suite("custom", 1, 2, df)
        assert db.get_trials(suite_id)["min_pair_margin"].isna().all()

    def test_suites_are_separate(self, tmp_path, suite_df):
        db = ResultsDatabase(str(tmp_path / "results.db"))
        first = db.save_suite("table", 1, 2, suite_df)
        second = db.save_suite("table", 1, 2, suite_df)
        assert first != second
        assert len(db.get_trials(second)) == 4
        assert len(db.list_suites()) == 2

    def test_duplicate_trial_rolls_back(self, tmp_path, suite_df):
        db = ResultsDatabase(str(tmp_path / "results.db"))
        doubled = suite_df.iloc[[0, 0]]
        with pytest.raises(Exception):
            db.save_suite("table", 1, 2, doubled)
        assert db.list_suites().empty
