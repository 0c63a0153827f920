"""命令列介面測試"""
import json

import pytest
from loguru import logger

import main
from data.scenario import load_scenario
from data.sqlite_database import ResultsDatabase


@pytest.fixture(autouse=True)
def log_to_tmp(tmp_path, monkeypatch):
    monkeypatch.setitem(main.LOG_CONFIG, "file", str(tmp_path / "logs" / "cahcbf.log"))
    yield
    logger.remove()


class TestScenarioCommand:
    def test_random(self, tmp_path):
        out = tmp_path / "s.json"
        assert main.main(["scenario", "--random", "N=10", "--seed", "3", "--out", str(out)]) == 0
        assert load_scenario(out).n_agents == 10

    def test_antipodal(self, tmp_path):
        out = tmp_path / "a.json"
        assert main.main(["scenario", "--random", "N=5", "--antipodal", "--out", str(out)]) == 0
        assert load_scenario(out).n_agents == 5

    def test_count_not_multiple_of_five(self, tmp_path):
        assert main.main(["scenario", "--random", "N=7", "--out", str(tmp_path / "s.json")]) == main.EXIT_CONFIG

    def test_malformed_count(self, tmp_path):
        with pytest.raises(SystemExit):
            main.main(["scenario", "--random", "N=ten", "--out", str(tmp_path / "s.json")])


class TestRunCommand:
    def test_missing_scenario_file(self, tmp_path):
        code = main.main(["run", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path / "out")])
        assert code == main.EXIT_SCENARIO

    def test_invalid_trials(self, tmp_path):
        code = main.main(["run", "--random", "N=5", "--trials", "0", "--out", str(tmp_path / "out")])
        assert code == main.EXIT_CONFIG

    def test_invalid_weight(self, tmp_path):
        code = main.main(["run", "--random", "N=5", "--w", "1.5", "--out", str(tmp_path / "out")])
        assert code == main.EXIT_CONFIG

    def test_outputs_with_pairs(self, tmp_path):
        out = tmp_path / "out"
        code = main.main([
            "run", "--random", "N=5", "--seed", "2", "--steps", "5", "--trials", "2",
            "--log-level", "pairs", "--out", str(out),
        ])
        assert code == 0
        for name in ("metrics.json", "report.txt", "trajectory.csv", "pairs.csv"):
            assert (out / name).exists()

        data = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        assert len(data["trials"]) == 2
        assert data["config"]["seed"] == 2
        assert all("wall_time" not in t for t in data["trials"])

    def test_metrics_only_writes_no_trajectory(self, tmp_path):
        out = tmp_path / "out"
        assert main.main(["run", "--random", "N=5", "--steps", "3", "--out", str(out)]) == 0
        assert not (out / "trajectory.csv").exists()

    def test_scenario_file_round_trip(self, tmp_path):
        scenario = tmp_path / "s.json"
        main.main(["scenario", "--random", "N=5", "--seed", "4", "--out", str(scenario)])
        out = tmp_path / "out"
        code = main.main(["run", "--scenario", str(scenario), "--method", "hocbf", "--steps", "3", "--out", str(out)])
        assert code == 0

    def test_byte_identical_outputs(self, tmp_path):
        args = ["run", "--random", "N=5", "--seed", "11", "--steps", "10", "--log-level", "traj"]
        assert main.main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main.main(args + ["--out", str(tmp_path / "b")]) == 0
        for name in ("metrics.json", "trajectory.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_database_output(self, tmp_path):
        db_path = tmp_path / "results.db"
        code = main.main([
            "run", "--random", "N=5", "--steps", "3", "--out", str(tmp_path / "out"), "--db", str(db_path),
        ])
        assert code == 0
        assert len(ResultsDatabase(str(db_path)).list_suites()) == 1


class TestSuiteCommand:
    def test_small_ablation(self, tmp_path):
        out = tmp_path / "out"
        db_path = tmp_path / "results.db"
        code = main.main([
            "suite", "--preset", "ablation", "--sizes", "5", "--trials", "1", "--steps", "3",
            "--workers", "1", "--out", str(out), "--db", str(db_path),
        ])
        assert code == 0
        report = (out / "report.txt").read_text(encoding="utf-8")
        assert "CA-HCBF [equal]" in report
        data = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        assert len(data["trials"]) == 3
        assert len(data["aggregate"]) == 3

        db = ResultsDatabase(str(db_path))
        suite_id = int(db.list_suites().loc[0, "id"])
        assert len(db.get_trials(suite_id)) == 3

    def test_invalid_sizes(self, tmp_path):
        code = main.main(["suite", "--preset", "table", "--sizes", "7", "--out", str(tmp_path / "out")])
        assert code == main.EXIT_CONFIG

    def test_custom_variants(self, tmp_path):
        out = tmp_path / "out"
        code = main.main([
            "suite", "--variant", "cahcbf:cap:0.9", "--variant", "apf:full:0.3",
            "--sizes", "5", "--trials", "1", "--steps", "3", "--workers", "1", "--out", str(out),
        ])
        assert code == 0
        report = (out / "report.txt").read_text(encoding="utf-8")
        assert "CA-HCBF [cap]" in report
        assert "APF+Tracking (w=0.3)" in report
        data = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        assert data["config"]["preset"] == "custom"
        assert len(data["trials"]) == 2

    def test_preset_and_variant_are_exclusive(self, tmp_path):
        with pytest.raises(SystemExit):
            main.main(["suite", "--preset", "table", "--variant", "apf:full:0.5", "--out", str(tmp_path)])

    def test_bad_variant_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main.main(["suite", "--variant", "apf:full", "--out", str(tmp_path)])
