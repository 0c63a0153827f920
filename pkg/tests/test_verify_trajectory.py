"""離線軌跡檢查測試"""
import pandas as pd

from data.scenario import generate_scenario, save_scenario
from exporters.result_exporter import ResultExporter
from scripts.verify_trajectory import verify_trajectory
from tasks.simulation import SimConfig
from tasks.trial_task import run_trial


def _export(tmp_path, steps=20):
    scenario = generate_scenario(5, seed=6)
    scenario_path = save_scenario(scenario, tmp_path / "scenario.json")
    outcome = run_trial(scenario, SimConfig.build(max_steps=steps), record_trajectory=True)
    csv_path = ResultExporter(tmp_path).export_trajectory(outcome.trajectory)
    return csv_path, scenario_path, outcome


class TestVerifyTrajectory:
    def test_exported_trajectory_passes(self, tmp_path):
        csv_path, scenario_path, outcome = _export(tmp_path)
        result = verify_trajectory(csv_path, scenario_path)
        assert result["ok"]
        assert result["frames"] == outcome.metrics.steps_run + 1
        assert result["physical_safety_exceptions"] == 0

    def test_detects_speed_violation(self, tmp_path):
        csv_path, scenario_path, _ = _export(tmp_path, steps=3)
        df = pd.read_csv(csv_path)
        df.loc[3, "v"] = 5.0
        df.to_csv(csv_path, index=False)
        result = verify_trajectory(csv_path, scenario_path)
        assert result["velocity_violations"] == 1
        assert not result["ok"]
