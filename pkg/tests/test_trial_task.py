"""單次試驗與指標測試"""
import itertools

import numpy as np
import pandas as pd
import pytest
from conftest import two_agent_scenario

from calculators.kinematics import KinematicSpec
from data.scenario import generate_scenario
from tasks.simulation import STATUS_INITIAL, SimConfig, World, step
from tasks.trial_task import (
    PAIR_COLUMNS,
    TRAJECTORY_COLUMNS,
    TrialTask,
    compute_metrics,
    count_violation_events,
    run_trial,
)

CLASSES = ["DI", "UNI", "DD", "CL", "FO"]


class TestViolationEvents:
    def test_two_intervals_in_one_pair(self):
        v = np.array([[False], [True], [True], [False], [True]])
        assert count_violation_events(v) == 2

    def test_interval_from_initial_frame(self):
        v = np.array([[True, False], [False, False], [False, True]])
        assert count_violation_events(v) == 2

    def test_empty(self):
        assert count_violation_events(np.zeros((0, 3), dtype=bool)) == 0
        assert count_violation_events(np.zeros((4, 3), dtype=bool)) == 0


class TestComputeMetrics:
    def _frames(self, distances, center_distances=None):
        center_distances = distances if center_distances is None else center_distances
        ref = np.array([[[0.0, 0.0], [d, 0.0]] for d in distances])
        centers = np.array([[[0.0, 0.0], [d, 0.0]] for d in center_distances])
        return ref, centers

    def test_violation_depth_and_arrival(self):
        ref, centers = self._frames([1.0, 0.4, 1.0])
        radii = np.full((2, 2), 0.6)
        m = compute_metrics(ref, centers, radii, radii, np.array([10, -1]), 3, 2, 0.05)
        assert m.violation_events == 1
        assert m.mean_violation_depth == pytest.approx(0.2)
        assert m.arrival_rate == 0.5
        assert m.mean_arrival_time == pytest.approx(0.5)
        assert m.qp_infeasible_events == 3
        assert m.steps_run == 2
        assert m.min_pair_margin == pytest.approx(-0.2)
        assert m.physical_safety_exceptions == 0

    def test_physical_exception_counted_only_outside_violation(self):
        ref, centers = self._frames([1.0, 0.4], center_distances=[0.5, 0.3])
        m = compute_metrics(ref, centers, np.full((2, 2), 0.6), np.full((2, 2), 0.6), np.array([-1, -1]), 0, 1, 0.05)
        assert m.physical_safety_exceptions == 1
        assert m.arrival_rate == 0.0
        assert m.mean_arrival_time == 0.0

    def test_single_agent(self):
        ref = np.zeros((3, 1, 2))
        m = compute_metrics(ref, ref, np.zeros((1, 1)), np.zeros((1, 1)), np.array([2]), 0, 2, 0.05)
        assert m.violation_events == 0
        assert m.min_pair_margin == float("inf")
        assert m.arrival_rate == 1.0

    def test_to_dict_without_wall_time(self):
        ref, centers = self._frames([1.0])
        m = compute_metrics(ref, centers, np.full((2, 2), 0.6), np.full((2, 2), 0.6), np.array([-1, -1]), 0, 0, 0.05, 1.5)
        assert m.to_dict()["wall_time"] == 1.5
        assert "wall_time" not in m.to_dict(include_wall_time=False)


class TestRunTrial:
    def test_trajectory_layout(self):
        scenario = generate_scenario(5, seed=2)
        cfg = SimConfig.build(max_steps=15, record_pairs=True)
        outcome = run_trial(scenario, cfg, trial=3, record_trajectory=True)

        traj = outcome.trajectory
        assert list(traj.columns) == TRAJECTORY_COLUMNS
        assert len(traj) == (outcome.metrics.steps_run + 1) * 5
        first = traj[traj["step"] == 0]
        assert set(first["qp_status"]) == {STATUS_INITIAL}
        assert (first[["u1", "u2"]] == 0.0).all().all()
        assert set(traj["trial"]) == {3}

        assert list(outcome.pairs.columns) == PAIR_COLUMNS
        assert len(outcome.pairs) == outcome.metrics.steps_run * 10
        np.testing.assert_allclose(outcome.pairs["alpha_ij"] + outcome.pairs["alpha_ji"], 1.0)

    def test_no_recording_by_default(self):
        outcome = run_trial(generate_scenario(5, seed=2), SimConfig.build(max_steps=5))
        assert outcome.trajectory is None
        assert outcome.pairs is None
        assert outcome.metrics.steps_run == 5

    def test_deterministic(self):
        scenario = generate_scenario(5, seed=9)
        cfg = SimConfig.build(max_steps=30)
        a = run_trial(scenario, cfg, record_trajectory=True)
        b = run_trial(scenario, cfg, record_trajectory=True)
        pd.testing.assert_frame_equal(a.trajectory, b.trajectory)
        assert a.metrics.to_dict(False) == b.metrics.to_dict(False)

    def test_task_wraps_result(self):
        task = TrialTask(SimConfig.build(max_steps=5))
        result = task.run(generate_scenario(5, seed=0), trial=1)
        assert result["success"]
        assert result["errors"] == []
        assert result["metrics"].steps_run == 5


class TestTwoAgentSafety:
    """對向與十字交叉情境下的前向不變性：實際執行的輸入皆滿足約束列"""

    @pytest.mark.parametrize("crossing", [False, True])
    @pytest.mark.parametrize("pair", list(itertools.product(CLASSES, repeat=2)))
    def test_barrier_stays_nonnegative(self, pair, crossing):
        scenario = two_agent_scenario(KinematicSpec.default(pair[0]), KinematicSpec.default(pair[1]), crossing=crossing)
        cfg = SimConfig.build(max_steps=200)
        world = World.from_scenario(scenario)
        R = world.pair_radii[0, 1]
        h0 = float(np.sum(np.diff(world.reference_points(), axis=0) ** 2)) - R ** 2

        clean = True
        while world.step_index < cfg.max_steps and not world.all_arrived:
            world, record = step(world, cfg)
            clean = clean and record.infeasible == 0
            if not clean:
                continue
            P = world.reference_points()
            dist = float(np.linalg.norm(P[0] - P[1]))
            assert dist >= R - 1e-6
            t = world.step_index * cfg.dt
            assert dist ** 2 - R ** 2 >= h0 * np.exp(-cfg.gains.lambda1 * t) - 1e-2

    @pytest.mark.parametrize("pair", [("DI", "DI"), ("UNI", "CL"), ("FO", "DD"), ("CL", "FO")])
    def test_no_physical_exceptions(self, pair):
        for crossing in (False, True):
            scenario = two_agent_scenario(KinematicSpec.default(pair[0]), KinematicSpec.default(pair[1]), crossing=crossing)
            m = run_trial(scenario, SimConfig.build(max_steps=200)).metrics
            assert m.physical_safety_exceptions == 0

    @pytest.mark.parametrize("method", ["cahcbf", "hocbf", "apf"])
    def test_no_physical_exceptions_in_mixed_team(self, method):
        # 參考距離 >= R_ij 即保證本體不相交，與方法無關
        for seed in (0, 1):
            m = run_trial(generate_scenario(10, seed=seed), SimConfig.build(max_steps=120, method=method)).metrics
            assert m.physical_safety_exceptions == 0
