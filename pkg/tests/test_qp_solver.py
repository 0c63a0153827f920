"""二維 QP 求解測試"""
import math

import numpy as np
import pytest
from scipy.optimize import linprog, nnls

from calculators.kinematics import FORWARD, REVERSE, acceleration_set, clamp_velocity, velocity_set
from calculators.opspace import AgentState
from calculators.polytope import ACTIVE_TOL, Polytope2
from calculators.qp_solver import QpProblem, QpStatus, braking_input, solve

BOX = Polytope2.box(2.0, 2.0)


def _random_problem(rng):
    m = int(rng.integers(0, 9))
    rows = [(rng.normal(size=2), float(rng.uniform(-3.0, 1.0))) for _ in range(m)]
    return QpProblem(u_nom=rng.uniform(-4, 4, size=2), rows=rows, bounds=BOX)


class TestSolve:
    def test_unconstrained_returns_nominal(self):
        outcome = solve(QpProblem(u_nom=np.array([0.5, -1.0]), rows=[], bounds=BOX))
        assert outcome.solved
        np.testing.assert_allclose(outcome.u, [0.5, -1.0])

    def test_nominal_outside_bounds_is_projected(self):
        outcome = solve(QpProblem(u_nom=np.array([5.0, 0.0]), rows=[], bounds=BOX))
        np.testing.assert_allclose(outcome.u, [2.0, 0.0])

    def test_single_row_projection(self):
        row = (np.array([1.0, 0.0]), 1.0)
        outcome = solve(QpProblem(u_nom=np.array([0.0, 0.5]), rows=[row], bounds=BOX))
        np.testing.assert_allclose(outcome.u, [1.0, 0.5])
        assert 0 in outcome.active

    def test_conflicting_rows_infeasible(self):
        rows = [(np.array([1.0, 0.0]), 1.0), (np.array([-1.0, 0.0]), 0.5)]
        outcome = solve(QpProblem(u_nom=np.zeros(2), rows=rows, bounds=BOX))
        assert outcome.status is QpStatus.INFEASIBLE
        assert outcome.u is None
        assert not outcome.solved

    def test_row_beyond_bounds_infeasible(self):
        outcome = solve(QpProblem(u_nom=np.zeros(2), rows=[(np.array([1.0, 0.0]), 3.0)], bounds=BOX))
        assert outcome.status is QpStatus.INFEASIBLE

    def test_matches_feasibility_and_kkt(self, rng):
        for _ in range(1000):
            problem = _random_problem(rng)
            normals, offsets = problem.stacked()
            outcome = solve(problem)

            lp = linprog(np.zeros(2), A_ub=normals, b_ub=offsets, bounds=[(None, None)] * 2, method="highs")
            assert outcome.solved == (lp.status == 0)
            if not outcome.solved:
                continue

            u = outcome.u
            assert np.all(normals @ u <= offsets + 1e-7)
            # KKT：u_nom - u 可由 active 法向量的非負組合表示
            slack = offsets - normals @ u
            active = np.flatnonzero(slack <= ACTIVE_TOL * 10)
            residual_target = problem.u_nom - u
            if active.size == 0:
                assert np.linalg.norm(residual_target) <= 1e-9
                continue
            _, residual = nnls(normals[active].T, residual_target)
            assert residual <= 1e-6

    def test_not_worse_than_grid(self, rng):
        xs = np.linspace(-2.0, 2.0, 161)
        grid = np.array(np.meshgrid(xs, xs)).reshape(2, -1).T
        for _ in range(50):
            problem = _random_problem(rng)
            outcome = solve(problem)
            if not outcome.solved:
                continue
            normals, offsets = problem.stacked()
            feasible = grid[np.all(grid @ normals.T <= offsets + 1e-12, axis=1)]
            if feasible.size == 0:
                continue
            grid_min = np.min(np.sum((feasible - problem.u_nom) ** 2, axis=1))
            qp_obj = float(np.sum((outcome.u - problem.u_nom) ** 2))
            assert qp_obj <= grid_min + 1e-9


class TestBraking:
    def test_unicycle_full_speed(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0, v=1.0, omega=0.0)
        np.testing.assert_allclose(braking_input(state, specs["UNI"], 0.05), [-2.0, 0.0])

    def test_at_rest_is_zero(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0)
        np.testing.assert_array_equal(braking_input(state, specs["CL"], 0.05), [0.0, 0.0])

    def test_differential_drive_stays_in_wheel_diamond(self, specs):
        spec = specs["DD"]
        state = AgentState(phi=0.0, x=0.0, y=0.0, v=0.5, omega=1.0)
        u = braking_input(state, spec, 0.05)
        assert acceleration_set(spec, state.nu, 0.05).contains(u, tol=1e-7)
        # 兩分量皆朝 ν 的反方向
        assert u[0] < 0 and u[1] < 0

    def test_small_speed_stops_in_one_step(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0, v=0.05, omega=0.0)
        u = braking_input(state, specs["UNI"], 0.05)
        assert state.v + u[0] * 0.05 == pytest.approx(0.0)

    @pytest.mark.parametrize("name", ["DI", "UNI", "DD", "CL", "FO"])
    def test_always_inside_exact_set(self, specs, rng, name):
        spec = specs[name]
        gears = [FORWARD, REVERSE] if name == "CL" else [FORWARD]
        for gear in gears:
            V = velocity_set(spec, gear).vertices
            for _ in range(200):
                nu = rng.dirichlet(np.ones(V.shape[0])) @ V
                state = AgentState(phi=0.0, x=0.0, y=0.0, v=float(nu[0]), omega=float(nu[1]), gear=gear)
                u = braking_input(state, spec, 0.05)
                assert acceleration_set(spec, nu, 0.05, gear=gear, with_floor=False).contains(u, tol=1e-7)

    @pytest.mark.parametrize("name", ["DI", "UNI", "DD", "CL", "FO"])
    def test_stops_within_step_bound(self, specs, rng, name):
        spec = specs[name]
        dt = 0.05
        bound = math.ceil(spec.v_max / (spec.a_max * dt))
        gears = [FORWARD, REVERSE] if name == "CL" else [FORWARD]
        for gear in gears:
            V = velocity_set(spec, gear).vertices
            starts = np.vstack([V, rng.dirichlet(np.ones(V.shape[0]), size=50) @ V])
            for nu in starts:
                state = AgentState(phi=0.0, x=0.0, y=0.0, v=float(nu[0]), omega=float(nu[1]), gear=gear)
                for _ in range(bound):
                    u = braking_input(state, spec, dt)
                    state = state.with_velocity(clamp_velocity(spec, state.nu + u * dt, gear).as_array())
                assert np.linalg.norm(state.nu) <= 1e-9


class TestIdempotence:
    def test_resolve_at_solution_returns_solution(self, rng):
        solved = 0
        for _ in range(300):
            problem = _random_problem(rng)
            first = solve(problem)
            if not first.solved:
                continue
            solved += 1
            again = solve(QpProblem(u_nom=first.u, rows=problem.rows, bounds=problem.bounds))
            assert again.solved
            np.testing.assert_allclose(again.u, first.u, atol=1e-9)
        assert solved > 50
