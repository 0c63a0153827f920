"""操作空間轉換測試"""
import math

import numpy as np
import pytest

from calculators.opspace import (
    AgentState,
    drift,
    integrate_pose,
    inverse_velocity_map,
    jacobian,
    op_accel,
    op_state,
    reference_point,
    wrap_angle,
)


class TestWrapAngle:
    @pytest.mark.parametrize("phi, expected", [
        (0.5, 0.5),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (3 * math.pi, math.pi),
        (-0.5, -0.5),
        (2 * math.pi + 0.25, 0.25),
    ])
    def test_range(self, phi, expected):
        assert wrap_angle(phi) == pytest.approx(expected)


class TestJacobian:
    def test_determinant_equals_look_ahead(self, specs, rng):
        for name in ("UNI", "DD", "CL", "FO"):
            spec = specs[name]
            for phi in rng.uniform(-math.pi, math.pi, size=250):
                J = jacobian(AgentState(phi=float(phi), x=0.0, y=0.0), spec)
                assert abs(np.linalg.det(J) - spec.x_r) <= 1e-12

    def test_double_integrator_identity(self, specs):
        state = AgentState(phi=1.0, x=2.0, y=3.0, v=0.5, omega=-0.2)
        np.testing.assert_array_equal(jacobian(state, specs["DI"]), np.eye(2))
        np.testing.assert_array_equal(reference_point(state, specs["DI"]), [2.0, 3.0])
        np.testing.assert_array_equal(drift(state, specs["DI"]), [0.0, 0.0])

    def test_reference_point_offset(self, specs):
        state = AgentState(phi=math.pi / 2, x=1.0, y=1.0)
        np.testing.assert_allclose(reference_point(state, specs["CL"]), [1.0, 1.2])


class TestDrift:
    def test_matches_finite_difference(self, specs, rng):
        h = 1e-6
        for name in ("UNI", "DD", "CL"):
            spec = specs[name]
            for _ in range(100):
                phi = float(rng.uniform(-math.pi, math.pi))
                v, omega = float(rng.uniform(-1, 1)), float(rng.uniform(-2, 2))
                nu = np.array([v, omega])
                # 固定 ν，J 隨 φ 以 ω 變化：η = dJ/dt · ν
                J_plus = jacobian(AgentState(phi=phi + omega * h, x=0.0, y=0.0), spec)
                J_minus = jacobian(AgentState(phi=phi - omega * h, x=0.0, y=0.0), spec)
                fd = (J_plus - J_minus) @ nu / (2 * h)
                eta = drift(AgentState(phi=phi, x=0.0, y=0.0, v=v, omega=omega), spec)
                np.testing.assert_allclose(eta, fd, atol=1e-5)

    def test_zero_when_not_turning(self, specs):
        state = AgentState(phi=0.3, x=0.0, y=0.0, v=1.0, omega=0.0)
        np.testing.assert_array_equal(drift(state, specs["UNI"]), [0.0, 0.0])

    def test_op_accel_adds_drift(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0, v=1.0, omega=1.0)
        spec = specs["UNI"]
        np.testing.assert_allclose(op_accel(state, spec, [0.0, 0.0]), drift(state, spec))


class TestInverseVelocityMap:
    def test_round_trip(self, specs, rng):
        for name in ("UNI", "DD", "CL", "FO", "DI"):
            spec = specs[name]
            for _ in range(200):
                state = AgentState(phi=float(rng.uniform(-math.pi, math.pi)), x=0.0, y=0.0)
                target = rng.uniform(-1, 1, size=2)
                nu = inverse_velocity_map(state, spec, target).as_array()
                np.testing.assert_allclose(jacobian(state, spec) @ nu, target, atol=1e-12)

    def test_known_unicycle_solution(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0)
        nu = inverse_velocity_map(state, specs["UNI"], [0.5, 0.05])
        assert (nu.v, nu.omega) == pytest.approx((0.5, 0.5))

    def test_op_state_velocity_consistent(self, specs):
        state = AgentState(phi=0.7, x=1.0, y=-1.0, v=0.4, omega=0.3)
        op = op_state(state, specs["CL"])
        np.testing.assert_allclose(op.p_dot, op.G @ state.nu)


class TestIntegratePose:
    def test_straight_line(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0)
        nxt = integrate_pose(state, specs["UNI"], [1.0, 0.0], 0.5)
        assert (nxt.x, nxt.y, nxt.phi) == pytest.approx((0.5, 0.0, 0.0))
        assert nxt.v == 1.0

    def test_half_circle_arc(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0)
        nxt = integrate_pose(state, specs["UNI"], [1.0, 1.0], math.pi)
        assert nxt.x == pytest.approx(0.0, abs=1e-12)
        assert nxt.y == pytest.approx(2.0)
        assert nxt.phi == pytest.approx(math.pi)

    def test_double_integrator_moves_position_only(self, specs):
        state = AgentState(phi=0.4, x=1.0, y=1.0)
        nxt = integrate_pose(state, specs["DI"], [0.2, -0.4], 0.5)
        assert (nxt.x, nxt.y, nxt.phi) == pytest.approx((1.1, 0.8, 0.4))

    def test_keeps_gear(self, specs):
        state = AgentState(phi=0.0, x=0.0, y=0.0, gear=-1)
        nxt = integrate_pose(state, specs["CL"], [-0.5, 0.0], 0.1)
        assert nxt.gear == -1
        assert nxt.x == pytest.approx(-0.05)
