import numpy as np
import pytest

from flexclf import (
    ActuatorParams,
    BuckBoostParams,
    actuator,
    buck_boost,
    compute_equilibrium,
    integrator_chain,
)
from flexclf.errors import DimensionMismatch, InputOutOfBounds, InvalidParameter
from flexclf.model import _buck_boost_absolute


def all_plants():
    return [
        integrator_chain(1, 1.0, 1.0),
        integrator_chain(2, 0.001, 1.0),
        integrator_chain(3, 1.0, 2.0),
        buck_boost(BuckBoostParams()),
        actuator(ActuatorParams()),
    ]


class TestStep:
    def test_origin_is_equilibrium(self):
        plant = integrator_chain(2, 0.5, 1.0)
        assert np.allclose(plant.step([0.0, 0.0], [0.0]), 0.0)

    def test_scalar_plant(self):
        plant = integrator_chain(1, 1.0, 1.0)
        assert plant.step([1.0], [-0.5]) == pytest.approx([0.5])

    def test_buck_boost_deviation_fixed_point(self):
        plant = buck_boost(BuckBoostParams())
        x_next = plant.step([0.0, 0.0], [0.0])
        assert np.max(np.abs(x_next)) <= 1e-12

    def test_dimension_mismatch(self):
        plant = integrator_chain(2, 1.0, 1.0)
        with pytest.raises(DimensionMismatch):
            plant.step([1.0], [0.0])
        with pytest.raises(DimensionMismatch):
            plant.step([1.0, 0.0], [0.0, 0.0])

    def test_input_out_of_bounds(self):
        plant = integrator_chain(1, 1.0, 1.0)
        with pytest.raises(InputOutOfBounds):
            plant.step([0.0], [1.5])

    def test_step_matches_affine_composition(self):
        rng = np.random.default_rng(3)
        for plant in all_plants():
            for _ in range(20):
                x = rng.uniform(-1.0, 1.0, size=plant.n)
                u = rng.uniform(plant.u_lo, plant.u_hi)
                expected = plant.drift(x) + plant.input_gain(x) @ u
                assert np.array_equal(plant.step(x, u), expected)

    def test_pure_integrator_holds_state(self):
        plant = integrator_chain(1, 1.0, 1.0)
        x = np.array([0.7])
        for _ in range(10):
            x = plant.step(x, [0.0])
        assert x == pytest.approx([0.7], abs=0)


class TestLinearize:
    def test_scalar_linear_plant(self):
        plant = integrator_chain(1, 1.0, 1.0)
        A, B = plant.linearize([0.0], [0.0])
        assert A == pytest.approx(np.array([[1.0]]), abs=1e-9)
        assert B == pytest.approx(np.array([[1.0]]), abs=1e-9)

    def test_double_integrator(self):
        plant = integrator_chain(2, 0.001, 1.0)
        A, B = plant.linearize(np.zeros(2), np.zeros(1))
        assert A == pytest.approx(np.array([[1.0, 0.001], [0.0, 1.0]]), abs=1e-8)
        assert B == pytest.approx(np.array([[5e-7], [1e-3]]), abs=1e-8)

    def test_fd_gain_matches_input_gain_everywhere(self):
        rng = np.random.default_rng(11)
        for plant in all_plants():
            for _ in range(3):
                x = rng.uniform(-0.5, 0.5, size=plant.n)
                _, B = plant.linearize(x, np.zeros(plant.m))
                assert B == pytest.approx(plant.input_gain(x), abs=1e-8)


class TestIntegratorChain:
    def test_single_integrator(self):
        plant = integrator_chain(1, 1.0, 1.0)
        assert plant.step([2.0], [1.0]) == pytest.approx([3.0])
        assert plant.u_lo == pytest.approx([-1.0])
        assert plant.u_hi == pytest.approx([1.0])

    def test_double_integrator_exact_discretization(self):
        plant = integrator_chain(2, 1.0, 1.0)
        A, B = plant.linearize(np.zeros(2), np.zeros(1))
        assert A == pytest.approx(np.array([[1.0, 1.0], [0.0, 1.0]]), abs=1e-9)
        assert B == pytest.approx(np.array([[0.5], [1.0]]), abs=1e-9)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameter):
            integrator_chain(0, 1.0, 1.0)
        with pytest.raises(InvalidParameter):
            integrator_chain(1, -1.0, 1.0)
        with pytest.raises(InvalidParameter):
            integrator_chain(1, 1.0, 0.0)


class TestBuckBoost:
    def test_equilibrium_values(self):
        eq = compute_equilibrium(BuckBoostParams(v_in=15.0, r_load=10.0,
                                                 duty_ref=0.5))
        assert eq.x_bar == pytest.approx([3.0, 15.0])
        assert eq.u_bar == pytest.approx([0.5])

    def test_equilibrium_residual(self):
        p = BuckBoostParams(v_in=24.0, r_load=33.0, duty_ref=0.35)
        eq = compute_equilibrium(p)
        g_abs, h_abs = _buck_boost_absolute(p)
        x_next = g_abs(eq.x_bar) + h_abs(eq.x_bar) @ eq.u_bar
        assert np.max(np.abs(x_next - eq.x_bar)) <= 1e-12

    def test_small_duty_small_state(self):
        eq = compute_equilibrium(BuckBoostParams(duty_ref=1e-9))
        assert np.max(np.abs(eq.x_bar)) < 1e-6

    def test_gain_column_formula(self):
        p = BuckBoostParams()
        plant = buck_boost(p)
        eq = compute_equilibrium(p)
        z = np.array([0.4, -2.0])
        i_abs, v_abs = eq.x_bar + z
        expected = np.array(
            [[p.ts / p.inductance * (p.v_in + v_abs)],
             [-p.ts / p.capacitance * i_abs]]
        )
        assert plant.input_gain(z) == pytest.approx(expected)

    def test_duty_box_keeps_total_duty_in_unit_interval(self):
        plant = buck_boost(BuckBoostParams(duty_ref=0.3))
        assert plant.u_lo == pytest.approx([-0.3])
        assert plant.u_hi == pytest.approx([0.7])

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameter):
            BuckBoostParams(duty_ref=1.0)
        with pytest.raises(InvalidParameter):
            BuckBoostParams(r_load=0.0)


class TestActuator:
    def test_origin_equilibrium(self):
        plant = actuator(ActuatorParams())
        assert np.allclose(plant.step([0.0, 0.0], [0.0]), 0.0)

    def test_euler_evaluation(self):
        plant = actuator(ActuatorParams(mass=0.1, damping=1.0, spring=100.0,
                                        force_gain=10.0, ts=1e-4))
        x_next = plant.step([0.01, 0.0], [0.0])
        assert x_next == pytest.approx([0.01, -0.001])

    def test_gain_vector(self):
        p = ActuatorParams(mass=0.1, force_gain=10.0, ts=1e-4)
        plant = actuator(p)
        _, B = plant.linearize(np.zeros(2), np.zeros(1))
        assert B == pytest.approx(
            np.array([[0.0], [p.ts * p.force_gain / p.mass]]), abs=1e-10)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameter):
            ActuatorParams(mass=0.0)
        with pytest.raises(InvalidParameter):
            ActuatorParams(damping=-1.0)
