import numpy as np
import pytest

from flexclf import (
    ClassicalController,
    ConeParams,
    EnvelopeSchedule,
    FlexibleController,
    GridSpec,
    QuadraticCLF,
    Scenario,
    Status,
    feasibility_map,
    integrator_chain,
    run_closed_loop,
    timing_stats,
)
from flexclf.errors import EmptyLog, GridTooLarge, InvalidParameter
from flexclf.sim import LogRecord, TrajectoryLog, nearest_rank

from helpers import unstable_scalar_plant


def scalar_classical(x0, rho=0.25, steps=40):
    plant = integrator_chain(1, 1.0, 1.0)
    V = QuadraticCLF(P=np.eye(1))
    ctrl = ClassicalController(clf=V, cone=ConeParams(rho=rho), R_u=np.eye(1))
    return Scenario(model=plant, controller=ctrl, x0=[x0], steps=steps,
                    ts=1.0, convergence_tol=1e-6)


def scalar_flexible(x0, delta=10.0, gamma=0.5, alpha=100.0, steps=60):
    plant = integrator_chain(1, 1.0, 1.0)
    V = QuadraticCLF(P=np.eye(1))
    ctrl = FlexibleController(
        clf=V, cone=ConeParams(rho=0.25), R_u=np.eye(1), alpha=alpha,
        envelope=EnvelopeSchedule(delta=delta, gamma=gamma),
    )
    return Scenario(model=plant, controller=ctrl, x0=[x0], steps=steps,
                    ts=1.0, convergence_tol=1e-6)


class TestRunClosedLoop:
    def test_geometric_value_and_input_traces(self):
        log, summary = run_closed_loop(scalar_classical(1.0))
        vs = [r.v for r in log.records[:4]]
        us = [r.u[0] for r in log.records[:4]]
        assert vs == pytest.approx([1.0, 0.25, 0.0625, 0.015625], rel=1e-6)
        assert us == pytest.approx([-0.5, -0.25, -0.125, -0.0625], abs=1e-6)
        assert summary.converged
        assert summary.infeasible_steps == 0
        assert [r.t for r in log.records[:3]] == [0.0, 1.0, 2.0]

    def test_classical_abort(self):
        log, summary = run_closed_loop(scalar_classical(3.0))
        assert summary.aborted
        assert summary.first_infeasible_step == 0
        assert len(log.records) == 1
        assert log.records[0].status is Status.INFEASIBLE
        assert not summary.converged

    def test_flexible_completes_where_classical_aborts(self):
        log, summary = run_closed_loop(scalar_flexible(3.0))
        assert not summary.aborted
        assert summary.converged
        assert summary.infeasible_steps == 0
        for r in log.records:
            assert r.v <= r.cert_bound * (1 + 1e-6) + 1e-12
        assert summary.total_slack == pytest.approx(1.75, abs=1e-6)

    def test_log_length_equals_steps(self):
        log, _ = run_closed_loop(scalar_classical(1.0, steps=25))
        assert len(log) == 25

    def test_peak_state_tracking(self):
        _, summary = run_closed_loop(scalar_flexible(3.0))
        assert summary.peak_state[0] == pytest.approx(3.0)

    def test_scenario_validation(self):
        with pytest.raises(InvalidParameter):
            scalar_classical(1.0, steps=0)
        with pytest.raises(InvalidParameter):
            Scenario(
                model=integrator_chain(1, 1.0, 1.0),
                controller=scalar_classical(1.0).controller,
                x0=[1.0], steps=5, ts=1.0, convergence_tol=0.0,
            )


class TestNonMonotoneWitness:
    def test_value_rises_then_run_converges(self):
        # Unstable drift plus cheap slack: doing little is optimal early, so
        # V grows under the envelope, then the decaying budget forces descent.
        plant = unstable_scalar_plant()
        V = QuadraticCLF(P=np.eye(1))
        ctrl = FlexibleController(
            clf=V, cone=ConeParams(rho=0.5), R_u=np.eye(1), alpha=0.05,
            envelope=EnvelopeSchedule(delta=2.0, gamma=0.5),
        )
        scenario = Scenario(model=plant, controller=ctrl, x0=[0.5], steps=80,
                            ts=1.0, convergence_tol=1e-6)
        log, summary = run_closed_loop(scenario)
        vs = [r.v for r in log.records]
        assert any(vs[k + 1] > vs[k] for k in range(len(vs) - 1))
        assert summary.converged
        assert summary.infeasible_steps == 0
        for r in log.records:
            assert r.v <= r.cert_bound * (1 + 1e-6) + 1e-12


class TestFeasibilityMap:
    @pytest.fixture
    def scalar_base(self):
        plant = integrator_chain(1, 1.0, 1.0)
        V = QuadraticCLF(P=np.eye(1))
        ctrl = FlexibleController(
            clf=V, cone=ConeParams(rho=0.25), R_u=np.eye(1), alpha=100.0,
            envelope=EnvelopeSchedule(delta=10.0, gamma=0.9),
        )
        return Scenario(model=plant, controller=ctrl, x0=np.zeros(1),
                        steps=60, ts=1.0, convergence_tol=1e-6)

    def test_classical_region_is_analytic(self, scalar_base):
        grid = GridSpec(lo=[-3.0], hi=[3.0], counts=[61])
        fmap = feasibility_map(scalar_base, grid)
        for x0, label in zip(fmap.x0s, fmap.classes):
            if abs(x0[0]) <= 2.0 + 1e-9:
                assert label == "classical"
            else:
                assert label == "flexible_only"
        assert fmap.count("flexible_only") > 0
        assert fmap.count("neither") == 0

    def test_zero_budget_collapses_flexible_only(self, scalar_base):
        ctrl = FlexibleController(
            clf=scalar_base.controller.clf, cone=scalar_base.controller.cone,
            R_u=scalar_base.controller.R_u, alpha=100.0,
            envelope=EnvelopeSchedule(delta=0.0, gamma=0.9),
        )
        base = Scenario(model=scalar_base.model, controller=ctrl,
                        x0=np.zeros(1), steps=60, ts=1.0,
                        convergence_tol=1e-6)
        grid = GridSpec(lo=[-3.0], hi=[3.0], counts=[31])
        fmap = feasibility_map(base, grid)
        assert fmap.count("flexible_only") == 0

    def test_dominance_cellwise(self, scalar_base):
        # Every classical cell must also be stabilized by the flexible law.
        grid = GridSpec(lo=[-2.0], hi=[2.0], counts=[21])
        fmap = feasibility_map(scalar_base, grid)
        for x0, label in zip(fmap.x0s, fmap.classes):
            if label != "classical":
                continue
            scn = Scenario(model=scalar_base.model,
                           controller=scalar_base.controller, x0=x0,
                           steps=60, ts=1.0, convergence_tol=1e-6)
            _, summary = run_closed_loop(scn)
            assert summary.infeasible_steps == 0 and summary.converged

    def test_threaded_matches_serial(self, scalar_base):
        grid = GridSpec(lo=[-3.0], hi=[3.0], counts=[25])
        serial = feasibility_map(scalar_base, grid, jobs=1)
        threaded = feasibility_map(scalar_base, grid, jobs=4)
        assert serial.classes == threaded.classes

    def test_grid_validation(self, scalar_base):
        with pytest.raises(GridTooLarge):
            GridSpec(lo=[-1.0, -1.0], hi=[1.0, 1.0], counts=[2000, 2000],
                     cell_cap=1_000_000)
        with pytest.raises(InvalidParameter):
            feasibility_map(scalar_base,
                            GridSpec(lo=[-1.0, -1.0], hi=[1.0, 1.0],
                                     counts=[3, 3]))


class TestTimingStats:
    def _log_with_times(self, times, ts):
        records = [
            LogRecord(k=i, t=i * ts, x=np.zeros(1), u=np.zeros(1), lam=0.0,
                      v=0.0, lam_bar=0.0, cert_bound=0.0,
                      status=Status.OPTIMAL, solve_time_us=us)
            for i, us in enumerate(times)
        ]
        return TrajectoryLog(records=records, ts=ts, x_final=np.zeros(1))

    def test_median_and_budget(self):
        stats = timing_stats(self._log_with_times([10.0, 20.0, 30.0], 1e-3))
        assert stats.median_us == 20.0
        assert stats.budget_us == 1000.0
        assert stats.budget_ok

    def test_budget_violation(self):
        stats = timing_stats(self._log_with_times([2000.0], 1e-3))
        assert not stats.budget_ok

    def test_nearest_rank_percentile(self):
        assert nearest_rank([10.0, 20.0, 30.0, 40.0], 99) == 40.0
        assert nearest_rank([10.0, 20.0, 30.0, 40.0], 50) == 20.0

    def test_empty_log(self):
        with pytest.raises(EmptyLog):
            timing_stats(TrajectoryLog(records=[], ts=1.0,
                                       x_final=np.zeros(1)))


class TestDeterminism:
    def test_identical_runs_identical_logs(self):
        log_a, _ = run_closed_loop(scalar_flexible(3.0))
        log_b, _ = run_closed_loop(scalar_flexible(3.0))
        assert len(log_a) == len(log_b)
        for ra, rb in zip(log_a.records, log_b.records):
            assert ra.x.tobytes() == rb.x.tobytes()
            assert ra.u.tobytes() == rb.u.tobytes()
            assert ra.lam == rb.lam
            assert ra.v == rb.v
            assert ra.cert_bound == rb.cert_bound
            assert ra.status == rb.status
