import json

import numpy as np
import pytest

from src.core.exceptions import BadParameter
from src.models.clf import v_eta
from src.models.controllers import ControlResult, SolverStatus, make_controller_family
from src.models.system import make_benchmark
from src.services.discretization import StepConfig, euler_step
from src.services.simulation import (
    SweepRecord,
    SweepSummary,
    export_trajectory,
    is_settled,
    practical_stability_sweep,
    run_closed_loop,
    settled_time,
    terminal_trend_holds,
    trajectory_csv,
    write_sweep_summary,
)

XI0 = np.array([1.0, 0.0, 1.0])
HS = [0.2, 0.1, 0.05, 0.025]


def _rest(xi):
    return ControlResult(u=np.zeros(1), constraint_residual=0.0, status=SolverStatus.INTERIOR)


def _run(benchmark, design, name, h=0.2, T=20.0, **kwargs):
    family = make_controller_family(name, design, benchmark)
    return run_closed_loop(benchmark, lambda xi: family(h, xi), XI0, h, T, StepConfig(h=h), design=design, **kwargs)


def test_qcqp_closed_loop_settles(benchmark, design, composite):
    traj = _run(benchmark, design, "clf-qcqp", composite=composite)
    assert len(traj.states) == 101
    assert not traj.terminated_early
    norms = traj.norms
    assert np.all(norms[traj.times >= 15.0 - 1e-9] <= 0.25)
    assert norms.max() <= 5.0
    assert is_settled(traj, 0.25)
    assert traj.v_composite is not None and traj.v_composite.shape == (101,)


def test_clf_qp_closed_loop_does_not_settle(benchmark, design):
    traj = _run(benchmark, design, "clf-qp")
    late = traj.norms[traj.times >= 15.0 - 1e-9]
    assert traj.terminated_early or np.any(late > 0.25)
    assert not is_settled(traj, 0.25)


def test_equilibrium_stays_put(benchmark, design):
    traj = run_closed_loop(benchmark, _rest, np.zeros(3), 0.2, 2.0, design=design)
    assert np.array_equal(traj.states, np.zeros((11, 3)))
    assert settled_time(traj, 0.25) == 0.0


def test_zero_order_hold_records_one_input_per_step(benchmark, design):
    traj = _run(benchmark, design, "clf-qcqp", T=2.0)
    assert traj.inputs.shape == (10, 1)
    assert len(traj.residuals) == len(traj.statuses) == 10


def test_euler_decrease_along_qcqp_loop(benchmark, design):
    h = 0.2
    traj = _run(benchmark, design, "clf-qcqp", h=h)
    margin = design.c * design.lambda_min_Q
    for xi, u in zip(traj.states[:-1], traj.inputs):
        eta = xi[:2]
        eta_next = euler_step(benchmark, xi, u, h)[:2]
        assert v_eta(design, eta_next) - v_eta(design, eta) <= -h * margin * (eta @ eta) + 1e-8


def test_euler_model_can_be_simulated(benchmark, design):
    traj = _run(benchmark, design, "fbl", T=4.0, model="euler")
    assert not traj.terminated_early
    # FBL on the Euler model closes the output loop as (I + h A_cl) eta
    step = np.eye(2) + 0.2 * design.A_cl
    assert np.allclose(traj.states[1][:2], step @ XI0[:2], atol=1e-12)


def test_domain_violation_ends_run_early(design):
    small = make_benchmark(domain_radius=1.5)

    def kick(xi):
        return ControlResult(u=np.array([50.0]), constraint_residual=0.0, status=SolverStatus.ACTIVE)

    traj = run_closed_loop(small, kick, XI0, 0.2, 2.0, design=design)
    assert traj.terminated_early
    assert "DomainViolation" in traj.reason
    assert settled_time(traj, 0.25) is None


def test_infeasible_control_ends_run_early(benchmark, design):
    def infeasible(xi):
        return ControlResult(u=np.zeros(1), constraint_residual=1.0, status=SolverStatus.INFEASIBLE)

    traj = run_closed_loop(benchmark, infeasible, XI0, 0.2, 2.0, design=design)
    assert traj.terminated_early
    assert traj.steps == 0
    assert "infeasible" in traj.reason


def test_run_closed_loop_validates_arguments(benchmark, design):
    with pytest.raises(BadParameter):
        run_closed_loop(benchmark, _rest, XI0, -0.1, 2.0, design=design)
    with pytest.raises(BadParameter):
        run_closed_loop(benchmark, _rest, XI0, 0.2, 0.1, design=design)
    with pytest.raises(BadParameter):
        run_closed_loop(benchmark, _rest, XI0, 0.2, 2.0, design=design, model="midpoint")


def test_qcqp_sweep_is_practically_stable(benchmark, design, composite):
    family = make_controller_family("clf-qcqp", design, benchmark)
    summary = practical_stability_sweep(
        benchmark, family, XI0, HS, 20.0, 0.25, design=design, composite=composite
    )
    assert [r.h for r in summary.records] == HS
    assert all(r.settled for r in summary.records)
    # terminal norms grow slightly as h shrinks on this horizon (0.00197 at h = 0.2, 0.0235 at h = 0.025)
    assert all(r.terminal_norm <= 0.05 for r in summary.records)


def test_fbl_sweep_settles_for_small_periods(benchmark, design):
    family = make_controller_family("fbl", design, benchmark)
    summary = practical_stability_sweep(benchmark, family, XI0, HS, 20.0, 0.25, design=design)
    by_h = {r.h: r for r in summary.records}
    assert all(by_h[h].settled for h in (0.1, 0.05, 0.025))
    # at h = 0.2 the held linearizing input leaves |xi(20)| near 0.95
    assert not by_h[0.2].settled


def test_sweep_keeps_repeated_periods(benchmark, design):
    family = make_controller_family("fbl", design, benchmark)
    summary = practical_stability_sweep(
        benchmark, family, XI0, [0.1, 0.2, 0.1], 2.0, 0.25, StepConfig(h=0.1, substeps=8), design=design
    )
    assert [r.h for r in summary.records] == [0.2, 0.1, 0.1]
    assert summary.records[1].terminal_norm == summary.records[2].terminal_norm


def test_sweep_rejects_bad_periods(benchmark, design):
    family = make_controller_family("fbl", design, benchmark)
    with pytest.raises(BadParameter):
        practical_stability_sweep(benchmark, family, XI0, [], 20.0, 0.25, design=design)
    with pytest.raises(BadParameter):
        practical_stability_sweep(benchmark, family, XI0, [0.2, -0.1], 20.0, 0.25, design=design)


def test_terminal_trend_check():
    def summary(*norms):
        return SweepSummary(records=[
            SweepRecord(h=h, terminal_norm=n, peak_norm=1.0, settled_time=None, R_target=0.25)
            for h, n in zip(HS, norms)
        ])

    assert terminal_trend_holds(summary(1e-2, 1e-3, 1.4e-3, 1e-4))
    assert not terminal_trend_holds(summary(1e-2, 1e-3, 2e-3, 1e-4))


def test_export_trajectory(benchmark, design, tmp_path):
    traj = _run(benchmark, design, "clf-qcqp")
    path = tmp_path / "nested" / "trajectory.csv"
    export_trajectory(traj, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 102
    assert lines[0] == "t,xi_1,xi_2,xi_3,u_1,V_eta,residual"
    last = lines[-1].split(",")
    assert last[4] == "" and last[6] == ""
    assert float(last[0]) == pytest.approx(20.0)
    assert not list(path.parent.glob("*.tmp"))


def test_export_equilibrium_trajectory(benchmark, design):
    traj = run_closed_loop(benchmark, _rest, np.zeros(3), 0.2, 1.0, design=design)
    rows = [line.split(",") for line in trajectory_csv(traj).splitlines()[1:]]
    assert all(float(v) == 0.0 for row in rows for v in row[1:4])


def test_export_is_deterministic(benchmark, design, tmp_path):
    export_trajectory(_run(benchmark, design, "clf-qcqp", T=4.0), tmp_path / "a.csv")
    export_trajectory(_run(benchmark, design, "clf-qcqp", T=4.0), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_write_sweep_summary(tmp_path):
    summary = SweepSummary(records=[
        SweepRecord(h=0.2, terminal_norm=1e-3, peak_norm=1.5, settled_time=8.4, settled=True, R_target=0.25)
    ])
    write_sweep_summary(summary, tmp_path / "sweep.json")
    records = json.loads((tmp_path / "sweep.json").read_text())
    assert records[0]["h"] == 0.2
    assert records[0]["settled"] is True


def test_trajectory_csv_recovers_states_exactly(benchmark, design):
    traj = _run(benchmark, design, "clf-qcqp", T=4.0)
    rows = [line.split(",") for line in trajectory_csv(traj).splitlines()[1:]]
    states = np.array([[float(v) for v in row[1:4]] for row in rows])
    inputs = np.array([[float(row[4])] for row in rows[:-1]])
    assert np.array_equal(states, traj.states)
    assert np.array_equal(inputs, traj.inputs)
