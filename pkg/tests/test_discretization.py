import math

import numpy as np
import pytest

from src.core.exceptions import BadParameter, DegenerateData, DomainViolation
from src.models.controllers import fbl_controller
from src.models.system import make_benchmark
from src.services.discretization import (
    StepConfig,
    estimate_consistency_order,
    euler_step,
    exact_step,
    one_step_error,
    state_lattice,
    zero_input,
)

SIN1 = math.sin(1.0)


def test_euler_step_fixtures(benchmark):
    out = euler_step(benchmark, [1.0, 0.0, 1.0], [0.0], 0.2)
    assert np.allclose(out, [1.0, 0.2 * 10 * SIN1, 1.0], atol=1e-12)
    assert np.array_equal(euler_step(benchmark, np.zeros(3), [0.0], 0.7), np.zeros(3))


def test_euler_step_vanishing_period(benchmark):
    xi = np.array([0.3, -0.8, 1.2])
    assert np.allclose(euler_step(benchmark, xi, [2.0], 1e-12), xi, atol=1e-10)


def test_euler_zero_block_independent_of_input(benchmark, rng):
    xi = np.array([0.4, 1.1, -0.6])
    a = euler_step(benchmark, xi, [0.0], 0.2)
    b = euler_step(benchmark, xi, rng.standard_normal(1) * 50, 0.2)
    assert np.array_equal(a[2:], b[2:])


def test_exact_step_linear_zero_dynamics(benchmark):
    out = exact_step(benchmark, [0.0, 0.0, 1.0], [0.0], StepConfig(h=0.2))
    assert np.allclose(out, [0.0, 0.0, math.exp(-0.2)], atol=1e-10)
    assert np.array_equal(exact_step(benchmark, np.zeros(3), [0.0], StepConfig(h=0.2)), np.zeros(3))


def test_exact_step_self_convergence(benchmark):
    xi, u = np.array([1.0, 0.0, 1.0]), np.array([-10 * SIN1 - 0.5])
    results = {s: exact_step(benchmark, xi, u, StepConfig(h=0.2, substeps=s)) for s in (8, 16, 32, 64)}
    gaps = [np.linalg.norm(results[s] - results[2 * s]) for s in (8, 16, 32)]
    assert gaps[0] >= 8 * gaps[1]
    assert gaps[1] >= 8 * gaps[2]


def test_exact_step_guard():
    small = make_benchmark(domain_radius=1.5)
    with pytest.raises(DomainViolation):
        exact_step(small, [1.0, 1.0, 0.0], [100.0], StepConfig(h=0.2))


def test_step_config_validation():
    with pytest.raises(BadParameter):
        StepConfig(h=0.0)
    with pytest.raises(BadParameter):
        StepConfig(h=0.1, substeps=0)


def test_one_step_error_fixtures(benchmark):
    err = one_step_error(benchmark, zero_input(benchmark), np.array([0.0, 0.0, 1.0]), StepConfig(h=0.2))
    assert float(err) == pytest.approx(math.exp(-0.2) - 0.8, abs=1e-9)
    assert float(one_step_error(benchmark, zero_input(benchmark), np.zeros(3), StepConfig(h=0.2))) == 0.0


@pytest.mark.parametrize("xi", [[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
def test_one_step_error_is_second_order(benchmark, xi):
    xi = np.array(xi)
    controller = zero_input(benchmark)
    C = float(one_step_error(benchmark, controller, xi, StepConfig(h=0.025))) / 0.025 ** 2
    for h in (0.05, 0.1, 0.2):
        assert float(one_step_error(benchmark, controller, xi, StepConfig(h=h))) <= 2 * C * h ** 2


def test_consistency_order_benchmark_lattice(benchmark):
    states = state_lattice(benchmark.n, 21)
    report = estimate_consistency_order(benchmark, zero_input(benchmark), states, h0=0.2, levels=4)
    assert 1.9 <= report.slope <= 2.1
    assert report.hs == pytest.approx([0.2, 0.1, 0.05, 0.025])
    assert len(report.errors) == 4


def test_consistency_order_linear_system(linear_system):
    states = state_lattice(linear_system.n, 5)
    report = estimate_consistency_order(linear_system, zero_input(linear_system), states, h0=0.2, levels=4)
    assert 1.9 <= report.slope <= 2.1


def test_batched_and_pointwise_agree(benchmark):
    states = state_lattice(benchmark.n, 3)
    kwargs = dict(h0=0.2, levels=3, substeps=16)
    batched = estimate_consistency_order(benchmark, zero_input(benchmark), states, batch=True, **kwargs)
    pointwise = estimate_consistency_order(benchmark, zero_input(benchmark), states, batch=False, **kwargs)
    assert batched.errors == pytest.approx(pointwise.errors, rel=1e-12)


def test_consistency_order_degenerate(benchmark):
    with pytest.raises(DegenerateData):
        estimate_consistency_order(benchmark, zero_input(benchmark), [np.zeros(3)], h0=0.2, levels=4)


def test_consistency_order_needs_two_levels(benchmark):
    with pytest.raises(BadParameter):
        estimate_consistency_order(benchmark, zero_input(benchmark), [np.ones(3)], h0=0.2, levels=1)


def test_state_lattice_shape_and_bounds():
    lattice = state_lattice(3, 4)
    assert lattice.shape == (64, 3)
    assert lattice.min() == -1.0 and lattice.max() == 1.0


def test_consistency_order_with_per_state_controller(benchmark, design):
    seen = []

    def controller(xi):
        seen.append(np.shape(xi))
        return fbl_controller(design, benchmark, xi)

    states = state_lattice(benchmark.n, 3)
    kwargs = dict(h0=0.2, levels=3, substeps=16)
    batched = estimate_consistency_order(benchmark, controller, states, **kwargs)
    pointwise = estimate_consistency_order(benchmark, controller, states, batch=False, **kwargs)
    assert set(seen) == {(3,)}
    assert len(seen) == 2 * len(states)
    assert batched.errors == pytest.approx(pointwise.errors, rel=1e-12)
    assert all(e > 0 for e in batched.errors)


def test_consistency_order_reports_round_off_levels(linear_system):
    # |e^-h - 1 + h| * 1e-11 falls below 1e-14 only at h = 0.025
    report = estimate_consistency_order(
        linear_system, zero_input(linear_system), [np.array([1e-11, 0.0])], h0=0.2, levels=4
    )
    assert report.dropped == [0.025]
    assert len(report.errors) == 4
    assert 1.8 <= report.slope <= 2.1


def test_exact_step_matches_fine_reference(benchmark):
    xi, u = np.array([1.0, 0.0, 1.0]), np.array([-8.914710])
    reference = exact_step(benchmark, xi, u, StepConfig(h=0.2, substeps=4096))
    default = exact_step(benchmark, xi, u, StepConfig(h=0.2))
    doubled = exact_step(benchmark, xi, u, StepConfig(h=0.2, substeps=128))
    scale = np.linalg.norm(reference)
    assert np.linalg.norm(doubled - default) <= 1e-8 * scale
    assert np.linalg.norm(default - reference) <= 1e-8 * scale
    # Taylor expansion about t = 0 with eta2' = -0.5, eta2''' = -5 cos(1), z''' = -1
    t = 0.2
    eta1 = 1.0 - 0.25 * t ** 2 - 5 * math.cos(1.0) * t ** 4 / 24
    z = 1.0 - t ** 3 / 6 + t ** 4 / 24
    assert reference[0] == pytest.approx(eta1, abs=1e-4)
    assert reference[1] == pytest.approx(-0.5 * t - 5 * math.cos(1.0) * t ** 3 / 6, abs=2e-4)
    assert reference[2] == pytest.approx(z, abs=1e-4)
