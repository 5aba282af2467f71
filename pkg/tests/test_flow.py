import math

import numpy as np
import pytest

from thermoflow.errors import DomainError, ResolutionError, StepError
from thermoflow.flow import (
    DrivenSpec,
    RelaxSpec,
    dissipation_residual,
    driven_flow,
    pregeodesic_residual,
    relax_analytic,
    relax_ode,
    second_derivative_residual,
)
from thermoflow.systems import ClassicalIdealGasTP, ClassicalRigidGas, QuantumRigidGas, State

IDEAL = ClassicalIdealGasTP()
Q = State.tp(275.0, 1e5)


def test_default_horizon_and_grid():
    spec = RelaxSpec(State.tp(375.0, 1e5), Q, lam=2.0)
    assert spec.horizon == 10.0
    assert spec.times.size == 10001


@pytest.mark.parametrize("kwargs", [{"lam": 0.0}, {"lam": -1.0}, {"horizon": 0.0}, {"grid_points": 1}])
def test_spec_validation(kwargs):
    with pytest.raises(DomainError):
        RelaxSpec(State.tp(375.0, 1e5), Q, **kwargs)


def test_analytic_solution_is_exponential():
    p0 = State.tp(375.0, 1.5e5)
    tr = relax_analytic(IDEAL, RelaxSpec(p0, Q, lam=0.5, horizon=4.0, grid_points=401))
    expect = Q.eta + np.outer(np.exp(-0.5 * tr.t), p0.eta - Q.eta)
    assert np.allclose(tr.eta, expect, rtol=1e-14)
    assert np.allclose(tr.velocity, -0.5 * (tr.eta - Q.eta), rtol=1e-12)
    assert np.allclose(tr.offset_at(np.array([0.123])), np.outer(np.exp(-0.5 * 0.123), p0.eta - Q.eta))


def test_start_at_target_stays_put():
    for solver in (relax_analytic, relax_ode):
        tr = solver(IDEAL, RelaxSpec(Q, Q, horizon=1.0, grid_points=101))
        assert np.all(tr.eta == Q.eta)
        assert np.all(tr.divergence == 0.0)
        assert dissipation_residual(tr) == 0.0
        assert pregeodesic_residual(tr, 1.0) == 0.0


def test_divergence_decreases_and_total_dissipation():
    p0 = State.tp(300.0, 189487.5)
    tr = relax_analytic(IDEAL, RelaxSpec(p0, Q))
    assert np.all(np.diff(tr.divergence) < 0)
    d0 = IDEAL.divergence(p0, Q)
    assert tr.divergence[0] == pytest.approx(d0, rel=1e-14)
    assert tr.dissipated[-1] == pytest.approx(d0, rel=1e-6)


@pytest.mark.parametrize("p0", [State.tp(375.0, 1e5), State.tp(300.0, 189487.5), State.tp(150.0, 4e4)])
def test_dual_chart_integration_matches_analytic(p0):
    spec = RelaxSpec(p0, Q, lam=1.0, horizon=2.0, grid_points=2001)
    ode, exact = relax_ode(IDEAL, spec), relax_analytic(IDEAL, spec)
    assert np.max(np.abs(ode.eta - exact.eta) / np.abs(exact.eta)) < 1e-6


def test_dual_chart_integration_rigid_gas():
    gas = QuantumRigidGas("boson")
    q = State(10.0, -5.0)
    spec = RelaxSpec(State(14.0, -4.0), q, lam=1.0, horizon=0.1, grid_points=101)
    ode, exact = relax_ode(gas, spec), relax_analytic(gas, spec)
    assert np.max(np.abs(ode.eta - exact.eta) / np.abs(exact.eta)) < 1e-6


def test_fourth_order_convergence():
    p0 = State.tp(375.0, 1.6e5)
    errors = []
    for n in (21, 41, 81):
        spec = RelaxSpec(p0, Q, lam=1.0, horizon=2.0, grid_points=n)
        diff = relax_ode(IDEAL, spec).eta - relax_analytic(IDEAL, spec).eta
        errors.append(np.max(np.abs(diff / Q.eta)))
    for coarse, fine in zip(errors, errors[1:]):
        assert 12 <= coarse / fine <= 20


def test_large_steps_leave_the_chart():
    with pytest.raises(StepError):
        relax_ode(IDEAL, RelaxSpec(State.tp(100.0, 1e5), Q, lam=1.0, horizon=20.0, grid_points=3))


def test_hermite_interpolant_between_samples():
    spec = RelaxSpec(State.tp(375.0, 1e5), Q, horizon=1.0, grid_points=201)
    ode = relax_ode(IDEAL, spec)
    t = np.array([0.0125, 0.5031])
    exact = np.outer(np.exp(-t), State.tp(375.0, 1e5).eta - Q.eta)
    # dual-chart roundoff in the pressure slot is measured against the chart scale
    assert np.all(np.abs(ode.offset_at(t) - exact) <= 1e-8 * np.abs(Q.eta))


@pytest.mark.parametrize(
    "system, p0, q",
    [
        (IDEAL, State.tp(375.0, 1e5), Q),
        (IDEAL, State.tp(300.0, 189487.5), Q),
        (QuantumRigidGas("boson"), State(1.25, -1.0), State(1.0, -1.0)),
        (QuantumRigidGas("fermion"), State(1.25, -3.0), State(1.0, -3.0)),
        (ClassicalRigidGas(), State(0.7, -1.5), State(1.0, -1.0)),
    ],
    ids=["isobaric", "mpemba-partner", "boson", "fermion", "classical-rigid"],
)
def test_identity_residuals(system, p0, q):
    tr = relax_analytic(system, RelaxSpec(p0, q))
    assert dissipation_residual(tr) < 1e-5
    assert second_derivative_residual(tr) < 1e-4
    assert pregeodesic_residual(tr, 1.0) < 1e-6


def test_identity_residuals_shrink_quadratically():
    p0 = State.tp(375.0, 1e5)
    coarse = relax_analytic(IDEAL, RelaxSpec(p0, Q, grid_points=2001))
    fine = relax_analytic(IDEAL, RelaxSpec(p0, Q, grid_points=4001))
    ratio = dissipation_residual(coarse) / dissipation_residual(fine)
    assert 3.5 < ratio < 4.5


def test_residuals_need_three_samples():
    tr = relax_analytic(IDEAL, RelaxSpec(State.tp(276.0, 1e5), Q, horizon=1e-3, grid_points=2))
    with pytest.raises(ResolutionError):
        dissipation_residual(tr)


def test_driven_flow_reduces_to_relaxation():
    p0 = State.tp(375.0, 1.2e5)
    spec = DrivenSpec(p0, lambda t: Q, lambda t: 1.0, horizon=5.0, grid_points=5001)
    driven = driven_flow(IDEAL, spec)
    exact = relax_analytic(IDEAL, RelaxSpec(p0, Q, 1.0, 5.0, 5001))
    assert np.allclose(driven.eta, exact.eta, rtol=1e-12)
    assert driven.dissipated[-1] == pytest.approx(exact.dissipated[-1], rel=1e-9)


def test_driven_flow_tracks_moving_target():
    # with a linear ramp the lag settles at ramp_speed / lambda
    start, end, tau = Q.eta, State.tp(300.0, 1e5).eta, 10.0
    spec = DrivenSpec(
        State.tp(275.0, 1e5),
        lambda t: start + (end - start) * t / tau,
        lambda t: 2.0,
        horizon=tau,
        grid_points=4001,
    )
    tr = driven_flow(IDEAL, spec)
    assert tr.driven
    lag = tr.target[-1, 0] - tr.eta[-1, 0]
    assert lag == pytest.approx(2.5 / 2.0, rel=1e-6)
    with pytest.raises(DomainError):
        tr.lam


def test_driven_flow_rejects_bad_schedules():
    p0 = State.tp(375.0, 1e5)
    with pytest.raises(DomainError):
        driven_flow(IDEAL, DrivenSpec(p0, lambda t: Q, lambda t: math.sin(t), horizon=10.0, grid_points=101))
    jump = lambda t: Q if t < 1.0 else State.tp(400.0, 1e5)
    with pytest.raises(DomainError):
        driven_flow(IDEAL, DrivenSpec(p0, jump, lambda t: 1.0, horizon=2.0, grid_points=201))
