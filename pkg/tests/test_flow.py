import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyprel.exceptions import DomainError, StepRejectedError
from hyprel.flow import (
    NearBoundaryGraph,
    RadialCurveState,
    curvature,
    dissipation,
    entropy_direct,
    evolve_graph,
    flow_entropy,
    graph_scaling_test,
    max_stable_dt,
    monotonicity_check,
    radial_velocity,
    run,
    step,
    weighted_monotonicity_check,
)
from hyprel.weights import ScalarField


def _length(state):
    # discrete hyperbolic length of the polar curve, trapezoid rule
    full = np.concatenate([[state.R0], state.R, [state.R0]])
    th = np.arange(full.size) * state.dtheta
    dR = np.gradient(full, state.dtheta)
    dens = np.sqrt(dR ** 2 + full ** 2) / (full * np.sin(np.clip(th, 1e-300, None)))
    return dens[1:-1]


def _bump(p):
    return 1.0 + 0.5 * np.exp(-p[..., 0] ** 2)


def _bump_grad(p):
    g = np.zeros(p.shape)
    g[..., 0] = -p[..., 0] * np.exp(-p[..., 0] ** 2)
    return g


def _bump_hess(p):
    h = np.zeros(p.shape + (p.shape[-1],))
    h[..., 0, 0] = (2 * p[..., 0] ** 2 - 1) * np.exp(-p[..., 0] ** 2)
    return h


def test_state_validation():
    with pytest.raises(DomainError):
        RadialCurveState(0.0, 1.0, np.array([1.0, -1.0, 1.0]))
    with pytest.raises(DomainError):
        RadialCurveState(0.0, 1.0, np.array([1.0, 1.0]))
    s = RadialCurveState.perturbed(N=50)
    with pytest.raises(ValueError):
        s.R[0] = 2.0
    with pytest.raises(DomainError):
        s.with_values(s.R + 0.5, 0.1)


def test_stationary_state_has_zero_curvature():
    s = RadialCurveState.from_function(0.0, 1.3, 200, lambda th: np.full_like(th, 1.3))
    assert np.max(np.abs(curvature(s))) < 1e-12
    assert np.max(np.abs(radial_velocity(s))) < 1e-12
    assert dissipation(s) == 0.0 and entropy_direct(s) == 0.0
    assert flow_entropy(s).value == 0.0


def test_stationary_preserved_over_1000_steps():
    s = RadialCurveState.from_function(0.0, 1.0, 400, lambda th: np.ones_like(th))
    dt = 0.9 * max_stable_dt(s)
    for _ in range(1000):
        s = step(s, dt)
    assert np.max(np.abs(s.R - 1.0)) <= 1e-12


@pytest.mark.parametrize("delta", [0.05, -0.05])
def test_curvature_sign_opposes_perturbation(delta):
    s = RadialCurveState.perturbed(1.0, delta, 199)
    apex = 99
    H = curvature(s)
    assert np.sign(H[apex]) == -np.sign(delta)
    # oracle: moving the apex node against the perturbation shortens the discrete curve
    bump = np.zeros(s.N)
    bump[apex] = 1e-6
    up = RadialCurveState(s.center, s.R0, s.R + bump)
    down = RadialCurveState(s.center, s.R0, s.R - bump)
    dL = (_length(up).sum() - _length(down).sum()) * s.dtheta
    assert np.sign(dL) == np.sign(delta)


def test_curvature_grid_convergence():
    vals = []
    for N in (99, 199, 399, 799):
        s = RadialCurveState.perturbed(1.0, 0.1, N)
        vals.append(curvature(s)[(N + 1) // 4 - 1])  # theta = pi/4 on every grid
    d = np.abs(np.diff(vals))
    assert np.all(d[:-1] / d[1:] > 3.5)


def test_outward_bump_positive_entropy():
    s = RadialCurveState.perturbed(1.0, 0.1, 200)
    est = flow_entropy(s)
    assert est.value > 0
    assert est.value == pytest.approx(entropy_direct(s), abs=1e-5)


def test_step_rejects_unstable_dt():
    s = RadialCurveState.perturbed(N=100)
    with pytest.raises(StepRejectedError) as info:
        step(s, 100 * max_stable_dt(s))
    assert info.value.suggested_dt is not None and info.value.suggested_dt > 0


def test_reference_run(reference_run):
    tr = reference_run
    assert np.all(np.diff(tr.times) > 0)
    assert tr.max_step_increase() <= 1e-8
    assert tr.max_snapshot_increase() <= 1e-8
    assert np.max(tr.step_band) <= tr.step_band[0] + 1e-15
    E = tr.entropies
    assert E[0] > 0 and E[-1] < 0.01 * E[0]
    mono = monotonicity_check(tr, 0.0, 2.0)
    assert mono["relative"] <= 1e-2
    # lower bound: the entropy never drops below what the dissipation accounts for
    assert np.all(E >= E[0] - mono["dissipation"] - mono["error_bar"] - 1e-6)


def test_trajectory_csv(reference_run, tmp_path):
    reference_run.write_csv(tmp_path / "traj.csv")
    lines = (tmp_path / "traj.csv").read_text().splitlines()
    assert lines[0] == "t,E_rel,E_rel_error,dissipation,maxH,band"
    assert len(lines) == len(reference_run.rows) + 1


def test_identity_residual_second_order():
    rel = []
    for N in (50, 100):
        tr = run(RadialCurveState.perturbed(N=N), 0.5, n_snapshots=10)
        rel.append(monotonicity_check(tr, 0.0, 0.5)["residual"])
    assert rel[0] / rel[1] > 3.0


def test_weighted_identity_constant_weight(reference_run):
    base = monotonicity_check(reference_run, 0.0, 2.0)
    w = weighted_monotonicity_check(reference_run, ScalarField.constant(1.0), 0.0, 2.0)
    assert w["residual"] == base["residual"] and w["evolution_term"] == 0.0


@pytest.mark.parametrize("exact", [True, False])
def test_weighted_identity_bump(reference_run, exact):
    f = ScalarField(_bump, _bump_grad, _bump_hess) if exact else ScalarField(_bump)
    res = weighted_monotonicity_check(reference_run, f, 0.0, 2.0, n_entropy=11)
    assert res["relative"] <= 0.05


def test_weighted_identity_stationary():
    s = RadialCurveState.from_function(0.0, 1.0, 100, lambda th: np.ones_like(th))
    tr = run(s, 0.01, n_snapshots=4, store_every=1)
    res = weighted_monotonicity_check(tr, ScalarField(_bump, _bump_grad, _bump_hess), 0.0, 0.01, n_entropy=3)
    for key in ("entropy_drop", "dissipation", "evolution_term", "residual"):
        assert abs(res[key]) <= 1e-12


def test_graph_lambda_one_is_exact():
    g = NearBoundaryGraph.quadratic(0.3, 0.5)
    assert graph_scaling_test(g, 1.0, 0.1)["sup_difference"] == 0.0


@pytest.mark.parametrize("lam", [0.5, 0.3])
def test_graph_scaling(lam):
    g = NearBoundaryGraph.quadratic(0.3, 0.5)
    res = graph_scaling_test(g, lam)
    assert res["sup_difference"] <= 1e-6
    assert res["barrier_max"] <= res["barrier_initial"] * (1 + 1e-9)


def test_graph_barrier_and_validation():
    g = NearBoundaryGraph.quadratic(1.0, -0.7, J=100)
    assert g.barrier_constant() == pytest.approx(0.7)
    out, worst = evolve_graph(g, 0.2, 1e-3)
    assert out.t == pytest.approx(0.2) and worst <= 0.7 * (1 + 1e-9)
    r = g.rescaled(0.5)
    assert r.barrier_constant() == pytest.approx(0.35)
    with pytest.raises(DomainError):
        graph_scaling_test(g, 1.5)
    with pytest.raises(DomainError):
        NearBoundaryGraph(np.array([0.0, 0.5, 1.0]), np.zeros(3), 0.0)


@settings(max_examples=25, deadline=None)
@given(amp=st.floats(-0.3, 0.3).filter(lambda a: abs(a) > 1e-3), N=st.integers(20, 80))
def test_length_decreases_per_step(amp, N):
    s = RadialCurveState.perturbed(1.0, amp, N)
    dt = 0.25 * s.dtheta ** 2
    E0 = entropy_direct(s)
    band0 = np.max(np.abs(s.R - 1.0))
    for _ in range(20):
        s = step(s, dt)
        E1 = entropy_direct(s)
        assert E1 <= E0 + 1e-12
        assert np.max(np.abs(s.R - 1.0)) <= band0 * (1 + 1e-12)
        E0 = E1
