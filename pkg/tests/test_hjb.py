"""Solver internals plus structural properties of the converged baseline."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wealthtrap import (
    AssemblyError,
    BoundaryClipWarning,
    Calibration,
    Grid,
    american_projection,
    assemble_coeffs,
    extract_policy,
    find_attractors,
    implicit_update,
    interp_linear,
    production,
    recompute_w_policy,
    solve_hjb,
    surplus,
    upwind_slope,
)
from wealthtrap.hjb import _signal_region

# converged H-regime consumption at the capital cap, f_H(50) - 0.02*50
C_H_AT_CAP = 3.5453791391514902


@pytest.fixture(scope="module")
def small():
    cal = Calibration(N=12, k_min=0.5, k_max=8.0, phi=2.0)
    return cal, Grid(cal)


def pasting_residual(sol, cal):
    """Left derivative of V_W at k* minus the obstacle derivative there."""
    i = sol.signal.kstar_index
    grid, dk = sol.grid, sol.grid.dk
    left = (sol.values.V_W[i] - sol.values.V_W[i - 1]) / dk
    kq = grid.nodes[i] - cal.phi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryClipWarning)
        psi_slope = (interp_linear(sol.values.V_H, kq + dk, grid)
                     - interp_linear(sol.values.V_H, kq - dk, grid)) / (2 * dk)
    return abs(left - psi_slope)


# ---------------------------------------------------------------- interp

def test_interp_exact_at_nodes_and_midpoints(small):
    cal, grid = small
    v = grid.nodes ** 2
    assert interp_linear(v, grid.nodes[3], grid) == v[3]
    mid = 0.5 * (grid.nodes[3] + grid.nodes[4])
    assert interp_linear(v, mid, grid) == pytest.approx(0.5 * (v[3] + v[4]))


def test_interp_clips_below_floor_with_warning(small):
    cal, grid = small
    v = grid.nodes.copy()
    with pytest.warns(BoundaryClipWarning):
        out = interp_linear(v, grid.k_min - 1.0, grid)
    assert out == v[0]


def test_interp_rejects_nan(small):
    cal, grid = small
    v = grid.nodes.copy()
    v[2] = np.nan
    with pytest.raises(ValueError):
        interp_linear(v, 1.0, grid)


# ---------------------------------------------------------------- upwind

def test_upwind_forward_case(cal):
    grid = Grid(cal)
    V = grid.nodes.copy()  # slope 1 -> c = 1
    s, c, mu, case = upwind_slope(V, 100, "L", cal, grid)
    k = grid.nodes[100]
    assert case == "forward"
    assert c == pytest.approx(1.0)
    assert mu == pytest.approx(production(k, "L", cal) - 1.0 - cal.delta * k)
    assert mu > 0


def test_upwind_backward_case(cal):
    grid = Grid(cal)
    V = 0.01 * grid.nodes  # slope 0.01 -> c = 10, drift negative
    s, c, mu, case = upwind_slope(V, 100, "L", cal, grid)
    assert case == "backward"
    assert c == pytest.approx(10.0)
    assert mu < 0


def test_upwind_zero_drift_fallback(cal):
    grid = Grid(cal)
    V = np.ones(grid.N)  # flat value, no valid one-sided slope
    k = grid.nodes[100]
    zd = production(k, "L", cal) - cal.delta * k
    s, c, mu, case = upwind_slope(V, 100, "L", cal, grid)
    assert case == "zero-drift"
    assert c == pytest.approx(zd)
    assert mu == 0.0


def test_upwind_edges_form_one_difference_only(cal):
    grid = Grid(cal)
    V = 100.0 * grid.nodes  # steep: c = 0.1, forward drift positive
    *_, case0 = upwind_slope(V, 0, "L", cal, grid)
    assert case0 == "forward"
    V = 0.01 * grid.nodes
    *_, caseN = upwind_slope(V, grid.N - 1, "L", cal, grid)
    assert caseN == "backward"


def test_upwind_top_node_of_converged_h_value(solution, cal):
    # at the cap the converged H value flattens and the scheme falls back
    # to consuming net output exactly
    V_H = solution.values.V_H
    s, c, mu, case = upwind_slope(V_H, solution.grid.N - 1, "H", cal, solution.grid)
    assert case == "zero-drift"
    assert c == pytest.approx(C_H_AT_CAP, rel=1e-12)
    assert mu == 0.0


def test_extract_policy_matches_scalar_rule(solution, cal):
    grid = solution.grid
    for regime, V in (("L", solution.values.V_L), ("H", solution.values.V_H)):
        c, mu = extract_policy(V, regime, cal, grid)
        for i in range(0, grid.N - 1, 7):
            _, ci, mui, _ = upwind_slope(V, i, regime, cal, grid)
            assert c[i] == pytest.approx(ci, rel=1e-13)
            assert mu[i] == pytest.approx(mui, rel=1e-13, abs=1e-13)
        # the cap overrides the one-sided rule with the state constraint
        zd_top = production(grid.k_max, regime, cal) - cal.delta * grid.k_max
        assert c[-1] == pytest.approx(zd_top, rel=1e-14)
        assert mu[-1] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-0.5, max_value=0.5), min_size=11, max_size=11))
def test_extract_policy_agrees_with_upwind_slope_anywhere(increments):
    # arbitrary (non-monotone, non-concave) iterates hit every branch
    cal = Calibration(N=12, k_min=0.5, k_max=8.0, phi=2.0)
    grid = Grid(cal)
    V = -50.0 + np.concatenate([[0.0], np.cumsum(increments)])
    c, mu = extract_policy(V, "L", cal, grid)
    for i in range(grid.N - 1):
        _, ci, mui, _ = upwind_slope(V, i, "L", cal, grid)
        assert c[i] == pytest.approx(ci, rel=1e-13)
        assert mu[i] == pytest.approx(mui, rel=1e-13, abs=1e-13)


# ---------------------------------------------------------------- coefficients

@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-5.0, max_value=5.0), min_size=12, max_size=12))
def test_coeffs_rows_sum_to_zero(mu_list):
    cal = Calibration(N=12, k_min=0.5, k_max=8.0, phi=2.0)
    grid = Grid(cal)
    co = assemble_coeffs(np.array(mu_list), cal, grid)
    assert np.all(co.x + co.y + co.z == 0.0)
    assert co.y[0] == 0.0 and co.x[-1] == 0.0
    assert np.all(co.x >= 0.0) and np.all(co.y >= 0.0)


def test_coeffs_split_advection_and_diffusion(small):
    cal, grid = small
    mu = np.linspace(-1.0, 1.0, grid.N)
    co = assemble_coeffs(mu, cal, grid)
    s2 = cal.sigma ** 2 / (2 * grid.dk ** 2)
    interior = slice(1, -1)
    assert np.allclose(co.x[interior], np.maximum(mu[interior], 0) / grid.dk + s2)
    assert np.allclose(co.y[interior], -np.minimum(mu[interior], 0) / grid.dk + s2)


# ---------------------------------------------------------------- implicit step

def test_implicit_update_against_dense_solve(small):
    cal, grid = small
    rng = np.random.default_rng(3)
    mu = rng.uniform(-1, 1, grid.N)
    co = assemble_coeffs(mu, cal, grid)
    V_prev = rng.uniform(-5, -1, grid.N)
    u = rng.uniform(-2, 0, grid.N)
    inflow = rng.uniform(0, 0.1, grid.N)
    lam = 0.01

    V = implicit_update(V_prev, co, u, lam, inflow, cal)

    n = grid.N
    A = np.diag(1 / cal.dt + cal.rho + lam - co.z)
    A -= np.diag(co.x[:-1], 1)
    A -= np.diag(co.y[1:], -1)
    rhs = V_prev / cal.dt + u + inflow
    assert np.allclose(V, np.linalg.solve(A, rhs), rtol=1e-12)


def test_implicit_update_constant_fixed_point(small):
    # u = rho*V and matching inflow keep a constant value exactly in place
    cal, grid = small
    vbar = -3.0
    V_prev = np.full(grid.N, vbar)
    co = assemble_coeffs(np.linspace(-1, 1, grid.N), cal, grid)
    lam = 0.25
    u = np.full(grid.N, cal.rho * vbar)
    inflow = np.full(grid.N, lam * vbar)
    V = implicit_update(V_prev, co, u, lam, inflow, cal)
    assert np.allclose(V, vbar, rtol=1e-13)


def test_implicit_update_rejects_nonpositive_diagonal(small):
    cal, grid = small
    co = assemble_coeffs(np.zeros(grid.N), cal, grid)
    u = np.zeros(grid.N)
    with pytest.raises(AssemblyError):
        implicit_update(u, co, u, -(1 / cal.dt + cal.rho + 1.0), u, cal)


# ---------------------------------------------------------------- projection

def test_projection_no_flags_when_waiting_dominates(small):
    cal, grid = small
    V_W = np.full(grid.N, 10.0)
    V_H = np.full(grid.N, 1.0)
    V, sig = american_projection(V_W, V_H, cal, grid)
    assert not sig.flags.any()
    assert sig.kstar_index is None and sig.kstar == np.inf
    assert np.array_equal(V, V_W)


def test_projection_flags_whole_feasible_region(small):
    # phi chosen so the first feasible node queries the obstacle below k_1
    cal, grid = small
    cal = cal.replace(phi=2.2)
    V_W = np.zeros(grid.N)
    V_H = np.full(grid.N, 5.0)
    with pytest.warns(BoundaryClipWarning):
        V, sig = american_projection(V_W, V_H, cal, grid)
    feas = grid.nodes >= cal.phi
    assert np.array_equal(sig.flags, feas)
    assert sig.kstar == grid.nodes[np.argmax(feas)]
    assert np.all(V[feas] == 5.0) and np.all(V[~feas] == 0.0)


def test_recompute_w_policy_without_flags_is_plain_extraction(small):
    cal, grid = small
    V = -1.0 / grid.nodes
    sig = _signal_region(np.zeros(grid.N, dtype=bool), grid)
    c_ref, mu_ref = extract_policy(V, "W", cal, grid)
    c, mu, co = recompute_w_policy(V, grid.nodes, grid.nodes, sig, cal, grid)
    assert np.array_equal(c, c_ref) and np.array_equal(mu, mu_ref)


def test_recompute_w_policy_inherits_signal_target(small):
    cal, grid = small
    V = -1.0 / grid.nodes
    flags = grid.nodes >= 4.0
    sig = _signal_region(flags, grid)
    c_H = 2.0 * grid.nodes  # affine, so interpolation is exact
    mu_H = -grid.nodes
    c, mu, co = recompute_w_policy(V, c_H, mu_H, sig, cal, grid)
    target = grid.nodes[flags] - cal.phi
    assert np.allclose(c[flags], 2.0 * target)
    assert np.allclose(mu[flags], -target)


def test_surplus_affine(small):
    cal, grid = small
    V_W = 2.0 * grid.nodes + 1.0
    V_H = 3.0 * grid.nodes - 2.0
    D = surplus(V_W, V_H, cal, grid)
    feas = grid.nodes >= cal.phi
    assert np.all(np.isnan(D[~feas]))
    assert np.allclose(D[feas], -grid.nodes[feas] + 3.0 * cal.phi + 3.0)


# ------------------------------------------------------- converged baseline

def test_baseline_converges_quickly(solution):
    assert solution.report.converged
    assert solution.report.iterations <= 15
    assert solution.report.errors[-1] < 1e-8


def test_baseline_threshold_location(solution):
    sig = solution.signal
    assert sig.kstar_index == 155
    assert sig.kstar == pytest.approx(15.5069, abs=5e-5)
    assert int(sig.flags.sum()) == 346
    idx = np.flatnonzero(sig.flags)
    assert np.all(np.diff(idx) == 1)  # one contiguous stopping region
    assert sig.flags[-1]


def test_baseline_value_ordering(solution):
    V = solution.values
    scale = max(np.abs(v).max() for v in V)
    assert np.all(V.V_H > V.V_W)
    assert np.all(V.V_W >= V.V_L - 1e-8 * scale)


def test_baseline_american_constraint(solution, cal):
    V = solution.values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryClipWarning)
        D = surplus(V.V_W, V.V_H, cal, solution.grid)
    scale = max(np.abs(v).max() for v in V)
    assert np.nanmin(D) >= -1e-9 * scale


def test_baseline_flagged_values_sit_on_obstacle(solution, cal):
    grid = solution.grid
    fl = solution.signal.flags
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryClipWarning)
        psi = interp_linear(solution.values.V_H, grid.nodes[fl] - cal.phi, grid)
    scale = np.abs(solution.values.V_W).max()
    assert np.max(np.abs(solution.values.V_W[fl] - psi)) <= 1e-8 * scale


def test_baseline_m_matrix(solution, cal):
    for co, lam in ((solution.coeffs_L, cal.lambda_LH),
                    (solution.coeffs_W, cal.lambda_HL),
                    (solution.coeffs_H, cal.lambda_HL)):
        assert np.all(co.x >= 0) and np.all(co.y >= 0)
        diag = 1 / cal.dt + cal.rho + lam - co.z
        assert np.all(diag > 0)
        # strict diagonal dominance by exactly 1/dt + rho + lam
        assert np.all(diag - (co.x + co.y) > cal.rho)


def test_baseline_policies_positive_and_bounded(solution):
    p = solution.policies
    for c in (p.c_L, p.c_W, p.c_H):
        assert np.all(c > 0) and np.all(np.isfinite(c))
    for mu in (p.mu_L, p.mu_W, p.mu_H):
        assert np.all(np.isfinite(mu))


def test_baseline_top_node_policies(solution, cal):
    p = solution.policies
    grid = solution.grid
    zd_L = production(grid.k_max, "L", cal) - cal.delta * grid.k_max
    assert p.c_L[-1] == pytest.approx(zd_L, rel=1e-14)
    assert p.mu_L[-1] == 0.0
    assert p.c_H[-1] == pytest.approx(C_H_AT_CAP, rel=1e-12)
    assert p.mu_H[-1] == 0.0
    # the cap node is flagged, so W there carries the inherited H policy
    assert solution.signal.flags[-1]
    assert p.c_W[-1] == pytest.approx(4.729516, abs=1e-4)
    assert p.mu_W[-1] == pytest.approx(-1.292271, abs=1e-4)


def test_baseline_consumption_monotone_where_value_is_concave(solution):
    # c' >= 0 follows from the FOC wherever V is concave; the convex band
    # around the stopping boundary and the cap node are exactly the places
    # the theorem does not speak about
    for V, c in ((solution.values.V_L, solution.policies.c_L),
                 (solution.values.V_W, solution.policies.c_W),
                 (solution.values.V_H, solution.policies.c_H)):
        scale = np.abs(V).max()
        d2 = V[:-2] - 2 * V[1:-1] + V[2:]
        concave = d2 <= 1e-8 * scale  # of node i+1, i = 0..N-3
        for i in range(1, solution.grid.N - 2):
            if concave[i - 1] and concave[i]:
                assert c[i + 1] >= c[i] - 1e-9 * c.max()


def test_quiet_limit_recovers_deterministic_steady_states():
    cal = Calibration(sigma=0.01, lambda_LH=0.0, lambda_HL=0.0)
    sol = solve_hjb(cal)
    from wealthtrap import deterministic_steady_state
    for regime, mu in (("L", sol.policies.mu_L), ("H", sol.policies.mu_H)):
        att = find_attractors(mu, sol.grid)
        assert len(att) >= 1
        assert abs(att[0] - deterministic_steady_state(regime, cal)) < sol.grid.dk


def test_refinement_keeps_threshold_and_sharpens_pasting(solution, fine_solution, cal):
    assert fine_solution.signal.kstar == pytest.approx(solution.signal.kstar, abs=1e-6)
    assert pasting_residual(fine_solution, cal) < pasting_residual(solution, cal)


def test_threshold_independent_of_time_step(solution):
    sol50 = solve_hjb(Calibration(dt=50.0))
    assert sol50.report.converged
    assert sol50.signal.kstar == solution.signal.kstar
    ramp = solve_hjb(Calibration(dt_ramp=(1.0, 10.0)))
    assert ramp.report.converged
    assert ramp.signal.kstar == solution.signal.kstar
