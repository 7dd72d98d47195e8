"""Implicit upwind solver for the three-regime HJB system.

Regimes L and H satisfy standard stationary HJB equations coupled through
Poisson switching; the wait regime W additionally carries an optimal-stopping
constraint V_W(k) >= V_H(k - phi) for k >= phi (pay the signaling cost phi,
jump to H). The W equation is therefore a variational inequality, handled
inside each implicit step by an active-set method: flagged nodes are pinned
to the obstacle, rows whose continuation residual turns negative are
released, and the set is re-grown from fresh obstacle violations until it
settles. The converged active set is the signal region and its lowest node
is the Skiba threshold k*.

All advection is discretized with the standard monotone upwind rule, all
steps are implicit with exact tridiagonal elimination, and the value update
sweeps regimes in the order L, W, H within each iteration.
"""

import math
import warnings
from collections import namedtuple

import numpy as np
from scipy.linalg import solve_banded

from .model import Grid, marginal_utility_inverse, production, utility

UpwindCoeffs = namedtuple("UpwindCoeffs", "x y z")
ValueTriple = namedtuple("ValueTriple", "V_L V_W V_H")
PolicyTriple = namedtuple("PolicyTriple", "c_L c_W c_H mu_L mu_W mu_H")
SignalRegion = namedtuple("SignalRegion", "flags kstar_index kstar")
SolveReport = namedtuple("SolveReport", "iterations converged errors warnings")
HjbSolution = namedtuple(
    "HjbSolution", "values policies signal coeffs_L coeffs_W coeffs_H grid report")


class AssemblyError(RuntimeError):
    """An assembled linear system lost the structure the scheme relies on."""


class BoundaryClipWarning(UserWarning):
    """Interpolation query fell outside the grid and was clipped."""


def interp_linear(values, k_query, grid):
    """Piecewise-linear interpolation of node values on the uniform grid.

    Queries outside [k_1, k_N] are clipped to the boundary value and a
    BoundaryClipWarning is recorded. NaN anywhere is fatal.
    """
    v = np.asarray(values, dtype=float)
    q = np.asarray(k_query, dtype=float)
    if np.any(np.isnan(v)) or np.any(np.isnan(q)):
        raise ValueError("interp_linear: NaN input")
    n_out = int(np.count_nonzero(q < grid.nodes[0]) + np.count_nonzero(q > grid.nodes[-1]))
    if n_out:
        warnings.warn(
            f"{n_out} interpolation quer{'y' if n_out == 1 else 'ies'} outside "
            f"[{grid.nodes[0]:g}, {grid.nodes[-1]:g}] clipped to the boundary value",
            BoundaryClipWarning, stacklevel=2)
    out = np.interp(q, grid.nodes, v)
    return out if out.ndim else float(out)


def upwind_slope(V, i, regime, cal, grid):
    """Upwind derivative of V at node i with the consumption it implies.

    Returns (slope, c, mu, case) with case in {"forward", "backward",
    "zero-drift"}. The forward difference is used when the drift it implies
    is positive, the backward difference when its implied drift is negative
    (forward wins if both qualify; for concave iterates at most one does),
    and otherwise consumption falls back to the zero-drift level f - delta*k.
    Nonpositive candidate slopes are treated as invalid rather than fatal:
    early iterates can be locally non-monotone and the scheme self-corrects.
    Only the forward difference exists at i = 0 and only the backward one at
    i = N-1.
    """
    k = grid.nodes[i]
    f = production(k, regime, cal)
    zd = f - cal.delta * k
    if zd <= 0:
        raise ValueError("zero-drift consumption nonpositive; grid extends too far")

    if i < grid.N - 1:
        sf = (V[i + 1] - V[i]) / grid.dk
        if sf > 0:
            cf = marginal_utility_inverse(sf, cal.gamma)
            muf = f - cf - cal.delta * k
            if muf > 0:
                return sf, cf, muf, "forward"
    if i > 0:
        sb = (V[i] - V[i - 1]) / grid.dk
        if sb > 0:
            cb = marginal_utility_inverse(sb, cal.gamma)
            mub = f - cb - cal.delta * k
            if mub < 0:
                return sb, cb, mub, "backward"
    return zd ** (-cal.gamma), zd, 0.0, "zero-drift"


def extract_policy(V, regime, cal, grid):
    """Vectorized upwind policy (c, mu) over the whole grid.

    Matches upwind_slope node by node except at the top node, where the
    state constraint is imposed directly: c = f - delta*k_max and mu = 0
    (the agent at the cap consumes her entire net income).
    """
    k = grid.nodes
    dk = grid.dk
    f = production(k, regime, cal)
    zd = f - cal.delta * k
    if np.any(zd <= 0):
        raise ValueError("zero-drift consumption nonpositive; grid extends too far")

    dV = np.diff(V) / dk
    c = zd.copy()
    mu = np.zeros_like(k)

    with np.errstate(invalid="ignore"):
        # forward branch
        cf = np.full(grid.N, np.nan)
        okf = dV > 0
        cf[:-1][okf] = dV[okf] ** (-1.0 / cal.gamma)
        muf = f - cf - cal.delta * k
        use_f = muf > 0  # false where nan
        # backward branch
        cb = np.full(grid.N, np.nan)
        cb[1:][okf] = dV[okf] ** (-1.0 / cal.gamma)
        mub = f - cb - cal.delta * k
        use_b = (mub < 0) & ~use_f

    c[use_f] = cf[use_f]
    mu[use_f] = muf[use_f]
    c[use_b] = cb[use_b]
    mu[use_b] = mub[use_b]

    # state constraint at the cap
    c[-1] = zd[-1]
    mu[-1] = 0.0
    return c, mu


def assemble_coeffs(mu, cal, grid):
    """Upwind advection-diffusion coefficients (x, y, z) for a drift vector.

    x multiplies the right neighbor, y the left, z = -(x + y) the node
    itself. Reflection at k_min zeroes y_1; the state constraint at k_max
    zeroes x_N.
    """
    dk = grid.dk
    s2 = cal.sigma ** 2 / (2.0 * dk * dk)
    x = np.maximum(mu, 0.0) / dk + s2
    y = -np.minimum(mu, 0.0) / dk + s2
    x[-1] = 0.0
    y[0] = 0.0
    z = -(x + y)
    return UpwindCoeffs(x, y, z)


def _banded_solve(x, y, diag, rhs):
    """Solve the tridiagonal system with A[i,i]=diag, A[i,i+1]=-x, A[i,i-1]=-y."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -x[:-1]
    ab[1, :] = diag
    ab[2, :-1] = -y[1:]
    return solve_banded((1, 1), ab, rhs)


def implicit_update(V_prev, coeffs, u_vec, lambda_out, inflow, cal, dt=None):
    """One implicit time step of a single-regime HJB row.

    Solves (1/dt + rho + lambda_out - z)V_i - x_i V_{i+1} - y_i V_{i-1}
    = V_prev_i/dt + u_i + inflow_i by exact tridiagonal elimination.
    lambda_out may be a scalar or a per-node vector.
    """
    if dt is None:
        dt = cal.dt
    diag = 1.0 / dt + cal.rho + lambda_out - coeffs.z
    if np.any(diag <= 0):
        raise AssemblyError("implicit system has a nonpositive diagonal")
    rhs = V_prev / dt + u_vec + inflow
    return _banded_solve(coeffs.x, coeffs.y, diag, rhs)


def _signal_region(flags, grid):
    if flags.any():
        i0 = int(np.argmax(flags))
        return SignalRegion(flags, i0, float(grid.nodes[i0]))
    return SignalRegion(flags, None, math.inf)


def american_projection(V_W, V_H, cal, grid):
    """Project V_W onto the stopping obstacle V_H(k - phi).

    Nodes with k >= phi where the obstacle strictly exceeds V_W are raised
    to it and flagged; the lowest flagged node defines k*. With no flags the
    region is empty and k* = +inf. Obstacle queries below k_1 clip to the
    boundary value (warned); on the baseline grid the first feasible node
    sits at k just above phi, so the clip is expected there.
    """
    k = grid.nodes
    feas = k >= cal.phi
    psi = np.full(grid.N, -np.inf)
    if feas.any():
        psi[feas] = interp_linear(V_H, k[feas] - cal.phi, grid)
    flags = psi > V_W
    V_proj = np.where(flags, psi, V_W)
    return V_proj, _signal_region(flags, grid)


def recompute_w_policy(V_W, c_H_prev, mu_H_prev, signal, cal, grid):
    """Post-projection W policy and its upwind coefficients.

    Wait nodes take the upwind policy of the projected value; flagged nodes
    inherit the H policy evaluated at the post-signal position k - phi, so
    the generator fed to the forward equation moves mass the way a signaler
    actually moves.
    """
    c, mu = extract_policy(V_W, "W", cal, grid)
    fl = signal.flags
    if fl.any():
        target = grid.nodes[fl] - cal.phi
        c = c.copy()
        mu = mu.copy()
        c[fl] = interp_linear(c_H_prev, target, grid)
        mu[fl] = interp_linear(mu_H_prev, target, grid)
    coeffs = assemble_coeffs(mu, cal, grid)
    return c, mu, coeffs


def surplus(V_W, V_H, cal, grid):
    """Stopping surplus D(k) = V_W(k) - V_H(k - phi), NaN below phi."""
    k = grid.nodes
    feas = k >= cal.phi
    D = np.full(grid.N, np.nan)
    if feas.any():
        D[feas] = V_W[feas] - interp_linear(V_H, k[feas] - cal.phi, grid)
    return D


def _w_obstacle_step(V_prev, coeffs, u_vec, lam_out, inflow, V_H_prev, flags0,
                     cal, grid, dt, max_cycles=100):
    """Implicit W step against the obstacle: active-set solve of the LCP.

    Solves min(B V - q, V - psi) = 0 where B is the implicit upwind system
    matrix. Flagged rows are replaced by V_i = psi_i; a row is released when
    its continuation residual (B V - q)_i goes negative, and new rows are
    flagged where the solution dips below the obstacle. The set settles in
    finitely many cycles and makes the fixed point independent of dt.
    """
    k = grid.nodes
    feas = k >= cal.phi
    diag = 1.0 / dt + cal.rho + lam_out - coeffs.z
    if np.any(diag <= 0):
        raise AssemblyError("implicit system has a nonpositive diagonal")
    q = V_prev / dt + u_vec + inflow
    scale = max(1.0, float(np.abs(q).max()))
    F = flags0 & feas

    for cycle in range(1, max_cycles + 1):
        d = diag.copy()
        xo = coeffs.x.copy()
        yo = coeffs.y.copy()
        r = q.copy()
        if F.any():
            psi_F = interp_linear(V_H_prev, k[F] - cal.phi, grid)
            d[F] = 1.0
            xo[F] = 0.0
            yo[F] = 0.0
            r[F] = psi_F
        V = _banded_solve(xo, yo, d, r)

        # continuation residual of the unmodified rows
        BV = diag * V
        BV[:-1] -= coeffs.x[:-1] * V[1:]
        BV[1:] -= coeffs.y[1:] * V[:-1]
        resid = BV - q

        _, sig = american_projection(V, V_H_prev, cal, grid)
        add = sig.flags & ~F
        release = F & (resid < -1e-12 * scale)
        if not add.any() and not release.any():
            return V, F, cycle
        F = (F | add) & ~release

    raise RuntimeError("signal-region active set did not settle")


def _dt_schedule(cal, n):
    if cal.dt_ramp is None:
        return cal.dt
    start, factor = cal.dt_ramp
    return min(start * factor ** (n - 1), cal.dt)


def solve_hjb(cal, max_iter=500):
    """Solve the coupled three-regime system to a stationary value triple.

    Each outer iteration sweeps the regimes in order:

      1. L takes an implicit step; the opportunity-arrival term pulls it
         toward last iteration's V_W.
      2. W takes an implicit step against the obstacle V_H(k - phi) via the
         active-set LCP solve, using upwind coefficients of last iteration's
         (already projected) V_W and the freshly updated V_L as switch
         inflow.
      3. The W policy is recomputed on the new value: wait nodes by upwind
         extraction, flagged nodes from the H policy at k - phi.
      4. H takes an implicit step with the freshly updated V_L as switch
         inflow.

    Iteration stops when the largest sup-norm change across the triple
    drops below cal.tol. Hitting max_iter returns a non-converged report
    with the partial solution rather than raising; boundary-clip warnings
    from obstacle interpolation are collected once each into the report.
    """
    grid = Grid(cal)
    k = grid.nodes
    gam = cal.gamma

    zd_L = production(k, "L", cal) - cal.delta * k
    zd_H = production(k, "H", cal) - cal.delta * k
    V_L = utility(zd_L, gam) / cal.rho
    V_W = V_L.copy()
    V_H = utility(zd_H, gam) / cal.rho

    c_H_prev, mu_H_prev = extract_policy(V_H, "H", cal, grid)
    flags = np.zeros(grid.N, dtype=bool)
    errors = []
    converged = False

    with warnings.catch_warnings(record=True) as wrec:
        warnings.simplefilter("always", BoundaryClipWarning)
        for n in range(1, max_iter + 1):
            dt_n = _dt_schedule(cal, n)
            V_L0, V_W0, V_H0 = V_L, V_W, V_H

            c_L, mu_L = extract_policy(V_L0, "L", cal, grid)
            co_L = assemble_coeffs(mu_L, cal, grid)
            V_L = implicit_update(V_L0, co_L, utility(c_L, gam),
                                  cal.lambda_LH, cal.lambda_LH * V_W0, cal, dt=dt_n)

            c_W0, mu_W0 = extract_policy(V_W0, "W", cal, grid)
            co_W0 = assemble_coeffs(mu_W0, cal, grid)
            V_W, flags, _ = _w_obstacle_step(
                V_W0, co_W0, utility(c_W0, gam), cal.lambda_HL,
                cal.lambda_HL * V_L, V_H0, flags, cal, grid, dt_n)
            signal = _signal_region(flags, grid)
            c_W, mu_W, co_W = recompute_w_policy(
                V_W, c_H_prev, mu_H_prev, signal, cal, grid)

            c_H, mu_H = extract_policy(V_H0, "H", cal, grid)
            co_H = assemble_coeffs(mu_H, cal, grid)
            V_H = implicit_update(V_H0, co_H, utility(c_H, gam),
                                  cal.lambda_HL, cal.lambda_HL * V_L, cal, dt=dt_n)
            c_H_prev, mu_H_prev = c_H, mu_H

            err = max(np.max(np.abs(V_L - V_L0)),
                      np.max(np.abs(V_W - V_W0)),
                      np.max(np.abs(V_H - V_H0)))
            errors.append(float(err))
            if err < cal.tol:
                converged = True
                break

    messages = sorted({str(w.message) for w in wrec})
    report = SolveReport(iterations=n, converged=converged,
                         errors=errors, warnings=messages)
    values = ValueTriple(V_L, V_W, V_H)
    policies = PolicyTriple(c_L, c_W, c_H, mu_L, mu_W, mu_H)
    return HjbSolution(values, policies, signal, co_L, co_W, co_H, grid, report)
