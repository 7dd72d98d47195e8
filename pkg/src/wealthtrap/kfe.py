"""Stationary Kolmogorov Forward system for the three-regime diffusion.

The forward generator of each regime is the transpose of the upwind HJB
generator from the final solver iteration, so the discrete densities are
stationary for exactly the process the value iteration priced. Signal-region
nodes in W drain at a large finite rate lambda_bar into H, shifted down by
the signaling cost phi; the shift lands between grid nodes and is split
linearly between the two neighbors, which conserves mass to the last bit.
The full 3N x 3N block system couples the regimes through the Poisson
switching rates, one row is replaced by the normalization, and a sparse
direct solve does the rest.
"""

import warnings
from collections import namedtuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hjb import AssemblyError, BoundaryClipWarning

DensityTriple = namedtuple("DensityTriple", "g_L g_W g_H mass_error max_negativity")
KfeSystem = namedtuple("KfeSystem", "M norm_row N")


def transpose_generator(coeffs):
    """Forward generator: the HJB tridiagonal with sub/super diagonals swapped.

    (L^T)_{i,i-1} = x_{i-1}, (L^T)_{i,i} = z_i, (L^T)_{i,i+1} = y_{i+1}.
    """
    x, y, z = coeffs
    return sp.diags([x[:-1], z, y[1:]], offsets=[-1, 0, 1], format="csr")


def build_transfer(signal, cal, grid):
    """Sparse N x N transfer routing drained W mass into H at k - phi.

    Each flagged column i carries total rate lambda_bar, split between the
    two nodes bracketing k_i - phi with linear weights; the low weight is
    computed as the exact complement of the high one so every column sums
    to lambda_bar exactly. A target below k_1 puts all weight on the first
    node and warns.
    """
    N = grid.N
    rows, cols, vals = [], [], []
    clipped = 0
    for i in np.where(signal.flags)[0]:
        pos = (grid.nodes[i] - cal.phi - grid.k_min) / grid.dk
        l = int(np.floor(pos))
        if l < 0:
            clipped += 1
            l, w = 0, 0.0
        elif l > N - 2:
            l, w = N - 2, 1.0
        else:
            w = min(max(pos - l, 0.0), 1.0)
        hi = cal.lambda_bar * w
        lo = cal.lambda_bar - hi
        if lo != 0.0:
            rows.append(l)
            cols.append(i)
            vals.append(lo)
        if hi != 0.0:
            rows.append(l + 1)
            cols.append(i)
            vals.append(hi)
    if clipped:
        warnings.warn(
            f"{clipped} transfer target(s) below the grid floor; mass lands on the first node",
            BoundaryClipWarning, stacklevel=2)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def assemble_kfe(LT_L, LT_W, LT_H, S, signal, cal):
    """Assemble the 3N x 3N stationary system (ordering g_L, g_W, g_H).

    Flows: L loses lambda_LH to W and receives lambda_HL from both the
    non-signal part of W and all of H; W loses lambda_HL outside the signal
    region and lambda_bar inside it; H receives the transferred signal mass.
    Every column must sum to zero before normalization or the assembly is
    rejected outright.
    """
    N = LT_L.shape[0]
    I = sp.identity(N, format="csr")
    no_sig = sp.diags((~signal.flags).astype(float))
    drain = sp.diags(signal.flags.astype(float) * cal.lambda_bar)

    M = sp.bmat([
        [LT_L - cal.lambda_LH * I, cal.lambda_HL * no_sig, cal.lambda_HL * I],
        [cal.lambda_LH * I, LT_W - cal.lambda_HL * no_sig - drain, None],
        [None, S, LT_H - cal.lambda_HL * I],
    ], format="csc")

    colsum = float(np.abs(np.asarray(M.sum(axis=0))).max())
    if colsum > 1e-8:
        raise AssemblyError(
            f"KFE column sums reach {colsum:.3e}; the assembly does not conserve mass")

    norm_row = 3 * N - 1 if cal.norm_row is None else int(cal.norm_row)
    return KfeSystem(M, norm_row, N)


def solve_stationary(system, grid):
    """Solve M g = 0 with one row swapped for the normalization dk*sum(g)=1.

    Negatives beyond round-off are a bug in assembly, not noise, so the
    clipped mass is capped hard; small negatives are clipped and the density
    renormalized.
    """
    M = system.M.tolil()
    M[system.norm_row, :] = grid.dk
    rhs = np.zeros(3 * system.N)
    rhs[system.norm_row] = 1.0

    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            g = spla.spsolve(M.tocsc(), rhs)
        except spla.MatrixRankWarning:
            g = np.full(3 * system.N, np.nan)
    if not np.all(np.isfinite(g)):
        raise AssemblyError("stationary system is singular; check the calibration")

    mass_error = abs(grid.dk * g.sum() - 1.0)
    max_neg = max(0.0, -float(g.min()))
    clipped_mass = grid.dk * float(-g[g < 0].sum()) if np.any(g < 0) else 0.0
    if clipped_mass > 1e-8:
        raise AssemblyError(
            f"stationary density negative beyond tolerance (clipped mass {clipped_mass:.3e})")
    g = np.clip(g, 0.0, None)
    g /= grid.dk * g.sum()

    N = system.N
    return DensityTriple(g[:N], g[N:2 * N], g[2 * N:], mass_error, max_neg)


def limiting_shares(cal):
    """Instantaneous-signaling benchmark shares (pi_L, pi_H).

    With signaling delay removed the chain reduces to two states and the
    shares are the usual two-state ergodic weights.
    """
    total = cal.lambda_LH + cal.lambda_HL
    if total == 0:
        raise ValueError("both switching intensities are zero; shares undefined")
    return cal.lambda_HL / total, cal.lambda_LH / total


def solve_kfe(solution, cal):
    """Stationary DensityTriple for a converged HJB solution.

    Takes the solve artifact rather than raw vectors so the forward equation
    always uses the post-projection W generator from the final iteration.
    """
    grid = solution.grid
    S = build_transfer(solution.signal, cal, grid)
    system = assemble_kfe(
        transpose_generator(solution.coeffs_L),
        transpose_generator(solution.coeffs_W),
        transpose_generator(solution.coeffs_H),
        S, solution.signal, cal)
    return solve_stationary(system, grid)
