"""Equilibrium statistics computed from a solved model.

Attractors, MPC/APC at the attractors, population-weighted MPCs, Gini,
mean wealth, ergodic shares, Euler-equation residual decomposition,
bimodality and separation checks, and the five-phenotype classification.
Everything here is a read-only function of solver artifacts.
"""

import math
import warnings
from collections import namedtuple

import numpy as np
from scipy.signal import find_peaks

from .model import deterministic_steady_state, production

DiagnosticsReport = namedtuple(
    "DiagnosticsReport",
    "kss_L kss_H kss_L_det kss_H_det kstar mpc_at apc_at weighted_mpc gini "
    "mean_wealth shares euler_gap peaks phenotype_shares phenotype_folded separation")
EulerTerms = namedtuple(
    "EulerTerms", "ramsey precautionary switching bracket_sum precautionary_band unreliable")
SeparationCheck = namedtuple("SeparationCheck", "gap sigma_ss_L sigma_ss_H satisfied")

HTM_CUTOFF = 2.0  # hand-to-mouth classification bound on k


def find_attractors(mu, grid):
    """Capital levels where the drift crosses zero from + to -.

    Linear interpolation between the bracketing nodes; a crossing into an
    exact-zero plateau reports the entry node.
    """
    out = []
    for i in range(grid.N - 1):
        if mu[i] > 0 >= mu[i + 1]:
            t = mu[i] / (mu[i] - mu[i + 1]) if mu[i] != mu[i + 1] else 0.0
            out.append(float(grid.nodes[i] + t * grid.dk))
    return out


def _bracketing(grid, k):
    if not (grid.nodes[0] <= k <= grid.nodes[-1]):
        raise ValueError(f"k={k} is outside the grid")
    i = min(int((k - grid.k_min) / grid.dk), grid.N - 2)
    t = (k - grid.nodes[i]) / grid.dk
    return i, t


def _node_slope(c, grid, i):
    # central difference, one-sided at the edges
    if i == 0:
        return (c[1] - c[0]) / grid.dk
    if i == grid.N - 1:
        return (c[-1] - c[-2]) / grid.dk
    return (c[i + 1] - c[i - 1]) / (2.0 * grid.dk)


def mpc(c, grid, k):
    """Marginal propensity to consume dc/dk at capital k.

    Central differences at the two bracketing nodes, linearly interpolated;
    one-sided at the grid edges.
    """
    i, t = _bracketing(grid, k)
    return (1.0 - t) * _node_slope(c, grid, i) + t * _node_slope(c, grid, i + 1)


def apc(c, regime, cal, grid, k):
    """Average propensity to consume c(k)/f_j(k), consumption over gross output."""
    f = production(k, regime, cal)
    if f == 0:
        raise ValueError("APC undefined where output is zero")
    i, t = _bracketing(grid, k)
    c_k = (1.0 - t) * c[i] + t * c[i + 1]
    return c_k / f


def weighted_mpc(density, policy, grid):
    """Population-weighted MPC per regime and in aggregate.

    Node-wise central differences of each regime's consumption, weighted by
    that regime's stationary mass. Regimes with zero mass are omitted.
    """
    out = {}
    total = 0.0
    total_mass = 0.0
    for name, c, g in (("L", policy.c_L, density.g_L),
                       ("W", policy.c_W, density.g_W),
                       ("H", policy.c_H, density.g_H)):
        slope = np.gradient(c, grid.dk)
        mass = g * grid.dk
        m = float(mass.sum())
        if m > 0:
            out[name] = float((slope * mass).sum() / m)
            total += float((slope * mass).sum())
            total_mass += m
    out["aggregate"] = total / total_mass
    return out


def gini(g, grid):
    """Discrete Gini: mean absolute difference over twice the mean."""
    w = g * grid.dk
    k = grid.nodes
    mean = float((k * w).sum())
    if mean == 0:
        raise ValueError("Gini undefined for zero mean wealth")
    mad = float(w @ np.abs(k[:, None] - k[None, :]) @ w)
    return mad / (2.0 * mean)


def mean_wealth(g, grid):
    """First moment dk * sum(k_i g_i)."""
    return float(grid.dk * (grid.nodes * g).sum())


def _cpp_lsq(c, grid, i, half_width):
    """Second derivative of c at node i from a local least-squares quadratic.

    A plain double difference lands on the piecewise branches of the upwind
    policy (FOC vs zero-drift) and spikes; fitting a quadratic over a window
    averages across the seam.
    """
    lo = max(0, i - half_width)
    hi = min(grid.N, i + half_width + 1)
    xs = grid.nodes[lo:hi] - grid.nodes[i]
    coef = np.polyfit(xs, c[lo:hi], 2)
    return 2.0 * coef[0]


_EULER_DEST = {"L": ("W", "lambda_LH"), "W": ("L", "lambda_HL"), "H": ("L", "lambda_HL")}


def euler_decomposition(policy, values, cal, grid, k, regime, signal=None,
                        half_width=12):
    """Terms of the stationary consumption Euler equation at capital k.

    ramsey = f'(k) - delta - rho; precautionary = gamma*(gamma+1)/2 *
    sigma^2 * c''/c; switching = -lambda_out*(1 - u'(c_dest)/u'(c_own));
    bracket_sum is their total and vanishes at an attractor. c'' comes from
    a local least-squares quadratic; the band reports its value at half and
    double window width. Within two nodes of k* in regime W the kink makes
    c'' meaningless and the result is flagged unreliable.
    """
    dest, rate_name = _EULER_DEST[regime]
    lam = getattr(cal, rate_name)
    c_own_vec = getattr(policy, f"c_{regime}")
    c_dest_vec = getattr(policy, f"c_{dest}")

    i, t = _bracketing(grid, k)
    c_own = (1.0 - t) * c_own_vec[i] + t * c_own_vec[i + 1]
    c_dest = (1.0 - t) * c_dest_vec[i] + t * c_dest_vec[i + 1]

    A = cal.tfp(regime)
    fprime = cal.alpha * A * k ** (cal.alpha - 1.0)
    ramsey = fprime - cal.delta - cal.rho

    node = i if t < 0.5 else i + 1
    cpp = _cpp_lsq(c_own_vec, grid, node, half_width)
    band = (_cpp_lsq(c_own_vec, grid, node, max(2, half_width // 2)),
            _cpp_lsq(c_own_vec, grid, node, 2 * half_width))
    pre_factor = 0.5 * cal.gamma * (cal.gamma + 1.0) * cal.sigma ** 2 / c_own
    precautionary = pre_factor * cpp
    prec_band = tuple(sorted(pre_factor * b for b in band))

    switching = -lam * (1.0 - (c_dest / c_own) ** (-cal.gamma))

    unreliable = False
    if regime == "W" and signal is not None and math.isfinite(signal.kstar):
        unreliable = abs(k - signal.kstar) <= 2 * grid.dk

    return EulerTerms(ramsey, precautionary, switching,
                      ramsey + precautionary + switching, prec_band, unreliable)


def separation_check(report, policy, cal, grid, factor=2.0):
    """Attractor separation against the local stationary spreads.

    sigma_ss_j = sigma / sqrt(2 |mu_j'(kss_j)|) with mu' by central
    difference; satisfied iff the attractor gap exceeds factor times the
    summed spreads. A drift slope below 1e-8 makes the spread infinite.
    """
    if report.kss_L is None or report.kss_H is None:
        raise ValueError("separation check needs both attractors")
    gap = report.kss_H - report.kss_L

    spreads = []
    for kss, mu in ((report.kss_L, policy.mu_L), (report.kss_H, policy.mu_H)):
        i, t = _bracketing(grid, kss)
        mup = (1.0 - t) * _node_slope(mu, grid, i) + t * _node_slope(mu, grid, i + 1)
        if abs(mup) < 1e-8:
            spreads.append(math.inf)
        else:
            spreads.append(cal.sigma / math.sqrt(2.0 * abs(mup)))
    s_L, s_H = spreads
    satisfied = math.isfinite(s_L) and math.isfinite(s_H) and gap > factor * (s_L + s_H)
    return SeparationCheck(gap, s_L, s_H, satisfied)


def bimodality(g, grid, prominence=0.05):
    """Local maxima of g whose prominence exceeds the given fraction of max(g)."""
    idx, props = find_peaks(g, prominence=prominence * float(np.max(g)))
    return [(float(grid.nodes[i]), float(p)) for i, p in zip(idx, props["prominences"])]


def phenotypes(density, signal, cal, grid):
    """Five-way population split; returns (shares, folded_mass).

    hand_to_mouth: L below the cutoff; structurally_trapped: L on (phi, k*]
    plus the folded L-mass on [cutoff, phi] (reported as folded_mass);
    decaying_rentiers: L above k*; frustrated_aspirants: all of W;
    successful_signalers: all of H. With no signal region the split
    degenerates to raw regime masses.
    """
    k = grid.nodes
    m_L = density.g_L * grid.dk
    pi_W = float(density.g_W.sum() * grid.dk)
    pi_H = float(density.g_H.sum() * grid.dk)

    if signal.kstar is None or not math.isfinite(signal.kstar):
        warnings.warn("no signal region; phenotype classification degenerates "
                      "to regime masses", stacklevel=2)
        return {"L": float(m_L.sum()), "W": pi_W, "H": pi_H}, 0.0

    kstar = signal.kstar
    htm = float(m_L[k < HTM_CUTOFF].sum())
    folded = float(m_L[(k >= HTM_CUTOFF) & (k <= cal.phi)].sum())
    trapped = float(m_L[(k > cal.phi) & (k <= kstar)].sum()) + folded
    rentiers = float(m_L[k > kstar].sum())
    shares = {
        "hand_to_mouth": htm,
        "structurally_trapped": trapped,
        "frustrated_aspirants": pi_W,
        "decaying_rentiers": rentiers,
        "successful_signalers": pi_H,
    }
    return shares, folded


def build_report(solution, density, cal, sep_factor=2.0):
    """Assemble the full DiagnosticsReport for a solved model."""
    grid = solution.grid
    pol = solution.policies

    att_L = find_attractors(pol.mu_L, grid)
    att_H = find_attractors(pol.mu_H, grid)
    kss_L = att_L[0] if att_L else None
    kss_H = att_H[0] if att_H else None

    mpc_at, apc_at, euler_gap = {}, {}, {}
    for name, kss, c in (("L", kss_L, pol.c_L), ("H", kss_H, pol.c_H)):
        if kss is None:
            continue
        mpc_at[name] = mpc(c, grid, kss)
        apc_at[name] = apc(c, name, cal, grid, kss)
        A = cal.tfp(name)
        euler_gap[name] = cal.alpha * A * kss ** (cal.alpha - 1.0) - cal.delta - cal.rho

    g_total = density.g_L + density.g_W + density.g_H
    shares = (float(density.g_L.sum() * grid.dk),
              float(density.g_W.sum() * grid.dk),
              float(density.g_H.sum() * grid.dk))
    phen, folded = phenotypes(density, solution.signal, cal, grid)

    report = DiagnosticsReport(
        kss_L=kss_L, kss_H=kss_H,
        kss_L_det=deterministic_steady_state("L", cal),
        kss_H_det=deterministic_steady_state("H", cal),
        kstar=solution.signal.kstar,
        mpc_at=mpc_at, apc_at=apc_at,
        weighted_mpc=weighted_mpc(density, pol, grid),
        gini=gini(g_total, grid),
        mean_wealth=mean_wealth(g_total, grid),
        shares=shares, euler_gap=euler_gap,
        peaks=bimodality(g_total, grid),
        phenotype_shares=phen, phenotype_folded=folded,
        separation=None)

    if kss_L is not None and kss_H is not None:
        report = report._replace(
            separation=separation_check(report, pol, cal, grid, factor=sep_factor))
    return report
