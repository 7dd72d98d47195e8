"""Direct simulation of the regime-switching reflected diffusion.

Euler-Maruyama paths under the solved consumption policies give an
independent check on the stationary system: no generator, no transpose, no
drain construction, just the process itself. Switches are drawn per step
with probability lambda*dt (first-order thinning; the rates make lambda*dt
tiny), reflection at the floor folds the overshoot back, and a W path at or
above k* pays phi and becomes H at the first step where the condition
holds.
"""

import math
from collections import namedtuple

import numpy as np

from .model import Grid, deterministic_steady_state

EmpiricalDistribution = namedtuple(
    "EmpiricalDistribution",
    "hist_L hist_W hist_H shares sample_count excursions n_exercises "
    "transitions occupancy")
CompareResult = namedtuple("CompareResult", "share_gaps l1_distance mean_gap")

_MODES = ("ensemble", "single-long-path")
_CHUNK = 1 << 16


class SimConfig:
    """Simulation plumbing: path count, horizon, step, burn-in, seed, mode."""

    def __init__(self, n_paths=1, horizon=10_000.0, dt_sim=0.05,
                 burn_in=1_000.0, seed=12345, mode="single-long-path"):
        if n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if dt_sim <= 0 or dt_sim > 0.1:
            raise ValueError("dt_sim must lie in (0, 0.1]")
        if not (0 <= burn_in < horizon):
            raise ValueError("burn_in must be shorter than the horizon")
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if mode == "single-long-path" and n_paths != 1:
            raise ValueError("single-long-path mode runs exactly one path")
        self.n_paths = int(n_paths)
        self.horizon = float(horizon)
        self.dt_sim = float(dt_sim)
        self.burn_in = float(burn_in)
        self.seed = int(seed)
        self.mode = mode


def _run_path(rng, cal, grid, policy, kstar, counts, dt, steps, burn_steps, stride):
    """One path; accumulates node counts and returns path statistics.

    Per step: exercise the signal option if eligible, record the sample on
    sampling steps, draw the regime switch, then take the Euler move.
    """
    c_vecs = (policy.c_L, policy.c_W, policy.c_H)
    tfp = (cal.A_L, cal.A_L, cal.A_H)
    alpha, delta, phi = cal.alpha, cal.delta, cal.phi
    k_min, k_max, dk = grid.k_min, grid.k_max, grid.dk
    n_top = grid.N - 1
    p_LW = cal.lambda_LH * dt
    p_HL = cal.lambda_HL * dt
    sq = cal.sigma * math.sqrt(dt)

    k = deterministic_steady_state("L", cal)
    regime = 0
    excursions = 0
    n_ex = 0
    trans = {"LW": 0, "WL": 0, "HL": 0}
    occ = [0.0, 0.0, 0.0]

    step = 0
    remaining = steps
    while remaining:
        m = min(_CHUNK, remaining)
        xi = rng.standard_normal(m)
        uu = rng.random(m)
        for j in range(m):
            if regime == 1 and k >= kstar:
                regime = 2
                k -= phi
                if k < k_min:
                    k = k_min
                n_ex += 1
            post_burn = step >= burn_steps
            if post_burn:
                occ[regime] += dt
                if (step - burn_steps) % stride == 0:
                    counts[regime, int((k - k_min) / dk + 0.5)] += 1
            u = uu[j]
            if regime == 0:
                if u < p_LW:
                    regime = 1
                    if post_burn:
                        trans["LW"] += 1
            elif regime == 1:
                if u < p_HL:
                    regime = 0
                    if post_burn:
                        trans["WL"] += 1
            else:
                if u < p_HL:
                    regime = 0
                    if post_burn:
                        trans["HL"] += 1
            # Euler move under the interpolated policy
            pos = (k - k_min) / dk
            i = int(pos)
            if i > n_top - 1:
                i = n_top - 1
            t = pos - i
            cv = c_vecs[regime]
            c = cv[i] * (1.0 - t) + cv[i + 1] * t
            mu = tfp[regime] * k ** alpha - c - delta * k
            k += mu * dt + sq * xi[j]
            if k < k_min:
                k = 2.0 * k_min - k
                if k < k_min:
                    k = k_min
            elif k > k_max:
                k = k_max
                excursions += 1
            step += 1
        remaining -= m
    return excursions, n_ex, trans, occ


def simulate(cal, policy, signal, simcfg):
    """Empirical stationary distribution under the solved policies.

    Paths get independent generators spawned from the master seed, so the
    result depends only on (seed, SimConfig), not on execution order.
    Samples land on the nearest grid node after burn-in at 1-year strides.
    """
    grid = Grid(cal)
    dt = simcfg.dt_sim
    steps = int(round(simcfg.horizon / dt))
    burn_steps = int(round(simcfg.burn_in / dt))
    stride = max(1, int(round(1.0 / dt)))
    kstar = signal.kstar if signal.flags.any() else math.inf

    counts = np.zeros((3, grid.N), dtype=np.int64)
    excursions = 0
    n_ex = 0
    trans = {"LW": 0, "WL": 0, "HL": 0}
    occ = np.zeros(3)

    root = np.random.SeedSequence(simcfg.seed)
    for child in root.spawn(simcfg.n_paths):
        rng = np.random.default_rng(child)
        e, x, tr, oc = _run_path(rng, cal, grid, policy, kstar, counts,
                                 dt, steps, burn_steps, stride)
        excursions += e
        n_ex += x
        for key in trans:
            trans[key] += tr[key]
        occ += oc

    total = counts.sum()
    if total == 0:
        raise ValueError("no samples collected; horizon too short for the burn-in")
    hist = counts / total
    shares = {"L": float(hist[0].sum()), "W": float(hist[1].sum()),
              "H": float(hist[2].sum())}
    return EmpiricalDistribution(
        hist_L=hist[0], hist_W=hist[1], hist_H=hist[2], shares=shares,
        sample_count=int(total), excursions=excursions, n_exercises=n_ex,
        transitions=dict(trans), occupancy={"L": occ[0], "W": occ[1], "H": occ[2]})


def compare(emp, density, grid):
    """Simulation vs stationary solve: share gaps, L1 distance, mean gap."""
    kfe_shares = {"L": float(density.g_L.sum() * grid.dk),
                  "W": float(density.g_W.sum() * grid.dk),
                  "H": float(density.g_H.sum() * grid.dk)}
    share_gaps = {j: emp.shares[j] - kfe_shares[j] for j in ("L", "W", "H")}

    hist_total = emp.hist_L + emp.hist_W + emp.hist_H
    kfe_mass = (density.g_L + density.g_W + density.g_H) * grid.dk
    l1 = float(np.abs(hist_total - kfe_mass).sum())

    mean_emp = float((grid.nodes * hist_total).sum())
    mean_kfe = float(grid.dk * (grid.nodes * (density.g_L + density.g_W + density.g_H)).sum())
    return CompareResult(share_gaps, l1, mean_emp - mean_kfe)
