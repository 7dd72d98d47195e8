"""Heterogeneous-agent poverty-trap model with a costly regime signal.

Three coupled value functions (low-productivity, wait, high-productivity)
solved by an implicit upwind scheme with an embedded obstacle step, a
stationary Kolmogorov forward system with a non-local wealth transfer,
distributional diagnostics, and a Monte Carlo cross-check.
"""

from .model import (
    DEFAULTS,
    REGIMES,
    Calibration,
    CalibrationError,
    Grid,
    deterministic_steady_state,
    drift,
    load_calibration,
    marginal_utility_inverse,
    production,
    utility,
)
from .hjb import (
    AssemblyError,
    BoundaryClipWarning,
    HjbSolution,
    PolicyTriple,
    SignalRegion,
    SolveReport,
    UpwindCoeffs,
    ValueTriple,
    american_projection,
    assemble_coeffs,
    extract_policy,
    implicit_update,
    interp_linear,
    recompute_w_policy,
    solve_hjb,
    surplus,
    upwind_slope,
)
from .kfe import (
    DensityTriple,
    KfeSystem,
    assemble_kfe,
    build_transfer,
    limiting_shares,
    solve_kfe,
    solve_stationary,
    transpose_generator,
)
from .diagnostics import (
    DiagnosticsReport,
    EulerTerms,
    SeparationCheck,
    apc,
    bimodality,
    build_report,
    euler_decomposition,
    find_attractors,
    gini,
    mean_wealth,
    mpc,
    phenotypes,
    separation_check,
    weighted_mpc,
)
from .mc import (
    CompareResult,
    EmpiricalDistribution,
    SimConfig,
    compare,
    simulate,
)

__version__ = "0.1.0"
