"""Model primitives: calibration record, capital grid, and closed-form pieces.

Everything downstream (HJB solver, forward equation, diagnostics, simulation)
works off one validated Calibration and one uniform Grid. The functions here
are pure and accept scalars or numpy arrays interchangeably.
"""

import json

import numpy as np

# Baseline experiment values. A JSON config may override any subset; keys
# not listed here are rejected.
DEFAULTS = {
    "gamma": 2.0,        # relative risk aversion (> 0, != 1)
    "rho": 0.05,         # discount rate, 1/year
    "alpha": 0.33,       # capital elasticity
    "delta": 0.02,       # depreciation, 1/year
    "A_L": 1.0,          # TFP in regimes L and W
    "A_H": 1.25,         # TFP in regime H
    "sigma": 0.30,       # additive diffusion, capital / sqrt(year)
    "lambda_LH": 0.005,  # opportunity arrival intensity, 1/year
    "lambda_HL": 0.002,  # obsolescence intensity, 1/year
    "phi": 9.0,          # signaling cost, capital units
    "N": 501,            # grid points
    "k_min": 0.01,       # lower grid bound (keeps k^(alpha-1) finite)
    "k_max": 50.0,       # upper grid bound
    "dt": 500.0,         # implicit time step, years
    "tol": 1e-8,         # sup-norm convergence tolerance
    "lambda_bar": 1e3,   # KFE drain rate at flagged nodes, 1/year
    # optional numerical knobs
    "dt_ramp": None,     # (start, factor): geometric ramp up to dt
    "norm_row": None,    # row of the KFE system replaced by normalization
}

REGIMES = ("L", "W", "H")


class CalibrationError(ValueError):
    """A calibration record violates the model's parameter restrictions."""


class Calibration:
    """All structural and computational parameters in one validated record.

    Validation is eager: a bad record never escapes __init__, and the error
    message names the offending field.
    """

    fields = tuple(DEFAULTS)

    def __init__(self, **kwargs):
        unknown = sorted(set(kwargs) - set(DEFAULTS))
        if unknown:
            raise CalibrationError(f"unknown calibration keys: {unknown}")
        for name, default in DEFAULTS.items():
            setattr(self, name, kwargs.get(name, default))
        self._validate()

    def _validate(self):
        c = self
        if not (c.gamma > 0) or c.gamma == 1:
            raise CalibrationError("gamma: CRRA utility needs gamma > 0 and gamma != 1")
        if not (c.rho > 0):
            raise CalibrationError("rho must be positive")
        if not (0 < c.alpha < 1):
            raise CalibrationError("alpha must lie in (0, 1)")
        if not (c.delta > 0):
            raise CalibrationError("delta must be positive")
        if not (c.A_L > 0):
            raise CalibrationError("A_L must be positive")
        if not (c.A_H > c.A_L):
            raise CalibrationError(
                "A_H must exceed A_L: signaling leads to higher TFP")
        if not (c.sigma > 0):
            raise CalibrationError("sigma must be positive")
        if c.lambda_LH < 0 or c.lambda_HL < 0:
            raise CalibrationError("switching intensities must be nonnegative")
        if not (c.phi > 0):
            raise CalibrationError("phi must be positive")
        if not (isinstance(c.N, (int, np.integer)) and c.N >= 3):
            raise CalibrationError("N must be an integer >= 3")
        if not (c.k_min > 0):
            raise CalibrationError("k_min must be positive")
        if not (c.k_min < c.phi < c.k_max):
            raise CalibrationError("grid must satisfy k_min < phi < k_max")
        if not (c.dt > 0):
            raise CalibrationError("dt must be positive")
        if not (c.tol > 0):
            raise CalibrationError("tol must be positive")
        if not (c.lambda_bar > 0):
            raise CalibrationError("lambda_bar must be positive")
        if c.dt_ramp is not None:
            start, factor = c.dt_ramp
            if not (start > 0 and factor > 1):
                raise CalibrationError("dt_ramp needs start > 0 and factor > 1")
        if c.norm_row is not None:
            if not (isinstance(c.norm_row, (int, np.integer))
                    and 0 <= c.norm_row < 3 * c.N):
                raise CalibrationError("norm_row out of range for the 3N system")

    def replace(self, **kwargs):
        """New record with some fields overridden (used by the sweep runner)."""
        d = self.as_dict()
        d.update(kwargs)
        return Calibration(**d)

    def as_dict(self):
        return {name: getattr(self, name) for name in self.fields}

    def tfp(self, regime):
        """Regime TFP: A_L for L and W, A_H for H."""
        if regime not in REGIMES:
            raise ValueError(f"unknown regime {regime!r}")
        return self.A_H if regime == "H" else self.A_L

    def __repr__(self):
        inner = ", ".join(f"{n}={getattr(self, n)!r}" for n in self.fields)
        return f"Calibration({inner})"

    def __eq__(self, other):
        return isinstance(other, Calibration) and self.as_dict() == other.as_dict()


def load_calibration(path):
    """Read a Calibration from a JSON file.

    Missing keys take baseline defaults; unknown keys are a hard error so a
    typo cannot silently run the default experiment.
    """
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise CalibrationError("config must be a JSON object")
    if "N" in raw:
        if isinstance(raw["N"], float) and raw["N"].is_integer():
            raw["N"] = int(raw["N"])
    if "dt_ramp" in raw and raw["dt_ramp"] is not None:
        raw["dt_ramp"] = tuple(raw["dt_ramp"])
    return Calibration(**raw)


class Grid:
    """Uniform capital grid k_i = k_min + i*dk, i = 0..N-1."""

    def __init__(self, cal):
        self.N = cal.N
        self.k_min = cal.k_min
        self.k_max = cal.k_max
        self.dk = (cal.k_max - cal.k_min) / (cal.N - 1)
        self.nodes = cal.k_min + self.dk * np.arange(cal.N)

    def __len__(self):
        return self.N


def utility(c, gamma):
    """CRRA flow utility c^(1-gamma)/(1-gamma)."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("utility is defined for positive consumption only")
    out = c ** (1.0 - gamma) / (1.0 - gamma)
    return out if out.ndim else float(out)


def marginal_utility_inverse(vprime, gamma):
    """Inverse of u'(c) = c^(-gamma); the consumption FOC.

    A nonpositive slope signals a non-concave iterate and is rejected here
    rather than propagated as a complex power.
    """
    vprime = np.asarray(vprime, dtype=float)
    if np.any(vprime <= 0):
        raise ValueError("marginal utility must be positive to invert the FOC")
    out = vprime ** (-1.0 / gamma)
    return out if out.ndim else float(out)


def production(k, regime, cal):
    """Cobb-Douglas output A_j * k^alpha; regimes L and W share A_L."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("capital must be nonnegative")
    out = cal.tfp(regime) * k ** cal.alpha
    return out if out.ndim else float(out)


def drift(k, c, regime, cal):
    """Capital drift f_j(k) - c - delta*k."""
    out = production(k, regime, cal) - np.asarray(c, dtype=float) - cal.delta * np.asarray(k, dtype=float)
    return out if out.ndim else float(out)


def deterministic_steady_state(regime, cal):
    """Closed-form noiseless steady state (alpha*A_j/(rho+delta))^(1/(1-alpha)).

    Defined for the two production regimes L and H; W shares L's technology
    and has no separate benchmark.
    """
    if regime not in ("L", "H"):
        raise ValueError("deterministic steady state is defined for regimes L and H")
    A = cal.tfp(regime)
    return (cal.alpha * A / (cal.rho + cal.delta)) ** (1.0 / (1.0 - cal.alpha))
