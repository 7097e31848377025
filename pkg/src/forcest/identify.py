"""Estimation pipeline and the two identification procedures.

The interactive-force estimate is

    F2_hat = g( K2 sign(e) - (u - gamma sign(x2_hat)) / m ),

with g the discretized inverse coupling.  The estimated velocity enters
the nominal dynamics because the true one is unavailable, making the
estimator feedback-coupled during the convergence transient.

Two fitting routines: a grid sweep of the squared output error over the
Lipschitz bound L, and a simultaneous simplex fit of the shaper
coefficients and the Coulomb level against reference force data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .plant import Dataset
from .shaping import DiscreteFilter, apply_filter, discretize, invert_shaper
from .signals import LeadLagShaper, TimeSeries
from .sta import StaGains, detect_convergence, differentiate, fir_lowpass, gains_from_L

__all__ = [
    "EstimatorConfig",
    "FitReport",
    "estimate_noise_std",
    "estimate_force",
    "identify_L",
    "identify_shaper_friction",
]

_CONV_DWELL = 0.2  # s, default dwell for convergence detection


@dataclass(frozen=True)
class EstimatorConfig:
    """Everything the force estimator needs besides the dataset."""

    gains: StaGains
    m: float
    gamma: float
    g_filter: DiscreteFilter
    use_fir: bool = False
    fir_cutoff: float = 50.0
    transient_skip: float | None = None  # seconds; None = auto-detect

    def __post_init__(self):
        if not (self.m > 0):
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.gamma < 0:
            raise ValueError(f"Coulomb level must be >= 0, got {self.gamma}")
        if self.use_fir and not (self.fir_cutoff > 0):
            raise ValueError("FIR cutoff must be positive when the FIR stage is on")


@dataclass
class FitReport:
    """Outcome of a fitting run.

    ``trace`` holds the sampled objective values: (L, sse) rows for the
    L sweep, per-evaluation objectives for the simplex fit.  The
    objective at the optimum never exceeds any sampled value.
    """

    optimum: dict
    objective: float
    trace: list = field(default_factory=list)
    converged: bool = True
    evaluations: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "optimum": self.optimum,
            "objective": self.objective,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "trace": [list(row) if isinstance(row, (list, tuple)) else row
                      for row in self.trace],
        }, indent=2)

    def curve_to_csv(self, path) -> None:
        """Write an (L, sse) sweep curve; only meaningful for the L fit."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["L", "sse"])
            for L, sse in self.trace:
                w.writerow(["%.9g" % L, "%.9g" % sse])


def estimate_noise_std(sigma: TimeSeries) -> float:
    """Robust displacement-noise estimate from second differences."""
    d2 = np.diff(sigma.values, n=2)
    if len(d2) == 0:
        return 0.0
    # MAD of white noise seen through the [1,-2,1] stencil
    return 1.4826 * float(np.median(np.abs(d2))) / math.sqrt(6.0)


def _sign(x: np.ndarray) -> np.ndarray:
    return np.sign(x)


def _auto_threshold(sigma: TimeSeries) -> float:
    noise = estimate_noise_std(sigma)
    span = float(np.ptp(sigma.values)) or 1.0
    return max(3.0 * noise, 1e-9 * span)


def estimate_force(dataset: Dataset, config: EstimatorConfig):
    """Run the full estimation chain on a dataset.

    Returns ``(f2_hat, diagnostics)`` where diagnostics carries the
    output error ``e``, the velocity estimate ``x2_hat``, the raw
    injection ``chi``, the detected convergence time ``T_conv`` (None if
    never detected) and the ``transient_skip`` actually used.
    """
    sigma = dataset.channel("sigma_meas")
    u = dataset.u
    x2_hat, e = differentiate(sigma, config.gains)
    chi = config.gains.k2 * np.sign(e.values)
    f_nom = (u - config.gamma * np.sign(x2_hat.values)) / config.m
    residual = TimeSeries(dataset.dt, chi - f_nom)
    if config.use_fir:
        residual = fir_lowpass(residual, config.fir_cutoff)
    f2_hat = apply_filter(config.g_filter, residual)

    t_conv = detect_convergence(e, _auto_threshold(sigma), _CONV_DWELL)
    if config.transient_skip is not None:
        skip = config.transient_skip
    else:
        skip = t_conv if t_conv is not None else 0.0
    diagnostics = {
        "e": e,
        "x2_hat": x2_hat,
        "chi": TimeSeries(dataset.dt, chi),
        "T_conv": t_conv,
        "transient_skip": skip,
        "converged": t_conv is not None,
    }
    return f2_hat, diagnostics


def identify_L(dataset: Dataset, nominal=None, grid=(), *,
               transient_skip: float = 2.0) -> FitReport:
    """Sweep the Lipschitz bound and accumulate the squared output error.

    For each candidate L the differentiator runs with the optimal gain
    rule on the measured displacement only; the objective is the sum of
    squared output errors after ``transient_skip`` seconds (initial
    conditions and the convergence phase are excluded from evaluation).
    Ties break toward the smaller L.  ``nominal`` (m, gamma) is accepted
    for interface symmetry with the shaper fit; the error objective does
    not involve the nominal dynamics.
    """
    grid = [float(L) for L in grid]
    if not grid:
        raise ValueError("L grid must be non-empty")
    if any(L <= 0 for L in grid):
        raise ValueError("all L candidates must be positive")
    sigma = dataset.channel("sigma_meas")
    k0 = min(sigma.index_at(transient_skip), len(sigma) - 1)
    curve = []
    for L in sorted(grid):
        _, e = differentiate(sigma, gains_from_L(L))
        sse = float(np.sum(e.values[k0:] ** 2))
        curve.append((L, sse))
    best_L, best_sse = min(curve, key=lambda p: (p[1], p[0]))
    return FitReport(optimum={"L": best_L}, objective=best_sse,
                     trace=curve, converged=True, evaluations=len(curve))


def _theta_pack(a, b, c, gamma):
    return np.log(np.concatenate(([a], b, c, [gamma])))


def _theta_unpack(theta, n):
    p = np.exp(theta)
    return float(p[0]), p[1:1 + n], p[1 + n:1 + 2 * n], float(p[-1])


def identify_shaper_friction(dataset: Dataset, gains: StaGains, m: float,
                             init, n: int = 2, budget: int = 2000,
                             transient_skip: float | None = None) -> FitReport:
    """Simultaneous fit of the coupling shaper and the Coulomb level.

    Minimizes the squared mismatch between the estimated and the
    reference measured force over theta = (a, b_1..b_n, c_1..c_n, gamma)
    with a Nelder-Mead simplex in log-parameter space (positivity comes
    free from the transform).  L stays fixed from a prior L
    identification; ``init`` is (a, b_list, c_list, gamma).  Reports
    budget exhaustion honestly through the ``converged`` flag.
    """
    if dataset.f2_ref is None:
        raise KeyError("shaper identification needs the f2_ref channel")
    if n < 1:
        raise ValueError(f"shaper order must be >= 1, got {n}")
    a0, b0, c0, gamma0 = init
    b0 = np.asarray(b0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    if len(b0) != n or len(c0) != n:
        raise ValueError(f"init stage lists must have length n={n}")
    if a0 <= 0 or gamma0 <= 0 or np.any(b0 <= 0) or np.any(c0 <= 0):
        raise ValueError("init must be strictly positive for the log transform")

    sigma = dataset.channel("sigma_meas")
    x2_hat, e = differentiate(sigma, gains)
    chi = gains.k2 * np.sign(e.values)
    sgn_v = np.sign(x2_hat.values)
    u = dataset.u
    f2_ref = dataset.f2_ref
    dt = dataset.dt

    if transient_skip is None:
        t_conv = detect_convergence(e, _auto_threshold(sigma), _CONV_DWELL)
        settle = 5.0 * max(np.max(c0), np.max(b0))
        transient_skip = max(t_conv or 0.0, settle)
    k0 = min(int(round(transient_skip / dt)), len(u) - 1)

    trace = []

    def objective(theta):
        a, b, c, gamma = _theta_unpack(theta, n)
        shaper = LeadLagShaper(a=a, stages=tuple(zip(b, c)))
        filt = discretize(invert_shaper(shaper, m), dt)
        f_nom = (u - gamma * sgn_v) / m
        f2_hat = filt.process(chi - f_nom)
        sse = float(np.sum((f2_hat[k0:] - f2_ref[k0:]) ** 2))
        trace.append(sse)
        return sse

    theta0 = _theta_pack(a0, b0, c0, gamma0)
    f0 = objective(theta0)
    result = minimize(objective, theta0, method="Nelder-Mead",
                      options={"maxfev": budget,
                               "fatol": 1e-8 * max(f0, 1e-30),
                               "xatol": 1e-6,
                               "disp": False})
    a, b, c, gamma = _theta_unpack(result.x, n)
    return FitReport(
        optimum={"a": a, "b": list(b), "c": list(c), "gamma": gamma},
        objective=float(result.fun),
        trace=trace,
        converged=bool(result.success),
        evaluations=int(result.nfev),
    )
