"""Super-twisting robust exact differentiator and output-injection tools.

Forward Euler discretization of the first-order robust differentiator

    x1' = K1 * sqrt(|e|) * sign(e) + x2
    x2' = K2 * sign(e),          e = sigma - x1,

with the optimal gain rule K2 = 1.1 L, K1 = 2.028 sqrt(K2).  The
discrete convention sign(0) = 0 keeps the injection an odd function of
the output error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signals import TimeSeries

__all__ = [
    "StaGains",
    "StaState",
    "gains_from_L",
    "sta_step",
    "differentiate",
    "detect_convergence",
    "eoi",
    "fir_lowpass",
]


@dataclass(frozen=True)
class StaGains:
    """Differentiator gains; L is the bound on the second derivative."""

    L: float
    k1: float
    k2: float

    def __post_init__(self):
        if not (self.L > 0 and self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"gains must be positive, got {self}")


@dataclass(frozen=True)
class StaState:
    """Observer state: estimates of the signal and its derivative."""

    x1_hat: float = 0.0
    x2_hat: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x1_hat) and math.isfinite(self.x2_hat)):
            raise ValueError(f"non-finite observer state {self}")


def gains_from_L(L: float) -> StaGains:
    """Optimal (chattering-minimizing) gain setting for a given bound L."""
    if not (L > 0):
        raise ValueError(f"L must be positive, got {L}")
    k2 = 1.1 * L
    k1 = 2.028 * math.sqrt(k2)
    return StaGains(L=L, k1=k1, k2=k2)


def _sign(x: float) -> float:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def sta_step(state: StaState, sigma_meas: float, gains: StaGains, dt: float):
    """One forward-Euler update; returns (new state, output error e)."""
    e = sigma_meas - state.x1_hat
    s = _sign(e)
    x1 = state.x1_hat + dt * (gains.k1 * math.sqrt(abs(e)) * s + state.x2_hat)
    x2 = state.x2_hat + dt * gains.k2 * s
    return StaState(x1, x2), e


def differentiate(sigma: TimeSeries, gains: StaGains,
                  initial: StaState = StaState()):
    """Run the differentiator over a series.

    Returns ``(x2_hat, e)`` as TimeSeries of the same length as the
    input: the estimated derivative and the output-error trace.
    """
    dt = sigma.dt
    k1, k2 = gains.k1, gains.k2
    x1, x2 = initial.x1_hat, initial.x2_hat
    n = len(sigma)
    e_out = np.empty(n)
    x2_out = np.empty(n)
    # tight scalar loop: the recursion is inherently sequential
    values = sigma.values.tolist()
    for k in range(n):
        e = values[k] - x1
        e_out[k] = e
        x2_out[k] = x2
        if e > 0.0:
            s = 1.0
        elif e < 0.0:
            s = -1.0
        else:
            s = 0.0
        x1 += dt * (k1 * math.sqrt(abs(e)) * s + x2)
        x2 += dt * k2 * s
    return TimeSeries(dt, x2_out), TimeSeries(dt, e_out)


def detect_convergence(e: TimeSeries, threshold: float, dwell: float):
    """Earliest time T with |e(t)| <= threshold on the whole [T, T+dwell].

    Returns None when no such window exists ("not converged"); never
    silently returns 0.
    """
    if not (threshold > 0):
        raise ValueError(f"threshold must be positive, got {threshold}")
    if not (dwell > 0):
        raise ValueError(f"dwell must be positive, got {dwell}")
    inside = np.abs(e.values) <= threshold
    m = int(round(dwell / e.dt)) + 1  # samples in [T, T+dwell]
    n = len(inside)
    if m > n:
        return None
    # count of in-band samples over each window of length m
    csum = np.concatenate(([0], np.cumsum(inside)))
    window = csum[m:] - csum[:-m]
    hits = np.nonzero(window == m)[0]
    if len(hits) == 0:
        return None
    return float(hits[0] * e.dt)


def eoi(e: TimeSeries, gains: StaGains) -> TimeSeries:
    """Equivalent output injection K2 * sign(e), with sign(0) = 0."""
    return TimeSeries(e.dt, gains.k2 * np.sign(e.values))


def fir_lowpass(x: TimeSeries, cutoff: float) -> TimeSeries:
    """Unity-DC-gain FIR low-pass (chattering cut-off).

    Hamming-windowed sinc kernel with length ~4/(cutoff*dt) rounded to
    odd.  Edge samples are filtered with the truncated, renormalized
    kernel so the DC gain is exactly one everywhere.
    """
    dt = x.dt
    nyquist = 1.0 / (2.0 * dt)
    if not (0.0 < cutoff < nyquist):
        raise ValueError(
            f"cutoff must lie in (0, {nyquist:g}) Hz for dt={dt:g}, got {cutoff:g}"
        )
    length = int(round(4.0 / (cutoff * dt)))
    if length % 2 == 0:
        length += 1
    length = max(length, 3)
    mid = length // 2
    n = np.arange(length) - mid
    kernel = np.hamming(length) * np.sinc(2.0 * cutoff * dt * n)
    kernel /= kernel.sum()
    num = np.convolve(x.values, kernel, mode="same")
    den = np.convolve(np.ones(len(x)), kernel, mode="same")
    return TimeSeries(dt, num / den)
