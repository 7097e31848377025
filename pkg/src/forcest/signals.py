"""Sampled signals, rational transfer functions and the lead-lag shaper.

Shared numerical vocabulary for the whole toolkit.  Polynomial
coefficients are stored in ascending degree, so the DC gain of a
rational transfer function is ``num[0] / den[0]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "SamplingConfig",
    "TimeSeries",
    "RationalTF",
    "LeadLagShaper",
    "shaper_to_tf",
    "freq_response",
    "write_channels_csv",
    "read_channels_csv",
]

# CSV floats are written with 9 significant digits
_FLOAT_FMT = "%.9g"


@dataclass(frozen=True)
class SamplingConfig:
    """Uniform sampling grid with a seed for reproducible noise.

    The 1 ms default matches the sampling used throughout the
    experimental scenarios.
    """

    dt: float = 1e-3
    duration: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.n_samples < 2:
            raise ValueError("sampling grid needs at least 2 samples")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar signal.

    Sample ``k`` corresponds to time ``k * dt`` exactly.  Units are a
    documentation contract per channel (m, m/s, N, ...), the container
    itself is unit-agnostic.  Values are immutable after construction.
    """

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("TimeSeries values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("TimeSeries values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    @property
    def duration(self) -> float:
        return len(self.values) * self.dt

    def index_at(self, time: float) -> int:
        """Sample index of the given time, clipped to the valid range."""
        k = int(round(time / self.dt))
        return min(max(k, 0), len(self.values) - 1)


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop trailing (highest-degree) coefficients that are exactly zero."""
    c = np.asarray(coeffs, dtype=float)
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return c[:1]
    return c[: nz[-1] + 1]


@dataclass(frozen=True)
class RationalTF:
    """Proper, stable rational transfer function in the Laplace variable.

    Coefficients ascend in degree.  Free integrators and differentiators
    are excluded: both constant terms must be nonzero.
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        if num[0] == 0.0 or den[0] == 0.0:
            raise ValueError(
                "free integrators/differentiators are excluded: "
                "num and den need nonzero constant terms"
            )
        if len(num) > len(den):
            raise ValueError(
                f"improper transfer function: deg(num)={len(num) - 1} > "
                f"deg(den)={len(den) - 1}"
            )
        if len(den) > 1:
            roots = np.roots(den[::-1])
            if np.any(roots.real >= 0):
                raise ValueError(f"unstable denominator, roots {roots}")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def dc_gain(self) -> float:
        return self.num[0] / self.den[0]

    def scaled(self, k: float) -> "RationalTF":
        return RationalTF(self.num * k, self.den)


@dataclass(frozen=True)
class LeadLagShaper:
    """Product-form lead-lag element: a * prod_k (b_k s + 1)/(c_k s + 1).

    ``a > 0`` and ``b_k, c_k >= 0``; the number of stages n >= 1 is a
    free structural parameter.  The (0, 0) stage is the identity, so n
    can be chosen without special-casing.  DC gain is exactly ``a``.
    """

    a: float
    stages: tuple

    def __post_init__(self):
        if not (self.a > 0):
            raise ValueError(f"shaper gain a must be positive, got {self.a}")
        stages = tuple((float(b), float(c)) for b, c in self.stages)
        if len(stages) < 1:
            raise ValueError("shaper needs at least one stage")
        for i, (b, c) in enumerate(stages):
            if b < 0 or c < 0:
                raise ValueError(f"stage {i}: time constants must be >= 0, got ({b}, {c})")
        object.__setattr__(self, "stages", stages)

    @property
    def n(self) -> int:
        return len(self.stages)


def shaper_to_tf(shaper: LeadLagShaper) -> RationalTF:
    """Expand the shaper product into a rational transfer function.

    The result has DC gain exactly ``shaper.a``.  Raises if the stage
    configuration would make the expanded product improper (more zeros
    than poles overall).
    """
    num = np.array([shaper.a])
    den = np.array([1.0])
    for b, c in shaper.stages:
        num = P.polymul(num, [1.0, b]) if b > 0 else num
        den = P.polymul(den, [1.0, c]) if c > 0 else den
    num = _trim(num)
    den = _trim(den)
    if len(num) > len(den):
        raise ValueError(
            "shaper expands to an improper transfer function "
            f"(deg num {len(num) - 1} > deg den {len(den) - 1})"
        )
    return RationalTF(num, den)


def freq_response(tf: RationalTF, omega) -> complex:
    """Complex gain num(jw)/den(jw) at angular frequency omega (rad/s).

    Accepts a scalar or an array of frequencies.  The denominator never
    vanishes on the imaginary axis because the TF is stable.
    """
    s = 1j * np.asarray(omega, dtype=float)
    h = P.polyval(s, tf.num) / P.polyval(s, tf.den)
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return complex(h)
    return h


def write_channels_csv(path, channels: dict, dt: float | None = None) -> None:
    """Write named TimeSeries channels to CSV, first column t in seconds.

    All channels must share dt and length.  Floats use 9 significant
    digits.
    """
    names = list(channels)
    if not names:
        raise ValueError("no channels to write")
    series = [channels[n] for n in names]
    dt = dt if dt is not None else series[0].dt
    n = len(series[0])
    for name, ts in zip(names, series):
        if abs(ts.dt - dt) > 1e-12 * dt or len(ts) != n:
            raise ValueError(f"channel {name!r} has mismatched sampling")
    t = np.arange(n) * dt
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        cols = [t] + [ts.values for ts in series]
        for row in zip(*cols):
            w.writerow([_FLOAT_FMT % x for x in row])


def read_channels_csv(path) -> dict:
    """Read a channels CSV written by :func:`write_channels_csv`.

    Returns a dict name -> TimeSeries; dt is inferred from the t column.
    """
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(x) for x in row] for row in r if row]
    if not rows or header[0] != "t":
        raise ValueError(f"{path}: not a channels CSV (expected leading 't' column)")
    data = np.asarray(rows, dtype=float)
    if len(data) < 2:
        raise ValueError(f"{path}: need at least 2 rows to infer dt")
    t = data[:, 0]
    dt = float(t[1] - t[0])
    if dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-9 * max(dt, 1.0)):
        raise ValueError(f"{path}: time column is not uniformly sampled")
    return {name: TimeSeries(dt, data[:, j + 1]) for j, name in enumerate(header[1:])}
