"""Synthetic servo plant: mass with Coulomb friction under a coupled load.

Ground-truth generator for the estimation pipeline.  The environmental
force enters the acceleration balance through the lead-lag coupling,

    sigma'' = (u - gamma * sign(v)) / m + xi,   xi = S12[F2] / m,

and the measured displacement carries additive Gaussian noise.  The
default parameters reproduce the identified hydraulic test stand:
m = 1/0.5882 kg, gamma = 160 N, and a coupling whose mass-scaled
inverse is

    G(s) = 1.7 * (2.84e-5 s + 1)(2.38e-5 s + 1)
               / ((1.37e-3 s + 1)(1.284e-2 s + 1)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .signals import LeadLagShaper, RationalTF, SamplingConfig, TimeSeries, shaper_to_tf
from .shaping import apply_filter, discretize, invert_shaper

__all__ = [
    "STAND_M",
    "STAND_GAMMA",
    "stand_coupling",
    "stand_g_tf",
    "PlantParams",
    "LoadProfile",
    "TrackingControl",
    "Dataset",
    "coulomb",
    "nominal_accel",
    "coupled_disturbance",
    "generate_load",
    "simulate",
    "simulate_tracking",
]

# identified test-stand constants: f = 0.5882 (u - 160 sign(v)), G gain 1.7
STAND_M = 1.0 / 0.5882
STAND_GAMMA = 160.0
_G_GAIN = 1.7
_G_LEAD = (2.84e-5, 2.38e-5)   # numerator time constants of G (s)
_G_LAG = (1.37e-3, 1.284e-2)   # denominator time constants of G (s)


def stand_coupling(m: float = STAND_M) -> LeadLagShaper:
    """Coupling shaper S12 = m / G for the identified G above.

    Lead-type: the b constants are the lag constants of G.  DC gain is
    m/1.7, so inverting with the same mass restores G exactly.
    """
    return LeadLagShaper(a=m / _G_GAIN,
                         stages=tuple(zip(_G_LAG, _G_LEAD)))


def stand_g_tf(m: float = STAND_M) -> RationalTF:
    """The identified reshaping transfer function G(s), DC gain 1.7."""
    return invert_shaper(stand_coupling(m), m)


@dataclass(frozen=True)
class PlantParams:
    """Plant parameters; ``load_sign`` selects an opposing (-1, default)
    or assisting (+1) environmental load."""

    m: float = STAND_M
    gamma: float = STAND_GAMMA
    coupling: LeadLagShaper = field(default_factory=stand_coupling)
    noise_std: float = 0.0
    load_sign: float = -1.0

    def __post_init__(self):
        if not (self.m > 0):
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.gamma < 0:
            raise ValueError(f"Coulomb level must be >= 0, got {self.gamma}")
        if self.noise_std < 0:
            raise ValueError(f"noise std must be >= 0, got {self.noise_std}")
        if self.load_sign not in (-1.0, 1.0):
            raise ValueError(f"load_sign must be +1 or -1, got {self.load_sign}")


@dataclass(frozen=True)
class LoadProfile:
    """Bounded environmental force profile.

    kinds:
      saw   -- linear ramp from offset to offset+amplitude over the
               active part of each period, then an instant drop; an
               optional ``dwell`` holds the offset level after the drop.
      step  -- offset before ``onset``, offset+amplitude after.
      sine  -- offset + amplitude * sin(2 pi t / period).
      hold  -- cycle through ``levels``, each held for ``dwell`` seconds.

    ``smooth_tau`` > 0 passes the raw profile through a first-order lag,
    band-limiting the edges the way a physical load cylinder would.
    """

    kind: str
    amplitude: float = 0.0
    period: float = 1.0
    offset: float = 0.0
    onset: float = 0.0
    levels: tuple = ()
    dwell: float = 0.0
    smooth_tau: float = 0.0

    def __post_init__(self):
        if self.kind not in ("saw", "step", "sine", "hold"):
            raise ValueError(f"unknown load kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.kind in ("saw", "sine") and not (self.period > 0):
            raise ValueError(f"{self.kind} load needs period > 0, got {self.period}")
        if self.kind == "hold":
            if not self.levels:
                raise ValueError("hold load needs a non-empty levels list")
            if not (self.dwell > 0):
                raise ValueError(f"hold load needs dwell > 0, got {self.dwell}")
        if self.dwell < 0 or self.smooth_tau < 0:
            raise ValueError("dwell and smooth_tau must be >= 0")
        if self.kind == "saw" and self.dwell >= self.period:
            raise ValueError("saw dwell must be shorter than the period")
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))

    @property
    def bound(self) -> float:
        """Upper bound on |F2(t)|."""
        if self.kind == "hold":
            return max(abs(v + self.offset) for v in self.levels)
        return self.amplitude + abs(self.offset)


@dataclass(frozen=True)
class TrackingControl:
    """Internal proportional-derivative position-tracking drive.

    Produces the input force u = kp (ref - sigma) + kd (ref' - v) from
    the true plant state, giving sustained motion against the load.  The
    reference is a ramp with an optional sinusoidal component.
    """

    kp: float
    kd: float = 0.0
    ref_rate: float = 0.0
    ref_amp: float = 0.0
    ref_freq: float = 0.0
    ref_offset: float = 0.0

    def __post_init__(self):
        if not (self.kp > 0):
            raise ValueError(f"kp must be positive, got {self.kp}")
        if self.kd < 0:
            raise ValueError(f"kd must be >= 0, got {self.kd}")

    def reference(self, t: np.ndarray):
        w = 2.0 * math.pi * self.ref_freq
        ref = self.ref_offset + self.ref_rate * t + self.ref_amp * np.sin(w * t)
        vref = self.ref_rate + self.ref_amp * w * np.cos(w * t)
        return ref, vref


@dataclass(frozen=True)
class Dataset:
    """Aligned simulation/estimation columns.

    ``t``, ``u`` and ``sigma_meas`` are always present; truth channels
    are optional.  When present, sigma_meas = sigma_true + noise.
    """

    dt: float
    u: np.ndarray
    sigma_meas: np.ndarray
    sigma_true: np.ndarray | None = None
    v_true: np.ndarray | None = None
    f2_ref: np.ndarray | None = None
    xi_true: np.ndarray | None = None

    _OPTIONAL = ("sigma_true", "v_true", "f2_ref", "xi_true")

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        n = len(self.u)
        for name in ("u", "sigma_meas") + self._OPTIONAL:
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float)
            if len(col) != n:
                raise ValueError(f"channel {name!r} length {len(col)} != {n}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"channel {name!r} contains non-finite samples")
            col.setflags(write=False)
            object.__setattr__(self, name, col)

    def __len__(self) -> int:
        return len(self.u)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.u)) * self.dt

    def channel(self, name: str) -> TimeSeries:
        col = getattr(self, name)
        if col is None:
            raise KeyError(f"dataset has no channel {name!r}")
        return TimeSeries(self.dt, col)

    def to_csv(self, path) -> None:
        names = ["u", "sigma_meas"] + [n for n in self._OPTIONAL
                                       if getattr(self, n) is not None]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + names)
            cols = [self.t] + [getattr(self, n) for n in names]
            for row in zip(*cols):
                w.writerow(["%.9g" % x for x in row])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows = [[float(x) for x in row] for row in r if row]
        if header[0] != "t" or len(rows) < 2:
            raise ValueError(f"{path}: not a dataset CSV")
        data = np.asarray(rows, dtype=float)
        dt = float(data[1, 0] - data[0, 0])
        cols = {name: data[:, j + 1] for j, name in enumerate(header[1:])}
        for required in ("u", "sigma_meas"):
            if required not in cols:
                raise KeyError(f"{path}: missing required channel {required!r}")
        known = ("u", "sigma_meas") + cls._OPTIONAL
        unknown = [n for n in cols if n not in known]
        if unknown:
            raise ValueError(f"{path}: unknown channels {unknown}")
        return cls(dt=dt, **cols)


def coulomb(v: float, gamma: float) -> float:
    """Coulomb friction force gamma * sign(v), with sign(0) = 0."""
    if v > 0.0:
        return gamma
    if v < 0.0:
        return -gamma
    return 0.0


def nominal_accel(u: float, v: float, params: PlantParams) -> float:
    """Unperturbed acceleration (u - gamma sign(v)) / m."""
    return (u - coulomb(v, params.gamma)) / params.m


def generate_load(load: LoadProfile, config: SamplingConfig) -> TimeSeries:
    """Deterministic load force profile on the sampling grid."""
    t = config.t
    if load.kind == "saw":
        tau = np.mod(t, load.period)
        ramp = load.period - load.dwell
        raw = load.offset + np.where(tau < ramp,
                                     load.amplitude * tau / ramp, 0.0)
    elif load.kind == "step":
        raw = load.offset + np.where(t >= load.onset, load.amplitude, 0.0)
    elif load.kind == "sine":
        raw = load.offset + load.amplitude * np.sin(2.0 * math.pi * t / load.period)
    else:  # hold
        idx = (t // load.dwell).astype(int) % len(load.levels)
        raw = load.offset + np.asarray(load.levels)[idx]
    if load.smooth_tau > 0.0:
        # two cascaded lags: continuous slope, so a lead-type coupling
        # sees no derivative jumps at the profile edges
        alpha = config.dt / (load.smooth_tau + config.dt)
        y = np.empty_like(raw)
        s1 = s2 = raw[0]
        for k, r in enumerate(raw.tolist()):
            s1 += alpha * (r - s1)
            s2 += alpha * (s1 - s2)
            y[k] = s2
        raw = y
    return TimeSeries(config.dt, raw)


def coupled_disturbance(f2: TimeSeries, params: PlantParams) -> TimeSeries:
    """Matched disturbance xi = S12[F2] / m seen by the acceleration.

    The coupling filter is warm-started at the steady state of the
    initial load value, so the plant begins in equilibrium instead of
    ringing through an artificial startup transient.
    """
    filt = discretize(shaper_to_tf(params.coupling), f2.dt)
    filt.warm_start(f2.values[0])
    return TimeSeries(f2.dt, filt.process(f2.values) / params.m)


def _integrate(params: PlantParams, u_of, xi: np.ndarray, config: SamplingConfig):
    """Semi-implicit Euler: velocity first, then position."""
    dt = config.dt
    n = config.n_samples
    m, gamma = params.m, params.gamma
    sigma = np.empty(n)
    vel = np.empty(n)
    u_out = np.empty(n)
    x = 0.0
    v = 0.0
    xi_list = xi.tolist()
    for k in range(n):
        sigma[k] = x
        vel[k] = v
        uk = u_of(k, x, v)
        u_out[k] = uk
        if v > 0.0:
            fric = gamma
        elif v < 0.0:
            fric = -gamma
        else:
            fric = 0.0
        acc = (uk - fric) / m + xi_list[k]
        v += dt * acc
        x += dt * v
    return sigma, vel, u_out


def _finish(params, config, load, sigma, vel, u_out, f2, xi) -> Dataset:
    rng = np.random.default_rng(config.seed)
    noise = rng.normal(0.0, params.noise_std, len(sigma)) \
        if params.noise_std > 0 else np.zeros(len(sigma))
    return Dataset(dt=config.dt, u=u_out, sigma_meas=sigma + noise,
                   sigma_true=sigma, v_true=vel, f2_ref=f2, xi_true=xi)


def _prepare_load(params, load, config):
    raw = generate_load(load, config)
    if np.max(np.abs(raw.values)) > load.bound * (1.0 + 1e-9):
        raise ValueError("load profile violates its boundedness invariant")
    f2 = params.load_sign * raw.values
    xi = coupled_disturbance(TimeSeries(config.dt, f2), params)
    return f2, xi.values


def simulate(params: PlantParams, u: TimeSeries, load: LoadProfile,
             config: SamplingConfig) -> Dataset:
    """Open-loop simulation driven by a given input-force series."""
    if abs(u.dt - config.dt) > 1e-12 * config.dt:
        raise ValueError(f"input dt {u.dt:g} does not match sampling dt {config.dt:g}")
    if len(u) != config.n_samples:
        raise ValueError(f"input length {len(u)} != sample count {config.n_samples}")
    f2, xi = _prepare_load(params, load, config)
    u_arr = u.values.tolist()
    sigma, vel, u_out = _integrate(params, lambda k, x, v: u_arr[k], xi, config)
    return _finish(params, config, load, sigma, vel, u_out, f2, xi)


def simulate_tracking(params: PlantParams, control: TrackingControl,
                      load: LoadProfile, config: SamplingConfig) -> Dataset:
    """Closed-loop simulation with the internal tracking drive.

    The drive acts on the true state, so the truth channels stay
    independent of the measurement-noise seed.
    """
    f2, xi = _prepare_load(params, load, config)
    ref, vref = control.reference(config.t)
    ref_l, vref_l = ref.tolist(), vref.tolist()
    kp, kd = control.kp, control.kd

    def u_of(k, x, v):
        return kp * (ref_l[k] - x) + kd * (vref_l[k] - v)

    sigma, vel, u_out = _integrate(params, u_of, xi, config)
    return _finish(params, config, load, sigma, vel, u_out, f2, xi)
