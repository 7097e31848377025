"""Bilinear discretization of rational TFs and the inverse-coupling filter.

The coupling shaper is inverted symbolically on the stage list (swap
b_k and c_k, invert the gain, scale by the mass), never by polynomial
division, so properness is checked per stage and the inverse is exact.
Discrete filters are realized as a cascade of first/second-order
sections; the cascade DC gain is pinned to the continuous prototype.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy.signal import lfilter, lfilter_zi

from .signals import LeadLagShaper, RationalTF, TimeSeries, shaper_to_tf

__all__ = [
    "DiscreteFilter",
    "invert_shaper",
    "discretize",
    "apply_filter",
    "filter_config_to_json",
    "filter_config_from_json",
]


class DiscreteFilter:
    """Cascade of rational sections in the discrete-shift variable.

    Each section is a (b, a) pair for y[k] = sum b_i x[k-i] - sum a_i y[k-i].
    Carries per-section delay registers, so a single instance must not be
    shared between concurrent filtering passes.
    """

    def __init__(self, sections, dt: float):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.dt = float(dt)
        self.sections = [(np.asarray(b, dtype=float), np.asarray(a, dtype=float))
                         for b, a in sections]
        for b, a in self.sections:
            if len(a) > 1:
                poles = np.roots(a)
                if np.any(np.abs(poles) >= 1.0):
                    raise ValueError(f"section poles outside unit circle: {poles}")
        self.reset()

    def reset(self):
        self.states = [np.zeros(max(len(b), len(a)) - 1)
                       for b, a in self.sections]

    def warm_start(self, x0: float):
        """Set the delay registers to the steady state for constant input x0,
        so filtering starts without a startup transient."""
        level = float(x0)
        states = []
        for b, a in self.sections:
            if max(len(b), len(a)) == 1:
                states.append(np.zeros(0))
            else:
                states.append(lfilter_zi(b, a) * level)
            level *= b.sum() / a.sum()
        self.states = states

    @property
    def dc_gain(self) -> float:
        g = 1.0
        for b, a in self.sections:
            g *= b.sum() / a.sum()
        return g

    def response(self, omega) -> complex:
        """Frequency response at angular frequency omega (rad/s)."""
        z = np.exp(1j * np.asarray(omega, dtype=float) * self.dt)
        zinv = 1.0 / z
        h = np.ones_like(z, dtype=complex)
        for b, a in self.sections:
            h *= np.polyval(b[::-1], zinv) / np.polyval(a[::-1], zinv)
        if np.ndim(omega) == 0:
            return complex(h)
        return h

    def process(self, x: np.ndarray) -> np.ndarray:
        """Filter a block, continuing from the stored delay registers."""
        y = np.asarray(x, dtype=float)
        for i, (b, a) in enumerate(self.sections):
            y, self.states[i] = lfilter(b, a, y, zi=self.states[i])
        return y


def invert_shaper(shaper: LeadLagShaper, m: float) -> RationalTF:
    """Inverse coupling m / S12: gain m/a with every stage flipped.

    The result plays the reshaping role g applied to the output
    injection.  Stages with b_k = 0 but c_k > 0 have an improper inverse
    and are rejected with the offending stage named.
    """
    if not (m > 0):
        raise ValueError(f"mass must be positive, got {m}")
    for i, (b, c) in enumerate(shaper.stages):
        if b == 0.0 and c > 0.0:
            raise ValueError(
                f"stage {i} (b={b}, c={c}): inverse would be improper "
                "(differentiating); b_k must be positive when c_k > 0"
            )
    flipped = LeadLagShaper(a=m / shaper.a,
                            stages=tuple((c, b) for b, c in shaper.stages))
    return shaper_to_tf(flipped)


def _real_factors(roots):
    """Split roots into linear factors (real) and quadratic factors
    (conjugate pairs), each as ascending monic s-polynomials."""
    roots = np.asarray(roots, dtype=complex)
    factors = []
    used = np.zeros(len(roots), dtype=bool)
    order = np.argsort(np.abs(roots))
    for i in order:
        if used[i]:
            continue
        r = roots[i]
        used[i] = True
        if abs(r.imag) < 1e-9 * max(abs(r), 1.0):
            factors.append(np.array([-r.real, 1.0]))
        else:
            # find the conjugate partner
            j = None
            for k in order:
                if not used[k] and abs(roots[k] - r.conjugate()) < 1e-6 * max(abs(r), 1.0):
                    j = k
                    break
            if j is None:
                raise ValueError(f"unpaired complex root {r}")
            used[j] = True
            factors.append(np.array([abs(r) ** 2, -2.0 * r.real, 1.0]))
    return factors


def _corner(factor) -> float:
    """Corner frequency (rad/s) of a monic factor."""
    if len(factor) == 2:
        return abs(factor[0])
    return math.sqrt(abs(factor[0]))


def _bilinear_section(num, den, dt):
    """Map one s-domain section (ascending coeffs, order <= 2) to z."""
    k = 2.0 / dt
    order = max(len(num), len(den)) - 1
    n = np.zeros(3)
    d = np.zeros(3)
    n[: len(num)] = num
    d[: len(den)] = den
    n0, n1, n2 = n
    d0, d1, d2 = d
    if order == 0:
        b = np.array([n0])
        a = np.array([d0])
    elif order == 1:
        b = np.array([n0 + n1 * k, n0 - n1 * k])
        a = np.array([d0 + d1 * k, d0 - d1 * k])
    else:
        b = np.array([n0 + n1 * k + n2 * k * k,
                      2.0 * n0 - 2.0 * n2 * k * k,
                      n0 - n1 * k + n2 * k * k])
        a = np.array([d0 + d1 * k + d2 * k * k,
                      2.0 * d0 - 2.0 * d2 * k * k,
                      d0 - d1 * k + d2 * k * k])
    return b / a[0], a / a[0]


def discretize(tf: RationalTF, dt: float, *, check_corners: bool = False) -> DiscreteFilter:
    """Bilinear (trapezoidal) mapping, applied per factored section.

    The cascade DC gain is renormalized to the continuous prototype's DC
    gain, so the g-filter introduces zero steady-state error.  With
    ``check_corners`` enabled, any pole/zero corner frequency at or above
    the Nyquist rate pi/dt is rejected by name; by default corners above
    Nyquist are admitted (the bilinear map keeps them stable, merely
    warped), which the inverse of a fast lead coupling requires at
    millisecond sampling.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    zeros = np.roots(tf.num[::-1]) if len(tf.num) > 1 else np.array([])
    poles = np.roots(tf.den[::-1]) if len(tf.den) > 1 else np.array([])
    if check_corners:
        nyq = math.pi / dt
        for r in list(zeros) + list(poles):
            w = abs(r)
            if w >= nyq:
                raise ValueError(
                    f"corner frequency {w:.6g} rad/s at or above Nyquist "
                    f"{nyq:.6g} rad/s for dt={dt:g}"
                )
    zf = _real_factors(zeros)
    pf = _real_factors(poles)
    zf.sort(key=_corner)
    pf.sort(key=_corner)

    # pair quadratic zero factors with quadratic pole factors, merging
    # real poles when needed, so every section stays proper
    z_quads = [f for f in zf if len(f) == 3]
    z_lins = [f for f in zf if len(f) == 2]
    p_quads = [f for f in pf if len(f) == 3]
    p_lins = [f for f in pf if len(f) == 2]
    while len(z_quads) > len(p_quads):
        if len(p_lins) < 2:
            raise ValueError("cannot pair complex zeros with stable sections")
        f1, f2 = p_lins.pop(0), p_lins.pop(0)
        p_quads.append(np.polynomial.polynomial.polymul(f1, f2))
    p_quads.sort(key=_corner)

    sections = []
    for i, pq in enumerate(p_quads):
        if z_quads:
            nz = z_quads.pop(0)
        elif len(z_lins) >= 2:
            nz = np.polynomial.polynomial.polymul(z_lins.pop(0), z_lins.pop(0))
        elif z_lins:
            nz = z_lins.pop(0)
        else:
            nz = np.array([1.0])
        sections.append((nz, pq))
    for pl in p_lins:
        nz = z_lins.pop(0) if z_lins else np.array([1.0])
        sections.append((nz, pl))
    if z_lins or z_quads:
        raise ValueError("improper factorization: zeros left without poles")
    if not sections:
        sections.append((np.array([1.0]), np.array([1.0])))

    disc = [_bilinear_section(nz, dz, dt) for nz, dz in sections]
    filt = DiscreteFilter(disc, dt)
    # pin the DC gain exactly to the continuous prototype
    target = tf.dc_gain
    scale = target / filt.dc_gain
    b0, a0 = filt.sections[0]
    filt.sections[0] = (b0 * scale, a0)
    return filt


def apply_filter(filt: DiscreteFilter, x: TimeSeries) -> TimeSeries:
    """Causal filtering from zero initial states."""
    if abs(filt.dt - x.dt) > 1e-12 * max(filt.dt, x.dt):
        raise ValueError(f"filter dt {filt.dt:g} does not match signal dt {x.dt:g}")
    filt.reset()
    return TimeSeries(x.dt, filt.process(x.values))


def filter_config_to_json(shaper: LeadLagShaper, m: float, dt: float) -> str:
    """Serialize a g-filter specification: {a, stages:[{b,c}], m, dt}."""
    obj = {
        "a": shaper.a,
        "stages": [{"b": b, "c": c} for b, c in shaper.stages],
        "m": m,
        "dt": dt,
    }
    return json.dumps(obj, indent=2)


def filter_config_from_json(text: str):
    """Parse a g-filter specification; returns (shaper, m, dt, filter)."""
    obj = json.loads(text)
    expected = {"a", "stages", "m", "dt"}
    unknown = set(obj) - expected
    if unknown:
        raise ValueError(f"unknown filter-config keys: {sorted(unknown)}")
    missing = expected - set(obj)
    if missing:
        raise ValueError(f"missing filter-config keys: {sorted(missing)}")
    shaper = LeadLagShaper(a=float(obj["a"]),
                           stages=tuple((float(s["b"]), float(s["c"]))
                                        for s in obj["stages"]))
    m = float(obj["m"])
    dt = float(obj["dt"])
    filt = discretize(invert_shaper(shaper, m), dt)
    return shaper, m, dt, filt
