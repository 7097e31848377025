"""Robust exact differentiation of a noisy displacement signal.

Runs the super-twisting differentiator on a sinusoid with additive
measurement noise, compares the velocity estimate against the analytic
derivative, and shows how the error shrinks when the sampling step is
refined.  Run from anywhere; results print to stdout.
"""

import math

import numpy as np

from forcest import TimeSeries, detect_convergence, differentiate, gains_from_L

f0 = 0.5           # Hz
amp_d = 2.0 * math.pi * f0
L = 1.1 * amp_d ** 2   # bound on |sigma''| with 10% margin
noise_std = 1e-4

print(f"signal: sin(2 pi {f0} t), derivative amplitude {amp_d:.4f}")
print(f"Lipschitz bound L = {L:.4f}, gains k1 = {gains_from_L(L).k1:.4f}, "
      f"k2 = {gains_from_L(L).k2:.4f}")
print()

rng = np.random.default_rng(0)
for dt in (1e-3, 2.5e-4):
    t = np.arange(int(round(60.0 / dt))) * dt
    sigma = np.sin(2.0 * math.pi * f0 * t) + rng.normal(0.0, noise_std, len(t))
    x2, e = differentiate(TimeSeries(dt, sigma), gains_from_L(L))

    T = detect_convergence(e, 5.0 * noise_std, 0.2)
    k0 = int(round((T if T is not None else 5.0) / dt)) + int(round(1.0 / dt))
    err = x2.values[k0:] - amp_d * np.cos(2.0 * math.pi * f0 * t[k0:])
    rmse = math.sqrt(np.mean(err ** 2))
    print(f"dt = {dt:g}: convergence at {T if T is not None else float('nan'):.3f} s, "
          f"post-convergence RMSE = {rmse:.5f} "
          f"({100.0 * rmse / amp_d:.3f}% of the derivative amplitude)")

print()
print("with measurement noise the floor is noise-dominated, so refining dt")
print("helps only modestly here; rerun with noise_std = 0 to see the")
print("discretization residual collapse with the step size")
