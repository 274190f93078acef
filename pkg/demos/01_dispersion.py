"""Dispersion of the dimer: branch bounds, the speed of sound and the optical resonance k_c."""

from __future__ import annotations

import numpy as np

from nanopteron import params as P
from nanopteron.params import DimerParams

p = DimerParams(w=2.0, eps=0.1)
k = np.linspace(0.0, np.pi, 9)
lm, lp = P.lambda_pm(k, p)
print(f"w = {p.w}: c_w = {p.c_w:.6f}, alpha_w = {p.alpha_w:.6f}")
print("     k   lambda_-   lambda_+")
for row in zip(k, lm, lp):
    print("{:6.3f} {:10.6f} {:10.6f}".format(*row))

# the acoustic phase speed peaks at k -> 0 with value c_w
kk = np.linspace(1e-6, np.pi, 2001)
print("max acoustic speed:", np.max(np.sqrt(P.lambda_minus(kk, p)) / kk))

# every supersonic speed resonates with exactly one optical wavenumber
for c in (1.2, 1.5, 2.0):
    kc, slope = P.find_kc(c, p)
    print(f"c = {c}: k_c = {kc:.12f}, |xi'(k_c)| = {slope:.4f}, "
          f"optical speed there = {np.sqrt(P.lambda_plus(kc, p)) / kc:.12f}")
