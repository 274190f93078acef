"""Periodic ripples: the small-amplitude optical traveling waves at the resonant wavenumber."""

from __future__ import annotations

from nanopteron.params import DimerParams
from nanopteron.ripple import find_Keps, period_interval, ripple_period, solve_ripple

p = DimerParams(w=2.0, eps=0.1)
print(f"K_eps = {find_Keps(p):.12f}  (eps * K_eps = {p.eps * find_Keps(p):.6f})")
print("admissible ripple periods:", period_interval(p.w))

for a in (0.0, 1e-3, 1e-2):
    sol = solve_ripple(a, p)
    print(f"a = {a:g}: {sol.iterations} iterations, residual {sol.residual:.2e}, "
          f"frequency shift {sol.t_shift:.3e}, |psi| {sol.psi_norm():.3e}, "
          f"period {ripple_period(sol):.6f}")
