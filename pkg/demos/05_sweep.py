"""Sweep eps at w = 2: the remainder shrinks with eps and the ripple amplitude beats every power."""

from __future__ import annotations

import numpy as np

from nanopteron.params import DimerParams
from nanopteron.solver import iterate_nanopteron

eps_list = [0.2, 0.1, 0.05, 0.025]
rows = []
for e in eps_list:
    _, rep, _ = iterate_nanopteron(DimerParams(2.0, e))
    rows.append((e, rep.eta_norms["h1"], abs(rep.a_value), rep.extra["kappa_rel_gap"]))
    print(f"eps = {e:<6} |eta|_H1 = {rows[-1][1]:.3e}  |a| = {rows[-1][2]:.3e}  "
          f"kappa gap = {rows[-1][3]:.1e}")

e = np.array(eps_list)
eta = np.array([r[1] for r in rows])
print("fitted slope of log|eta| vs log eps:", np.polyfit(np.log(e), np.log(eta), 1)[0])
for r in (1, 2, 3):
    print(f"|a|/eps^{r}:", ", ".join(f"{x[2] / x[0] ** r:.2e}" for x in rows))
