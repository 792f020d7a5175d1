"""Symmetry breaking of a condensate coupled to a membrane.

Below the critical coupling the condensate sits at the bottom of each
lattice well and the membrane is at rest.  Above it the condensate shifts
to one side, the membrane is displaced, and the order parameter
S0 = sin(2 zeta0) becomes finite.  This script locates the transition and
prints the order parameter on both sides of it.
"""

import numpy as np

from atomembrane import critical_coupling, steady_state
from atomembrane.params import ModelParams, lambda_cV

p = ModelParams()                      # V=200, Omega_m=100, gamma=20, gN=0
Lc = critical_coupling(p)
print(f"critical coupling Lambda_c = {Lc:.6f}")
print(f"naive estimate   Lambda_cV = {lambda_cV(p):.6f}  (ratio {Lc / lambda_cV(p):.6f})")

# The width at threshold fixes the ratio: sigma0^2 = 2 ln(Lambda_c / Lambda_cV).
s = steady_state(p.replace(Lambda=Lc)).sigma0
print(f"sigma0(Lambda_c)^2 = {s * s:.10f},  2 ln ratio = {2 * np.log(Lc / lambda_cV(p)):.10f}")

print("\n Lambda     S0        sigma0    alpha'")
for L in (0.0, 50.0, 0.99 * Lc, 1.01 * Lc, 100.0, 150.0):
    ss = steady_state(p.replace(Lambda=float(L)))
    print(f"{L:7.2f}  {ss.S0:8.5f}  {ss.sigma0:8.5f}  {ss.alpha_prime0:8.5f}")

# Repulsive interactions widen the condensate and push the transition out.
for gN in (0.0, 5.0, 10.0):
    print(f"gN = {gN:4.1f}: Lambda_c = {critical_coupling(p.replace(gN=gN)):.4f}")
