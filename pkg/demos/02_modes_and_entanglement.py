"""Soft mode, overdamped window and atom-membrane entanglement.

Linearising the variational equations gives six eigenvalues
nu = i*omega - gamma_k.  The condensate displacement mode softens as the
coupling approaches Lambda_c.  With damping it becomes purely relaxational
in a narrow window around Lambda_c.  Without damping the undamped ground
state is Gaussian, and its logarithmic negativity diverges at the
transition.
"""

import numpy as np

from atomembrane.linear_response import (build_M, eigenmodes, ground_state_covariance, linearize,
                                         log_negativity, overdamped_window)
from atomembrane.params import ModelParams
from atomembrane.variational import critical_coupling

p = ModelParams()
Lc = critical_coupling(p)

print("Lambda/Lc   lowest omega   lowest decay")
for x in (0.0, 0.5, 0.9, 0.99, 1.0, 1.01, 1.2):
    ms = eigenmodes(build_M(linearize(p.replace(Lambda=x * Lc))))
    nu = ms.eigenvalues[0]
    print(f"{x:8.2f}   {abs(nu.imag):11.5f}   {-nu.real:11.5f}")

w = overdamped_window(p, Lc)
print(f"\noverdamped window: [{w.lower:.5f}, {w.upper:.5f}], width {w.width:.4f}")

p0 = p.replace(gamma=0.0)
Lc0 = critical_coupling(p0)
print(f"\nundamped ground state (Lambda_c = {Lc0:.4f})")
for d in (0.5, 0.1, 1e-2, 1e-4, 1e-6):
    C = ground_state_covariance(linearize(p0.replace(Lambda=Lc0 * (1 - d))))
    print(f"1 - Lambda/Lc = {d:7.0e}:  E_N(membrane-displacement) = {log_negativity(C):.4f}"
          f"   E_N(membrane-width) = {log_negativity(C, 'membrane-width'):.1f}")
