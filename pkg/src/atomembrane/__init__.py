"""Mean-field simulator for a lattice condensate coupled to a damped membrane mode.

Two independent routes are provided: a Gaussian variational reduction
(:mod:`atomembrane.variational`, :mod:`atomembrane.linear_response`) and a
one-dimensional Gross-Pitaevskii solver (:mod:`atomembrane.gpe`).  All
quantities are in recoil units with scaled couplings ``Lambda = sqrt(N) lambda``
and ``gN = g N``.
"""

__version__ = "0.1.0"

from .params import ModelParams, from_preset, effective_membrane_frequency, lambda_cV  # noqa: E402
from .variational import (  # noqa: E402
    GaussianState, SolverError, SteadyState, critical_coupling, energy, energy_surface,
    order_parameter, steady_state,
)

__all__ = [
    "ModelParams", "from_preset", "effective_membrane_frequency", "lambda_cV",
    "GaussianState", "SolverError", "SteadyState", "critical_coupling", "energy",
    "energy_surface", "order_parameter", "steady_state", "__version__",
]
