"""Gaussian variational reduction of the coupled condensate-membrane system.

The condensate is a single-site Gaussian of width ``sigma`` centred at
``zeta``; the order parameter is ``S = sin(2 zeta)``.  The membrane is
described by the real part ``alpha'`` of its (1/sqrt(N) scaled) amplitude,
the imaginary part being slaved to it by the stationary damped equation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .params import ModelParams, effective_membrane_frequency, lambda_cV

SQRT8PI = math.sqrt(8.0 * math.pi)

# the width equation sigma^4 exp(-k sigma^2) = rhs has its physical (narrow)
# root below the maximum at sigma^2 = 2/k
_SIGMA_MIN = 1e-6


class SolverError(RuntimeError):
    """Root finder or integrator did not converge."""

    def __init__(self, message, residual=None, time=None):
        super().__init__(message)
        self.residual = residual
        self.time = time


@dataclass(frozen=True)
class GaussianState:
    zeta: float
    sigma: float
    kappa: float = 0.0
    beta: float = 0.0
    alpha: complex = 0j

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "zeta", wrap_cell(self.zeta))
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def S(self) -> float:
        return math.sin(2.0 * self.zeta)


@dataclass(frozen=True)
class SteadyState:
    alpha_prime0: float
    alpha_dprime0: float
    sigma0: float
    S0: float
    zeta0: float
    branch: int
    residuals: tuple = (0.0, 0.0)


def wrap_cell(z: float) -> float:
    """Map a position into the principal lattice cell (-pi/2, pi/2]."""
    w = (z + math.pi / 2) % math.pi - math.pi / 2
    return math.pi / 2 if w == -math.pi / 2 else w


def _check_domain(sigma, S=None):
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be positive")
    if S is not None and np.any(np.abs(np.asarray(S)) > 1):
        raise ValueError("order parameter must satisfy |S| <= 1")


def energy(alpha_prime, sigma, S, p: ModelParams):
    """Variational potential energy per atom.

    ``E = gN/(sqrt(8 pi) sigma) - [V sqrt(1-S^2) + 4 Lambda alpha' S] / (2 e^{sigma^2})
    + omega_R/(2 sigma^2) + Omega_eff alpha'^2``.  Accepts broadcastable arrays.
    """
    _check_domain(sigma, S)
    Om = effective_membrane_frequency(p)
    c = np.sqrt(1.0 - np.square(S))
    return (p.gN / (SQRT8PI * sigma)
            - (p.V * c + 4.0 * p.Lambda * alpha_prime * S) * np.exp(-np.square(sigma)) / 2.0
            + p.omega_R / (2.0 * np.square(sigma))
            + Om * np.square(alpha_prime))


def energy_zeta(alpha_prime, sigma, zeta, p: ModelParams):
    """Energy written with the centre of mass ``zeta`` (``sqrt(1-S^2) -> cos 2 zeta``)."""
    _check_domain(sigma)
    Om = effective_membrane_frequency(p)
    e = math.exp(-sigma * sigma)
    return (p.gN / (SQRT8PI * sigma)
            - (p.V * math.cos(2 * zeta) + 4.0 * p.Lambda * alpha_prime * math.sin(2 * zeta)) * e / 2.0
            + p.omega_R / (2.0 * sigma * sigma)
            + Om * alpha_prime * alpha_prime)


def energy_gradient(alpha_prime, sigma, zeta, p: ModelParams):
    """Analytic partial derivatives ``(dE/dalpha', dE/dsigma, dE/dzeta)`` with S = sin 2 zeta."""
    _check_domain(sigma)
    Om = effective_membrane_frequency(p)
    e = math.exp(-sigma * sigma)
    s2, c2 = math.sin(2 * zeta), math.cos(2 * zeta)
    A = p.V * c2 + 4.0 * p.Lambda * alpha_prime * s2
    dE_da = 2.0 * Om * alpha_prime - 2.0 * p.Lambda * s2 * e
    dE_ds = -p.gN / (SQRT8PI * sigma**2) + A * sigma * e - p.omega_R / sigma**3
    dE_dz = (p.V * s2 - 4.0 * p.Lambda * alpha_prime * c2) * e
    return dE_da, dE_ds, dE_dz


def energy_hessian_diag(alpha_prime, sigma, zeta, p: ModelParams):
    """Second derivatives ``(d2E/dzeta2, d2E/dsigma2)`` at fixed membrane amplitude."""
    e = math.exp(-sigma * sigma)
    s2, c2 = math.sin(2 * zeta), math.cos(2 * zeta)
    A = p.V * c2 + 4.0 * p.Lambda * alpha_prime * s2
    d2z = 2.0 * A * e
    d2s = (2.0 * p.gN / (SQRT8PI * sigma**3) + A * (1.0 - 2.0 * sigma**2) * e
           + 3.0 * p.omega_R / sigma**4)
    return d2z, d2s


# -- steady states --------------------------------------------------------

def _solve_width(k: float, rhs_fn, p: ModelParams) -> float:
    """Narrow root of ``sigma^4 exp(-k sigma^2) = rhs_fn(sigma)``."""
    s_max = math.sqrt(2.0 / k)

    def f(s):
        return s**4 * math.exp(-k * s * s) - rhs_fn(s)

    if f(s_max) <= 0:
        raise SolverError("width equation has no narrow root; lattice too shallow",
                          residual=f(s_max))
    s = brentq(f, _SIGMA_MIN, s_max, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return s


def symmetric_width(p: ModelParams) -> float:
    """Equilibrium width of the symmetric (S=0) state; independent of Lambda."""
    return _solve_width(1.0, lambda s: (p.omega_R + p.gN * s / SQRT8PI) / p.V, p)


def _broken_width(p: ModelParams) -> float:
    ratio = lambda_cV(p) ** 2 / (p.V * p.Lambda**2)
    return _solve_width(2.0, lambda s: (p.omega_R + p.gN * s / SQRT8PI) * ratio, p)


def steady_state_residuals(ss: SteadyState, p: ModelParams):
    """Residuals of the width equation and of the order-parameter equation."""
    s, S = ss.sigma0, ss.S0
    c = math.sqrt(max(0.0, 1.0 - S * S))
    r1 = c * (p.omega_R + p.gN * s / SQRT8PI) - p.V * s**4 * math.exp(-s * s)
    r2 = S * (p.Lambda**2 * c - lambda_cV(p) ** 2 * math.exp(s * s)) / max(p.Lambda**2, 1.0)
    return r1, r2


def _make_state(p, sigma, S, branch):
    Om = effective_membrane_frequency(p)
    a1 = p.Lambda * S * math.exp(-sigma * sigma) / Om
    ss = SteadyState(alpha_prime0=a1, alpha_dprime0=p.gamma * a1 / p.Omega_m, sigma0=sigma,
                     S0=S, zeta0=0.5 * math.asin(S), branch=branch)
    res = steady_state_residuals(ss, p)
    if max(abs(r) for r in res) > 1e-10:
        raise SolverError("steady-state residual above tolerance", residual=res)
    return SteadyState(**{**ss.__dict__, "residuals": res})


def steady_state(p: ModelParams, branch: int = 1) -> SteadyState:
    """Equilibrium membrane displacement, width and order parameter.

    The symmetry-broken solution is returned whenever it exists, i.e. when
    the narrow width root of the broken branch gives ``sqrt(1-S0^2) < 1``;
    otherwise the symmetric solution (S0 = 0) is returned with branch 0.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    # a broken solution needs Lambda^2 > Lambda_cV^2 exp(sigma^2) > Lambda_cV^2
    if p.Lambda > lambda_cV(p):
        try:
            sigma_b = _broken_width(p)
        except SolverError:
            sigma_b = None
        if sigma_b is not None:
            c = lambda_cV(p) ** 2 * math.exp(sigma_b**2) / p.Lambda**2
            if c < 1.0:
                S = branch * math.sqrt(1.0 - c * c)
                return _make_state(p, sigma_b, S, branch)
    return _make_state(p, symmetric_width(p), 0.0, 0)


def _critical_ratio_eq(r, p: ModelParams):
    L = math.log(r)
    return 4.0 * p.V * (L / r) ** 2 - (p.omega_R + p.gN / SQRT8PI * math.sqrt(2.0 * L))


def critical_coupling(p: ModelParams) -> float:
    """Critical scaled coupling ``Lambda_c`` of the symmetry-breaking transition.

    Solves the implicit threshold equation for ``r = Lambda_c / Lambda_cV`` by
    bracketed root search on ``(1, 10]``, taking the smallest root.
    """
    f = lambda r: _critical_ratio_eq(r, p)
    grid = np.linspace(1.0, 10.0, 2001)[1:]
    vals = np.array([f(r) for r in grid])
    sign_change = np.nonzero(vals > 0)[0]
    if f(1.0 + 1e-300) > 0 or len(sign_change) == 0:
        raise SolverError("no critical coupling bracketed in (Lambda_cV, 10 Lambda_cV]")
    j = sign_change[0]
    lo = 1.0 if j == 0 else grid[j - 1]
    r = brentq(f, lo, grid[j], xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(r)) > 1e-12:
        raise SolverError("critical-coupling residual above tolerance", residual=f(r))
    return r * lambda_cV(p)


def order_parameter(p: ModelParams, Lambda: float | None = None, branch: int = 1) -> float:
    """Closed-form order parameter ``S0 = sqrt(1 - (Lambda_cV/Lambda)^4 e^{2 sigma0^2})`` above threshold."""
    if Lambda is not None:
        p = p.replace(Lambda=Lambda)
    ss = steady_state(p, branch)
    if ss.branch == 0:
        return 0.0
    val = 1.0 - (lambda_cV(p) / p.Lambda) ** 4 * math.exp(2.0 * ss.sigma0**2)
    return branch * math.sqrt(max(val, 0.0))


def adiabatic_coupling_G0(p: ModelParams) -> float:
    """Strength ``N G0 = -2 Lambda^2 / Omega_eff`` of the membrane-mediated interaction."""
    return -2.0 * p.Lambda**2 / effective_membrane_frequency(p)


# -- energy landscape -----------------------------------------------------

@dataclass
class EnergySurface:
    S: np.ndarray
    Lambda: np.ndarray
    eps: np.ndarray          # shape (len(Lambda), len(S))
    energy: np.ndarray       # minimised energy E(S) before normalisation
    sigma: np.ndarray        # optimal width at each cell
    S0: np.ndarray           # minimum locus (positive branch)
    failed: np.ndarray       # boolean per-cell error marker


def reduced_energy(sigma, S, p: ModelParams):
    """Energy with the membrane amplitude minimised out in closed form."""
    Om = effective_membrane_frequency(p)
    return (p.gN / (SQRT8PI * sigma) - p.V * math.sqrt(1 - S * S) * math.exp(-sigma**2) / 2
            + p.omega_R / (2 * sigma**2) - (p.Lambda * S) ** 2 * math.exp(-2 * sigma**2) / Om)


def _min_over_sigma(S, p):
    res = minimize_scalar(lambda s: reduced_energy(s, S, p), bounds=(0.02, math.pi / 2),
                          method="bounded", options={"xatol": 1e-10, "maxiter": 500})
    return res.x, res.fun, bool(res.success and np.isfinite(res.fun))


def energy_surface(p: ModelParams, S_grid, Lambda_grid) -> EnergySurface:
    """Normalised landscape ``eps(S, Lambda) = (E(S)-E(S0)) / max(E(S)-E(S0))``.

    ``E(S)`` is minimised over the width (bounded by the half cell) and over
    the membrane displacement, which is done in closed form.
    """
    S_grid = np.asarray(S_grid, dtype=float)
    L_grid = np.asarray(Lambda_grid, dtype=float)
    if S_grid.size == 0 or L_grid.size == 0:
        raise ValueError("grids must be non-empty")
    _check_domain(1.0, S_grid)
    E = np.full((L_grid.size, S_grid.size), np.nan)
    sig = np.full_like(E, np.nan)
    failed = np.zeros(E.shape, dtype=bool)
    eps = np.full_like(E, np.nan)
    S0 = np.zeros(L_grid.size)
    for i, L in enumerate(L_grid):
        pl = p.replace(Lambda=float(L))
        for j, S in enumerate(S_grid):
            try:
                s, e, ok = _min_over_sigma(float(S), pl)
            except (ValueError, FloatingPointError):
                s, e, ok = np.nan, np.nan, False
            E[i, j], sig[i, j], failed[i, j] = e, s, not ok
        ss = steady_state(pl)
        S0[i] = abs(ss.S0)
        E0 = reduced_energy(ss.sigma0, ss.S0, pl)
        row = E[i] - E0
        top = np.nanmax(row)
        eps[i] = row / top if top > 0 else 0.0
    return EnergySurface(S=S_grid, Lambda=L_grid, eps=eps, energy=E, sigma=sig, S0=S0, failed=failed)


# -- dynamics -------------------------------------------------------------

@dataclass
class Trajectory:
    t: np.ndarray
    alpha_prime: np.ndarray
    alpha_prime_dot: np.ndarray
    zeta: np.ndarray
    zeta_dot: np.ndarray
    sigma: np.ndarray
    sigma_dot: np.ndarray
    params: ModelParams

    @property
    def S(self):
        return np.sin(2 * self.zeta)

    @property
    def kappa(self):
        # zeta_dot = 2 omega_R (kappa + 2 beta zeta), sigma_dot = 4 omega_R beta sigma
        return self.zeta_dot / (2 * self.params.omega_R) - 2 * self.beta * self.zeta

    @property
    def beta(self):
        return self.sigma_dot / (4 * self.params.omega_R * self.sigma)

    def potential_energy(self):
        return np.array([energy_zeta(a, s, z, self.params)
                         for a, s, z in zip(self.alpha_prime, self.sigma, self.zeta)])

    def total_energy(self):
        """Kinetic plus potential energy; conserved when gamma = 0."""
        p = self.params
        kin = (self.alpha_prime_dot**2 / p.Omega_m + self.zeta_dot**2 / (4 * p.omega_R)
               + self.sigma_dot**2 / (8 * p.omega_R))
        return kin + self.potential_energy()

    def state(self, i=-1) -> GaussianState:
        return GaussianState(zeta=float(self.zeta[i]), sigma=float(self.sigma[i]),
                             kappa=float(self.kappa[i]), beta=float(self.beta[i]),
                             alpha=complex(self.alpha_prime[i], self.params.gamma
                                           * self.alpha_prime[i] / self.params.Omega_m))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "alpha_prime", "alpha_prime_dot", "zeta", "sigma", "S", "energy"])
            E = self.total_energy()
            for row in zip(self.t, self.alpha_prime, self.alpha_prime_dot, self.zeta,
                           self.sigma, self.S, E):
                w.writerow([f"{x:.17g}" for x in row])


def _accelerations(a, s, z, p: ModelParams):
    dE_da, dE_ds, dE_dz = energy_gradient(a, s, z, p)
    return -0.5 * p.Omega_m * dE_da, -4.0 * p.omega_R * dE_ds, -2.0 * p.omega_R * dE_dz


def initial_velocities(state: GaussianState, p: ModelParams):
    """Velocities implied by the phases ``kappa`` and ``beta`` of a Gaussian state."""
    zd = 2 * p.omega_R * (state.kappa + 2 * state.beta * state.zeta)
    sd = 4 * p.omega_R * state.beta * state.sigma
    return 0.0, zd, sd


def evolve(initial: GaussianState, p: ModelParams, t_end: float, dt: float | None = None,
           sample_every: int = 100, method: str = "leapfrog", velocities=None,
           rtol: float = 1e-11, atol: float = 1e-13) -> Trajectory:
    """Integrate the variational equations of motion.

    ``alpha'' + 2 gamma alpha' = -(Omega_m/2) dE/dalpha'``,
    ``zeta'' = -2 omega_R dE/dzeta`` and ``sigma'' = -4 omega_R dE/dsigma``.

    ``method="leapfrog"`` (default) is a fixed-step velocity Verlet with the
    membrane damping applied exactly in half steps around it.
    ``method="adaptive"`` uses an embedded 8th order Runge-Kutta scheme.
    """
    dt = 1e-3 / p.Omega_m if dt is None else dt
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end non-negative")
    a = initial.alpha.real
    z, s = initial.zeta, initial.sigma
    va, vz, vs = initial_velocities(initial, p) if velocities is None else velocities

    if method == "adaptive":
        def rhs(t, y):
            aa, sa, za = _accelerations(y[0], y[4], y[2], p)
            return [y[1], aa - 2 * p.gamma * y[1], y[3], za, y[5], sa]

        n_samples = max(int(round(t_end / (dt * sample_every))), 1)
        t_eval = np.linspace(0.0, t_end, n_samples + 1)
        sol = solve_ivp(rhs, (0.0, t_end), [a, va, z, vz, s, vs], method="DOP853",
                        t_eval=t_eval, rtol=rtol, atol=atol)
        if not sol.success:
            raise SolverError(f"adaptive integration failed: {sol.message}",
                              time=float(sol.t[-1]) if sol.t.size else 0.0)
        y = sol.y
        return Trajectory(sol.t, y[0], y[1], y[2], y[3], y[4], y[5], p)
    if method != "leapfrog":
        raise ValueError(f"unknown method {method!r}")

    n_steps = int(round(t_end / dt))
    damp = math.exp(-p.gamma * dt)  # exp(-2 gamma dt/2)
    h = 0.5 * dt
    rows = [(0.0, a, va, z, vz, s, vs)]
    fa, fs, fz = _accelerations(a, s, z, p)
    for n in range(1, n_steps + 1):
        va *= damp
        va += h * fa
        vz += h * fz
        vs += h * fs
        a += dt * va
        z += dt * vz
        s += dt * vs
        if s <= 0 or not math.isfinite(s + a + z):
            raise SolverError("integration left the physical domain", time=n * dt)
        fa, fs, fz = _accelerations(a, s, z, p)
        va += h * fa
        vz += h * fz
        vs += h * fs
        va *= damp
        if n % sample_every == 0 or n == n_steps:
            rows.append((n * dt, a, va, z, vz, s, vs))
    arr = np.array(rows)
    return Trajectory(*arr.T, params=p)
