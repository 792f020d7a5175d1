"""Generalised Gross-Pitaevskii equation on a single periodic lattice cell.

The condensate lives on ``[-pi/2, pi/2)`` with periodic boundary conditions
and unit norm; the membrane amplitude ``alpha`` is scaled by ``1/sqrt(N)``
so that the coupling appears as ``Lambda = sqrt(N) lambda``::

    i psi_t   = [-omega_R d_z^2 + V sin^2 z + gN |psi|^2 - 2 Lambda alpha' sin 2z] psi
    i alpha_t = (Omega_m - i gamma) alpha - Lambda int sin(2z) |psi|^2 dz
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .params import ModelParams, effective_membrane_frequency
from .variational import SolverError


@dataclass(frozen=True)
class Grid:
    n_points: int = 256

    def __post_init__(self):
        if self.n_points < 64 or self.n_points % 2:
            raise ValueError("n_points must be even and >= 64")

    @property
    def dz(self) -> float:
        return math.pi / self.n_points

    @property
    def z(self) -> np.ndarray:
        return -math.pi / 2 + self.dz * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        # period pi -> wavenumbers are even integers
        return 2.0 * np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)

    def kinetic_matrix(self, omega_R: float = 1.0) -> np.ndarray:
        """Dense spectral representation of ``-omega_R d^2/dz^2``."""
        eye = np.eye(self.n_points)
        return omega_R * np.fft.ifft(self.k[:, None] ** 2 * np.fft.fft(eye, axis=0), axis=0).real

    def integrate(self, f) -> float:
        return float(np.sum(f) * self.dz)


@dataclass
class Wavefunction:
    grid: Grid
    amplitudes: np.ndarray

    @property
    def density(self):
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return self.grid.integrate(self.density)

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes / math.sqrt(self.norm()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z", "re_psi", "im_psi", "abs_psi_sq"])
            for z, a in zip(self.grid.z, self.amplitudes):
                w.writerow([f"{z:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}", f"{abs(a) ** 2:.17g}"])


def gaussian(grid: Grid, center: float, width: float) -> Wavefunction:
    d = (grid.z - center + math.pi / 2) % math.pi - math.pi / 2
    return Wavefunction(grid, np.exp(-d**2 / (2 * width**2)).astype(complex)).normalized()


def overlap_integral(psi: Wavefunction) -> float:
    """``I = int sin(2z) |psi|^2 dz``, the force on the membrane."""
    return psi.grid.integrate(np.sin(2 * psi.grid.z) * psi.density)


def _kinetic_energy(psi: np.ndarray, grid: Grid, omega_R: float) -> float:
    ft = np.fft.fft(psi)
    return omega_R * float(np.sum(grid.k**2 * np.abs(ft) ** 2)) * grid.dz / grid.n_points


def mean_field_energy(psi: Wavefunction, alpha: complex, p: ModelParams) -> float:
    """Total energy per atom of the coupled system (conserved for gamma = 0)."""
    g = psi.grid
    n = psi.density
    kin = _kinetic_energy(psi.amplitudes, g, p.omega_R)
    pot = g.integrate(p.V * np.sin(g.z) ** 2 * n) + 0.5 * p.gN * g.integrate(n * n)
    I = g.integrate(np.sin(2 * g.z) * n)
    return kin + pot - 2 * p.Lambda * alpha.real * I + p.Omega_m * abs(alpha) ** 2


def stationary_alpha(I: float, p: ModelParams) -> complex:
    return p.Lambda * I / complex(p.Omega_m, -p.gamma)


@dataclass
class GroundState:
    psi: Wavefunction
    alpha: complex
    mu: float
    energy: float
    steps: int
    newton_iterations: int = 0


def _polish(psi_r, grid, p, kernel_jac, potential, max_iter=30, tol=1e-12):
    """Newton iterations on ``H[psi] psi = mu psi`` with the norm constraint (real psi).

    Stops on a small residual or once the Newton update reaches round-off
    (the dense kinetic matrix limits the attainable residual to ~1e-11).
    """
    n = grid.n_points
    T = grid.kinetic_matrix(p.omega_R)
    kin = p.omega_R * grid.k**2
    dz = grid.dz
    psi = psi_r.copy()
    mu = None
    for it in range(max_iter):
        U = potential(psi)
        Hpsi = np.fft.ifft(kin * np.fft.fft(psi)).real + U * psi
        if mu is None:
            mu = float(psi @ Hpsi * dz)
        F = np.r_[Hpsi - mu * psi, psi @ psi * dz - 1.0]
        if np.abs(F).max() < tol * max(1.0, abs(mu)):
            return psi, mu, it
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = T + np.diag(U + 2 * p.gN * psi**2 - mu) + kernel_jac(psi)
        J[:n, n] = -psi
        J[n, :n] = 2 * psi * dz
        step = np.linalg.solve(J, -F)
        psi = psi + step[:n]
        mu = mu + step[n]
        if np.abs(step).max() < 1e-13 * max(1.0, abs(mu)):
            return psi, mu, it + 1
    raise SolverError("Newton polish of the ground state did not converge",
                      residual=float(np.abs(F).max()))


def _imaginary_time(psi, grid, p, potential_fn, energy_fn, dtau, tol, max_steps):
    kin = np.exp(-0.5 * dtau * p.omega_R * grid.k**2)
    E_old = energy_fn(psi)
    steps = 0
    for steps in range(1, max_steps + 1):
        phi = np.fft.ifft(kin * np.fft.fft(psi))
        phi = phi * np.exp(-dtau * potential_fn(phi))
        phi = np.fft.ifft(kin * np.fft.fft(phi))
        phi /= math.sqrt(grid.integrate(np.abs(phi) ** 2))
        if not np.all(np.isfinite(phi)):
            raise SolverError(f"NaN in imaginary-time propagation at step {steps}")
        E = energy_fn(phi)
        if E > E_old + 1e-13 * max(1.0, abs(E_old)):
            dtau *= 0.5
            kin = np.exp(-0.5 * dtau * p.omega_R * grid.k**2)
            if dtau < 1e-12:
                break
        psi = phi
        if abs(E - E_old) < tol:
            E_old = E
            break
        E_old = E
    return psi, steps


def ground_state(p: ModelParams, grid: Grid | None = None, seed_offset: float = 0.01,
                 dtau: float = 1e-4, tol: float = 1e-12, max_steps: int = 200_000,
                 polish: bool = True) -> GroundState:
    """Stationary state of the coupled system by imaginary-time propagation.

    The membrane is eliminated self-consistently at every step through
    ``alpha0 = Lambda I / (Omega_m - i gamma)``.  The initial Gaussian is
    displaced by ``seed_offset`` to select the symmetry-broken branch; with
    ``seed_offset = 0`` the symmetric extremum is found even where unstable.
    A Newton polish removes the splitting error of the propagator.
    """
    grid = Grid() if grid is None else grid
    z = grid.z
    s2z = np.sin(2 * z)
    Om = effective_membrane_frequency(p)
    Vlat = p.V * np.sin(z) ** 2
    coef = 2 * p.Lambda**2 / Om

    def pot(phi):
        n = np.abs(phi) ** 2
        I = grid.integrate(s2z * n)
        return Vlat + p.gN * n - coef * I * s2z

    def en(phi):
        n = np.abs(phi) ** 2
        I = grid.integrate(s2z * n)
        return (_kinetic_energy(phi, grid, p.omega_R) + grid.integrate(Vlat * n)
                + 0.5 * p.gN * grid.integrate(n * n) - 0.5 * coef * I * I)

    width = (p.omega_R / p.V) ** 0.25
    psi0 = gaussian(grid, seed_offset, width).amplitudes
    psi, steps = _imaginary_time(psi0, grid, p, pot, en, dtau, tol, max_steps)
    its = 0
    if polish:
        def kernel_jac(ph):
            v = s2z * ph
            return -coef * np.outer(v, 2 * v * grid.dz)
        psi_r, mu, its = _polish(psi.real, grid, p, kernel_jac, lambda ph: pot(ph).real)
        psi = psi_r.astype(complex)
    wf = Wavefunction(grid, psi).normalized()
    I = overlap_integral(wf)
    alpha = stationary_alpha(I, p)
    mu = float(np.real(np.vdot(wf.amplitudes, grid.kinetic_matrix(p.omega_R) @ wf.amplitudes
                                + pot(wf.amplitudes) * wf.amplitudes)) * grid.dz)
    return GroundState(wf, alpha, mu, mean_field_energy(wf, alpha, p), steps, its)


def ground_state_nonlocal(p: ModelParams, kernel, grid: Grid | None = None,
                          seed_offset: float = 0.01, dtau: float = 1e-4, tol: float = 1e-12,
                          max_steps: int = 200_000) -> GroundState:
    """Ground state with the membrane replaced by a two-body interaction ``G(z, z')``.

    ``kernel`` is a callable ``G(z, z')`` (broadcasting) or a dense matrix on
    the grid.  The Hartree potential is ``int G(z, z') |psi(z')|^2 dz'``.
    No membrane variable is involved.
    """
    grid = Grid() if grid is None else grid
    z = grid.z
    G = kernel(z[:, None], z[None, :]) if callable(kernel) else np.asarray(kernel, dtype=float)
    Vlat = p.V * np.sin(z) ** 2

    def pot(phi):
        n = np.abs(phi) ** 2
        return Vlat + p.gN * n + G @ n * grid.dz

    def en(phi):
        n = np.abs(phi) ** 2
        return (_kinetic_energy(phi, grid, p.omega_R) + grid.integrate(Vlat * n)
                + 0.5 * p.gN * grid.integrate(n * n) + 0.5 * float(n @ G @ n) * grid.dz**2)

    psi0 = gaussian(grid, seed_offset, (p.omega_R / p.V) ** 0.25).amplitudes
    psi, steps = _imaginary_time(psi0, grid, p, pot, en, dtau, tol, max_steps)
    psi_r, mu, its = _polish(psi.real, grid, p,
                             lambda ph: G * (ph[:, None] * 2 * ph[None, :] * grid.dz),
                             lambda ph: pot(ph).real)
    wf = Wavefunction(grid, psi_r.astype(complex)).normalized()
    return GroundState(wf, 0j, mu, en(wf.amplitudes), steps, its)


def membrane_kernel(p: ModelParams):
    """``G(z, z') = N G0 sin(2z) sin(2z')`` with ``N G0 = -2 Lambda^2 / Omega_eff``."""
    NG0 = -2 * p.Lambda**2 / effective_membrane_frequency(p)
    return lambda z1, z2: NG0 * np.sin(2 * z1) * np.sin(2 * z2)


# -- real time --------------------------------------------------------------------

@dataclass
class GPETrajectory:
    t: np.ndarray
    alpha: np.ndarray
    zeta: np.ndarray
    width: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    psi_final: Wavefunction
    alpha_final: complex

    @property
    def S(self):
        return np.sin(2 * self.zeta)


def center_and_width(psi: Wavefunction):
    """Circular centre of mass in the cell and width ``sqrt(2 <(z - zeta)^2>)``."""
    g = psi.grid
    n = psi.density / psi.norm()
    zeta = 0.5 * math.atan2(g.integrate(np.sin(2 * g.z) * n), g.integrate(np.cos(2 * g.z) * n))
    d = (g.z - zeta + math.pi / 2) % math.pi - math.pi / 2
    return zeta, math.sqrt(2 * g.integrate(d * d * n))


def evolve(psi: Wavefunction, alpha: complex, p: ModelParams, t_end: float, dt: float = 1e-4,
           sample_every: int = 100) -> GPETrajectory:
    """Real-time Strang splitting of the coupled equations.

    Each step is membrane(dt/2) - condensate(dt) - membrane(dt/2).  The
    membrane sub-step solves the damped linear equation exactly at frozen
    density; the condensate sub-step is potential(dt/2) - kinetic(dt) -
    potential(dt/2) at frozen ``alpha``.  Both preserve the norm exactly.
    """
    g = psi.grid
    z = g.z
    s2z = np.sin(2 * z)
    Vlat = p.V * np.sin(z) ** 2
    scale = p.V + p.gN * float(psi.density.max()) + 2 * p.Lambda * abs(alpha) + p.Omega_m
    if dt * scale > 0.1:
        warnings.warn(f"dt * (potential energy scale) = {dt * scale:.3g} > 0.1; "
                      "phase errors may be large", RuntimeWarning)
    kin = np.exp(-1j * dt * p.omega_R * g.k**2)
    w = complex(p.Omega_m, -p.gamma)
    ph = np.exp(-1j * w * dt / 2)
    relax = (1 - ph) / w

    phi = psi.amplitudes.astype(complex).copy()
    a = complex(alpha)
    n_steps = int(round(t_end / dt))
    rec = []

    def record(t):
        wf = Wavefunction(g, phi)
        zeta, width = center_and_width(wf)
        rec.append((t, a, zeta, width, wf.norm(), mean_field_energy(wf, a, p)))

    record(0.0)
    for step in range(1, n_steps + 1):
        I = g.integrate(s2z * np.abs(phi) ** 2)
        a = ph * a + p.Lambda * I * relax
        V = Vlat + p.gN * np.abs(phi) ** 2 - 2 * p.Lambda * a.real * s2z
        phi = phi * np.exp(-0.5j * dt * V)
        phi = np.fft.ifft(kin * np.fft.fft(phi))
        V = Vlat + p.gN * np.abs(phi) ** 2 - 2 * p.Lambda * a.real * s2z
        phi = phi * np.exp(-0.5j * dt * V)
        I = g.integrate(s2z * np.abs(phi) ** 2)
        a = ph * a + p.Lambda * I * relax
        if step % sample_every == 0 or step == n_steps:
            if not np.all(np.isfinite(phi)):
                raise SolverError(f"NaN in real-time evolution at t = {step * dt:.6g}", time=step * dt)
            record(step * dt)
    t, al, ze, wi, no, en = (np.array(c) for c in zip(*rec))
    return GPETrajectory(t, al, ze, wi, no, en, Wavefunction(g, phi), a)


# -- Bogoliubov-de Gennes ---------------------------------------------------------------

@dataclass
class BdGMatrix:
    matrix: np.ndarray
    psi0: np.ndarray
    grid: Grid
    params: ModelParams

    @property
    def dim(self):
        return self.matrix.shape[0]


def bdg_matrix(psi0: Wavefunction, alpha0: complex, mu: float, p: ModelParams) -> BdGMatrix:
    """Linearised coupled equations around a stationary state.

    Unknowns are ``(d_alpha_+, u(z), d_alpha_-, v(z))`` and the matrix is
    ``[[X, Y], [-Y*, -X*]]``.  The membrane row couples through
    ``Lambda Q[f]`` with ``Q[f] = int psi0 sin(2z) f dz``.
    """
    g = psi0.grid
    amp = psi0.amplitudes
    j = int(np.argmax(np.abs(amp)))
    amp = amp * np.exp(-1j * np.angle(amp[j]))
    if np.abs(amp.imag).max() > 1e-8 * np.abs(amp).max():
        raise ValueError("stationary state cannot be made real by a global phase")
    ps = amp.real / math.sqrt(g.integrate(amp.real**2))
    z = g.z
    s2z = np.sin(2 * z)
    n = g.n_points
    h0 = g.kinetic_matrix(p.omega_R) + np.diag(
        p.V * np.sin(z) ** 2 + p.gN * ps**2 - 2 * p.Lambda * alpha0.real * s2z - mu)
    Q = ps * s2z * g.dz
    force = -p.Lambda * s2z * ps
    X = np.zeros((n + 1, n + 1), dtype=complex)
    Y = np.zeros((n + 1, n + 1), dtype=complex)
    X[0, 0] = complex(p.Omega_m, -p.gamma)
    X[0, 1:] = -p.Lambda * Q
    X[1:, 0] = force
    X[1:, 1:] = h0 + np.diag(p.gN * ps**2)
    Y[0, 1:] = -p.Lambda * Q
    Y[1:, 0] = force
    Y[1:, 1:] = np.diag(p.gN * ps**2)
    M = np.block([[X, Y], [-Y.conj(), -X.conj()]])
    return BdGMatrix(M, ps, g, p)


@dataclass
class BdGModes:
    raw: np.ndarray                 # eigenvalues nu with time dependence exp(-i nu t)
    eigenvalues: np.ndarray         # physical branch, convention i*omega - gamma_k
    eigenvectors: np.ndarray
    labels: list
    zero_mode_index: int

    @property
    def frequencies(self):
        return self.eigenvalues.imag

    @property
    def decay_rates(self):
        return -self.eigenvalues.real

    def lowest(self, label=None):
        idx = [i for i, lab in enumerate(self.labels) if label is None or lab == label]
        return self.eigenvalues[idx[0]] if idx else None


def bdg_modes(m: BdGMatrix, n_keep: int | None = None) -> BdGModes:
    """Eigenvalues of the BdG matrix mapped to the ``i omega - gamma`` convention.

    Only the ``omega >= 0`` representative of each ``(nu, -nu*)`` pair is
    kept; the global phase mode is removed.  Results are sorted by frequency.
    """
    vals, vecs = np.linalg.eig(m.matrix)
    n = m.grid.n_points
    ps = m.psi0
    zero = np.r_[0.0, ps, 0.0, -ps]
    zero /= np.linalg.norm(zero)
    ov = np.abs(zero @ vecs) / np.linalg.norm(vecs, axis=0)
    scale = np.abs(vals).max()
    zero_candidates = np.nonzero(np.abs(vals) < 1e-6 * scale)[0]
    iz = int(zero_candidates[np.argmax(ov[zero_candidates])]) if zero_candidates.size else -1
    nu = 1j * np.conj(vals)
    keep = [i for i in range(vals.size) if i != iz and nu[i].imag >= -1e-9 * scale]
    if iz >= 0:
        # the phase mode is a Jordan pair at gamma = 0: drop its partner too
        partner = [i for i in keep if abs(vals[i]) < 1e-6 * scale and ov[i] > 0.5]
        keep = [i for i in keep if i not in partner]
    keep.sort(key=lambda i: (abs(nu[i].imag), -nu[i].real))
    if n_keep is not None:
        keep = keep[:n_keep]
    V = vecs[:, keep]
    labels = _bdg_labels(V, m)
    return BdGModes(vals, nu[keep], V, labels, iz)


def _bdg_labels(V, m: BdGMatrix):
    g = m.grid
    n = g.n_points
    ps = m.psi0
    k = g.k
    dps = np.fft.ifft(1j * k * np.fft.fft(ps)).real
    wf = Wavefunction(g, ps.astype(complex))
    zeta, _ = center_and_width(wf)
    d = (g.z - zeta + math.pi / 2) % math.pi - math.pi / 2
    wid = (d * d) * ps
    wid -= (wid @ ps) / (ps @ ps) * ps
    refs = [dps / np.linalg.norm(dps), wid / np.linalg.norm(wid)]
    scores = []
    for col in V.T:
        da = np.abs(col[0]) ** 2 + np.abs(col[n + 1]) ** 2
        u, v = col[1:n + 1], col[n + 2:]
        cond = np.linalg.norm(u) ** 2 + np.linalg.norm(v) ** 2
        # per-cell amplitudes carry a dz weight relative to the membrane entry
        total = da + cond * g.dz
        w_mem = da / total
        proj = [(abs(r @ u) ** 2 + abs(r @ v) ** 2) / max(cond, 1e-300) for r in refs]
        w_cond = 1 - w_mem
        scores.append([w_mem, w_cond * proj[0], w_cond * proj[1]])
    # each branch goes to the mode that carries most of its character
    scores = np.array(scores)
    labels = ["other"] * len(scores)
    if len(scores):
        rows, cols = linear_sum_assignment(-scores)
        for r, c in zip(rows, cols):
            if scores[r, c] > 0.1:
                labels[r] = ("membrane", "displacement", "width")[c]
    return labels


def write_bdg_csv(path, modes_: BdGModes):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re_nu", "im_nu", "branch"])
        for i, (nu, lab) in enumerate(zip(modes_.eigenvalues, modes_.labels)):
            w.writerow([i, f"{nu.real:.17g}", f"{nu.imag:.17g}", lab])
