"""Small oscillations of the variational model around a steady state.

Quadratures are ordered ``(q_a, p_a, q_zeta, p_zeta, q_sigma, p_sigma)``
where ``a`` is the membrane displacement.  Eigenvalues follow the
convention ``nu = i*omega - gamma_k`` (frequency ``Im nu``, decay ``-Re nu``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .params import ModelParams
from .variational import SolverError, energy_gradient, energy_hessian_diag, steady_state

BRANCHES = ("membrane", "displacement", "width")
PAIRS = {"membrane-displacement": (0, 1), "membrane-width": (0, 2)}


class InstabilityError(ValueError):
    """Quadratic Hamiltonian is not positive definite (soft or unstable mode)."""


@dataclass(frozen=True)
class LinearResponse:
    omega_alpha: float
    omega_zeta: float
    omega_sigma: float
    c1: float
    c2: float
    c3: float
    c4: float
    lambda_az: float
    lambda_as: float
    epsilon_scales: tuple
    gamma: float = 0.0
    Omega_m: float = 1.0
    S0: float = 0.0


@dataclass
class ModeSet:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray          # columns
    labels: list

    @property
    def frequencies(self):
        return self.eigenvalues.imag

    @property
    def decay_rates(self):
        return -self.eigenvalues.real


@dataclass(frozen=True)
class CovarianceMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError("covariance matrix must be square of even dimension")
        if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("covariance matrix must be symmetric")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    def symplectic_eigenvalues(self):
        return symplectic_eigenvalues(self.matrix)

    def reduced(self, modes):
        idx = [i for m in modes for i in (2 * m, 2 * m + 1)]
        return self.matrix[np.ix_(idx, idx)]


def symplectic_form(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(C) -> np.ndarray:
    """Symplectic spectrum (moduli of the eigenvalues of ``i J C``), ascending."""
    n = C.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ C))
    return np.sort(ev)[::2]


# -- linearisation ----------------------------------------------------------

def linearize(p: ModelParams, ss=None, check_tol: float = 1e-8) -> LinearResponse:
    """Frequencies and couplings of the linearised variational equations.

    ``omega_zeta`` and ``omega_sigma`` come from the analytic Hessian of the
    potential energy at fixed membrane amplitude; the zeta-sigma cross term
    vanishes identically at a stationary point.
    """
    ss = steady_state(p) if ss is None else ss
    a0, s0, z0, S0 = ss.alpha_prime0, ss.sigma0, ss.zeta0, ss.S0
    grad = np.array(energy_gradient(a0, s0, z0, p))
    if np.linalg.norm(grad) > check_tol:
        raise SolverError("linearisation point is not stationary", residual=float(np.linalg.norm(grad)))
    d2z, d2s = energy_hessian_diag(a0, s0, z0, p)
    wR, Om = p.omega_R, p.Omega_m
    w_a = math.sqrt(Om**2 + p.gamma**2)
    w_z = math.sqrt(2 * wR * d2z)
    w_s = math.sqrt(4 * wR * d2s)
    e = math.exp(-s0 * s0)
    c1 = 2 * p.Lambda * Om * math.sqrt(max(0.0, 1 - S0 * S0)) * e
    c2 = 2 * p.Lambda * Om * s0 * S0 * e
    c3 = 4 * wR * c1 / Om
    c4 = 8 * wR * c2 / Om
    # eps^2 = c_i omega_mu / (c_j omega_a) makes the quadrature couplings symmetric
    eps_z = math.sqrt(Om * w_z / (4 * wR * w_a))
    eps_s = math.sqrt(Om * w_s / (8 * wR * w_a))
    lam_az = c1 / (2 * w_a * eps_z)
    lam_as = c2 / (2 * w_a * eps_s)
    return LinearResponse(w_a, w_z, w_s, c1, c2, c3, c4, lam_az, lam_as, (1.0, eps_z, eps_s),
                          gamma=p.gamma, Omega_m=Om, S0=S0)


def build_M(lr: LinearResponse, gamma: float | None = None) -> np.ndarray:
    """Real 6x6 dynamical matrix of ``x' = M x``."""
    g = lr.gamma if gamma is None else gamma
    wa, wz, ws = lr.omega_alpha, lr.omega_zeta, lr.omega_sigma
    if gamma is not None and gamma != lr.gamma:
        wa = math.sqrt(lr.Omega_m**2 + g**2)
    la, ls = lr.lambda_az, lr.lambda_as
    return np.array([
        [0.0, wa, 0.0, 0.0, 0.0, 0.0],
        [-wa, -2 * g, 2 * la, 0.0, -2 * ls, 0.0],
        [0.0, 0.0, 0.0, wz, 0.0, 0.0],
        [2 * la, 0.0, -wz, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, ws],
        [-2 * ls, 0.0, 0.0, 0.0, -ws, 0.0],
    ])


def _block_labels(vecs):
    n = vecs.shape[0] // 2
    w = np.abs(vecs) ** 2
    weights = w.reshape(n, 2, -1).sum(axis=1)
    names = BRANCHES if n == 3 else tuple(f"mode{i}" for i in range(n))
    return [names[int(i)] for i in np.argmax(weights, axis=0)]


def eigenmodes(M, residual_tol: float = 1e-10) -> ModeSet:
    """Eigen-decomposition of a real dynamical matrix, sorted by ``|Im nu|``."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise np.linalg.LinAlgError("dynamical matrix contains non-finite entries")
    vals, vecs = np.linalg.eig(M)
    order = np.lexsort((vals.imag, np.abs(vals.imag)))
    vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, np.abs(M).max())
    res = np.linalg.norm(M @ vecs - vecs * vals, axis=0)
    if np.any(res > residual_tol * scale * np.linalg.norm(vecs, axis=0)):
        raise np.linalg.LinAlgError(f"eigenpair residual too large: {res.max():.3g}")
    return ModeSet(vals, vecs, _block_labels(vecs))


def modes(p: ModelParams, branch: int = 1) -> ModeSet:
    return eigenmodes(build_M(linearize(p, steady_state(p, branch))))


def analytic_modes_gamma0(lr: LinearResponse, Lambda: float, Lambda_c: float) -> dict:
    """Closed-form eigenvalues of the undamped symmetric-phase problem.

    Returns the estimates ``nu1 = i Omega sqrt(1+(L/Lc)^2)``,
    ``nu2 = i omega_zeta sqrt(1-(L/Lc)^2)``, ``nu3 = i omega_sigma`` together
    with the exact roots of the membrane-displacement quartic.
    """
    if lr.S0 != 0.0 or Lambda >= Lambda_c:
        raise ValueError("analytic modes only exist on the symmetric branch below Lambda_c")
    Om, wz = lr.Omega_m, lr.omega_zeta
    x = (Lambda / Lambda_c) ** 2
    disc = math.sqrt((Om**2 - wz**2) ** 2 + 4 * lr.c1 * lr.c3)
    hi = -(Om**2 + wz**2 + disc) / 2
    lo = -(Om**2 + wz**2 - disc) / 2
    return {
        "nu1": 1j * Om * math.sqrt(1 + x),
        "nu2": 1j * wz * math.sqrt(max(0.0, 1 - x)),
        "nu3": 1j * lr.omega_sigma,
        "exact_membrane": 1j * math.sqrt(-hi),
        "exact_displacement": 1j * math.sqrt(max(0.0, -lo)),
    }


# -- mode tracking ------------------------------------------------------------

@dataclass
class TrackedModes:
    labels: list                      # per column, e.g. "membrane+"
    eigenvalues: np.ndarray           # (n_steps, n_modes)
    ambiguous: np.ndarray             # (n_steps,) bool, tie broken by proximity
    min_overlap: np.ndarray           # (n_steps,) smallest matched overlap

    def branch(self, name: str) -> np.ndarray:
        """Eigenvalues of the positive-frequency member of a branch."""
        return self.eigenvalues[:, self.labels.index(name + "+")]

    def frequency(self, name: str) -> np.ndarray:
        cols = [self.labels.index(name + "+"), self.labels.index(name + "-")]
        return np.abs(self.eigenvalues[:, cols].imag).max(axis=1)


def _normalised(v):
    return v / np.linalg.norm(v, axis=0, keepdims=True)


def track_modes(sweep) -> TrackedModes:
    """Follow eigenvalues through a Lambda-ordered sweep by eigenvector overlap.

    Labels are seeded on the first mode set by dominant quadrature block and
    the sign of the frequency.
    """
    sweep = list(sweep)
    if not sweep:
        raise ValueError("empty sweep")
    first = sweep[0]
    n = first.eigenvalues.size
    labels = []
    for lab, nu in zip(first.labels, first.eigenvalues):
        sign = "+" if nu.imag > 0 or (nu.imag == 0 and (lab + "+") not in labels) else "-"
        labels.append(lab + sign)
    if len(set(labels)) != n:
        raise ValueError("seed mode set has degenerate labels; start the sweep at Lambda=0")
    vals = np.empty((len(sweep), n), dtype=complex)
    amb = np.zeros(len(sweep), dtype=bool)
    min_ov = np.ones(len(sweep))
    vals[0] = first.eigenvalues
    prev_vecs = _normalised(first.eigenvectors)
    prev_vals = first.eigenvalues
    for j, ms in enumerate(sweep[1:], start=1):
        vecs = _normalised(ms.eigenvectors)
        O = np.abs(prev_vecs.conj().T @ vecs)
        top2 = np.sort(O, axis=1)[:, -2:]
        rows_amb = (top2[:, 1] - top2[:, 0]) < 1e-6
        scale = max(np.abs(prev_vals).max(), 1.0)
        dist = np.abs(prev_vals[:, None] - ms.eigenvalues[None, :]) / scale
        cost = -np.round(O, 6) + 1e-7 * dist
        rows, cols = linear_sum_assignment(cost)
        perm = cols[np.argsort(rows)]
        vals[j] = ms.eigenvalues[perm]
        amb[j] = bool(rows_amb.any())
        min_ov[j] = O[np.arange(n), perm].min()
        prev_vecs = vecs[:, perm]
        prev_vals = vals[j]
    return TrackedModes(labels, vals, amb, min_ov)


# -- ground-state covariance and entanglement -----------------------------------

def quadratic_hamiltonian(lr: LinearResponse) -> np.ndarray:
    """Symmetric matrix ``H`` with ``H = x^T H x / 2`` generating ``x' = M x`` at gamma=0."""
    M = build_M(lr, gamma=0.0)
    H = -symplectic_form(3) @ M
    return 0.5 * (H + H.T)


def _quadrature_transform(n):
    # x = T (b_1..b_n, b_1^+..b_n^+);  q = (b + b^+)/sqrt2, p = (b - b^+)/(i sqrt2)
    T = np.zeros((2 * n, 2 * n), dtype=complex)
    r = 1 / math.sqrt(2)
    for k in range(n):
        T[2 * k, k], T[2 * k, n + k] = r, r
        T[2 * k + 1, k], T[2 * k + 1, n + k] = -1j * r, 1j * r
    return T


def bogoliubov_ground_covariance(H: np.ndarray) -> np.ndarray:
    """Ground-state quadrature covariance of ``x^T H x / 2`` by Bogoliubov diagonalisation.

    The positive-energy eigenvectors ``w = (u, v)`` of ``Sigma_z Hb`` are
    normalised to ``sum |u|^2 - |v|^2 = 1``; then ``<Phi Phi^+> = sum_k w_k w_k^+``.
    """
    n = H.shape[0] // 2
    if np.linalg.eigvalsh(H).min() <= 0:
        raise InstabilityError("quadratic Hamiltonian is not positive definite")
    T = _quadrature_transform(n)
    Hb = T.conj().T @ H @ T
    sz = np.diag(np.r_[np.ones(n), -np.ones(n)])
    vals, vecs = np.linalg.eig(sz @ Hb)
    pos = np.argsort(-vals.real)[:n]
    W = vecs[:, pos]
    # orthonormalise in the sigma_z metric (handles degenerate energies)
    basis = []
    for k in range(n):
        w = W[:, k].copy()
        for b in basis:
            w -= (b.conj() @ sz @ w) * b
        norm = (w.conj() @ sz @ w).real
        if norm <= 0:
            raise InstabilityError("Bogoliubov mode with non-positive symplectic norm")
        basis.append(w / math.sqrt(norm))
    W = np.array(basis).T
    G = W @ W.conj().T
    xx = T @ G @ T.conj().T
    return xx.real


def ground_state_covariance(lr: LinearResponse) -> CovarianceMatrix:
    """Covariance of the undamped three-mode ground state."""
    if lr.gamma != 0.0:
        raise ValueError("ground-state covariance is defined for gamma = 0 only")
    return CovarianceMatrix(bogoliubov_ground_covariance(quadratic_hamiltonian(lr)))


def log_negativity_reduced(Cp) -> float:
    """Logarithmic negativity (natural log) of a two-mode covariance matrix."""
    Cp = np.asarray(Cp, dtype=float)
    U, V, W = Cp[:2, :2], Cp[:2, 2:], Cp[2:, 2:]
    sig = np.linalg.det(U) + np.linalg.det(W) - 2 * np.linalg.det(V)
    det = np.linalg.det(Cp)
    disc = sig * sig - 4 * det
    tol = 1e-10 * max(1.0, sig * sig)
    if disc < -tol:
        raise ValueError(f"invalid covariance: Sigma^2 - 4 det C' = {disc:.3g} < 0")
    nu = math.sqrt(max(sig - math.sqrt(max(disc, 0.0)), 0.0) / 2)
    if nu == 0.0:
        return math.inf
    return max(0.0, -math.log(2 * nu))


def log_negativity(C: CovarianceMatrix, pair: str = "membrane-displacement") -> float:
    if pair not in PAIRS:
        raise ValueError(f"unknown pair {pair!r}; choose from {sorted(PAIRS)}")
    return log_negativity_reduced(C.reduced(PAIRS[pair]))


# -- overdamped window -----------------------------------------------------------

def is_bifurcated(ms: ModeSet, imag_tol: float = 1e-8, split_tol: float = 1e-6) -> bool:
    real = ms.eigenvalues[np.abs(ms.eigenvalues.imag) < imag_tol]
    return real.size >= 2 and (real.real.max() - real.real.min()) > split_tol


@dataclass
class OverdampedWindow:
    lower: float
    upper: float
    Lambda_c: float

    @property
    def width(self):
        return self.upper - self.lower


def overdamped_window(p: ModelParams, Lambda_c: float, half_width: float = 1.0,
                      n_scan: int = 401, tol: float = 1e-9) -> OverdampedWindow:
    """Interval of Lambda around Lambda_c where the soft pair is purely damped."""
    def bif(L):
        return is_bifurcated(modes(p.replace(Lambda=float(L))))

    grid = np.linspace(Lambda_c - half_width, Lambda_c + half_width, n_scan)
    flags = np.array([bif(L) for L in grid])
    if not flags.any():
        raise SolverError("no overdamped window found near Lambda_c")
    i_c = int(np.argmin(np.abs(grid - Lambda_c)))
    hits = np.nonzero(flags)[0]
    k = hits[np.argmin(np.abs(hits - i_c))]
    lo_i = k
    while lo_i > 0 and flags[lo_i - 1]:
        lo_i -= 1
    hi_i = k
    while hi_i < grid.size - 1 and flags[hi_i + 1]:
        hi_i += 1
    if lo_i == 0 or hi_i == grid.size - 1:
        raise SolverError("overdamped window extends beyond the scanned range")

    def edge(outside, inside):
        while abs(inside - outside) > tol:
            mid = 0.5 * (inside + outside)
            if bif(mid):
                inside = mid
            else:
                outside = mid
        return 0.5 * (inside + outside)

    return OverdampedWindow(edge(grid[lo_i - 1], grid[lo_i]), edge(grid[hi_i + 1], grid[hi_i]), Lambda_c)


# -- exports ------------------------------------------------------------------------

def write_mode_csv(path, Lambdas, tracked: TrackedModes):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Lambda", "branch_label", "omega_k", "gamma_k"])
        for L, row in zip(Lambdas, tracked.eigenvalues):
            for lab, nu in zip(tracked.labels, row):
                w.writerow([f"{L:.17g}", lab, f"{nu.imag:.17g}", f"{-nu.real:.17g}"])
