"""Observables shared by the variational and GPE routes: order parameter and momentum distributions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .gpe import Wavefunction, center_and_width

DEFAULT_K_GRID = np.linspace(-10.0, 10.0, 1024)


@dataclass
class MomentumDistribution:
    k_values: np.ndarray
    values: np.ndarray
    site_count: int = 1
    normalization: float = 1.0

    @property
    def magnitude(self):
        return np.abs(self.values)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "abs_n", "re_n", "im_n"])
            for k, v in zip(self.k_values, self.values):
                w.writerow([f"{k:.17g}", f"{abs(v):.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def order_parameter_from_psi(psi: Wavefunction):
    """Centre of mass ``zeta`` in the principal cell and ``S = sin(2 zeta)``.

    The centre is taken as the circular mean on the period-pi cell, which
    equals ``int z |psi|^2 dz`` for any distribution symmetric about its
    centre and does not depend on where the cell is cut.
    """
    zeta, _ = center_and_width(psi)
    return zeta, math.sin(2 * zeta)


def momentum_distribution_gaussian(sigma0: float, zeta0: float = 0.0, N_atoms: float = 1.0,
                                   k_grid=None) -> MomentumDistribution:
    """Closed form ``n(k) = N exp(-(k sigma0 / 2)^2)`` of the single-site Gaussian."""
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    k = DEFAULT_K_GRID if k_grid is None else np.asarray(k_grid, dtype=float)
    vals = N_atoms * np.exp(-((k * sigma0 / 2) ** 2)).astype(complex)
    return MomentumDistribution(k, vals, 1, N_atoms)


def momentum_distribution_psi(psi: Wavefunction, N_atoms: float = 1.0, k_grid=None,
                              zeta0: float | None = None) -> MomentumDistribution:
    """``n(k) = N int e^{ik(z - zeta0)} |psi|^2 dz`` by direct quadrature on the grid.

    Positions are unwrapped around ``zeta0`` (the centre of mass by default).
    """
    k = DEFAULT_K_GRID if k_grid is None else np.asarray(k_grid, dtype=float)
    g = psi.grid
    if zeta0 is None:
        zeta0, _ = center_and_width(psi)
    dens = psi.density / psi.norm()
    d = (g.z - zeta0 + math.pi / 2) % math.pi - math.pi / 2
    vals = N_atoms * (np.exp(1j * np.outer(k, d)) @ dens) * g.dz
    return MomentumDistribution(k, vals, 1, N_atoms)


def lattice_form_factor_complex(k, M: int):
    """``f(k) = (1/M) sum_l exp(i pi k l)``; its modulus is the lattice form factor."""
    if M < 1:
        raise ValueError("site count M must be >= 1")
    k = np.asarray(k, dtype=float)
    l = np.arange(M)
    return np.exp(1j * np.pi * np.multiply.outer(k, l)).mean(axis=-1)


def lattice_form_factor(k, M: int):
    """``|f(k)| = |sin(pi M k / 2) / (M sin(pi k / 2))|``, equal to 1 at even integers."""
    if M < 1:
        raise ValueError("site count M must be >= 1")
    k = np.asarray(k, dtype=float)
    den = M * np.sin(np.pi * k / 2)
    num = np.sin(np.pi * M * k / 2)
    near_even = np.abs(den) < 1e-12 * M
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(near_even, 1.0, np.abs(num / np.where(near_even, 1.0, den)))
    return np.minimum(out, 1.0) if out.ndim else float(min(out, 1.0))


def lattice_momentum_distribution(n: MomentumDistribution, zeta0: float, M: int) -> MomentumDistribution:
    """``n_lat(k) = f(k) n(k) exp(i k zeta0)`` for ``M`` equally populated sites."""
    f = lattice_form_factor_complex(n.k_values, M)
    vals = f * n.values * np.exp(1j * n.k_values * zeta0)
    return MomentumDistribution(n.k_values, vals, M, n.normalization)


def _log_quadratic_crossing(k3, y3, level):
    # fit log|n| with a parabola through three samples; exact for Gaussians
    c = np.polyfit(k3 - k3[1], np.log(y3), 2)
    c[-1] -= math.log(level)
    roots = np.roots(c)
    roots = roots[np.isreal(roots)].real + k3[1]
    inside = roots[(roots >= k3.min() - 1e-12) & (roots <= k3.max() + 1e-12)]
    if inside.size == 0:
        # fall back to linear interpolation between the bracketing samples
        return None
    return inside[np.argmin(np.abs(inside - k3[1]))]


def _crossing(k, y, i_in, i_out, half):
    a, b = sorted((i_in, i_out))
    lo, hi = max(a - 1, 0), min(b + 1, len(k) - 1)
    idx = np.array([a, b, hi if hi != b else lo])
    idx.sort()
    if len(set(idx)) == 3 and np.all(y[idx] > 0):
        r = _log_quadratic_crossing(k[idx], y[idx], half)
        if r is not None and min(k[a], k[b]) - 1e-12 <= r <= max(k[a], k[b]) + 1e-12:
            return r
    t = (half - y[i_in]) / (y[i_out] - y[i_in])
    return k[i_in] + t * (k[i_out] - k[i_in])


def distribution_width(n: MomentumDistribution) -> float:
    """Full width at half maximum of ``|n(k)|``.

    The two half-maximum crossings are located between the bracketing
    samples by a local parabola in ``log|n|`` (exact for Gaussian profiles).
    """
    k = np.asarray(n.k_values, dtype=float)
    y = np.abs(n.values)
    order = np.argsort(k)
    k, y = k[order], y[order]
    i0 = int(np.argmax(y))
    peak = y[i0]
    if 0 < i0 < len(k) - 1 and np.all(y[i0 - 1:i0 + 2] > 0):
        # vertex of the log-parabola through the three top samples
        c = np.polyfit(k[i0 - 1:i0 + 2] - k[i0], np.log(y[i0 - 1:i0 + 2]), 2)
        if c[0] < 0:
            peak = max(peak, math.exp(c[2] - c[1] ** 2 / (4 * c[0])))
    half = peak / 2
    right = np.nonzero(y[i0:] < half)[0]
    left = np.nonzero(y[:i0 + 1][::-1] < half)[0]
    if right.size == 0 or left.size == 0:
        raise ValueError("half maximum not bracketed by the k-grid; use a larger k-range")
    ir = i0 + right[0]
    il = i0 - left[0]
    k_r = _crossing(k, y, ir - 1, ir, half)
    k_l = _crossing(k, y, il + 1, il, half)
    return float(k_r - k_l)


def write_width_csv(path, Lambdas, widths):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Lambda", "width"])
        for L, wd in zip(Lambdas, widths):
            w.writerow([f"{L:.17g}", f"{wd:.17g}"])
