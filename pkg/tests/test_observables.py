import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomembrane.gpe import Grid, Wavefunction, center_and_width, gaussian, ground_state
from atomembrane.observables import (
    DEFAULT_K_GRID,
    MomentumDistribution,
    distribution_width,
    lattice_form_factor,
    lattice_form_factor_complex,
    lattice_momentum_distribution,
    momentum_distribution_gaussian,
    momentum_distribution_psi,
    order_parameter_from_psi,
    write_width_csv,
)
from atomembrane.params import ModelParams
from atomembrane.variational import critical_coupling, steady_state

P0 = ModelParams()


# -- order parameter ------------------------------------------------------------------

def test_order_parameter_symmetric():
    zeta, S = order_parameter_from_psi(gaussian(Grid(128), 0.0, 0.27))
    assert zeta == pytest.approx(0.0, abs=1e-14) and S == pytest.approx(0.0, abs=1e-14)


def test_order_parameter_displaced_gaussian():
    zeta, S = order_parameter_from_psi(gaussian(Grid(256), 0.3, 0.27))
    assert zeta == pytest.approx(0.3, abs=1e-10)
    assert S == pytest.approx(math.sin(0.6), abs=1e-10)


def test_order_parameter_independent_of_cell_cut():
    # a state centred near the cell edge is not split into two halves
    zeta, _ = order_parameter_from_psi(gaussian(Grid(256), -math.pi / 2 + 0.05, 0.2))
    assert zeta == pytest.approx(-math.pi / 2 + 0.05, abs=1e-8)


def test_order_parameter_of_gpe_state():
    _, S = order_parameter_from_psi(ground_state(P0.replace(Lambda=100.0)).psi)
    assert S == pytest.approx(0.836, abs=0.02)


# -- single-site distribution -----------------------------------------------------------

def test_gaussian_distribution_at_origin():
    n = momentum_distribution_gaussian(0.27, N_atoms=7.0, k_grid=[0.0, 1.0])
    assert n.values[0] == 7.0
    assert n.values[1] == pytest.approx(7.0 * math.exp(-(0.27 / 2) ** 2))


def test_gaussian_fwhm_value():
    w = distribution_width(momentum_distribution_gaussian(0.2708))
    assert w == pytest.approx(4 * math.sqrt(math.log(2)) / 0.2708, rel=1e-10)
    assert w == pytest.approx(12.30, abs=0.005)


@settings(max_examples=50, deadline=None)
@given(s=st.floats(0.2, 0.6))
def test_fwhm_times_width_constant(s):
    w = distribution_width(momentum_distribution_gaussian(s))
    assert w * s == pytest.approx(4 * math.sqrt(math.log(2)), abs=1e-10)


def test_fwhm_not_bracketed():
    n = momentum_distribution_gaussian(0.05)
    with pytest.raises(ValueError):
        distribution_width(n)


def test_fwhm_other_profile():
    # Lorentzian 1/(1+k^2) has FWHM 2; interpolation error is small on a fine grid
    k = np.linspace(-10, 10, 4001)
    n = MomentumDistribution(k, (1 / (1 + k * k)).astype(complex))
    assert distribution_width(n) == pytest.approx(2.0, abs=1e-4)


def test_bad_sigma():
    with pytest.raises(ValueError):
        momentum_distribution_gaussian(0.0)


def test_default_k_grid():
    assert DEFAULT_K_GRID.size == 1024
    assert DEFAULT_K_GRID[0] == -10 and DEFAULT_K_GRID[-1] == 10


@pytest.mark.parametrize("zeta", [0.0, 0.3, -1.2])
def test_discrete_transform_fourier_properties(zeta):
    g = Grid(128)
    rng = np.random.default_rng(1)
    amp = gaussian(g, zeta, 0.3).amplitudes * (1 + 0.1 * rng.standard_normal(g.n_points))
    psi = Wavefunction(g, amp).normalized()
    k = np.linspace(-8, 8, 161)
    n = momentum_distribution_psi(psi, N_atoms=3.0, k_grid=k)
    assert n.values[80] == pytest.approx(3.0, abs=1e-10)
    assert np.abs(n.values[::-1] - n.values.conj()).max() < 1e-12


def test_gpe_transform_matches_closed_form():
    gs = ground_state(P0.replace(Lambda=50.0))
    _, w = center_and_width(gs.psi)
    n_num = momentum_distribution_psi(gs.psi)
    n_gau = momentum_distribution_gaussian(steady_state(P0.replace(Lambda=50.0)).sigma0)
    assert np.abs(n_num.magnitude - n_gau.magnitude).max() < 0.01
    assert distribution_width(n_num) == pytest.approx(distribution_width(n_gau), rel=0.01)


# -- lattice form factor ------------------------------------------------------------------

@pytest.mark.parametrize("M", [1, 2, 10, 37])
def test_form_factor_even_integers(M):
    assert np.allclose(lattice_form_factor(np.array([0.0, 2.0, -4.0, 6.0]), M), 1.0)


def test_form_factor_zero():
    assert lattice_form_factor(0.2, 10) == pytest.approx(0.0, abs=1e-12)


def test_form_factor_single_site():
    assert np.all(lattice_form_factor(np.linspace(-5, 5, 101), 1) == 1.0)


@settings(max_examples=100, deadline=None)
@given(k=st.floats(-20, 20), M=st.integers(1, 50))
def test_form_factor_bounded_and_consistent(k, M):
    f = lattice_form_factor(k, M)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(abs(lattice_form_factor_complex(k, M)), abs=1e-9)


def test_form_factor_rejects_zero_sites():
    with pytest.raises(ValueError):
        lattice_form_factor(1.0, 0)


def test_lattice_peaks_at_even_k():
    k = np.linspace(-10, 10, 4001)
    s0 = steady_state(P0.replace(Lambda=50.0)).sigma0
    nl = lattice_momentum_distribution(momentum_distribution_gaussian(s0, k_grid=k), 0.0, 10)
    y = nl.magnitude
    env = np.exp(-(k * s0 / 2) ** 2)
    # principal maxima reach the envelope; side lobes stay well below it
    peaks = [k[i] for i in range(1, len(k) - 1)
             if y[i] >= y[i - 1] and y[i] >= y[i + 1] and y[i] > 0.5 * env[i]]
    assert len(peaks) == 11          # k = 0, ±2, ..., ±10 (edge peaks one sample inside)
    assert np.allclose(peaks, np.round(np.array(peaks) / 2) * 2, atol=k[1] - k[0])
    assert 0.0 in np.round(peaks, 9)
    even = np.isclose(k, np.round(k)) & (np.round(k).astype(int) % 2 == 0)
    assert np.abs(y[even] - np.exp(-(k[even] * s0 / 2) ** 2)).max() < 1e-10


def test_lattice_single_site_is_phase_shift():
    k = np.linspace(-5, 5, 51)
    n = momentum_distribution_gaussian(0.3, k_grid=k)
    nl = lattice_momentum_distribution(n, 0.4, 1)
    assert np.allclose(nl.values, n.values * np.exp(1j * k * 0.4), atol=1e-14)


# -- width versus coupling -----------------------------------------------------------------

def test_width_constant_below_and_rising_above_threshold():
    Lc = critical_coupling(P0)
    below = np.linspace(0, 0.99 * Lc, 15)
    above = np.linspace(1.02 * Lc, 150, 15)

    def fwhm(L):
        ss = steady_state(P0.replace(Lambda=float(L)))
        return distribution_width(momentum_distribution_gaussian(ss.sigma0))
    wb = np.array([fwhm(L) for L in below])
    wa = np.array([fwhm(L) for L in above])
    assert (wb.max() - wb.min()) / wb.mean() < 0.01
    assert np.all(np.diff(wa) > 0)


def test_exports(tmp_path):
    n = momentum_distribution_gaussian(0.3, k_grid=[-1.0, 0.0, 1.0])
    n.to_csv(tmp_path / "n.csv")
    rows = list(csv.reader(open(tmp_path / "n.csv")))
    assert rows[0] == ["k", "abs_n", "re_n", "im_n"]
    assert float(rows[2][1]) == 1.0
    write_width_csv(tmp_path / "w.csv", [0.0, 1.0], [12.3, 12.4])
    rows = list(csv.reader(open(tmp_path / "w.csv")))
    assert rows == [["Lambda", "width"], ["0", "12.300000000000001"], ["1", "12.4"]]
