import csv
import math
import warnings

import numpy as np
import pytest

from atomembrane.gpe import (
    Grid,
    Wavefunction,
    bdg_matrix,
    bdg_modes,
    center_and_width,
    evolve,
    gaussian,
    ground_state,
    ground_state_nonlocal,
    mean_field_energy,
    membrane_kernel,
    overlap_integral,
    stationary_alpha,
    write_bdg_csv,
)
from atomembrane.params import ModelParams
from atomembrane.variational import critical_coupling, steady_state

P0 = ModelParams()


@pytest.fixture(scope="module")
def gs50():
    return ground_state(P0.replace(Lambda=50.0))


@pytest.fixture(scope="module")
def gs100():
    return ground_state(P0.replace(Lambda=100.0))


def S_of(gs):
    return math.sin(2 * center_and_width(gs.psi)[0])


# -- grid and wavefunctions --------------------------------------------------------

def test_grid_layout():
    g = Grid(128)
    assert g.z[0] == -math.pi / 2
    assert g.z[-1] + g.dz == pytest.approx(math.pi / 2)
    assert np.allclose(g.k, np.round(g.k))
    assert np.all(g.k.astype(int) % 2 == 0)
    assert sorted(np.abs(g.k))[-1] == 128


@pytest.mark.parametrize("n", [63, 32, 65])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_kinetic_matrix_is_spectral():
    g = Grid(64)
    f = np.cos(4 * g.z)
    assert np.allclose(g.kinetic_matrix(2.0) @ f, 2.0 * 16 * f, atol=1e-10)


def test_gaussian_normalised_and_periodic():
    g = Grid(128)
    psi = gaussian(g, math.pi / 2 - 0.01, 0.3)
    assert psi.norm() == pytest.approx(1.0, abs=1e-14)
    zeta, _ = center_and_width(psi)
    assert abs(abs(zeta) - (math.pi / 2 - 0.01)) < 1e-6


def test_wavefunction_csv(tmp_path):
    psi = gaussian(Grid(64), 0.0, 0.3)
    psi.to_csv(tmp_path / "psi.csv")
    rows = list(csv.reader(open(tmp_path / "psi.csv")))
    assert rows[0] == ["z", "re_psi", "im_psi", "abs_psi_sq"]
    assert len(rows) == 65


def test_mean_field_energy_of_gaussian_matches_variational_form():
    # kinetic w_R/(2 s^2); lattice V(1 - e^{-s^2})/2 for a centred Gaussian
    p = P0.replace(Lambda=0.0)
    s = 0.25
    psi = gaussian(Grid(256), 0.0, s)
    E = mean_field_energy(psi, 0j, p)
    assert E == pytest.approx(1 / (2 * s * s) + p.V * (1 - math.exp(-s * s)) / 2, rel=1e-10)


def test_stationary_alpha():
    a = stationary_alpha(0.5, P0.replace(Lambda=10.0))
    assert a == pytest.approx(10 * 0.5 / complex(100, -20))
    assert a.real == pytest.approx(10 * 0.5 / (100 + 400 / 100))


# -- ground state -------------------------------------------------------------------

def test_symmetric_ground_state(gs50):
    zeta, w = center_and_width(gs50.psi)
    sigma0 = steady_state(P0.replace(Lambda=50.0)).sigma0
    assert abs(zeta) < 1e-8
    assert w == pytest.approx(sigma0, rel=0.02)
    assert gs50.psi.norm() == pytest.approx(1.0, abs=1e-10)
    assert abs(gs50.alpha) < 1e-8


def test_harmonic_limit():
    p = P0.replace(Lambda=0.0, V=2000.0)
    _, w = center_and_width(ground_state(p).psi)
    assert w == pytest.approx((p.omega_R / p.V) ** 0.25, rel=0.03)
    _, w200 = center_and_width(ground_state(P0.replace(Lambda=0.0)).psi)
    assert w200 == pytest.approx(0.266, rel=0.03)


def test_broken_ground_state(gs100):
    S = S_of(gs100)
    ss = steady_state(P0.replace(Lambda=100.0))
    assert S == pytest.approx(ss.S0, abs=0.02)
    assert gs100.alpha.real == pytest.approx(100 * overlap_integral(gs100.psi) / (100 + 4), rel=1e-12)


def test_chemical_potential_consistency(gs100):
    # mu psi = H psi on the grid for a stationary state
    g = gs100.psi.grid
    p = P0.replace(Lambda=100.0)
    ps = gs100.psi.amplitudes
    Hpsi = (g.kinetic_matrix() @ ps + (p.V * np.sin(g.z) ** 2 + p.gN * np.abs(ps) ** 2
            - 2 * p.Lambda * gs100.alpha.real * np.sin(2 * g.z)) * ps)
    assert np.abs(Hpsi - gs100.mu * ps).max() < 1e-8 * np.abs(Hpsi).max()


def test_parity_of_seeds():
    p = P0.replace(Lambda=100.0)
    a = ground_state(p, seed_offset=0.02)
    b = ground_state(p, seed_offset=-0.02)
    assert S_of(a) == pytest.approx(-S_of(b), abs=1e-10)
    assert a.energy == pytest.approx(b.energy, abs=1e-10)


def test_zero_seed_gives_symmetric_saddle(gs100):
    sym = ground_state(P0.replace(Lambda=100.0), seed_offset=0.0)
    assert abs(S_of(sym)) < 1e-10
    assert sym.energy > gs100.energy


def test_grid_convergence():
    E1 = ground_state(P0.replace(Lambda=100.0), Grid(128)).energy
    E2 = ground_state(P0.replace(Lambda=100.0), Grid(256)).energy
    assert abs(E1 - E2) < 1e-8 * abs(E2)


def test_elimination_equivalence(gs100):
    p = P0.replace(Lambda=100.0)
    nl = ground_state_nonlocal(p, membrane_kernel(p))
    assert S_of(nl) == pytest.approx(S_of(gs100), abs=1e-6)


def test_interacting_ground_state_wider():
    _, w0 = center_and_width(ground_state(P0.replace(Lambda=20.0)).psi)
    _, w1 = center_and_width(ground_state(P0.replace(Lambda=20.0, gN=10.0)).psi)
    assert w1 > w0


# -- real time --------------------------------------------------------------------

def test_norm_conservation_per_step():
    g = Grid(128)
    p = P0.replace(Lambda=100.0, gN=5.0)
    psi = gaussian(g, 0.1, 0.25)
    tr = evolve(psi, 0.3 + 0.1j, p, 1.0, dt=1e-4, sample_every=1000)
    assert np.abs(np.diff(tr.norm)).max() / 1000 < 1e-12
    assert abs(tr.norm[-1] - 1) < 1e-10


def test_stationary_state_is_stationary(gs100):
    p = P0.replace(Lambda=100.0)
    T = 50 * 2 * math.pi / p.Omega_m
    tr = evolve(gs100.psi, gs100.alpha, p, T, dt=1e-4, sample_every=500)
    for series in (tr.zeta, tr.width, tr.alpha.real, tr.alpha.imag):
        assert np.abs(series - series[0]).max() < 1e-6


def test_energy_conservation_without_damping():
    p = P0.replace(Lambda=100.0, gamma=0.0, gN=2.0)
    psi = gaussian(Grid(128), 0.2, 0.25)
    T = 50 * 2 * math.pi / p.Omega_m
    tr = evolve(psi, 0.2 + 0.0j, p, T, dt=1e-4, sample_every=500)
    assert np.abs(tr.energy - tr.energy[0]).max() < 1e-5 * abs(tr.energy[0])


def test_damped_relaxation_to_broken_state():
    g = Grid(128)
    p = P0.replace(Lambda=100.0)
    tr = evolve(gaussian(g, 0.05, (1 / p.V) ** 0.25), 0j, p, 15.0, dt=2e-4, sample_every=5000)
    assert tr.S[-1] == pytest.approx(S_of(ground_state(p, g)), abs=1e-3)
    assert tr.energy[-1] < tr.energy[0]


def test_cfl_warning():
    psi = gaussian(Grid(64), 0.0, 0.3)
    with pytest.warns(RuntimeWarning):
        evolve(psi, 0j, P0, 1e-2, dt=1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        evolve(psi, 0j, P0, 1e-3, dt=1e-4)


# -- Bogoliubov-de Gennes -------------------------------------------------------------

@pytest.fixture(scope="module")
def bdg0():
    p = P0.replace(Lambda=0.0)
    gs = ground_state(p)
    m = bdg_matrix(gs.psi, gs.alpha, gs.mu, p)
    return m, bdg_modes(m)


def test_bdg_dimension_and_block_structure(bdg0):
    m, _ = bdg0
    n = m.grid.n_points
    assert m.dim == 2 * (n + 1)
    X, Y = m.matrix[:n + 1, :n + 1], m.matrix[:n + 1, n + 1:]
    assert np.allclose(m.matrix[n + 1:, :n + 1], -Y.conj())
    assert np.allclose(m.matrix[n + 1:, n + 1:], -X.conj())


def test_bdg_pairing(gs100):
    p = P0.replace(Lambda=100.0)
    m = bdg_matrix(gs100.psi, gs100.alpha, gs100.mu, p)
    raw = bdg_modes(m).raw
    scale = np.abs(raw).max()
    partner = -raw.conj()
    dist = np.abs(raw[:, None] - partner[None, :]).min(axis=1)
    assert dist.max() < 1e-8 * scale


def test_bdg_zero_mode(bdg0):
    m, ms = bdg0
    assert ms.zero_mode_index >= 0
    assert abs(ms.raw[ms.zero_mode_index]) < 1e-8 * np.abs(ms.raw).max()
    assert np.all(np.abs(ms.eigenvalues) > 1e-3)


def test_bdg_uncoupled_membrane(bdg0):
    _, ms = bdg0
    assert np.abs(ms.raw - complex(100.0, -20.0)).min() < 1e-12 * 100
    nu = ms.lowest("membrane")
    assert nu == pytest.approx(complex(-20.0, 100.0), abs=1e-10)


def test_bdg_displacement_mode_matches_variational(bdg0):
    _, ms = bdg0
    from atomembrane.linear_response import linearize
    w = linearize(P0.replace(Lambda=0.0)).omega_zeta
    nu = ms.lowest("displacement")
    assert nu.imag == pytest.approx(w, rel=0.02)
    assert nu.imag == pytest.approx(27.3, abs=0.5)
    assert ms.eigenvalues[0] == nu


@pytest.mark.parametrize("x", [0.3, 0.6, 0.9])
def test_bdg_width_and_displacement_vs_variational(x):
    from atomembrane.linear_response import linearize
    Lc = critical_coupling(P0)
    p = P0.replace(Lambda=x * Lc)
    gs = ground_state(p, Grid(128))
    ms = bdg_modes(bdg_matrix(gs.psi, gs.alpha, gs.mu, p), n_keep=12)
    lr = linearize(p)
    from atomembrane.linear_response import build_M, eigenmodes
    var = eigenmodes(build_M(lr))
    var_low = np.abs(var.eigenvalues[0].imag)
    assert ms.lowest("displacement").imag == pytest.approx(var_low, rel=0.05)
    assert ms.lowest("width").imag == pytest.approx(lr.omega_sigma, rel=0.05)


def test_bdg_labels_broken_phase(gs100):
    p = P0.replace(Lambda=100.0)
    ms = bdg_modes(bdg_matrix(gs100.psi, gs100.alpha, gs100.mu, p), n_keep=12)
    assert {"membrane", "displacement", "width"} <= set(ms.labels)


def test_bdg_rejects_complex_state():
    g = Grid(64)
    z = g.z
    psi = Wavefunction(g, np.exp(-z**2 / 0.1) * np.exp(1j * z)).normalized()
    with pytest.raises(ValueError):
        bdg_matrix(psi, 0j, 0.0, P0)


def test_bdg_csv(tmp_path, bdg0):
    _, ms = bdg0
    write_bdg_csv(tmp_path / "b.csv", ms)
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["index", "re_nu", "im_nu", "branch"]
    assert len(rows) == 1 + len(ms.eigenvalues)
