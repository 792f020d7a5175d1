"""Model parameters, unit conventions and experimental presets.

All frequencies and energies are measured in units of the atomic recoil
frequency ``omega_R``.  Couplings are stored in their scaled form: the
atom-membrane coupling as ``Lambda = sqrt(N) * lambda`` and the contact
interaction as ``gN = g * N``.  The atom number only enters the absolute
normalisation of momentum distributions.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field

CONFIG_ENV_VAR = "ATOMEMBRANE_CONFIG"


@dataclass(frozen=True)
class ModelParams:
    """Constants of the hybrid atom-membrane model in recoil units.

    Parameters
    ----------
    V : float
        Optical lattice depth.
    Omega_m : float
        Bare membrane frequency.
    gamma : float
        Membrane damping rate.
    gN : float
        Scaled contact interaction ``g * N``.
    Lambda : float
        Scaled atom-membrane coupling ``sqrt(N) * lambda``.
    N_atoms : float
        Atom number, used only to normalise momentum distributions.
    omega_R : float
        Recoil frequency, 1 by convention.
    """

    V: float = 200.0
    Omega_m: float = 100.0
    gamma: float = 20.0
    gN: float = 0.0
    Lambda: float = 0.0
    N_atoms: float = 1.0
    omega_R: float = 1.0

    def __post_init__(self):
        for name in ("V", "Omega_m", "gamma", "gN", "Lambda", "N_atoms", "omega_R"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.V <= 0:
            raise ValueError(f"lattice depth V must be positive, got {self.V}")
        if self.Omega_m <= 0:
            raise ValueError(f"Omega_m must be positive, got {self.Omega_m}")
        if self.omega_R <= 0:
            raise ValueError(f"omega_R must be positive, got {self.omega_R}")
        if self.gamma < 0 or self.gN < 0 or self.Lambda < 0:
            raise ValueError("gamma, gN and Lambda must be non-negative")
        if self.N_atoms < 1:
            raise ValueError(f"N_atoms must be >= 1, got {self.N_atoms}")

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PhysicalPreset:
    """Experimental parameters in SI frequency units (cyclic, Hz).

    ``interaction_1d`` is the range of the effective one-dimensional
    interaction ``g_1D / hbar`` in Hz times Bohr radii.  It is kept for
    reference only; ``gN`` has to be chosen explicitly.
    """

    name: str
    membrane_frequency: float
    membrane_damping: float
    laser_frequency: float
    recoil_frequency: float
    atom_count: float
    interaction_1d: tuple = (0.0, 0.0)
    lattice_depth: float = 30.0  # recoil units

    def to_params(self, gN: float = 0.0, Lambda: float = 0.0, V: float | None = None) -> ModelParams:
        """Convert to recoil units by dividing every rate by the recoil frequency."""
        return ModelParams(
            V=self.lattice_depth if V is None else V,
            Omega_m=self.membrane_frequency / self.recoil_frequency,
            gamma=self.membrane_damping / self.recoil_frequency,
            gN=gN,
            Lambda=Lambda,
            N_atoms=self.atom_count,
        )

    def rates_from_params(self, p: ModelParams) -> dict:
        """Inverse of :meth:`to_params` for the rate-like quantities, in Hz."""
        scale = self.recoil_frequency / p.omega_R
        return {
            "membrane_frequency": p.Omega_m * scale,
            "membrane_damping": p.gamma * scale,
            "recoil_frequency": p.omega_R * scale,
        }


PHYSICAL_PRESETS = {
    "zhong2017": PhysicalPreset(
        name="zhong2017",
        membrane_frequency=263.8e3,
        membrane_damping=24.4e-3,
        laser_frequency=384e12,
        recoil_frequency=3.8e3,
        atom_count=2e6,
        interaction_1d=(11.4e3, 16.6e3),
        lattice_depth=30.0,
    ),
}

PRESETS = ("paper-default", "zhong2017")


def from_preset(name: str, **overrides) -> ModelParams:
    """Return the model parameters of a named preset.

    ``"paper-default"`` is the parameter set used throughout the main figures
    (``V=200``, ``Omega_m=100``, ``gamma=20``, ``gN=0``).  ``"zhong2017"`` is
    the experimental membrane/recoil set converted to recoil units.
    """
    if name == "paper-default":
        p = ModelParams(V=200.0, Omega_m=100.0, gamma=20.0, gN=0.0)
    elif name in PHYSICAL_PRESETS:
        p = PHYSICAL_PRESETS[name].to_params()
    else:
        raise ValueError(f"unknown preset {name!r}; known presets: {', '.join(PRESETS)}")
    return p.replace(**overrides) if overrides else p


def effective_membrane_frequency(p: ModelParams) -> float:
    """Membrane frequency renormalised by damping, ``Omega_m + gamma**2 / Omega_m``."""
    return p.Omega_m + p.gamma**2 / p.Omega_m


def lambda_cV(p: ModelParams) -> float:
    """Lattice coupling scale ``sqrt(Omega_eff * V) / 2`` (scaled by sqrt(N))."""
    return 0.5 * math.sqrt(effective_membrane_frequency(p) * p.V)


# -- config files ---------------------------------------------------------

@dataclass
class SolverSettings:
    n_points: int = 256
    dtau: float = 1e-4
    dt: float | None = None
    tol: float = 1e-12
    max_steps: int = 200_000
    seed_offset: float = 0.01
    t_end: float | None = None


@dataclass
class Config:
    model: ModelParams = field(default_factory=ModelParams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: dict = field(default_factory=dict)


_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelParams)}
_SOLVER_KEYS = {f.name: f for f in dataclasses.fields(SolverSettings)}


def _parse_solver_value(key: str, raw: str):
    if raw.strip().lower() in ("none", ""):
        return None
    if key in ("n_points", "max_steps"):
        return int(raw)
    return float(raw)


def parse_config(text: str, base: ModelParams | None = None) -> Config:
    """Parse ``key = value`` text with ``[model]``, ``[solver]``, ``[sweep]`` sections.

    Unknown sections or keys raise ``ValueError``.  Numbers are parsed as
    decimal floating point.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(text)
    unknown = set(cp.sections()) - {"model", "solver", "sweep"}
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")

    model_kw = {}
    if cp.has_section("model"):
        for key, raw in cp.items("model"):
            if key == "preset":
                continue
            if key not in _MODEL_KEYS:
                raise ValueError(f"unknown [model] key {key!r}")
            model_kw[key] = float(raw)
        if cp.has_option("model", "preset"):
            base = from_preset(cp.get("model", "preset"))
    base = base if base is not None else ModelParams()
    model = base.replace(**model_kw)

    solver_kw = {}
    if cp.has_section("solver"):
        for key, raw in cp.items("solver"):
            if key not in _SOLVER_KEYS:
                raise ValueError(f"unknown [solver] key {key!r}")
            solver_kw[key] = _parse_solver_value(key, raw)
    solver = SolverSettings(**solver_kw)

    sweep = dict(cp.items("sweep")) if cp.has_section("sweep") else {}
    return Config(model=model, solver=solver, sweep=sweep)


def load_config(path: str | os.PathLike | None = None, base: ModelParams | None = None) -> Config:
    """Load a config file; ``$ATOMEMBRANE_CONFIG`` overrides a missing path."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return Config(model=base if base is not None else ModelParams())
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base=base)
