"""Parallel parameter sweeps with deterministic, provenance-tagged output.

A sweep evaluates a list of observables at every value of one swept
parameter, by one or both solution routes.  Each grid point is an
independent pure function of the model parameters, so points are farmed
out to a process pool and reassembled in grid order afterwards.  Failed
points are kept as rows with ``nan`` values and a reason code.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .params import ModelParams, SolverSettings
from .variational import SolverError

AXES = ("Lambda", "V", "gN", "gamma")
ROUTES = ("variational", "gpe")


# -- observables -----------------------------------------------------------------

def _var_state(p, cache):
    from .variational import steady_state
    if "ss" not in cache:
        cache["ss"] = steady_state(p)
    return cache["ss"]


def _var_fwhm(p, cache):
    from .observables import distribution_width, momentum_distribution_gaussian
    ss = _var_state(p, cache)
    return distribution_width(momentum_distribution_gaussian(ss.sigma0, ss.zeta0, 1.0))


def _var_modes(p, cache):
    from .linear_response import build_M, eigenmodes, linearize
    if "modes" not in cache:
        cache["modes"] = eigenmodes(build_M(linearize(p, _var_state(p, cache))))
    return cache["modes"]


def _var_lowest(p, cache):
    ms = _var_modes(p, cache)
    return ms.eigenvalues[0]


def _var_EN(pair):
    def f(p, cache):
        from .linear_response import ground_state_covariance, linearize, log_negativity
        if p.gamma != 0.0:
            raise _Missing("requires_gamma0")
        if "cov" not in cache:
            cache["cov"] = ground_state_covariance(linearize(p, _var_state(p, cache)))
        return log_negativity(cache["cov"], pair)
    return f


def _var_Lc(p, cache):
    from .variational import critical_coupling
    return critical_coupling(p)


def _gpe_state(p, cache):
    from .gpe import Grid, ground_state
    if "gs" not in cache:
        s = cache["solver"]
        cache["gs"] = ground_state(p, Grid(s.n_points), seed_offset=s.seed_offset, dtau=s.dtau,
                                   tol=s.tol, max_steps=s.max_steps)
    return cache["gs"]


def _gpe_cw(p, cache):
    from .gpe import center_and_width
    if "cw" not in cache:
        cache["cw"] = center_and_width(_gpe_state(p, cache).psi)
    return cache["cw"]


def _gpe_fwhm(p, cache):
    from .observables import distribution_width, momentum_distribution_psi
    return distribution_width(momentum_distribution_psi(_gpe_state(p, cache).psi))


def _gpe_bdg(p, cache):
    from .gpe import bdg_matrix, bdg_modes
    if "bdg" not in cache:
        gs = _gpe_state(p, cache)
        cache["bdg"] = bdg_modes(bdg_matrix(gs.psi, gs.alpha, gs.mu, p), n_keep=12)
    return cache["bdg"]


def _gpe_branch(branch, part):
    def f(p, cache):
        nu = _gpe_bdg(p, cache).lowest(branch)
        if nu is None:
            raise _Missing(f"no_{branch}_mode")
        return nu.imag if part == "omega" else -nu.real
    return f


OBSERVABLES = {
    "S0": {
        "variational": lambda p, c: abs(_var_state(p, c).S0),
        "gpe": lambda p, c: abs(math.sin(2 * _gpe_cw(p, c)[0])),
    },
    "sigma0": {
        "variational": lambda p, c: _var_state(p, c).sigma0,
        "gpe": lambda p, c: _gpe_cw(p, c)[1],
    },
    "alpha_prime0": {
        "variational": lambda p, c: abs(_var_state(p, c).alpha_prime0),
        "gpe": lambda p, c: abs(_gpe_state(p, c).alpha.real),
    },
    "fwhm": {"variational": _var_fwhm, "gpe": _gpe_fwhm},
    "mu": {"gpe": lambda p, c: _gpe_state(p, c).mu},
    "energy": {"gpe": lambda p, c: _gpe_state(p, c).energy},
    "omega_low": {"variational": lambda p, c: abs(_var_lowest(p, c).imag)},
    "gamma_low": {"variational": lambda p, c: -_var_lowest(p, c).real},
    "omega_modes": {"variational": lambda p, c: tuple(sorted(set(np.round(
        np.abs(_var_modes(p, c).eigenvalues.imag), 12))))},
    "E_N_md": {"variational": _var_EN("membrane-displacement")},
    "E_N_mw": {"variational": _var_EN("membrane-width")},
    "Lambda_c": {"variational": _var_Lc},
}
for _b in ("membrane", "displacement", "width"):
    OBSERVABLES[f"omega_{_b}"] = {"gpe": _gpe_branch(_b, "omega")}
    OBSERVABLES[f"gamma_{_b}"] = {"gpe": _gpe_branch(_b, "gamma")}


class _Missing(Exception):
    """Observable is undefined at this point (reason code in ``args[0]``)."""


# -- spec and dataset ------------------------------------------------------------------

@dataclass
class SweepSpec:
    """Description of a one-dimensional sweep.

    Parameters
    ----------
    axis : str
        Swept parameter, one of ``Lambda``, ``V``, ``gN``, ``gamma``.
    values : sequence of float
        Strictly increasing grid (at least two points).  See :meth:`linspace`.
    fixed : ModelParams
        Parameters held fixed; the swept one is overwritten per point.
    routes : tuple of str
        Subset of ``("variational", "gpe")``.
    outputs : tuple of str
        Observable names, see ``OBSERVABLES``.
    refine : bool
        For Lambda sweeps, add a window of width ``refine_width`` around the
        critical coupling at ten times the base resolution.
    """

    axis: str
    values: tuple
    fixed: ModelParams = field(default_factory=ModelParams)
    routes: tuple = ("variational",)
    outputs: tuple = ("S0",)
    refine: bool = False
    refine_width: float = 0.2
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        self.values = tuple(float(v) for v in np.atleast_1d(np.asarray(self.values, dtype=float)))
        self.routes = tuple(self.routes)
        self.outputs = tuple(self.outputs)
        self.validate()

    @classmethod
    def linspace(cls, axis, start, stop, count, **kw):
        return cls(axis=axis, values=tuple(np.linspace(start, stop, int(count))), **kw)

    def validate(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {AXES}")
        v = np.asarray(self.values)
        if v.size < 2:
            raise ValueError("sweep grid needs at least two points")
        if not np.all(np.isfinite(v)) or np.any(np.diff(v) <= 0):
            raise ValueError("sweep grid must be finite and strictly increasing")
        if not self.routes or any(r not in ROUTES for r in self.routes):
            raise ValueError(f"routes must be a non-empty subset of {ROUTES}")
        if not self.outputs:
            raise ValueError("no observables requested")
        for name in self.outputs:
            if name not in OBSERVABLES:
                raise ValueError(f"unknown observable {name!r}; known: {sorted(OBSERVABLES)}")
            if not any(r in OBSERVABLES[name] for r in self.routes):
                raise ValueError(f"observable {name!r} not available from routes {self.routes}")
        if self.refine and self.axis != "Lambda":
            raise ValueError("refinement around Lambda_c requires a Lambda sweep")
        # constructing a point validates the parameter ranges early
        for x in (v[0], v[-1]):
            self.fixed.replace(**{self.axis: float(x)})

    def grid(self) -> np.ndarray:
        v = np.asarray(self.values)
        if not self.refine:
            return v
        from .variational import critical_coupling
        Lc = critical_coupling(self.fixed)
        step = float(np.median(np.diff(v))) / 10
        h = self.refine_width / 2
        n = int(math.floor(h / step))
        extra = Lc + step * np.arange(-n, n + 1)
        extra = extra[(extra >= v[0]) & (extra <= v[-1])]
        allv = np.sort(np.concatenate([v, extra]))
        keep = np.r_[True, np.diff(allv) > 1e-12 * max(1.0, abs(allv[-1]))]
        return allv[keep]

    def resolved(self) -> dict:
        """Everything needed to rerun the sweep, for file headers."""
        d = {f"model.{k}": v for k, v in self.fixed.as_dict().items() if k != self.axis}
        d.update({f"solver.{k}": ("none" if v is None else v)
                  for k, v in dataclasses.asdict(self.solver).items()})
        d.update({"sweep.axis": self.axis, "sweep.values": list(self.values),
                  "sweep.routes": list(self.routes), "sweep.outputs": list(self.outputs),
                  "sweep.refine": str(self.refine), "sweep.refine_width": self.refine_width})
        return d


@dataclass
class SweepDataset:
    axis: str
    outputs: tuple
    rows: list            # (axis value, route, values..., status)
    params: dict

    @property
    def columns(self):
        return [self.axis, "route", *self.outputs, "status"]

    def column(self, name: str, route: str = "variational") -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows if r[1] == route], dtype=float)

    def axis_values(self, route: str = "variational") -> np.ndarray:
        return np.array([r[0] for r in self.rows if r[1] == route])

    @property
    def missing(self):
        return [r for r in self.rows if r[-1] != "ok"]

    def to_csv(self, path, extra=None):
        return io.write_csv(path, self.columns, self.rows, self.params, extra)


# -- evaluation -----------------------------------------------------------------------

def _scalar(v):
    if isinstance(v, tuple):
        return ";".join(io.fmt(x) for x in v)
    return float(v)


def evaluate_point(task):
    """Evaluate all requested observables of one route at one grid point."""
    index, x, route, params, outputs, solver = task
    cache = {"solver": solver}
    p = params
    vals, status = [], "ok"
    for name in outputs:
        fn = OBSERVABLES[name].get(route)
        if fn is None:
            vals.append(math.nan)
            status = _merge(status, f"missing:unavailable_{name}")
            continue
        try:
            vals.append(_scalar(fn(p, cache)))
        except _Missing as exc:
            vals.append(math.nan)
            status = _merge(status, f"missing:{exc.args[0]}")
        except (SolverError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            vals.append(math.nan)
            status = _merge(status, f"missing:{type(exc).__name__}")
    return index, (x, route, *vals, status)


def _merge(status, new):
    if status == "ok":
        return new
    return status if new in status.split("|") else status + "|" + new


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepDataset:
    """Evaluate ``spec`` on its (optionally refined) grid.

    Rows are ordered by grid value and then by route in the order given in
    ``spec.routes``, independent of the number of workers.
    """
    spec.validate()
    grid = spec.grid()
    tasks = []
    for i, x in enumerate(grid):
        p = spec.fixed.replace(**{spec.axis: float(x)})
        for j, route in enumerate(spec.routes):
            tasks.append(((i, j), float(x), route, p, spec.outputs, spec.solver))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(evaluate_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [evaluate_point(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    return SweepDataset(spec.axis, spec.outputs, [r[1] for r in results], spec.resolved())
