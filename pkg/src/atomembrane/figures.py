"""Figure pipelines: each panel is a CSV dataset plus a static SVG rendering.

The CSV is the contract; plots are a convenience drawn from the same
arrays.  Every pipeline starts from the default parameter set
(``V=200, Omega_m=100, gamma=20, gN=0``) unless a base is supplied, and
accepts overrides for model parameters and pipeline options.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import io
from .params import ModelParams, SolverSettings, from_preset
from .sweeps import SweepSpec, run_sweep

FIGURES = ("fig1a", "fig1b", "fig1c", "fig1b-inset", "fig2a", "fig2b", "fig2c", "fig3",
           "fig4a", "fig4b", "fig4c", "figS1", "figSint")

# pipeline options and their defaults; model-parameter overrides are separate
DEFAULT_OPTIONS = {
    "lambda_max": 150.0,
    "n_lambda": 76,
    "n_S": 99,
    "Vs": (20.0, 100.0, 200.0),
    "gNs": (0.0, 5.0, 10.0),
    "Vs_int": (200.0, 20.0),
    "n_ratio": 81,
    "mode_step": 0.25,
    "zoom_half_width": 0.15,
    "n_zoom": 301,
    "n_bdg": 16,
    "M": 10,
    "Lambda_S1": 50.0,
    "n_k": 4001,
    "k_max": 10.0,
    "n_lambda_k": 31,
    "n_lambda_int": 21,
}

# the order-parameter figure with interactions is computed on the GPE route
DEFAULT_ROUTE = {"figSint": ("gpe",)}


@dataclass
class FigureContext:
    out_dir: str
    params: ModelParams
    options: dict
    routes: tuple
    workers: int = 1
    solver: SolverSettings = field(default_factory=SolverSettings)
    written: list = field(default_factory=list)

    def header(self, **extra) -> dict:
        d = {f"model.{k}": v for k, v in self.params.as_dict().items()}
        d.update({f"solver.{k}": ("none" if v is None else v)
                  for k, v in dataclasses.asdict(self.solver).items()})
        d.update({f"option.{k}": v for k, v in sorted(self.options.items())})
        d["routes"] = list(self.routes)
        d.update(extra)
        return d

    def csv(self, name, columns, rows, **extra):
        path = os.path.join(self.out_dir, name + ".csv")
        io.write_csv(path, columns, rows, self.header(**extra))
        self.written.append(path)
        return path

    def svg(self, name, draw):
        path = os.path.join(self.out_dir, name + ".svg")
        try:
            _render(path, draw)
        except Exception as exc:  # plots are best effort, the CSV is authoritative
            import warnings
            warnings.warn(f"could not render {path}: {exc}", RuntimeWarning)
            return None
        self.written.append(path)
        return path

    def sweep(self, axis, values, outputs, params=None, routes=None, refine=False):
        spec = SweepSpec(axis=axis, values=tuple(values), fixed=params or self.params,
                         routes=routes or self.routes, outputs=tuple(outputs), refine=refine,
                         solver=self.solver)
        return run_sweep(spec, workers=self.workers)


def _render(path, draw):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    with matplotlib.rc_context({"svg.hashsalt": "atomembrane", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        draw(ax)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _lines(series, xlabel, ylabel, vline=None, logy=False):
    def draw(ax):
        for x, y, label, style in series:
            ax.plot(x, y, style, label=label, lw=1.2, ms=3)
        if vline is not None:
            ax.axvline(vline, ls=":", color="k", lw=0.8)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if any(s[2] for s in series):
            ax.legend(fontsize=7)
    return draw


def _lambda_grid(ctx, lambda_max=None, n=None):
    return np.linspace(0.0, lambda_max or ctx.options["lambda_max"], int(n or ctx.options["n_lambda"]))


# -- Fig. 1 ------------------------------------------------------------------------------

def _fig1a(ctx):
    from .variational import energy_surface
    n_S = int(ctx.options["n_S"])
    S = np.linspace(-0.99, 0.99, n_S)
    L = _lambda_grid(ctx)
    surf = energy_surface(ctx.params, S, L)
    rows = [(L[i], S[j], surf.eps[i, j], surf.S0[i], int(surf.failed[i, j]))
            for i in range(L.size) for j in range(S.size)]
    ctx.csv("fig1a", ["Lambda", "S", "eps", "S0_min", "failed"], rows)

    def draw(ax):
        m = ax.pcolormesh(S, L, surf.eps, shading="nearest", cmap="viridis")
        ax.plot(surf.S0, L, "r-", lw=1)
        ax.plot(-surf.S0, L, "r-", lw=1)
        ax.set_xlabel("S")
        ax.set_ylabel(r"$\Lambda/\omega_R$")
        ax.figure.colorbar(m, ax=ax, label=r"$\epsilon$")
    ctx.svg("fig1a", draw)


def _fig1bc(ctx, which):
    col = "S0" if which == "fig1b" else "sigma0"
    L = _lambda_grid(ctx)
    rows, series = [], []
    for V in ctx.options["Vs"]:
        pV = ctx.params.replace(V=float(V))
        ds = ctx.sweep("Lambda", L, ("S0", "sigma0"), params=pV)
        for r in ds.rows:
            rows.append((float(V), *r))
        for route in ctx.routes:
            style = "-" if route == "variational" else "--"
            series.append((ds.axis_values(route), ds.column(col, route), f"V={V:g} {route}", style))
    ctx.csv(which, ["V", "Lambda", "route", "S0", "sigma0", "status"], rows)
    ylabel = "$S_0$" if col == "S0" else r"$\sigma_0$"
    ctx.svg(which, _lines(series, r"$\Lambda/\omega_R$", ylabel))


def _fig1b_inset(ctx):
    from .variational import critical_coupling
    x = np.linspace(0.0, 2.0, int(ctx.options["n_ratio"]))
    rows, series = [], []
    for V in ctx.options["Vs"]:
        pV = ctx.params.replace(V=float(V))
        Lc = critical_coupling(pV)
        ds = ctx.sweep("Lambda", x * Lc, ("S0",), params=pV, routes=("variational",))
        S = ds.column("S0")
        rows += [(float(V), Lc, xi, Li, Si) for xi, Li, Si in zip(x, ds.axis_values(), S)]
        series.append((x, S, f"V={V:g}", "-"))
    ctx.csv("fig1b-inset", ["V", "Lambda_c", "Lambda_over_Lambda_c", "Lambda", "S0"], rows)
    ctx.svg("fig1b-inset", _lines(series, r"$\Lambda/\Lambda_c$", "$S_0$"))


# -- Fig. 2 / 3 / 4(a): collective modes ----------------------------------------------------

def _mode_grid(ctx, lo=0.0, hi=None, step=None):
    from .variational import critical_coupling
    hi = ctx.options["lambda_max"] if hi is None else hi
    step = step or ctx.options["mode_step"]
    n = int(round((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n)
    spec = SweepSpec("Lambda", tuple(grid), fixed=ctx.params, refine=True)
    return spec.grid(), critical_coupling(ctx.params)


def _tracked(ctx, Lambdas):
    from .linear_response import modes, track_modes
    sweep = [modes(ctx.params.replace(Lambda=float(L))) for L in Lambdas]
    return track_modes(sweep)


def _mode_rows(Lambdas, tracked):
    return [(L, lab, nu.imag, -nu.real)
            for L, row in zip(Lambdas, tracked.eigenvalues) for lab, nu in zip(tracked.labels, row)]


def _bdg_rows(ctx):
    if "gpe" not in ctx.routes:
        return None
    L = _lambda_grid(ctx, n=ctx.options["n_bdg"])
    branches = ("membrane", "displacement", "width")
    outs = tuple(f"{a}_{b}" for b in branches for a in ("omega", "gamma"))
    ds = ctx.sweep("Lambda", L, outs, routes=("gpe",))
    rows = []
    for r in ds.rows:
        for k, b in enumerate(branches):
            rows.append((r[0], b, r[2 + 2 * k], r[3 + 2 * k], r[-1]))
    return rows


def _mode_figure(ctx, name, part, lo=0.0, hi=None, step=None):
    Lambdas, Lc = _mode_grid(ctx, lo, hi, step)
    tr = _tracked(ctx, Lambdas)
    ctx.csv(name, ["Lambda", "branch_label", "omega_k", "gamma_k"], _mode_rows(Lambdas, tr),
            Lambda_c=Lc)
    colors = {"membrane": "C0", "width": "C2", "displacement": "C3"}
    series = []
    for lab in tr.labels:
        if not lab.endswith("+"):
            continue
        nu = tr.branch(lab[:-1])
        y = tr.frequency(lab[:-1]) if part == "omega" else -nu.real
        series.append((Lambdas, y, lab[:-1], colors[lab[:-1]] + "-"))
    bdg = _bdg_rows(ctx) if lo == 0.0 else None
    if bdg is not None:
        ctx.csv(name + "_gpe", ["Lambda", "branch_label", "omega_k", "gamma_k", "status"], bdg)
        for b in ("membrane", "displacement", "width"):
            pts = [(r[0], r[2] if part == "omega" else r[3]) for r in bdg if r[1] == b]
            series.append(([q[0] for q in pts], [q[1] for q in pts], f"{b} (GPE)", colors[b] + "--"))
    ctx.svg(name, _lines(series, r"$\Lambda/\omega_R$",
                         r"$\omega_k/\omega_R$" if part == "omega" else r"$\gamma_k/\omega_R$", vline=Lc))
    return tr, Lambdas, Lc


def _fig2a(ctx):
    from .variational import critical_coupling
    p0 = ctx.params.replace(gamma=0.0)
    Lc = critical_coupling(p0)
    L = _lambda_grid(ctx, n=4 * int(ctx.options["n_lambda"]))
    L = L[np.abs(L - Lc) > 1e-9 * Lc]
    # sample the divergence logarithmically from below
    near = Lc * (1 - np.logspace(-1, -6, 26))
    grid = np.unique(np.concatenate([L, near]))
    ds = ctx.sweep("Lambda", grid, ("E_N_md", "E_N_mw"), params=p0, routes=("variational",))
    ctx.csv("fig2a", ["Lambda", "E_N_membrane_displacement", "E_N_membrane_width", "status"],
            [(r[0], r[2], r[3], r[4]) for r in ds.rows], Lambda_c=Lc,
            # the ground-state covariance is only defined without damping
            **{"model.gamma": 0.0})
    x = ds.axis_values()
    ctx.svg("fig2a", _lines([(x, ds.column("E_N_md"), "membrane-displacement", "-"),
                             (x, ds.column("E_N_mw"), "membrane-width", "-")],
                            r"$\Lambda/\omega_R$", r"$E_\mathcal{N}$", vline=Lc))


def _fig3(ctx):
    from .linear_response import overdamped_window
    from .variational import critical_coupling
    Lc = critical_coupling(ctx.params)
    h = float(ctx.options["zoom_half_width"])
    n = int(ctx.options["n_zoom"])
    Lambdas = np.linspace(Lc - h, Lc + h, n)
    tr = _tracked(ctx, Lambdas)
    try:
        w = overdamped_window(ctx.params, Lc, half_width=h)
        extra = {"overdamped_lower": w.lower, "overdamped_upper": w.upper, "overdamped_width": w.width}
    except Exception as exc:
        extra = {"overdamped_window": f"not found ({exc})"}
    rows = _mode_rows(Lambdas, tr)
    ctx.csv("fig3", ["Lambda", "branch_label", "omega_k", "gamma_k"], rows, Lambda_c=Lc, **extra)
    # the plot shows the soft pair only; all branches are in the CSV
    series = []
    for lab, color in (("displacement+", "C3"), ("displacement-", "C1")):
        nu = tr.eigenvalues[:, tr.labels.index(lab)]
        series.append((Lambdas, np.abs(nu.imag), f"frequency ({lab})", color + "-"))
        series.append((Lambdas, -nu.real, f"decay rate ({lab})", color + ":"))
    ctx.svg("fig3", _lines(series, r"$\Lambda/\omega_R$", r"$\omega_k,\ \gamma_k$", vline=Lc))


def _fig4a(ctx):
    Lambdas, Lc = _mode_grid(ctx)
    tr = _tracked(ctx, Lambdas)
    f = tr.frequency("membrane")
    ctx.csv("fig4a", ["Lambda", "omega_membrane"], list(zip(Lambdas, f)), Lambda_c=Lc)
    ctx.svg("fig4a", _lines([(Lambdas, f, "", "-")], r"$\Lambda/\omega_R$",
                            r"$\omega_{\rm mem}/\omega_R$", vline=Lc))


# -- Fig. 4 (b, c), S1: momentum space ----------------------------------------------------

def _k_grid(ctx, n=None):
    km = float(ctx.options["k_max"])
    return np.linspace(-km, km, int(n or ctx.options["n_k"]))


def _fig4b(ctx):
    from .observables import momentum_distribution_gaussian
    from .variational import steady_state
    L = _lambda_grid(ctx, n=ctx.options["n_lambda_k"])
    k = _k_grid(ctx, 401)
    img = np.empty((L.size, k.size))
    rows = []
    for i, Li in enumerate(L):
        ss = steady_state(ctx.params.replace(Lambda=float(Li)))
        n = momentum_distribution_gaussian(ss.sigma0, ss.zeta0, ctx.params.N_atoms, k)
        img[i] = n.magnitude
        rows += [(Li, kj, a) for kj, a in zip(k, img[i])]
    ctx.csv("fig4b", ["Lambda", "k", "abs_n"], rows)

    def draw(ax):
        m = ax.pcolormesh(k, L, img, shading="nearest", cmap="magma")
        ax.set_xlabel("k")
        ax.set_ylabel(r"$\Lambda/\omega_R$")
        ax.figure.colorbar(m, ax=ax, label="|n(k)|")
    ctx.svg("fig4b", draw)


def _fig4c(ctx):
    from .variational import critical_coupling
    Lc = critical_coupling(ctx.params)
    L = _lambda_grid(ctx, n=2 * int(ctx.options["n_lambda"]) - 1)
    ds = ctx.sweep("Lambda", L, ("fwhm",))
    ctx.csv("fig4c", ["Lambda", "route", "width", "status"],
            [(r[0], r[1], r[2], r[3]) for r in ds.rows], Lambda_c=Lc)
    series = [(ds.axis_values(r), ds.column("fwhm", r), r, "-" if r == "variational" else "--")
              for r in ctx.routes]
    ctx.svg("fig4c", _lines(series, r"$\Lambda/\omega_R$", "FWHM of |n(k)|", vline=Lc))


def _figS1(ctx):
    from .observables import lattice_momentum_distribution, momentum_distribution_gaussian
    from .variational import steady_state
    L = float(ctx.options["Lambda_S1"])
    M = int(ctx.options["M"])
    ss = steady_state(ctx.params.replace(Lambda=L))
    k = _k_grid(ctx)
    n = momentum_distribution_gaussian(ss.sigma0, ss.zeta0, ctx.params.N_atoms, k)
    nl = lattice_momentum_distribution(n, ss.zeta0, M)
    ctx.csv("figS1", ["k", "abs_n", "abs_n_lat"], list(zip(k, n.magnitude, nl.magnitude)),
            Lambda=L, M=M, sigma0=ss.sigma0)
    ctx.svg("figS1", _lines([(k, n.magnitude, "single site", "-"),
                             (k, nl.magnitude, f"lattice M={M}", "-")], "k", "|n(k)|"))


def _figSint(ctx):
    from .variational import critical_coupling
    rows, series = [], []
    n = int(ctx.options["n_lambda_int"])
    for V in ctx.options["Vs_int"]:
        Lc = critical_coupling(ctx.params.replace(V=float(V), gN=0.0))
        L = np.linspace(0.0, 2 * Lc, n)
        for gN in ctx.options["gNs"]:
            pv = ctx.params.replace(V=float(V), gN=float(gN))
            ds = ctx.sweep("Lambda", L, ("S0",), params=pv)
            rows += [(float(V), float(gN), *r) for r in ds.rows]
            for route in ctx.routes:
                series.append((ds.axis_values(route), ds.column("S0", route),
                               f"V={V:g} gN={gN:g} {route}", "-" if int(V) == 200 else "--"))
    ctx.csv("figSint", ["V", "gN", "Lambda", "route", "S0", "status"], rows)
    ctx.svg("figSint", _lines(series, r"$\Lambda/\omega_R$", "$S_0$"))


_PIPELINES = {
    "fig1a": _fig1a,
    "fig1b": lambda c: _fig1bc(c, "fig1b"),
    "fig1c": lambda c: _fig1bc(c, "fig1c"),
    "fig1b-inset": _fig1b_inset,
    "fig2a": _fig2a,
    "fig2b": lambda c: _mode_figure(c, "fig2b", "omega"),
    "fig2c": lambda c: _mode_figure(c, "fig2c", "gamma"),
    "fig3": _fig3,
    "fig4a": _fig4a,
    "fig4b": _fig4b,
    "fig4c": _fig4c,
    "figS1": _figS1,
    "figSint": _figSint,
}


def coerce_option(key, value):
    """Convert a string override (``"20,100"`` or ``"0.5"``) to the option's type."""
    default = DEFAULT_OPTIONS.get(key)
    if not isinstance(value, str):
        return tuple(value) if isinstance(default, tuple) else value
    if isinstance(default, tuple):
        return tuple(float(v) for v in value.split(",") if v.strip())
    if isinstance(default, int):
        return int(value)
    return float(value)


def figure(name: str, overrides: dict | None = None, out_dir: str = ".", base: ModelParams | None = None,
           routes=None, workers: int = 1, solver: SolverSettings | None = None) -> list:
    """Run the pipeline ``name`` and return the list of files written.

    ``overrides`` may contain model-parameter names (applied to ``base``,
    default ``paper-default``) and pipeline options from ``DEFAULT_OPTIONS``.
    """
    if name not in _PIPELINES:
        raise ValueError(f"unknown figure {name!r}; valid names: {', '.join(FIGURES)}")
    overrides = dict(overrides or {})
    model_keys = {f.name for f in dataclasses.fields(ModelParams)}
    model_kw = {k: float(v) for k, v in overrides.items() if k in model_keys}
    opts = dict(DEFAULT_OPTIONS)
    for k, v in overrides.items():
        if k in model_keys:
            continue
        if k not in DEFAULT_OPTIONS:
            raise ValueError(f"unknown override {k!r}; model keys {sorted(model_keys)} "
                             f"or options {sorted(DEFAULT_OPTIONS)}")
        opts[k] = coerce_option(k, v)
    params = (base or from_preset("paper-default")).replace(**model_kw)
    if routes is None:
        routes = DEFAULT_ROUTE.get(name, ("variational",))
    ctx = FigureContext(out_dir, params, opts, tuple(routes), workers, solver or SolverSettings())
    os.makedirs(out_dir, exist_ok=True)
    _PIPELINES[name](ctx)
    return ctx.written
