"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 partial failure (some
rows missing), 3 total numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import __version__, io
from .params import (_SOLVER_KEYS, CONFIG_ENV_VAR, PRESETS, ModelParams, _parse_solver_value,
                     from_preset, lambda_cV, load_config)
from .variational import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3
ROUTE_CHOICES = ("variational", "gpe", "both")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not "partial failure"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _routes(args):
    return ("variational", "gpe") if args.route == "both" else (args.route,)


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _resolve(args):
    """Model parameters and solver settings from preset, config file and --set."""
    base = from_preset(args.preset) if args.preset else None
    cfg = load_config(args.config, base=base)
    p = cfg.model
    model_keys = {f.name for f in dataclasses.fields(ModelParams)}
    sets = _parse_set(args.set)
    model_kw = {k: float(v) for k, v in sets.items() if k in model_keys}
    solver_kw = {k: _parse_solver_value(k, v) for k, v in sets.items() if k in _SOLVER_KEYS}
    extra = {k: v for k, v in sets.items() if k not in model_keys and k not in _SOLVER_KEYS}
    if solver_kw:
        cfg = dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, **solver_kw))
    if getattr(args, "Lambda", None) is not None:
        model_kw["Lambda"] = args.Lambda
    p = p.replace(**model_kw)
    return p, cfg, extra


def _header(p, cfg, **extra):
    d = {f"model.{k}": v for k, v in p.as_dict().items()}
    d.update({f"solver.{k}": ("none" if v is None else v)
              for k, v in dataclasses.asdict(cfg.solver).items()})
    d.update(extra)
    return d


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _reject_extra(extra):
    if extra:
        raise ConfigError(f"unknown --set key(s): {sorted(extra)}")


def _lambda_values(args, cfg):
    if args.lambdas:
        return [float(x) for x in args.lambdas.split(",")]
    if args.range:
        lo, hi, n = args.range
        return list(np.linspace(float(lo), float(hi), int(n)))
    return None


# -- subcommands -----------------------------------------------------------------------

def cmd_steady(args):
    from .variational import steady_state
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    branch = -1 if args.negative else 1
    ss = steady_state(p, branch)
    cols = ["Lambda", "alpha_prime0", "alpha_dprime0", "sigma0", "S0", "zeta0", "branch"]
    row = (p.Lambda, ss.alpha_prime0, ss.alpha_dprime0, ss.sigma0, ss.S0, ss.zeta0, ss.branch)
    io.write_csv(_out(args, "steady.csv"), cols, [row], _header(p, cfg))
    print(" ".join(f"{c}={io.fmt(v)}" for c, v in zip(cols, row)))
    return EXIT_OK


def cmd_critical(args):
    from .variational import critical_coupling
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    Lc = critical_coupling(p)
    row = (Lc, lambda_cV(p), Lc / lambda_cV(p))
    io.write_csv(_out(args, "critical.csv"), ["Lambda_c", "Lambda_cV", "ratio"], [row], _header(p, cfg))
    print(f"Lambda_c={io.fmt(row[0])} Lambda_cV={io.fmt(row[1])} ratio={io.fmt(row[2])}")
    return EXIT_OK


def cmd_modes(args):
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    routes = _routes(args)
    values = _lambda_values(args, cfg) or [p.Lambda]
    status = EXIT_OK
    if "variational" in routes:
        from .linear_response import modes, track_modes
        sweep = [modes(p.replace(Lambda=L)) for L in values]
        tr = track_modes(sweep)
        rows = [(L, lab, nu.imag, -nu.real) for L, r in zip(values, tr.eigenvalues)
                for lab, nu in zip(tr.labels, r)]
        io.write_csv(_out(args, "modes.csv"), ["Lambda", "branch_label", "omega_k", "gamma_k"],
                     rows, _header(p, cfg, Lambdas=values))
        print(f"wrote {len(rows)} mode rows to {_out(args, 'modes.csv')}")
    if "gpe" in routes:
        status = max(status, _bdg_table(args, p, cfg, values, "modes_gpe.csv"))
    return status


def _bdg_table(args, p, cfg, values, name):
    from .gpe import Grid, bdg_matrix, bdg_modes, ground_state
    rows, failed = [], 0
    for L in values:
        pl = p.replace(Lambda=L)
        try:
            gs = ground_state(pl, Grid(cfg.solver.n_points), seed_offset=cfg.solver.seed_offset,
                              dtau=cfg.solver.dtau, tol=cfg.solver.tol, max_steps=cfg.solver.max_steps)
            bm = bdg_modes(bdg_matrix(gs.psi, gs.alpha, gs.mu, pl), n_keep=args.n_keep)
        except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
            failed += 1
            rows.append((L, -1, math.nan, math.nan, f"missing:{type(exc).__name__}"))
            continue
        rows += [(L, i, nu.real, nu.imag, lab) for i, (nu, lab) in enumerate(zip(bm.eigenvalues, bm.labels))]
    io.write_csv(_out(args, name), ["Lambda", "index", "re_nu", "im_nu", "branch"], rows,
                 _header(p, cfg, Lambdas=values))
    print(f"wrote {len(rows)} BdG rows to {_out(args, name)}")
    return _status(failed, len(values))


def _status(failed, total):
    if failed == 0:
        return EXIT_OK
    return EXIT_FAILED if failed == total else EXIT_PARTIAL


def cmd_entanglement(args):
    from .linear_response import PAIRS, InstabilityError, ground_state_covariance, linearize, log_negativity
    from .variational import critical_coupling
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    p0 = p.replace(gamma=0.0)
    values = _lambda_values(args, cfg)
    if values is None:
        Lc = critical_coupling(p0)
        values = list(np.linspace(0.0, Lc * 0.99, 100))
    rows, failed = [], 0
    for L in values:
        try:
            C = ground_state_covariance(linearize(p0.replace(Lambda=L)))
            rows.append((L, *(log_negativity(C, k) for k in PAIRS), "ok"))
        except (InstabilityError, SolverError, ValueError) as exc:
            failed += 1
            rows.append((L, math.nan, math.nan, f"missing:{type(exc).__name__}"))
    path = _out(args, "entanglement.csv")
    io.write_csv(path, ["Lambda", "E_N_pair1", "E_N_pair2", "status"], rows,
                 _header(p0, cfg, pair1="membrane-displacement", pair2="membrane-width",
                         note="undamped ground state (gamma set to 0)"))
    print(f"wrote {len(rows)} rows to {path}")
    return _status(failed, len(values))


def _ground(p, cfg):
    from .gpe import Grid, ground_state
    s = cfg.solver
    return ground_state(p, Grid(s.n_points), seed_offset=s.seed_offset, dtau=s.dtau, tol=s.tol,
                        max_steps=s.max_steps)


def cmd_gpe_ground(args):
    from .gpe import center_and_width
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    gs = _ground(p, cfg)
    z = gs.psi.grid.z
    a = gs.psi.amplitudes
    path = _out(args, "gpe_ground.csv")
    zeta, width = center_and_width(gs.psi)
    io.write_csv(path, ["z", "re_psi", "im_psi", "abs_psi2"],
                 list(zip(z, a.real, a.imag, np.abs(a) ** 2)),
                 _header(p, cfg, mu=gs.mu, energy=gs.energy, alpha_re=gs.alpha.real,
                         alpha_im=gs.alpha.imag, zeta=zeta, width=width, S=math.sin(2 * zeta)))
    print(f"mu={io.fmt(gs.mu)} S={io.fmt(math.sin(2 * zeta))} width={io.fmt(width)} -> {path}")
    return EXIT_OK


def cmd_gpe_evolve(args):
    from .gpe import Wavefunction, evolve
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    gs = _ground(p, cfg)
    psi = gs.psi
    if args.shift:
        # displace the stationary state to excite collective motion
        g = psi.grid
        k = g.k
        psi = Wavefunction(g, np.fft.ifft(np.exp(-1j * k * args.shift) * np.fft.fft(psi.amplitudes)))
    t_end = args.t_end if args.t_end is not None else (cfg.solver.t_end or 1.0)
    dt = args.dt if args.dt is not None else (cfg.solver.dt or 1e-4)
    tr = evolve(psi, gs.alpha, p, t_end, dt=dt, sample_every=args.sample_every)
    path = _out(args, "gpe_evolve.csv")
    io.write_csv(path, ["t", "re_alpha", "im_alpha", "zeta", "width", "norm", "energy"],
                 list(zip(tr.t, tr.alpha.real, tr.alpha.imag, tr.zeta, tr.width, tr.norm, tr.energy)),
                 _header(p, cfg, t_end=t_end, dt=dt, shift=args.shift))
    print(f"wrote {tr.t.size} samples to {path}")
    return EXIT_OK


def cmd_bdg(args):
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    values = _lambda_values(args, cfg) or [p.Lambda]
    return _bdg_table(args, p, cfg, values, "bdg.csv")


def cmd_momentum(args):
    from .gpe import center_and_width
    from .observables import (distribution_width, lattice_momentum_distribution,
                              momentum_distribution_gaussian, momentum_distribution_psi)
    from .variational import steady_state
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    k = np.linspace(-args.k_max, args.k_max, args.n_k)
    status = EXIT_OK
    for route in _routes(args):
        if route == "variational":
            ss = steady_state(p)
            n = momentum_distribution_gaussian(ss.sigma0, ss.zeta0, p.N_atoms, k)
            zeta0 = ss.zeta0
        else:
            gs = _ground(p, cfg)
            zeta0, _ = center_and_width(gs.psi)
            n = momentum_distribution_psi(gs.psi, p.N_atoms, k, zeta0)
        if args.sites > 1:
            n = lattice_momentum_distribution(n, zeta0, args.sites)
        try:
            width = distribution_width(n) if args.sites == 1 else math.nan
        except ValueError:
            width, status = math.nan, EXIT_PARTIAL
        path = _out(args, f"momentum_{route}.csv")
        io.write_csv(path, ["k", "abs_n", "re_n", "im_n"],
                     [(kk, abs(v), v.real, v.imag) for kk, v in zip(n.k_values, n.values)],
                     _header(p, cfg, route=route, sites=args.sites, fwhm=width))
        print(f"{route}: fwhm={io.fmt(width)} -> {path}")
    return status


def _sweep_spec(args, p, cfg):
    from .sweeps import SweepSpec
    sw = dict(cfg.sweep)
    axis = args.axis or sw.pop("axis", "Lambda")
    sw.pop("axis", None)
    if args.values:
        values = [float(x) for x in args.values.split(",")]
    elif args.range:
        values = list(np.linspace(float(args.range[0]), float(args.range[1]), int(args.range[2])))
    elif "values" in sw:
        values = [float(x) for x in sw["values"].split(",")]
    elif {"start", "stop", "count"} <= sw.keys():
        values = list(np.linspace(float(sw["start"]), float(sw["stop"]), int(sw["count"])))
    else:
        raise ConfigError("sweep grid missing: give --range, --values or [sweep] start/stop/count")
    outputs = args.outputs if args.outputs is not None else sw.get("outputs", "S0")
    outputs = tuple(o.strip() for o in outputs.split(",") if o.strip())
    refine = args.refine or sw.get("refine", "false").lower() in ("1", "true", "yes")
    known = {"axis", "values", "start", "stop", "count", "outputs", "refine", "refine_width"}
    unknown = set(sw) - known
    if unknown:
        raise ConfigError(f"unknown [sweep] key(s): {sorted(unknown)}")
    return SweepSpec(axis=axis, values=tuple(values), fixed=p, routes=_routes(args), outputs=outputs,
                     refine=refine, refine_width=float(sw.get("refine_width", 0.2)), solver=cfg.solver)


def cmd_sweep(args):
    from .sweeps import run_sweep
    p, cfg, extra = _resolve(args)
    _reject_extra(extra)
    try:
        spec = _sweep_spec(args, p, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ds = run_sweep(spec, workers=args.workers)
    path = _out(args, args.name + ".csv")
    ds.to_csv(path)
    n_missing = len(ds.missing)
    print(f"wrote {len(ds.rows)} rows ({n_missing} missing) to {path}")
    return _status(n_missing, len(ds.rows))


def cmd_figure(args):
    from .figures import FIGURES, figure
    if args.name not in FIGURES:
        raise ConfigError(f"unknown figure {args.name!r}; valid names: {', '.join(FIGURES)}")
    from .params import Config
    # figures use their caption parameters unless a base set is given explicitly
    base, cfg = None, Config()
    if args.preset or args.config or os.environ.get(CONFIG_ENV_VAR):
        base, cfg, _ = _resolve(argparse.Namespace(**{**vars(args), "set": []}))
    overrides = _parse_set(args.set)
    routes = _routes(args) if args.route_given else None
    try:
        files = figure(args.name, overrides, out_dir=args.out, base=base, routes=routes,
                       workers=args.workers, solver=cfg.solver)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for f in files:
        print(f)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def _global_flags(suppress: bool):
    # global flags are accepted before and after the subcommand; the
    # subcommand copy must not overwrite values given before it
    common = argparse.ArgumentParser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common.add_argument("--config", default=d(None), help=f"config file (default: ${CONFIG_ENV_VAR})")
    common.add_argument("--preset", default=d(None), choices=PRESETS, help="named parameter set")
    common.add_argument("--out", default=d("."), help="output directory")
    common.add_argument("--workers", type=int, default=d(1), help="worker processes for sweeps")
    common.add_argument("--route", choices=ROUTE_CHOICES, default=d(None),
                        help="solution route (default: variational)")
    common.add_argument("--set", action="append", default=d(None), metavar="KEY=VALUE",
                        help="override a model parameter, solver setting or figure option")
    return common


def build_parser():
    common = _global_flags(suppress=True)
    ap = _Parser(prog="atomembrane", description=__doc__.splitlines()[0], parents=[_global_flags(False)])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    def lam(sp):
        sp.add_argument("--Lambda", type=float, help="scaled coupling")

    def grid(sp):
        sp.add_argument("--lambdas", help="comma-separated list of couplings")
        sp.add_argument("--range", nargs=3, metavar=("START", "STOP", "COUNT"))

    sp = add("steady", cmd_steady, "variational steady state")
    lam(sp)
    sp.add_argument("--negative", action="store_true", help="select the S0 < 0 branch")
    add("critical", cmd_critical, "critical coupling")
    sp = add("modes", cmd_modes, "collective excitation spectrum")
    lam(sp)
    grid(sp)
    sp.add_argument("--n-keep", type=int, default=12, help="BdG modes kept per point")
    sp = add("entanglement", cmd_entanglement, "logarithmic negativity of the undamped ground state")
    grid(sp)
    sp = add("gpe-ground", cmd_gpe_ground, "GPE stationary state")
    lam(sp)
    sp = add("gpe-evolve", cmd_gpe_evolve, "real-time GPE evolution from the stationary state")
    lam(sp)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--shift", type=float, default=0.0, help="initial displacement of the condensate")
    sp.add_argument("--sample-every", type=int, default=100)
    sp = add("bdg", cmd_bdg, "Bogoliubov-de Gennes spectrum")
    lam(sp)
    grid(sp)
    sp.add_argument("--n-keep", type=int, default=12)
    sp = add("momentum", cmd_momentum, "momentum distribution")
    lam(sp)
    sp.add_argument("--sites", type=int, default=1, help="number of lattice sites M")
    sp.add_argument("--k-max", type=float, default=10.0)
    sp.add_argument("--n-k", type=int, default=1024)
    sp = add("sweep", cmd_sweep, "parameter sweep")
    sp.add_argument("--axis", choices=("Lambda", "V", "gN", "gamma"))
    sp.add_argument("--range", nargs=3, metavar=("START", "STOP", "COUNT"))
    sp.add_argument("--values", help="comma-separated grid")
    sp.add_argument("--outputs", help="comma-separated observables")
    sp.add_argument("--refine", action="store_true", help="refine around Lambda_c")
    sp.add_argument("--name", default="sweep", help="output file stem")
    sp = add("figure", cmd_figure, "reproduce a figure panel")
    sp.add_argument("name")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # --help / --version exit 0, usage errors exit with the config code
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    args.route_given = args.route is not None
    if args.route is None:
        args.route = "variational"
    try:
        code = args.func(args)
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except ValueError as exc:
        # ModelParams / config validation
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return code


if __name__ == "__main__":
    sys.exit(main())
