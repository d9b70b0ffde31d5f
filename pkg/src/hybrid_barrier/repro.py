"""Presets regenerating the data behind each reference figure as CSV tables.

Each preset returns a list of :class:`Table`; :func:`run_preset` writes them
with a manifest.  Per-path figures use path 0 of the seed at high inner
resolution; averaged figures default to 10,000 hybrid and 100,000 brute-force
paths, which ``n_paths`` scales down for quick runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import BarrierContract, HestonParams, Method, PayoffKind, VanillaContract
from .engine import (
    ConfigError,
    ExperimentConfig,
    InnerSettings,
    averaged_green,
    inner_pricer,
    run_experiment,
    single_path,
    write_csv,
    write_manifest,
)
from .mcs2d import Mcs2dConfig, mc2d_killed_density
from .paths import conditional_coeffs, simulate_variance_paths
from .potentials import MovingBoundary, VolterraOperator, boundary_rhs_green, constant_drift_phi

FIG1_STRIKES = (0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.25, 1.3, 1.4, 1.5)
FIG11_STRIKES = tuple(np.round(np.arange(0.8, 1.3001, 0.05), 2))
XI = -0.5
# per-path figures: inner solvers resolved well below the plotted differences
FINE = InnerSettings(refine=8, fdm_space=800, fdm_refine=8)


@dataclass
class Table:
    name: str
    header: list
    rows: list


@dataclass(frozen=True)
class PresetOptions:
    seed: int = 0
    n_paths: int | None = None
    k_steps: int = 52
    methods: tuple | None = None
    workers: int = 1


def _path0(p: HestonParams, o: PresetOptions):
    vp = simulate_variance_paths(p, 1.0, o.k_steps, 1, o.seed)
    return vp, single_path(conditional_coeffs(vp, p), 0)


def _paths(o: PresetOptions, method: Method, default: int) -> int:
    return default if o.n_paths is None else o.n_paths * (10 if method is Method.MCS2D else 1)


def _methods(o: PresetOptions, default: tuple) -> tuple:
    if o.methods is None:
        return default
    chosen = tuple(m for m in default if m in o.methods)
    if not chosen:
        raise ConfigError(f"none of the requested methods apply; choose from {[m.value for m in default]}")
    return chosen


def fig1(p, o: PresetOptions, out_dir):
    """Implied vols, Lewis-Lipton closed form against Willard conditional MC."""
    methods = _methods(o, (Method.LEWIS_LIPTON, Method.WILLARD_MC))
    n = {m: _paths(o, m, 100_000) for m in methods if m is Method.WILLARD_MC}
    cfg = ExperimentConfig(
        p, VanillaContract(1.0, 1.0), methods, n, FIG1_STRIKES, o.k_steps, seed=o.seed, out_dir=str(out_dir)
    )
    rep = run_experiment(cfg, write=False)
    header, cols = ["strike"], []
    for m in methods:
        header += [f"{m.value}_price", f"{m.value}_iv", f"{m.value}_iv_se"]
        cols.append([(r.price, iv, se) for r, (iv, se) in zip(rep.results[m], rep.implied_vols[m])])
    rows = [[k] + [v for col in cols for v in col[j]] for j, k in enumerate(FIG1_STRIKES)]
    return [Table("fig1_implied_vols", header, rows)]


def fig2(p, o, out_dir):
    """Conditional drift and volatility along one variance path."""
    vp, c = _path0(p, o)
    rows = [[t, v, mu, nu] for t, v, mu, nu in zip(c.t, vp.v[0], c.mu, c.nu)]
    return [Table("fig2_coefficients", ["t", "v", "mu", "nu"], rows)]


def fig3(p, o, out_dir):
    """Scaled clock Upsilon(t) and the drift ratio lambda = mu / nu."""
    _, c = _path0(p, o)
    rows = [[t, u, lam] for t, u, lam in zip(c.t, c.upsilon, c.lam)]
    return [Table("fig3_clock", ["t", "upsilon", "lambda"], rows)]


def fig4(p, o, out_dir):
    """The moving boundary xi - N_u for one path."""
    _, c = _path0(p, o)
    rows = [[u, XI - n] for u, n in zip(c.upsilon, c.m)]
    return [Table("fig4_boundary", ["upsilon", "boundary"], rows)]


def fig5(p, o, out_dir):
    """Volterra density against the closed form for a constant drift."""
    b = MovingBoundary.constant_drift(0.5, 1.0, 1000)
    phi = VolterraOperator.from_boundary(b).solve(boundary_rhs_green(b, XI)).phi
    exact = constant_drift_phi(b.nodes, XI, 0.5)
    rows = [[u, a, e, abs(a - e)] for u, a, e in zip(b.nodes, phi, exact)]
    return [Table("fig5_volterra", ["upsilon", "phi_numeric", "phi_exact", "abs_error"], rows)]


def _x_grid():
    return np.round(np.linspace(XI, 1.5, 81), 10)


def _per_path(p, o, quantity):
    _, c = _path0(p, o)
    x = _x_grid()
    mhp = inner_pricer(c, XI, Method.HYBRID_MHP, FINE)
    fdm = inner_pricer(c, XI, Method.HYBRID_FDM, FINE)
    a, b = quantity(mhp, x), quantity(fdm, x)
    df = math.exp(-p.r)
    return [[xv, df * u, df * v, df * abs(u - v)] for xv, u, v in zip(x, a, b)]


def fig6(p, o, out_dir):
    """Per-path Green's function, MHP against FDM."""
    rows = _per_path(p, o, lambda pr, x: pr.green(x))
    return [Table("fig6_green", ["x", "mhp", "fdm", "abs_diff"], rows)]


def fig7(p, o, out_dir):
    """Per-path no-touch value as a function of the initial log-spot."""
    rows = _per_path(p, o, lambda pr, x: pr.survival_curve(x))
    return [Table("fig7_no_touch", ["x", "mhp", "fdm", "abs_diff"], rows)]


def fig8(p, o, out_dir):
    """Per-path down-and-out call (K = 1) as a function of the initial log-spot."""
    rows = _per_path(p, o, lambda pr, x: pr.call_curve(x, 0.0))
    return [Table("fig8_call", ["x", "mhp", "fdm", "abs_diff"], rows)]


def fig9(p, o, out_dir):
    """Green's function averaged over paths: MHP, FDM and a 2D MC histogram."""
    methods = _methods(o, (Method.HYBRID_MHP, Method.HYBRID_FDM, Method.MCS2D))
    edges = np.linspace(XI, 1.5, 41)
    centres = 0.5 * (edges[1:] + edges[:-1])
    header, cols = ["x"], []
    for m in methods:
        if m is Method.MCS2D:
            cfg = Mcs2dConfig(_paths(o, m, 100_000), o.k_steps, True, o.seed)
            _, dens, se = mc2d_killed_density(p, XI, 1.0, edges, cfg)
        else:
            g = averaged_green(p, XI, _paths(o, m, 10_000), o.k_steps, o.seed, centres, m)
            dens, se = g.density, g.std_error
        header += [m.value, f"{m.value}_se"]
        cols += [dens, se]
    rows = [[x] + [c[i] for c in cols] for i, x in enumerate(centres)]
    return [Table("fig9_averaged_green", header, rows)]


def _barrier_table(p, o, out_dir, payoff, strikes, barrier, name):
    methods = _methods(o, (Method.HYBRID_MHP, Method.HYBRID_FDM, Method.MCS2D))
    n = {m: _paths(o, m, 100_000 if m is Method.MCS2D else 10_000) for m in methods}
    k0 = None if payoff is PayoffKind.NO_TOUCH else strikes[0]
    cfg = ExperimentConfig(
        p, BarrierContract(1.0, barrier, payoff, k0), methods, n, strikes, o.k_steps, seed=o.seed,
        workers=o.workers, out_dir=str(out_dir),
    )
    rep = run_experiment(cfg, write=False)
    header = ["strike"]
    for m in methods:
        header += [m.value, f"{m.value}_se"]
    rows = []
    for j, k in enumerate(rep.strikes):
        row = [k]
        for m in methods:
            row += [rep.results[m][j].price, rep.results[m][j].std_error]
        rows.append(row)
    diffs = rep.differences()
    keys = list(diffs[0]) if diffs else []
    tables = [Table(name, header, rows)]
    if diffs:
        tables.append(Table(f"{name}_comparison", keys, [[d[k] for k in keys] for d in diffs]))
    return tables, rep


def fig10(p, o, out_dir):
    """No-touch at xi = -0.5 by MHP, FDM and 2D MC."""
    tables, _ = _barrier_table(p, o, out_dir, PayoffKind.NO_TOUCH, (), math.exp(XI), "fig10_no_touch")
    return tables


def fig11(p, o, out_dir):
    """Down-and-out calls with the barrier at 0.9 across strikes."""
    tables, _ = _barrier_table(p, o, out_dir, PayoffKind.DOWN_OUT_CALL, FIG11_STRIKES, 0.9, "fig11_down_out_call")
    return tables


PRESETS = {f"fig{i}": fn for i, fn in enumerate((fig1, fig2, fig3, fig4, fig5, fig6, fig7, fig8, fig9, fig10, fig11), 1)}


def run_preset(name: str, out_dir, options: PresetOptions = PresetOptions(), p: HestonParams | None = None):
    """Compute a preset, write its tables as CSV plus a manifest; return the tables."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS, key=lambda s: int(s[3:]))}")
    p = HestonParams.reference_defaults() if p is None else p
    start = time.perf_counter()
    tables = PRESETS[name](p, options, out_dir)
    elapsed = time.perf_counter() - start
    out = Path(out_dir)
    for t in tables:
        write_csv(out / f"{t.name}.csv", t.header, t.rows)
    config = {
        "preset": name,
        "seed": options.seed,
        "n_paths": options.n_paths,
        "k_steps": options.k_steps,
        "methods": None if options.methods is None else [Method(m).value for m in options.methods],
        "model": p.__dict__,
    }
    write_manifest(out, config, options.seed, {name: elapsed})
    return tables
