"""Command-line interface: ``hybrid-barrier <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .domain import (
    BarrierAboveSpot,
    BarrierContract,
    HestonParams,
    InvalidParam,
    Method,
    NumericalError,
    PayoffKind,
    VanillaContract,
)
from .engine import (
    VANILLA_METHODS,
    ConfigError,
    ExperimentConfig,
    averaged_green,
    bench,
    load_config,
    run_experiment,
    write_csv,
    write_manifest,
)
from .minpdf import DomainError, DriftPath, pdf_grid
from .paths import conditional_coeffs, simulate_variance_paths
from .repro import FIG1_STRIKES, PRESETS, PresetOptions, run_preset

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _methods(text: str) -> list[Method]:
    try:
        return [Method(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        choices = ", ".join(m.value for m in Method)
        raise argparse.ArgumentTypeError(f"unknown method in {text!r}; choose from {choices}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its values")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--paths", type=int, help="Monte Carlo paths per method (MCS2D uses 10x)")
    common.add_argument("--steps", type=int, help="variance time steps per path (default 52)")
    common.add_argument("--out", help="output directory (default out)")
    common.add_argument("--method", type=_methods, help="comma-separated methods, e.g. HybridMHP,MCS2D")
    common.add_argument("--workers", type=int, help="worker processes for the path loop (default 1)")
    common.add_argument("--plot", action="store_true", help="also render PNG plots of the CSV tables (needs matplotlib)")

    parser = argparse.ArgumentParser(prog="hybrid-barrier", description="Hybrid Heston barrier pricing.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("vanilla", parents=[common], help="vanilla calls/puts: Lewis-Lipton and Willard MC")
    v.add_argument("--strikes", type=_floats, help="strikes (default 0.6 to 1.5)")
    v.add_argument("--maturity", type=float, default=1.0)
    v.add_argument("--kind", choices=["Call", "Put"], default="Call")

    b = sub.add_parser("barrier", parents=[common], help="barrier contracts by MHP, FDM and 2D MC")
    b.add_argument("--barrier", type=float, default=math.exp(-0.5))
    b.add_argument("--payoff", choices=[k.value for k in PayoffKind], default=PayoffKind.NO_TOUCH.value)
    b.add_argument("--strikes", type=_floats, help="strikes for calls and puts")
    b.add_argument("--maturity", type=float, default=1.0)
    b.add_argument("--refine", type=int, help="MHP refinement per path step (default 4)")

    g = sub.add_parser("green", parents=[common], help="Green's function averaged over variance paths")
    g.add_argument("--barrier", type=float, default=math.exp(-0.5))
    g.add_argument("--maturity", type=float, default=1.0)
    g.add_argument("--x", type=_floats, default=None, help="log-spot grid (default 81 points on [xi, 1.5])")

    m = sub.add_parser("minpdf", parents=[common], help="joint density of the running minimum and the terminal value")
    m.add_argument("--lam", type=float, help="constant drift; default is the drift of variance path --path-index")
    m.add_argument("--path-index", type=int, default=0)
    m.add_argument("--a", type=_floats, default=[-0.1, -0.25, -0.5, -1.0], help="minimum levels (< 0)")
    m.add_argument("--b", type=_floats, default=None, help="terminal values (default 61 points on [-1.5, 1.5])")

    sub.add_parser("bench", parents=[common], help="per-path timings of MHP against FDM at matched accuracy")

    r = sub.add_parser("repro", parents=[common], help="regenerate the data of one figure")
    r.add_argument("figure", choices=sorted(PRESETS, key=lambda s: int(s[3:])))
    return parser


def _base_config(args) -> ExperimentConfig | None:
    return load_config(args.config) if args.config else None


def _apply_common(cfg: ExperimentConfig, args, default_methods) -> ExperimentConfig:
    """Overlay the global flags onto a config."""
    methods = args.method if args.method else (cfg.methods if args.config else default_methods)
    n_paths = {m: n for m, n in cfg.n_paths.items() if m in methods}
    if args.paths is not None:
        n_paths = {m: args.paths * (10 if m is Method.MCS2D else 1) for m in methods if m is not Method.LEWIS_LIPTON}
    kw = dict(methods=tuple(methods), n_paths=n_paths)
    for flag, key in (("seed", "seed"), ("steps", "k_steps"), ("out", "out_dir"), ("workers", "workers")):
        if getattr(args, flag) is not None:
            kw[key] = getattr(args, flag)
    return ExperimentConfig.from_dict({**cfg.to_dict(), **{k: _plain(v) for k, v in kw.items()}})


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {_plain(k): x for k, x in v.items()}
    if isinstance(v, Method):
        return v.value
    return v


def _print_report(rep) -> None:
    for m, res in rep.results.items():
        for k, r in zip(rep.strikes, res):
            strike = "" if k is None else f" K={k:g}"
            print(f"{m.value:<12}{strike} price={r.price:.10g} se={r.std_error:.3g} paths={r.n_paths} time={r.elapsed:.3f}s")
    for d in rep.differences():
        flag = "ok" if d["within_3se"] else "OUTSIDE 3se"
        strike = "" if d["strike"] is None else f" K={d['strike']:g}"
        print(f"{d['method_a']} - {d['method_b']}{strike}: {d['diff']:+.3e} (3se={3 * d['combined_se']:.3e}) {flag}")


def cmd_vanilla(args) -> int:
    cfg = _base_config(args)
    if cfg is None:
        strikes = args.strikes or list(FIG1_STRIKES)
        cfg = ExperimentConfig(contract=VanillaContract(args.maturity, strikes[0], args.kind),
                               methods=VANILLA_METHODS, strikes=tuple(strikes))
    cfg = _apply_common(cfg, args, VANILLA_METHODS)
    rep = run_experiment(cfg)
    _print_report(rep)
    _maybe_plot(args, cfg.out_dir)
    return EXIT_OK


def cmd_barrier(args) -> int:
    cfg = _base_config(args)
    if cfg is None:
        strikes = args.strikes or []
        payoff = PayoffKind(args.payoff)
        if payoff is not PayoffKind.NO_TOUCH and not strikes:
            raise ConfigError("--strikes is required for calls and puts")
        k0 = strikes[0] if strikes else None
        cfg = ExperimentConfig(contract=BarrierContract(args.maturity, args.barrier, payoff, k0),
                               methods=(Method.HYBRID_MHP,), strikes=tuple(strikes))
    if args.refine is not None:
        cfg = replace(cfg, refine=args.refine)
    cfg = _apply_common(cfg, args, (Method.HYBRID_MHP,))
    rep = run_experiment(cfg)
    _print_report(rep)
    _maybe_plot(args, cfg.out_dir)
    return EXIT_OK


def _simple_settings(args):
    cfg = _base_config(args) or ExperimentConfig()
    seed = cfg.seed if args.seed is None else args.seed
    steps = cfg.k_steps if args.steps is None else args.steps
    out = Path(args.out or cfg.out_dir)
    return cfg, seed, steps, out


def cmd_green(args) -> int:
    cfg, seed, steps, out = _simple_settings(args)
    p = cfg.model
    xi = math.log(args.barrier / p.s0)
    if not xi < 0:
        raise BarrierAboveSpot(f"barrier {args.barrier} must lie below spot {p.s0}")
    x = np.asarray(args.x if args.x else np.round(np.linspace(xi, 1.5, 81), 10))
    methods = args.method or [Method.HYBRID_MHP]
    bad = [m.value for m in methods if m not in (Method.HYBRID_MHP, Method.HYBRID_FDM)]
    if bad:
        raise ConfigError(f"green supports HybridMHP and HybridFDM, not {bad}")
    n = args.paths or 1000
    header, cols, stages = ["x"], [], {}
    for m in methods:
        g = averaged_green(p, xi, n, steps, seed, x, m, args.maturity, cfg.inner_settings)
        header += [m.value, f"{m.value}_se"]
        cols += [g.density, g.std_error]
        stages[m.value] = g.elapsed
        print(f"{m.value}: mass={trapezoid(g.density, x):.6f} min={g.density.min():.3e} time={g.elapsed:.2f}s")
    write_csv(out / "green.csv", header, [[xv] + [c[i] for c in cols] for i, xv in enumerate(x)])
    conf = {"barrier": args.barrier, "maturity": args.maturity, "n_paths": n, "k_steps": steps,
            "methods": [m.value for m in methods], "model": p.__dict__}
    write_manifest(out, conf, seed, stages)
    _maybe_plot(args, out)
    return EXIT_OK


def cmd_minpdf(args) -> int:
    cfg, seed, steps, out = _simple_settings(args)
    p = cfg.model
    start = time.perf_counter()
    if args.lam is not None:
        dp = DriftPath.constant(args.lam, 1.0, 1000)
        source = {"lam": args.lam}
    else:
        vp = simulate_variance_paths(p, 1.0, steps, 1, seed, args.path_index)
        c = conditional_coeffs(vp, p)
        dp = DriftPath(c.upsilon[0], c.m[0])
        source = {"path_index": args.path_index, "k_steps": steps, "model": p.__dict__}
    b = np.asarray(args.b if args.b else np.round(np.linspace(-1.5, 1.5, 61), 10))
    a = np.asarray(args.a, dtype=float)
    if np.any(a >= 0):
        raise DomainError("minimum levels must be < 0")
    grid = pdf_grid(dp, a, b)
    rows = [[av, bv, grid[i, j]] for i, av in enumerate(a) for j, bv in enumerate(b)]
    write_csv(out / "minpdf.csv", ["a", "b", "pdf"], rows)
    write_manifest(out, {"a": a.tolist(), **source}, seed, {"minpdf": time.perf_counter() - start})
    print(f"minpdf: {len(rows)} values, upsilon={dp.big_upsilon:.6f}, min={grid.min():.3e}")
    _maybe_plot(args, out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg, seed, steps, out = _simple_settings(args)
    start = time.perf_counter()
    rep = bench(cfg.model, n_paths=args.paths or 20, k_steps=steps, seed=seed, out_dir=out)
    for row in rep.rows:
        print(f"{row[0]:<10} {row[1]:<22} max_err={row[2]:.3e} time/path={row[3] * 1e3:.3f} ms")
    s = rep.summary()
    print(f"matched accuracy {rep.tol:g}: MHP refine={s['mhp_refine']} {rep.mhp_time * 1e3:.3f} ms, "
          f"FDM {s['fdm_space']}x{s['fdm_refine']} {rep.fdm_time * 1e3:.3f} ms, FDM/MHP = {rep.ratio:.2f}")
    print(f"MHP time ~ nodes^{rep.scaling_exponent:.2f}")
    write_manifest(out, {"n_paths": args.paths or 20, "k_steps": steps, "model": cfg.model.__dict__}, seed,
                   {"bench": time.perf_counter() - start}, {"bench": s})
    return EXIT_OK


def cmd_repro(args) -> int:
    cfg = _base_config(args)
    p = cfg.model if cfg else HestonParams.reference_defaults()
    opts = PresetOptions(
        seed=args.seed if args.seed is not None else (cfg.seed if cfg else 0),
        n_paths=args.paths,
        k_steps=args.steps if args.steps is not None else (cfg.k_steps if cfg else 52),
        methods=tuple(args.method) if args.method else None,
        workers=args.workers or 1,
    )
    out = Path(args.out or f"out/{args.figure}")
    tables = run_preset(args.figure, out, opts, p)
    for t in tables:
        print(f"wrote {out / (t.name + '.csv')} ({len(t.rows)} rows)")
    _maybe_plot(args, out)
    return EXIT_OK


def _maybe_plot(args, out_dir) -> None:
    if args.plot:
        from .plotting import plot_csv_dir

        for path in plot_csv_dir(out_dir):
            print(f"wrote {path}")


COMMANDS = {
    "vanilla": cmd_vanilla,
    "barrier": cmd_barrier,
    "green": cmd_green,
    "minpdf": cmd_minpdf,
    "bench": cmd_bench,
    "repro": cmd_repro,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidParam, BarrierAboveSpot, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
