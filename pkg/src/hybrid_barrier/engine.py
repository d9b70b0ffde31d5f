"""Outer Monte Carlo loop over variance paths and the experiment harness.

Every hybrid price is an average over variance paths of an inner,
one-dimensional barrier problem solved either by heat potentials (MHP) or by
Crank-Nicolson (FDM).  Both inner solvers see exactly the same paths for a
given seed, because path ``i`` always draws from its own substream.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy

from .domain import (
    BarrierContract,
    HestonParams,
    Method,
    NumericalError,
    PayoffKind,
    PricingError,
    PricingResult,
    VanillaContract,
    to_log_contract,
    validate_params,
)
from .fdm import FdmPathPricer, PathIncrements
from .mcs2d import Mcs2dConfig, mc2d_barrier_prices
from .paths import ConditionalCoefficients, conditional_coeffs, simulate_variance_paths
from .potentials import HeatPotentialPricer, Mode, MovingBoundary
from .vanilla import implied_vol, lewis_lipton_call, lewis_lipton_put
from .willard import willard_mc_price

HYBRID = (Method.HYBRID_MHP, Method.HYBRID_FDM)
VANILLA_METHODS = (Method.LEWIS_LIPTON, Method.WILLARD_MC)
BARRIER_METHODS = (Method.HYBRID_MHP, Method.HYBRID_FDM, Method.MCS2D)
DEFAULT_PATHS = {
    Method.LEWIS_LIPTON: 1,
    Method.WILLARD_MC: 100_000,
    Method.HYBRID_MHP: 10_000,
    Method.HYBRID_FDM: 10_000,
    Method.MCS2D: 100_000,
}


class ConfigError(PricingError, ValueError):
    pass


class InnerSolverError(NumericalError):
    """An inner solve failed; ``path_index`` names the variance path."""

    def __init__(self, path_index: int, cause: BaseException):
        self.path_index = path_index
        self.cause = cause
        super().__init__(f"path {path_index}: {type(cause).__name__}: {cause}")


# --- inner solvers ------------------------------------------------------------


@dataclass(frozen=True)
class InnerSettings:
    """Resolution of the inner solvers.

    MHP splits each path step into ``refine`` graded pieces; FDM uses
    ``fdm_space`` cells and ``fdm_refine`` sub-steps per path step.  The
    defaults keep both within 1e-3 of converged per-path prices.
    """

    refine: int = 4
    grading: float = 2.0
    fdm_space: int = 200
    fdm_refine: int = 2
    mode: Mode = Mode.FORWARD

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.refine < 1 or self.fdm_refine < 1:
            raise ValueError("refinement factors must be >= 1")
        if self.fdm_space < 4:
            raise ValueError("fdm_space must be >= 4")
        if not self.grading >= 1.0:
            raise ValueError("grading must be >= 1")


def single_path(coeffs: ConditionalCoefficients, j: int) -> ConditionalCoefficients:
    """Coefficients of path ``j`` out of a batch."""
    return ConditionalCoefficients(coeffs.t, coeffs.mu[j], coeffs.nu[j], coeffs.m[j], coeffs.upsilon[j])


def inner_pricer(coeffs: ConditionalCoefficients, xi: float, inner: Method, s: InnerSettings = InnerSettings()):
    """Per-path pricer exposing ``green``, ``survival``, ``call`` and ``put``."""
    inner = Method(inner)
    if inner is Method.HYBRID_MHP:
        return HeatPotentialPricer(MovingBoundary.from_coeffs(coeffs), xi, s.refine, s.grading)
    if inner is Method.HYBRID_FDM:
        return FdmPathPricer(PathIncrements.from_coeffs(coeffs, s.fdm_refine), xi, s.fdm_space, n_values=coeffs.m)
    raise ValueError(f"{inner.value} is not an inner solver")


def path_values(pricer, payoff_kind: PayoffKind, log_strikes, mode: Mode) -> np.ndarray:
    """Undiscounted per-unit-spot values of one path, one per strike."""
    mode = Mode(mode).value
    if payoff_kind is PayoffKind.NO_TOUCH:
        return np.array([pricer.survival(mode)])
    if payoff_kind is PayoffKind.DOWN_OUT_CALL:
        return np.asarray(pricer.call(log_strikes, mode), dtype=float)
    return np.asarray(pricer.put(log_strikes, mode), dtype=float)


@dataclass(frozen=True)
class _Job:
    p: HestonParams
    maturity: float
    xi: float
    payoff_kind: PayoffKind
    log_strikes: tuple
    inner: Method
    settings: InnerSettings
    k_steps: int
    seed: int


def _run_chunk(job: _Job, first: int, n: int):
    """Values (n, n_strikes) and inner-solve seconds for paths first..first+n-1."""
    coeffs = conditional_coeffs(simulate_variance_paths(job.p, job.maturity, job.k_steps, n, job.seed, first), job.p)
    width = 1 if job.payoff_kind is PayoffKind.NO_TOUCH else len(job.log_strikes)
    out = np.empty((n, width))
    inner_time = 0.0
    for j in range(n):
        start = time.perf_counter()
        try:
            pricer = inner_pricer(single_path(coeffs, j), job.xi, job.inner, job.settings)
            out[j] = path_values(pricer, job.payoff_kind, np.array(job.log_strikes), job.settings.mode)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            raise InnerSolverError(first + j, exc) from exc
        inner_time += time.perf_counter() - start
        if not np.all(np.isfinite(out[j])):
            raise InnerSolverError(first + j, NumericalError("non-finite per-path price"))
    return out, inner_time


def _map_chunks(job: _Job, n_paths: int, chunk: int, workers: int):
    """Run all chunks, reducing in path order whatever the worker count."""
    starts = list(range(0, n_paths, chunk))
    sizes = [min(chunk, n_paths - s) for s in starts]
    if workers <= 1:
        return [_run_chunk(job, s, n) for s, n in zip(starts, sizes)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chunk, [job] * len(starts), starts, sizes))


def price_barrier_hybrid_strikes(
    p: HestonParams,
    maturity: float,
    barrier: float,
    payoff_kind: PayoffKind,
    strikes,
    inner: Method,
    n_paths: int = 10_000,
    k_steps: int = 52,
    seed: int = 0,
    settings: InnerSettings = InnerSettings(),
    chunk: int = 500,
    workers: int = 1,
) -> list[PricingResult]:
    """Hybrid prices for several strikes from one inner solve per path.

    ``strikes`` is ignored for no-touch contracts, which return one result.
    """
    validate_params(p)
    inner = Method(inner)
    if inner not in HYBRID:
        raise ValueError(f"{inner.value} is not a hybrid method")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    payoff_kind = PayoffKind(payoff_kind)
    strikes = [None] if payoff_kind is PayoffKind.NO_TOUCH else [float(k) for k in strikes]
    if not strikes:
        raise ValueError("at least one strike is required")
    contracts = [BarrierContract(maturity, barrier, payoff_kind, k) for k in strikes]
    xi, _ = to_log_contract(contracts[0], p.s0)
    log_k = tuple(0.0 if k is None else math.log(k / p.s0) for k in strikes)
    job = _Job(p, maturity, xi, payoff_kind, log_k, inner, settings, k_steps, seed)
    start = time.perf_counter()
    parts = _map_chunks(job, n_paths, chunk, workers)
    values = np.concatenate([v for v, _ in parts]) * (p.s0 * math.exp(-p.r * maturity))
    inner_time = sum(t for _, t in parts)
    elapsed = time.perf_counter() - start
    return [
        PricingResult(
            price=float(values[:, j].mean()),
            std_error=float(values[:, j].std(ddof=1) / math.sqrt(n_paths)),
            n_paths=n_paths,
            elapsed=elapsed,
            method=inner,
            extra={"strike": k, "inner_time": inner_time, "inner_time_per_path": inner_time / n_paths},
        )
        for j, k in enumerate(strikes)
    ]


def price_barrier_hybrid(
    p: HestonParams,
    c: BarrierContract,
    inner: Method,
    n_paths: int = 10_000,
    k_steps: int = 52,
    seed: int = 0,
    settings: InnerSettings = InnerSettings(),
    chunk: int = 500,
    workers: int = 1,
) -> PricingResult:
    return price_barrier_hybrid_strikes(
        p, c.maturity, c.barrier, c.payoff_kind, [c.strike], inner, n_paths, k_steps, seed, settings, chunk, workers
    )[0]


@dataclass
class AveragedGreen:
    x: np.ndarray
    density: np.ndarray
    std_error: np.ndarray
    n_paths: int
    elapsed: float
    method: Method


def averaged_green(
    p: HestonParams,
    xi: float,
    n_paths: int,
    k_steps: int,
    seed: int,
    x_grid,
    inner: Method = Method.HYBRID_MHP,
    maturity: float = 1.0,
    settings: InnerSettings = InnerSettings(),
    chunk: int = 500,
) -> AveragedGreen:
    """Discounted killed density of X_T = ln(S_T / S_0), averaged over paths."""
    validate_params(p)
    if not xi < 0:
        raise ValueError("xi must be < 0")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    x = np.asarray(x_grid, dtype=float)
    start = time.perf_counter()
    s1 = np.zeros_like(x)
    s2 = np.zeros_like(x)
    for first in range(0, n_paths, chunk):
        n = min(chunk, n_paths - first)
        coeffs = conditional_coeffs(simulate_variance_paths(p, maturity, k_steps, n, seed, first), p)
        for j in range(n):
            try:
                g = inner_pricer(single_path(coeffs, j), xi, inner, settings).green(x)
            except (ArithmeticError, np.linalg.LinAlgError) as exc:
                raise InnerSolverError(first + j, exc) from exc
            s1 += g
            s2 += g * g
    mean = s1 / n_paths
    var = np.maximum(s2 / n_paths - mean**2, 0.0) * n_paths / (n_paths - 1)
    df = math.exp(-p.r * maturity)
    return AveragedGreen(x, df * mean, df * np.sqrt(var / n_paths), n_paths, time.perf_counter() - start, Method(inner))


# --- configuration ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One pricing experiment: a contract, the methods to run and their resolution.

    ``strikes`` optionally replaces the contract's single strike with a strip
    priced on the same paths.  ``k_steps`` is the number of variance steps per
    path (MCS2D uses it per year).
    """

    model: HestonParams = field(default_factory=HestonParams.reference_defaults)
    contract: BarrierContract | VanillaContract = field(
        default_factory=lambda: BarrierContract(1.0, math.exp(-0.5), PayoffKind.NO_TOUCH)
    )
    methods: tuple = (Method.HYBRID_MHP,)
    n_paths: dict = field(default_factory=dict)
    strikes: tuple = ()
    k_steps: int = 52
    refine: int = 4
    grading: float = 2.0
    fdm_space: int = 200
    fdm_refine: int = 2
    inner_mode: str = "Forward"
    bridge: bool = True
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        try:
            validate_params(self.model)
            self.methods = tuple(dict.fromkeys(Method(m) for m in self.methods))
            self.n_paths = {Method(k): int(v) for k, v in self.n_paths.items()}
            self.strikes = tuple(float(k) for k in self.strikes)
            self.inner_mode = Mode(self.inner_mode).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.methods:
            raise ConfigError("at least one method is required")
        allowed = VANILLA_METHODS if self.is_vanilla else BARRIER_METHODS
        bad = [m.value for m in self.methods if m not in allowed]
        if bad:
            kind = "vanilla" if self.is_vanilla else "barrier"
            raise ConfigError(f"methods {bad} do not apply to a {kind} contract")
        stray = [m.value for m in self.n_paths if m not in self.methods]
        if stray:
            raise ConfigError(f"n_paths given for methods not requested: {stray}")
        for m in self.methods:
            self.n_paths.setdefault(m, DEFAULT_PATHS[m])
        for m, n in self.n_paths.items():
            floor = 100 if m is Method.WILLARD_MC else 2
            if m is not Method.LEWIS_LIPTON and n < floor:
                raise ConfigError(f"n_paths for {m.value} must be >= {floor}")
        if self.k_steps < 2:
            raise ConfigError("k_steps must be >= 2")
        if any(k <= 0 for k in self.strikes):
            raise ConfigError("strikes must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.inner_settings
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def is_vanilla(self) -> bool:
        return isinstance(self.contract, VanillaContract)

    @property
    def inner_settings(self) -> InnerSettings:
        return InnerSettings(self.refine, self.grading, self.fdm_space, self.fdm_refine, Mode(self.inner_mode))

    @property
    def strike_list(self) -> list:
        if self.strikes:
            return list(self.strikes)
        return [self.contract.strike]

    def to_dict(self) -> dict:
        c = self.contract
        if self.is_vanilla:
            contract = {"type": "vanilla", "maturity": c.maturity, "strike": c.strike, "kind": c.kind.value}
        else:
            contract = {
                "type": "barrier",
                "maturity": c.maturity,
                "barrier": c.barrier,
                "payoff_kind": c.payoff_kind.value,
                "strike": c.strike,
            }
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out.update(
            model=asdict(self.model),
            contract=contract,
            methods=[m.value for m in self.methods],
            n_paths={m.value: n for m, n in self.n_paths.items()},
            strikes=list(self.strikes),
        )
        return out

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        names = {f.name for f in fields(cls)}
        _reject_unknown(d, names, "config")
        kw = dict(d)
        try:
            if "model" in kw:
                model = kw["model"]
                if not isinstance(model, dict):
                    raise ConfigError("model must be a mapping")
                _reject_unknown(model, {f.name for f in fields(HestonParams)}, "model")
                kw["model"] = replace(HestonParams.reference_defaults(), **model)
            if "contract" in kw:
                kw["contract"] = _contract_from_dict(kw["contract"])
            for key, typ in (("k_steps", int), ("refine", int), ("fdm_space", int), ("fdm_refine", int),
                             ("seed", int), ("workers", int)):
                if key in kw and (not isinstance(kw[key], int) or isinstance(kw[key], bool)):
                    raise ConfigError(f"{key} must be an integer")
            if "bridge" in kw and not isinstance(kw["bridge"], bool):
                raise ConfigError("bridge must be true or false")
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _reject_unknown(d: dict, names: set, where: str) -> None:
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _contract_from_dict(d) -> BarrierContract | VanillaContract:
    if not isinstance(d, dict):
        raise ConfigError("contract must be a mapping")
    kind = d.get("type", "barrier")
    body = {k: v for k, v in d.items() if k != "type"}
    if kind == "barrier":
        _reject_unknown(body, {"maturity", "barrier", "payoff_kind", "strike"}, "contract")
        return BarrierContract(**body)
    if kind == "vanilla":
        _reject_unknown(body, {"maturity", "strike", "kind"}, "contract")
        return VanillaContract(**body)
    raise ConfigError(f"unknown contract type {kind!r}")


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


# --- output -------------------------------------------------------------------


def fmt(x) -> str:
    """10 significant digits for numbers, plain text otherwise."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "artifact": pkg}


def write_manifest(out_dir, config: dict, seed: int, stages: dict, extra: dict | None = None) -> Path:
    """JSON run manifest: config and its hash, seed, versions, wall-clock per stage."""
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {
        "config_hash": hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest(),
        "config": config,
        "seed": seed,
        "versions": versions(),
        "wall_clock_seconds": stages,
    }
    if extra:
        body.update(extra)
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=str) + "\n")
    return path


# --- experiments --------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Results per method, one entry per strike (a single entry for no-touch)."""

    strikes: list
    results: dict
    implied_vols: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def differences(self) -> list[dict]:
        rows = []
        for a, b in combinations(self.results, 2):
            for j, k in enumerate(self.strikes):
                ra, rb = self.results[a][j], self.results[b][j]
                se = math.hypot(ra.std_error, rb.std_error)
                diff = ra.price - rb.price
                rows.append({
                    "method_a": a.value,
                    "method_b": b.value,
                    "strike": k,
                    "diff": diff,
                    "combined_se": se,
                    "within_3se": abs(diff) <= 3.0 * se,
                })
        return rows

    def speedups(self) -> dict:
        """Wall-clock ratio elapsed(b) / elapsed(a) for each pair."""
        out = {}
        for a, b in combinations(self.results, 2):
            ta, tb = self.results[a][0].elapsed, self.results[b][0].elapsed
            out[f"{b.value}/{a.value}"] = tb / ta
        return out

    def rows(self) -> list[list]:
        out = []
        for m, res in self.results.items():
            for j, (k, r) in enumerate(zip(self.strikes, res)):
                iv = self.implied_vols.get(m, [None] * len(res))[j]
                row = [k, m.value, r.price, r.std_error, r.n_paths]
                if self.implied_vols:
                    row += list(iv) if iv is not None else [None, None]
                out.append(row)
        return out


def implied_vol_with_se(price: float, se: float, s0: float, K: float, T: float, r: float):
    """Implied vol and its delta-method standard error se / vega."""
    iv = implied_vol(price, s0, K, T, r)
    sd = iv * math.sqrt(T)
    d1 = (math.log(s0 / K) + r * T) / sd + 0.5 * sd
    vega = s0 * math.sqrt(T) * math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)
    return iv, se / vega


def _vanilla_results(cfg: ExperimentConfig) -> ComparisonReport:
    p, c = cfg.model, cfg.contract
    strikes = cfg.strike_list
    results, ivs, stages = {}, {}, {}
    for m in cfg.methods:
        start = time.perf_counter()
        res = []
        for k in strikes:
            vc = VanillaContract(c.maturity, k, c.kind)
            if m is Method.LEWIS_LIPTON:
                t0 = time.perf_counter()
                fn = lewis_lipton_call if vc.kind.value == "Call" else lewis_lipton_put
                price = fn(p, k, c.maturity)
                res.append(PricingResult(price, 0.0, 1, time.perf_counter() - t0, m))
            else:
                res.append(willard_mc_price(p, vc, cfg.n_paths[m], cfg.seed, cfg.k_steps))
        stages[m.value] = time.perf_counter() - start
        results[m] = res
        ivs[m] = []
        for k, r in zip(strikes, res):
            call = r.price
            if c.kind.value == "Put":
                call = r.price + p.s0 - k * math.exp(-p.r * c.maturity)
            ivs[m].append(implied_vol_with_se(call, r.std_error, p.s0, k, c.maturity, p.r))
    return ComparisonReport(strikes, results, ivs, stages)


def _barrier_results(cfg: ExperimentConfig) -> ComparisonReport:
    p, c = cfg.model, cfg.contract
    strikes = [None] if c.payoff_kind is PayoffKind.NO_TOUCH else cfg.strike_list
    results, stages = {}, {}
    for m in cfg.methods:
        start = time.perf_counter()
        if m is Method.MCS2D:
            mcfg = Mcs2dConfig(cfg.n_paths[m], max(1, round(cfg.k_steps / c.maturity)), cfg.bridge, cfg.seed)
            results[m] = mc2d_barrier_prices(p, c.maturity, c.barrier, c.payoff_kind, strikes, mcfg)
        else:
            results[m] = price_barrier_hybrid_strikes(
                p, c.maturity, c.barrier, c.payoff_kind, strikes, m, cfg.n_paths[m], cfg.k_steps, cfg.seed,
                cfg.inner_settings, workers=cfg.workers,
            )
        stages[m.value] = time.perf_counter() - start
    return ComparisonReport(strikes, results, {}, stages)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ComparisonReport:
    """Run every requested method; write results.csv, comparison.csv and manifest.json."""
    start = time.perf_counter()
    report = _vanilla_results(cfg) if cfg.is_vanilla else _barrier_results(cfg)
    if write:
        out = Path(cfg.out_dir)
        header = ["strike", "method", "price", "std_error", "n_paths"]
        if report.implied_vols:
            header += ["implied_vol", "implied_vol_se"]
        report.files.append(write_csv(out / "results.csv", header, report.rows()))
        diffs = report.differences()
        if diffs:
            keys = list(diffs[0])
            report.files.append(write_csv(out / "comparison.csv", keys, [[d[k] for k in keys] for d in diffs]))
        report.stages["total"] = time.perf_counter() - start
        report.files.append(
            write_manifest(out, cfg.to_dict(), cfg.seed, report.stages, {"speedups": report.speedups()})
        )
    return report


# --- benchmark ----------------------------------------------------------------

MHP_LADDER = (1, 2, 4, 8)
FDM_LADDER = ((50, 1), (100, 1), (100, 2), (200, 2), (400, 4), (800, 8))
SCALING_REFINE = (8, 16, 32, 64)


@dataclass
class BenchReport:
    """Per-path no-touch timings at matched accuracy and the MHP scaling fit."""

    rows: list
    mhp_refine: int | None
    fdm_grid: tuple | None
    mhp_time: float
    fdm_time: float
    ratio: float
    scaling: list
    scaling_exponent: float
    tol: float

    def summary(self) -> dict:
        return {
            "tol": self.tol,
            "mhp_refine": self.mhp_refine,
            "fdm_space": None if self.fdm_grid is None else self.fdm_grid[0],
            "fdm_refine": None if self.fdm_grid is None else self.fdm_grid[1],
            "mhp_time_per_path": self.mhp_time,
            "fdm_time_per_path": self.fdm_time,
            "fdm_over_mhp": self.ratio,
            "scaling_exponent": self.scaling_exponent,
        }


def _timed(fn, repeats: int):
    """(last value, best wall-clock over ``repeats`` runs)."""
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        val = fn()
        best = min(best, time.perf_counter() - t0)
    return val, best


def bench(
    p: HestonParams = HestonParams.reference_defaults(),
    xi: float = -0.5,
    n_paths: int = 20,
    k_steps: int = 52,
    seed: int = 0,
    tol: float = 1e-3,
    repeats: int = 3,
    out_dir=None,
) -> BenchReport:
    """Time per-path no-touch solves for MHP and FDM at matched accuracy.

    The reference per path is MHP at refine 32.  Each method runs at the
    cheapest rung of its ladder whose max error over the paths is below
    ``tol``; the reported times are per-path means of the best of ``repeats``.
    """
    validate_params(p)
    coeffs = conditional_coeffs(simulate_variance_paths(p, 1.0, k_steps, n_paths, seed), p)
    paths = [single_path(coeffs, j) for j in range(n_paths)]
    mode = Mode.BACKWARD
    ref = np.array([inner_pricer(c, xi, Method.HYBRID_MHP, InnerSettings(refine=32)).survival(mode) for c in paths])

    def run(method, s):
        vals, secs = [], []
        for c in paths:
            v, t = _timed(lambda: inner_pricer(c, xi, method, s).survival(mode), repeats)
            vals.append(v)
            secs.append(t)
        return float(np.max(np.abs(np.array(vals) - ref))), float(np.mean(secs))

    rows = []
    mhp_pick = fdm_pick = None
    mhp_time = fdm_time = math.nan
    for refine in MHP_LADDER:
        err, secs = run(Method.HYBRID_MHP, InnerSettings(refine=refine))
        rows.append([Method.HYBRID_MHP.value, f"refine={refine}", err, secs])
        if err < tol:
            mhp_pick, mhp_time = refine, secs
            break
    for space, refine in FDM_LADDER:
        err, secs = run(Method.HYBRID_FDM, InnerSettings(fdm_space=space, fdm_refine=refine))
        rows.append([Method.HYBRID_FDM.value, f"space={space};refine={refine}", err, secs])
        if err < tol:
            fdm_pick, fdm_time = (space, refine), secs
            break
    scaling = []
    for refine in SCALING_REFINE:
        c = paths[0]
        nodes = (len(c.t) - 1) * refine + 1
        _, secs = _timed(lambda: inner_pricer(c, xi, Method.HYBRID_MHP, InnerSettings(refine=refine)).survival(mode), repeats)
        scaling.append([nodes, secs])
    sc = np.array(scaling)
    exponent = float(np.polyfit(np.log(sc[:, 0]), np.log(sc[:, 1]), 1)[0])
    report = BenchReport(rows, mhp_pick, fdm_pick, mhp_time, fdm_time, fdm_time / mhp_time, scaling, exponent, tol)
    if out_dir is not None:
        write_csv(Path(out_dir) / "bench.csv", ["method", "setting", "max_error", "time_per_path"], rows)
        write_csv(Path(out_dir) / "bench_scaling.csv", ["nodes", "time_per_path"], scaling)
    return report
