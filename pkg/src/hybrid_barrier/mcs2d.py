"""Brute-force two-dimensional Monte Carlo for barrier contracts.

The log-spot follows a log-Euler scheme driven by the full-truncation variance
of :mod:`paths`; both draw from the same per-path substreams, so runs can be
seed-matched with the hybrid pricers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .domain import BarrierContract, HestonParams, Method, PayoffKind, PricingResult, to_log_contract, validate_params
from .paths import SPOT_STREAM, VARIANCE_STREAM, euler_variance, path_normals


@dataclass(frozen=True)
class Mcs2dConfig:
    """``k_steps`` is the number of time steps per year."""

    n_paths: int = 100_000
    k_steps: int = 52
    bridge: bool = True
    seed: int = 0
    chunk: int = 20_000

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2")
        if self.k_steps < 1:
            raise ValueError("k_steps must be >= 1")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")

    def steps_for(self, maturity: float) -> int:
        return max(2, round(self.k_steps * maturity))


def simulate_log_spot(p: HestonParams, T: float, eta: np.ndarray, zeta: np.ndarray):
    """Log-spot paths X_k = ln(S_k / S_0) and the variance paths driving them."""
    vp = euler_variance(p, T, eta)
    dt = vp.dt
    v_left = np.maximum(vp.v[:, :-1], 0.0)
    dw = p.rho * eta + math.sqrt(1.0 - p.rho**2) * zeta
    dx = (p.r - 0.5 * v_left) * dt + np.sqrt(v_left * dt) * dw
    x = np.zeros_like(vp.v)
    x[:, 1:] = np.cumsum(dx, axis=1)
    return x, vp


def survival_weights(x: np.ndarray, nu2_left: np.ndarray, xi: float, dt: float, bridge: bool) -> np.ndarray:
    """Probability of no breach per path, given the simulated nodes.

    With ``bridge`` each step survives with 1 - exp(-2 (X_{k-1} - xi)(X_k - xi) / (nu^2 dt)),
    nu^2 frozen at the left endpoint.  Callers pass the conditional variance
    (1 - rho^2) v+, the part of the spot noise not carried by the variance
    path, so the bridge sees the same conditional model as the hybrid pricers.
    """
    alive = np.all(x > xi, axis=1).astype(float)
    if not bridge:
        return alive
    a = np.maximum(x[:, :-1] - xi, 0.0)
    b = np.maximum(x[:, 1:] - xi, 0.0)
    var = nu2_left * dt
    with np.errstate(divide="ignore", over="ignore"):
        expo = np.where(var > 0, -2.0 * a * b / np.where(var > 0, var, 1.0), -np.inf)
    step = -np.expm1(expo)
    return alive * np.prod(step, axis=1)


def _terminal_chunks(p: HestonParams, T: float, xi: float, cfg: Mcs2dConfig):
    """Yield (X_T, survival weight) per chunk of paths, in path order."""
    n_steps = cfg.steps_for(T)
    for first in range(0, cfg.n_paths, cfg.chunk):
        n = min(cfg.chunk, cfg.n_paths - first)
        eta = path_normals(cfg.seed, first, n, n_steps, VARIANCE_STREAM)
        zeta = path_normals(cfg.seed, first, n, n_steps, SPOT_STREAM)
        x, vp = simulate_log_spot(p, T, eta, zeta)
        yield x[:, -1], survival_weights(x, (1.0 - p.rho**2) * np.maximum(vp.v[:, :-1], 0.0), xi, vp.dt, cfg.bridge)


def mc2d_barrier_prices(
    p: HestonParams, maturity: float, barrier: float, payoff_kind: PayoffKind, strikes, cfg: Mcs2dConfig = Mcs2dConfig()
) -> list[PricingResult]:
    """One result per strike (a single no-touch result when ``strikes`` is empty), all on the same paths."""
    validate_params(p)
    payoff_kind = PayoffKind(payoff_kind)
    strikes = [None] if payoff_kind is PayoffKind.NO_TOUCH else list(strikes)
    contracts = [BarrierContract(maturity, barrier, payoff_kind, k) for k in strikes]
    xi, _ = to_log_contract(contracts[0], p.s0)
    start = time.perf_counter()
    df = math.exp(-p.r * maturity)
    values = np.empty((len(strikes), cfg.n_paths))
    first = 0
    for x_t, surv in _terminal_chunks(p, maturity, xi, cfg):
        n = x_t.size
        s_t = p.s0 * np.exp(x_t)
        for j, c in enumerate(contracts):
            if payoff_kind is PayoffKind.NO_TOUCH:
                pay = np.ones(n)
            elif payoff_kind is PayoffKind.DOWN_OUT_CALL:
                pay = np.maximum(s_t - c.strike, 0.0)
            else:
                pay = np.maximum(c.strike - s_t, 0.0)
            values[j, first:first + n] = df * pay * surv
        first += n
    elapsed = time.perf_counter() - start
    return [
        PricingResult(
            price=float(v.mean()),
            std_error=float(v.std(ddof=1) / math.sqrt(cfg.n_paths)),
            n_paths=cfg.n_paths,
            elapsed=elapsed,
            method=Method.MCS2D,
            extra={"k_steps": cfg.steps_for(maturity), "bridge": cfg.bridge, "strike": k},
        )
        for v, k in zip(values, strikes)
    ]


def mc2d_barrier_price(p: HestonParams, c: BarrierContract, cfg: Mcs2dConfig = Mcs2dConfig()) -> PricingResult:
    return mc2d_barrier_prices(p, c.maturity, c.barrier, c.payoff_kind, [c.strike], cfg)[0]


def mc2d_killed_density(p: HestonParams, xi: float, maturity: float, edges, cfg: Mcs2dConfig = Mcs2dConfig()):
    """Discounted histogram estimate of the killed density of X_T on ``edges``.

    Returns (bin centres, density, standard error per bin).
    """
    validate_params(p)
    edges = np.asarray(edges, dtype=float)
    width = np.diff(edges)
    if edges.ndim != 1 or edges.size < 2 or not np.all(width > 0):
        raise ValueError("edges must be strictly increasing")
    s1 = np.zeros(width.size)
    s2 = np.zeros(width.size)
    for x_t, surv in _terminal_chunks(p, maturity, xi, cfg):
        idx = np.searchsorted(edges, x_t, side="right") - 1
        ok = (idx >= 0) & (idx < width.size)
        s1 += np.bincount(idx[ok], weights=surv[ok], minlength=width.size)
        s2 += np.bincount(idx[ok], weights=surv[ok] ** 2, minlength=width.size)
    n = cfg.n_paths
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0) * n / (n - 1)
    df = math.exp(-p.r * maturity)
    centres = 0.5 * (edges[1:] + edges[:-1])
    return centres, df * mean / width, df * np.sqrt(var / n) / width
