"""Conditional (Willard) vanilla pricing averaged over simulated variance paths."""

from __future__ import annotations

import math
import time

import numpy as np

from .domain import HestonParams, Method, OptionKind, PricingResult, VanillaContract, validate_params
from .paths import simulate_variance_paths, terminal_functionals
from .vanilla import bs_call, bs_put


def conditional_inputs(i_t, j_t, p: HestonParams, T: float):
    """Effective spot and volatility of the Black-Scholes problem on one path."""
    i_t = np.asarray(i_t, dtype=float)
    eff_spot = p.s0 * np.exp(-0.5 * p.rho**2 * i_t + p.rho * np.asarray(j_t, dtype=float))
    eff_vol = math.sqrt(1.0 - p.rho**2) * np.sqrt(np.maximum(i_t, 0.0) / T)
    return eff_spot, eff_vol


def conditional_call(i_t, j_t, p: HestonParams, K: float, T: float):
    spot, vol = conditional_inputs(i_t, j_t, p, T)
    return bs_call(spot, K, T, p.r, vol)


def conditional_put(i_t, j_t, p: HestonParams, K: float, T: float):
    spot, vol = conditional_inputs(i_t, j_t, p, T)
    return bs_put(spot, K, T, p.r, vol)


def willard_mc_price(
    p: HestonParams,
    vanilla: VanillaContract,
    n_paths: int,
    seed: int,
    k_steps: int = 52,
    chunk: int = 20_000,
) -> PricingResult:
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    validate_params(p)
    start = time.perf_counter()
    T, K = vanilla.maturity, vanilla.strike
    pricer = conditional_call if vanilla.kind is OptionKind.CALL else conditional_put
    values = np.empty(n_paths)
    for first in range(0, n_paths, chunk):
        n = min(chunk, n_paths - first)
        paths = simulate_variance_paths(p, T, k_steps, n, seed, first)
        i_t, j_t = terminal_functionals(paths, p)
        values[first:first + n] = pricer(i_t, j_t, p, K, T)
    return PricingResult(
        price=float(values.mean()),
        std_error=float(values.std(ddof=1) / math.sqrt(n_paths)),
        n_paths=n_paths,
        elapsed=time.perf_counter() - start,
        method=Method.WILLARD_MC,
    )
