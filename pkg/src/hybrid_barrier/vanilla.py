"""Closed-form vanilla prices: Black-Scholes, its Fourier form, Lewis-Lipton Heston."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .domain import HestonParams, NumericalError, PricingError, validate_params


class QuadratureNotConverged(NumericalError):
    pass


class PriceOutOfBounds(PricingError, ValueError):
    pass


class NoConvergence(NumericalError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule on ``[0, truncation]``.

    ``truncation`` is doubled (with the node count) until the last panel
    contributes less than ``tol``.
    """

    truncation: float = 200.0
    n_nodes: int = 2000
    tol: float = 1e-10
    panel_order: int = 16
    max_doublings: int = 6

    def __post_init__(self):
        if not self.truncation > 0:
            raise ValueError("truncation must be > 0")
        if self.n_nodes < 16:
            raise ValueError("n_nodes must be >= 16")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


DEFAULT_QUAD = QuadratureSpec()


def bs_call(s0, K, T, r, sigma):
    """Black-Scholes call; ``sigma = 0`` returns the deterministic limit."""
    s0, K, T, sigma = (np.asarray(x, dtype=float) for x in (s0, K, T, sigma))
    df = np.exp(-r * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        sd = sigma * np.sqrt(T)
        d_plus = (np.log(s0 / K) + r * T + 0.5 * sd**2) / sd
        price = s0 * ndtr(d_plus) - df * K * ndtr(d_plus - sd)
    price = np.where(sd > 0, price, np.maximum(s0 - df * K, 0.0))
    return price[()] if price.ndim == 0 else price


def bs_put(s0, K, T, r, sigma):
    return bs_call(s0, K, T, r, sigma) - np.asarray(s0) + np.asarray(K) * np.exp(-r * T)


def _gauss_legendre_nodes(upper: float, n_nodes: int, order: int):
    n_panels = max(1, n_nodes // order)
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, upper, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights, order


def _integrate_half_line(integrand, q: QuadratureSpec) -> float:
    """Integrate a real integrand over [0, inf) with adaptive truncation."""
    upper, n = q.truncation, q.n_nodes
    for _ in range(q.max_doublings + 1):
        nodes, weights, order = _gauss_legendre_nodes(upper, n, q.panel_order)
        vals = integrand(nodes) * weights
        if not np.all(np.isfinite(vals)):
            raise QuadratureNotConverged("non-finite integrand value")
        tail = abs(vals[-order:].sum())
        if tail < q.tol:
            return float(vals.sum())
        upper, n = 2 * upper, 2 * n
    raise QuadratureNotConverged(f"tail contribution {tail:.3e} exceeds tol at chi_max={upper / 2}")


def bs_call_fourier(s0, K, T, r, sigma, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not sigma > 0:
        raise ValueError("Fourier form needs sigma > 0")
    x = math.log(K / s0) - r * T
    var = sigma * sigma * T

    def integrand(chi):
        c2 = chi * chi + 0.25
        return np.real(np.exp((1j * chi + 0.5) * x - c2 * var / 2.0)) / c2

    # integrand(-chi) is the conjugate of integrand(chi)
    return s0 * (1.0 - _integrate_half_line(integrand, q) / math.pi)


def _log1p(z):
    """Accurate complex log(1 + z) for small |z| (Kahan's trick)."""
    w = 1.0 + z
    safe = w != 1.0
    num = np.where(safe, np.log(np.where(safe, w, 1.0)) * z, z)
    den = np.where(safe, w - 1.0, 1.0)
    return num / den


def lewis_lipton_integrand(p: HestonParams, K: float, T: float, chi):
    """Real part of the integrand of the Lewis-Lipton call formula on ``chi >= 0``.

    ``chi`` must be sorted ascending: the log term is phase-unwrapped along it.
    """
    eps, rho, kap_hat = p.epsilon, p.rho, p.kappa_hat
    chi = np.asarray(chi, dtype=float)
    c2 = chi * chi + 0.25
    b = 1j * rho * eps * chi + kap_hat
    zeta = np.sqrt(eps**2 * (1 - rho**2) * chi**2 + 2j * eps * rho * kap_hat * chi + kap_hat**2 + eps**2 / 4)
    psi_minus = b + zeta
    # psi_plus = zeta - b rewritten without cancellation; p_ratio = psi_plus / eps^2
    p_ratio = c2 / psi_minus
    psi_plus = eps**2 * p_ratio
    one_minus_e = -np.expm1(-zeta * T)
    denom = psi_minus + psi_plus * np.exp(-zeta * T)
    if np.min(np.abs(denom)) < 1e-12:
        raise NumericalError("psi_- + psi_+ exp(-zeta T) vanishes")
    beta = one_minus_e / denom
    # log((psi_- + psi_+ e^{-zeta T}) / (2 zeta)) = log1p(-psi_+ (1 - e^{-zeta T}) / (2 zeta))
    log_term = _log1p(-psi_plus * one_minus_e / (2.0 * zeta))
    log_term = log_term.real + 1j * np.unwrap(log_term.imag)
    alpha = -p.kappa * p.theta * (p_ratio * T + 2.0 * log_term / eps**2)
    x = math.log(K / p.s0) - p.r * T
    expo = (1j * chi + 0.5) * x + alpha - c2 * beta * p.v0
    return np.real(np.exp(expo)) / c2


def lewis_lipton_call(p: HestonParams, K: float, T: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Heston call price by a single Fourier integral (Lewis-Lipton form)."""
    validate_params(p)
    if not (K > 0 and T > 0):
        raise ValueError("K and T must be positive")
    integral = _integrate_half_line(lambda chi: lewis_lipton_integrand(p, K, T, chi), q)
    return p.s0 * (1.0 - integral / math.pi)


def lewis_lipton_put(p: HestonParams, K: float, T: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    return lewis_lipton_call(p, K, T, q) - p.s0 + K * math.exp(-p.r * T)


def implied_vol(price, s0, K, T, r, lo=1e-6, hi=5.0, tol=1e-10, max_iter=200) -> float:
    """Black-Scholes implied volatility of a call by bisection."""
    lower = max(0.0, s0 - K * math.exp(-r * T))
    if not lower < price < s0:
        raise PriceOutOfBounds(f"call price {price} outside ({lower}, {s0})")
    if bs_call(s0, K, T, r, hi) < price:
        raise NoConvergence(f"implied vol above bracket [{lo}, {hi}]")
    if bs_call(s0, K, T, r, lo) > price:
        raise NoConvergence(f"implied vol below bracket [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if bs_call(s0, K, T, r, mid) < price:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    mid = 0.5 * (lo + hi)
    if abs(bs_call(s0, K, T, r, mid) - price) > tol:
        raise NoConvergence("bisection did not reach the price tolerance")
    return mid


def bs_down_out_call(s0, K, B, T, r, sigma):
    """Continuously monitored down-and-out call under Black-Scholes, K >= B."""
    if not (0 < B < s0 and K >= B and sigma > 0):
        raise ValueError("need 0 < B < s0, K >= B and sigma > 0")
    power = 2.0 * (r - 0.5 * sigma * sigma) / (sigma * sigma)
    return float(bs_call(s0, K, T, r, sigma) - (B / s0) ** power * bs_call(B * B / s0, K, T, r, sigma))


def bs_no_touch(s0, B, T, r, sigma):
    """Discounted probability that a GBM stays above B up to T."""
    if not (0 < B < s0 and sigma > 0):
        raise ValueError("need 0 < B < s0 and sigma > 0")
    nu = r - 0.5 * sigma * sigma
    x, sd = math.log(s0 / B), sigma * math.sqrt(T)
    surv = ndtr((x + nu * T) / sd) - (B / s0) ** (2 * nu / sigma**2) * ndtr((-x + nu * T) / sd)
    return float(math.exp(-r * T) * surv)
