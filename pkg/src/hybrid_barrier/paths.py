"""Outer Monte Carlo loop: Heston variance paths and their conditional coefficients.

Arrays carry an optional leading path axis, so ``v`` is either ``(K+1,)``
for a single path or ``(n_paths, K+1)`` for a batch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import HestonParams

# floor applied to v+ inside the integrated variance so that upsilon is strictly increasing
V_FLOOR = 1e-12

VARIANCE_STREAM = 0
SPOT_STREAM = 1


def path_rng(seed: int, path_index: int, stream: int = VARIANCE_STREAM) -> np.random.Generator:
    """Independent generator for one (seed, path, stream) triple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def path_normals(seed: int, first: int, n_paths: int, k_steps: int, stream: int = VARIANCE_STREAM) -> np.ndarray:
    """Standard normals of shape (n_paths, k_steps), row i from path ``first + i``."""
    out = np.empty((n_paths, k_steps))
    for i in range(n_paths):
        out[i] = path_rng(seed, first + i, stream).standard_normal(k_steps)
    return out


@dataclass(frozen=True)
class VariancePath:
    dt: float
    v: np.ndarray
    i: np.ndarray
    t: np.ndarray
    eta: np.ndarray | None = None
    # left-point sum of v+ dt, the integral the Euler drift actually uses
    i_drift: np.ndarray | None = None

    @property
    def k_steps(self) -> int:
        return self.v.shape[-1] - 1

    @property
    def maturity(self) -> float:
        return float(self.t[-1])

    def __len__(self):
        return 1 if self.v.ndim == 1 else self.v.shape[0]

    def __getitem__(self, idx) -> "VariancePath":
        if self.v.ndim == 1:
            raise TypeError("single path is not indexable")
        eta = None if self.eta is None else self.eta[idx]
        i_drift = None if self.i_drift is None else self.i_drift[idx]
        return VariancePath(self.dt, self.v[idx], self.i[idx], self.t, eta, i_drift)

    @property
    def drift_integral(self) -> np.ndarray:
        if self.i_drift is not None:
            return self.i_drift
        out = np.zeros_like(self.v)
        out[..., 1:] = np.cumsum(np.maximum(self.v[..., :-1], 0.0) * self.dt, axis=-1)
        return out


def euler_variance(p: HestonParams, T: float, eta: np.ndarray, literal: bool = False) -> VariancePath:
    """Full-truncation Euler scheme driven by the given normals ``eta[..., k_steps]``.

    ``literal=True`` uses an additive ``epsilon sqrt(dt) eta`` diffusion with no
    sqrt(v) factor; it exists only for A/B comparisons.
    """
    eta = np.asarray(eta, dtype=float)
    k_steps = eta.shape[-1]
    if k_steps < 2:
        raise ValueError("k_steps must be >= 2")
    if not T > 0:
        raise ValueError("T must be > 0")
    dt = T / k_steps
    sqdt = np.sqrt(dt)
    v = np.empty(eta.shape[:-1] + (k_steps + 1,))
    v[..., 0] = p.v0
    for k in range(1, k_steps + 1):
        vp = np.maximum(v[..., k - 1], 0.0)
        diffusion = 1.0 if literal else np.sqrt(vp)
        v[..., k] = v[..., k - 1] + p.kappa * (p.theta - vp) * dt + p.epsilon * diffusion * sqdt * eta[..., k - 1]
    vf = np.maximum(v, V_FLOOR)
    i = np.zeros_like(v)
    i[..., 1:] = np.cumsum(0.5 * dt * (vf[..., 1:] + vf[..., :-1]), axis=-1)
    i_drift = np.zeros_like(v)
    i_drift[..., 1:] = np.cumsum(np.maximum(v[..., :-1], 0.0) * dt, axis=-1)
    t = np.linspace(0.0, T, k_steps + 1)
    return VariancePath(dt, v, i, t, eta, i_drift)


def simulate_variance_path(p: HestonParams, T: float, k_steps: int, rng: np.random.Generator, literal=False) -> VariancePath:
    return euler_variance(p, T, rng.standard_normal(k_steps), literal)


def simulate_variance_paths(p: HestonParams, T: float, k_steps: int, n_paths: int, seed: int, first: int = 0, literal=False) -> VariancePath:
    """Batch of paths ``first .. first + n_paths - 1``; each path has its own substream."""
    return euler_variance(p, T, path_normals(seed, first, n_paths, k_steps), literal)


@dataclass(frozen=True)
class ConditionalCoefficients:
    """Drift/diffusion of the log-price conditioned on one variance path.

    ``nu`` is the conditional volatility sqrt(1 - rho^2) sqrt(v); ``m`` the
    cumulative drift M_k and ``upsilon`` the scaled clock (1 - rho^2) I_k.
    """

    t: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    m: np.ndarray
    upsilon: np.ndarray

    @property
    def big_upsilon(self):
        return self.upsilon[..., -1]

    @property
    def lam(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.mu / self.nu

    def step_drift(self) -> np.ndarray:
        """Constant drift on each step, consistent with the increments of ``m``."""
        return np.diff(self.m, axis=-1) / np.diff(self.t)

    def step_variance(self) -> np.ndarray:
        """Conditional variance rate on each step, consistent with ``upsilon``."""
        return np.diff(self.upsilon, axis=-1) / np.diff(self.t)

    def refine(self, factor: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Subdivide every step into ``factor`` pieces; (t, upsilon, m) linear within a step."""
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        if factor == 1:
            return self.t, self.upsilon, self.m
        k_steps = self.t.shape[-1] - 1
        frac = np.arange(factor) / factor
        t_fine = np.empty(k_steps * factor + 1)
        t_fine[:-1] = (self.t[:-1, None] + frac[None, :] * np.diff(self.t)[:, None]).ravel()
        t_fine[-1] = self.t[-1]

        def lin(a):
            lead = a.shape[:-1]
            fine = np.empty(lead + (k_steps * factor + 1,))
            da = np.diff(a, axis=-1)
            fine[..., :-1] = (a[..., :-1, None] + frac * da[..., None]).reshape(lead + (-1,))
            fine[..., -1] = a[..., -1]
            return fine

        return t_fine, lin(self.upsilon), lin(self.m)


def conditional_coeffs(path: VariancePath, p: HestonParams) -> ConditionalCoefficients:
    v, dt = path.v, path.dt
    a = p.r - p.rho * p.kappa * p.theta / p.epsilon
    c = 0.5 - p.rho * p.kappa / p.epsilon
    dv = np.diff(v, axis=-1)
    # mu_0 borrows the first step's difference quotient
    dq = np.concatenate([dv[..., :1], dv], axis=-1) / dt
    mu = a - c * v + (p.rho / p.epsilon) * dq
    nu = np.sqrt(1.0 - p.rho**2) * np.sqrt(np.maximum(v, 0.0))
    # kappa * I enters through J, so it takes the Euler-consistent integral
    m = path.t * a - 0.5 * path.i + (p.rho * p.kappa / p.epsilon) * path.drift_integral + (p.rho / p.epsilon) * (v - p.v0)
    m[..., 0] = 0.0
    upsilon = (1.0 - p.rho**2) * path.i
    return ConditionalCoefficients(path.t, mu, nu, m, upsilon)


def terminal_functionals(path: VariancePath, p: HestonParams):
    """(I_T, J_T) with J_T recovered from the path through the variance SDE.

    The identity uses the left-point integral of the Euler drift, which makes
    it equal to the discrete Ito sum on every path (trapezoid I would leave an
    O(dt) bias in E[J]).
    """
    i_t = path.i[..., -1]
    i_d = path.drift_integral[..., -1]
    j_t = (path.v[..., -1] - p.v0 - p.kappa * p.theta * path.maturity + p.kappa * i_d) / p.epsilon
    return i_t, j_t


def direct_j(path: VariancePath) -> np.ndarray:
    """J_T as the Ito sum of sqrt(v+) dB over the driving normals."""
    if path.eta is None:
        raise ValueError("path carries no driving normals")
    vp = np.maximum(path.v[..., :-1], 0.0)
    return np.sum(np.sqrt(vp) * np.sqrt(path.dt) * path.eta, axis=-1)


def write_path_csv(fh, paths: VariancePath, p: HestonParams, first_id: int = 0) -> None:
    """Dump paths as rows (path_id, k, t, v, I, upsilon, M)."""
    coeffs = conditional_coeffs(paths, p)
    v = np.atleast_2d(paths.v)
    i = np.atleast_2d(paths.i)
    ups = np.atleast_2d(coeffs.upsilon)
    m = np.atleast_2d(coeffs.m)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path_id", "k", "t", "v", "I", "upsilon", "M"])
    for j in range(v.shape[0]):
        for k in range(v.shape[1]):
            w.writerow([first_id + j, k] + [f"{x:.10g}" for x in (paths.t[k], v[j, k], i[j, k], ups[j, k], m[j, k])])
