"""Crank-Nicolson solver for the conditioned advection-diffusion problem.

Per time step the log-price drifts by dM and diffuses with variance dU, both
taken from the variance path, so the scheme sees exactly the piecewise-linear
boundary used by the heat-potential solver.  The barrier row is Dirichlet;
the far row closes with one-sided second-order differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .domain import NumericalError
from .paths import ConditionalCoefficients


class SolverSingular(NumericalError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid x_m = xi + m dx, m = 0..M, with x_{origin} = 0."""

    xi: float
    upper: float
    m: int
    dx: float
    origin: int

    @property
    def nodes(self) -> np.ndarray:
        return self.xi + self.dx * np.arange(self.m + 1)

    @classmethod
    def build(cls, xi: float, upper: float, n_intervals: int) -> "SpatialGrid":
        """About ``n_intervals`` cells on [xi, upper], spacing adjusted to hit 0."""
        if not upper > 0 > xi:
            raise ValueError("need upper > 0 > xi")
        if n_intervals < 4:
            raise ValueError("need at least 4 intervals")
        dx0 = (upper - xi) / n_intervals
        origin = max(1, round(-xi / dx0))
        dx = -xi / origin
        m = math.ceil((upper - xi) / dx - 1e-9)
        return cls(xi, xi + m * dx, m, dx, origin)


def default_upper(big_upsilon: float, n_values) -> float:
    """Far boundary, four terminal standard deviations beyond the largest drift."""
    return max(4.0 * math.sqrt(big_upsilon) + float(np.max(np.abs(n_values))), 3.0)


@dataclass(frozen=True)
class CNStep:
    alpha: float
    beta: float


def step_coefficients(d_m, d_upsilon, dx: float) -> list[CNStep]:
    """alpha = dM / (4 dx), beta = dU / (4 dx^2) for each step."""
    return [CNStep(a / (4.0 * dx), b / (4.0 * dx * dx)) for a, b in zip(d_m, d_upsilon)]


def _banded(a: float, b: float, size: int) -> np.ndarray:
    """A_(a,b) in LAPACK band storage with 3 sub- and 1 super-diagonal."""
    ab = np.zeros((5, size))
    # super-diagonal: A[i, i+1] stored at ab[0, i+1]
    ab[0, 2:] = -a - b
    ab[1, :] = 1.0 + 2.0 * b
    ab[2, :-1] = a - b
    # Dirichlet row at the barrier
    ab[1, 0] = 1.0
    ab[0, 1] = 0.0
    # far row: (b, -a-4b, 4a+5b, 1-3a-2b) on columns M-3..M
    last = size - 1
    ab[1, last] = 1.0 - 3.0 * a - 2.0 * b
    ab[2, last - 1] = 4.0 * a + 5.0 * b
    ab[3, last - 2] = -a - 4.0 * b
    ab[4, last - 3] = b
    return ab


def _apply(a: float, b: float, v: np.ndarray) -> np.ndarray:
    """A_(a,b) v."""
    out = np.empty_like(v)
    out[0] = v[0]
    out[1:-1] = (a - b) * v[:-2] + (1.0 + 2.0 * b) * v[1:-1] + (-a - b) * v[2:]
    out[-1] = b * v[-4] + (-a - 4 * b) * v[-3] + (4 * a + 5 * b) * v[-2] + (1 - 3 * a - 2 * b) * v[-1]
    return out


def _solve(a: float, b: float, rhs: np.ndarray) -> np.ndarray:
    try:
        out = solve_banded((3, 1), _banded(a, b, rhs.size), rhs, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SolverSingular(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise SolverSingular("non-finite values in the CN solve")
    return out


@dataclass(frozen=True)
class PathIncrements:
    """Per-step increments of time, scaled clock and cumulative drift."""

    dt: np.ndarray
    d_upsilon: np.ndarray
    d_m: np.ndarray

    @property
    def big_upsilon(self) -> float:
        return float(self.d_upsilon.sum())

    @classmethod
    def from_coeffs(cls, coeffs: ConditionalCoefficients, refine: int = 1, midpoint: str = "consistent"):
        """Increments on the path grid subdivided ``refine`` times.

        ``midpoint="consistent"`` takes the drift of each step from the
        increment of M; ``"average"`` uses (mu_n + mu_{n+1}) / 2 instead.
        """
        if coeffs.upsilon.ndim != 1:
            raise ValueError("expected coefficients of a single path")
        if midpoint == "consistent":
            t, ups, m = coeffs.refine(refine)
            return cls(np.diff(t), np.diff(ups), np.diff(m))
        if midpoint == "average":
            dt = np.diff(coeffs.t)
            mu = 0.5 * (coeffs.mu[1:] + coeffs.mu[:-1])
            d_ups = np.diff(coeffs.upsilon)
            d_m = mu * dt
            rep = lambda x: np.repeat(x / refine, refine)
            return cls(rep(dt), rep(d_ups), rep(d_m))
        raise ValueError(f"unknown midpoint rule {midpoint!r}")

    @classmethod
    def constant(cls, lam: float, big_upsilon: float, n_steps: int):
        du = np.full(n_steps, big_upsilon / n_steps)
        return cls(du.copy(), du, lam * du)


def _schedule(inc: PathIncrements, grid: SpatialGrid, rannacher: bool):
    steps = step_coefficients(inc.d_m, inc.d_upsilon, grid.dx)
    # rannacher start-up: the first step becomes two implicit half-steps
    return steps, (1 if rannacher else 0)


def cn_backward_price(
    inc: PathIncrements, payoff: np.ndarray, grid: SpatialGrid, T: float, r: float, rannacher: bool = False
) -> np.ndarray:
    """Discounted values at t = 0 on every grid node (price at ``grid.origin``)."""
    values = np.array(payoff, dtype=float)
    if values.shape != (grid.m + 1,):
        raise ValueError("payoff must live on the grid")
    values[0] = 0.0
    steps, n_smooth = _schedule(inc, grid, rannacher)
    for j, st in enumerate(reversed(steps)):
        if j < n_smooth:
            for _ in range(2):
                rhs = values.copy()
                rhs[0] = 0.0
                values = _solve(st.alpha, st.beta, rhs)
        else:
            rhs = _apply(-st.alpha, -st.beta, values)
            rhs[0] = 0.0
            values = _solve(st.alpha, st.beta, rhs)
    return math.exp(-r * T) * values


def cn_forward_green(inc: PathIncrements, grid: SpatialGrid, rannacher: bool = False) -> np.ndarray:
    """Killed density at maturity on the grid, started from delta / dx at the origin."""
    dens = np.zeros(grid.m + 1)
    dens[grid.origin] = 1.0 / grid.dx
    steps, n_smooth = _schedule(inc, grid, rannacher)
    for j, st in enumerate(steps):
        if j < n_smooth:
            for _ in range(2):
                rhs = dens.copy()
                rhs[0] = 0.0
                dens = _solve(-st.alpha, st.beta, rhs)
        else:
            rhs = _apply(st.alpha, -st.beta, dens)
            rhs[0] = 0.0
            dens = _solve(-st.alpha, st.beta, rhs)
    return dens


def price_from_green(dens: np.ndarray, payoff: np.ndarray, grid: SpatialGrid, T: float, r: float) -> float:
    """e^{-rT} dx sum_m G_m Pi_m."""
    return float(math.exp(-r * T) * grid.dx * np.dot(dens, payoff))


def call_payoff(grid: SpatialGrid, k: float) -> np.ndarray:
    """(e^x - e^k)^+ per unit spot, cell-averaged at the node nearest the kink."""
    return _vanilla_payoff(grid, k, call=True)


def put_payoff(grid: SpatialGrid, k: float) -> np.ndarray:
    """(e^k - e^x)^+ per unit spot, cell-averaged at the node nearest the kink."""
    return _vanilla_payoff(grid, k, call=False)


def _vanilla_payoff(grid: SpatialGrid, k: float, call: bool) -> np.ndarray:
    x = grid.nodes
    ek = math.exp(k)
    pay = np.maximum(np.exp(x) - ek, 0.0) if call else np.maximum(ek - np.exp(x), 0.0)
    j = round((k - grid.xi) / grid.dx)
    if 1 <= j <= grid.m - 1:
        lo, hi = x[j] - grid.dx / 2, x[j] + grid.dx / 2
        if call:
            a = min(max(lo, k), hi)
            pay[j] = ((math.exp(hi) - math.exp(a)) - ek * (hi - a)) / grid.dx
        else:
            a = max(min(hi, k), lo)
            pay[j] = (ek * (a - lo) - (math.exp(a) - math.exp(lo))) / grid.dx
    pay[0] = 0.0
    return pay


def no_touch_payoff(grid: SpatialGrid) -> np.ndarray:
    pay = np.ones(grid.m + 1)
    pay[0] = 0.0
    return pay


class FdmPathPricer:
    """CN prices of one variance path, on a grid sized from the path."""

    def __init__(self, inc: PathIncrements, xi: float, n_space: int = 400, rannacher: bool = False, n_values=None):
        if not xi < 0:
            raise ValueError("xi must be < 0")
        if n_values is None:
            n_values = np.concatenate([[0.0], np.cumsum(inc.d_m)])
        self.inc = inc
        self.xi = float(xi)
        self.grid = SpatialGrid.build(xi, default_upper(inc.big_upsilon, n_values), n_space)
        self.rannacher = rannacher
        self._green = None

    @property
    def green_values(self) -> np.ndarray:
        if self._green is None:
            self._green = cn_forward_green(self.inc, self.grid, self.rannacher)
        return self._green

    def green(self, x) -> np.ndarray:
        """Density interpolated to ``x`` (zero below the barrier)."""
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.grid.nodes, self.green_values, left=0.0, right=0.0)

    def survival(self, mode: str = "Backward") -> float:
        if mode == "Forward":
            return price_from_green(self.green_values, no_touch_payoff(self.grid), self.grid, 0.0, 0.0)
        vals = cn_backward_price(self.inc, no_touch_payoff(self.grid), self.grid, 0.0, 0.0, self.rannacher)
        return float(vals[self.grid.origin])

    def _price(self, payoff: np.ndarray, mode: str) -> float:
        if mode == "Forward":
            return price_from_green(self.green_values, payoff, self.grid, 0.0, 0.0)
        vals = cn_backward_price(self.inc, payoff, self.grid, 0.0, 0.0, self.rannacher)
        return float(vals[self.grid.origin])

    def call(self, k, mode: str = "Backward") -> np.ndarray:
        """Undiscounted down-and-out call per unit spot."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        return np.array([self._price(call_payoff(self.grid, kj), mode) for kj in k])

    def put(self, k, mode: str = "Backward") -> np.ndarray:
        """Undiscounted down-and-out put per unit spot."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        return np.array([self._price(put_payoff(self.grid, kj), mode) for kj in k])

    def survival_curve(self, x) -> np.ndarray:
        """No-touch value as a function of the initial log-spot x (undiscounted)."""
        vals = cn_backward_price(self.inc, no_touch_payoff(self.grid), self.grid, 0.0, 0.0, self.rannacher)
        return np.interp(x, self.grid.nodes, vals, left=0.0)

    def call_curve(self, x, k: float) -> np.ndarray:
        """Down-and-out call value in units of S_0 = 1 as a function of the initial log-spot x."""
        vals = cn_backward_price(self.inc, call_payoff(self.grid, k), self.grid, 0.0, 0.0, self.rannacher)
        return np.interp(x, self.grid.nodes, vals, left=0.0)
