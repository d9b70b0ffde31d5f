"""Joint density of a drifted Brownian motion and its running minimum.

pi(T, a, b) is the density of (min_{s<=T} X_s, X_T) at (a, b) for X_0 = 0,
a < 0, b >= a.  Closed forms cover constant drift.  For a time-dependent drift
the density is minus the a-derivative of the killed Green's function, which
heat potentials give as

    pi = -dD/dZ(b - a; phi_a) + D(b - a; chi_a),

with phi_a the boundary density for a barrier at a and chi_a = d phi_a / da
solving the same Volterra equation with rhs (N_u - a) / u * H(u, a - N_u).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import PricingError
from .potentials import MovingBoundary, RhsKind, VolterraOperator, double_layer, heat_kernel


class DomainError(PricingError, ValueError):
    pass


def _check(T, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not T > 0:
        raise DomainError("T must be > 0")
    if np.any(a >= 0):
        raise DomainError("the minimum a must be < 0")
    if np.any(b < a):
        raise DomainError("the terminal value b must be >= a")
    return a, b


def joint_pdf_bm(T: float, a, b):
    """(2/T)(b - 2a) H(T, b - 2a) for standard Brownian motion."""
    a, b = _check(T, a, b)
    y = b - 2.0 * a
    return (2.0 / T * y * heat_kernel(T, y))[()]


def joint_pdf_drifted(T: float, a, b, lam: float):
    """(2/T)(b - 2a) e^{2 lam a} H(T, b - lam T - 2a) for drift ``lam``."""
    a, b = _check(T, a, b)
    y = b - 2.0 * a
    return (2.0 / T * y * np.exp(2.0 * lam * a) * heat_kernel(T, y - lam * T))[()]


@dataclass(frozen=True)
class DriftPath:
    """Cumulative drift N on the clock ``grid``; the drift is dN/du."""

    grid: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if grid.ndim != 1 or grid.shape != n.shape or grid.size < 2:
            raise DomainError("grid and n must be 1-d of equal length >= 2")
        if grid[0] != 0.0 or not np.all(np.diff(grid) > 0):
            raise DomainError("grid must start at 0 and increase strictly")
        if n[0] != 0.0:
            raise DomainError("N must start at 0")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "n", n)

    @property
    def big_upsilon(self) -> float:
        return float(self.grid[-1])

    @classmethod
    def constant(cls, lam: float, big_upsilon: float, n_intervals: int) -> "DriftPath":
        u = np.linspace(0.0, big_upsilon, n_intervals + 1)
        return cls(u, lam * u)

    def boundary(self, per_decade: int = 64, decades: int = 8, refine: int = 8, end_per_decade: int = 32) -> MovingBoundary:
        """The drift path's nodes refined and layered geometrically at both ends.

        N stays piecewise linear on the original nodes, so extra nodes only
        refine the quadrature.  H(u, a - N_u) varies on the scale u ~ a^2,
        which the start layer resolves for every |a| it covers; the end layer
        does the same for the double layer evaluated at b - a near 0, and the
        graded refinement absorbs the square-root singularity at each kink.
        """
        b = MovingBoundary(self.grid, self.n).graded_short_steps().refined(refine, 2.0)
        return b.with_layer(per_decade, decades, at="start").with_layer(end_per_decade, decades, at="end")


class MinimumDensity:
    """pi(Upsilon, a, b) for one drift path; one Volterra factorization serves all a."""

    def __init__(self, dp: DriftPath, per_decade: int = 64):
        self.dp = dp
        self.b = dp.boundary(per_decade)
        self.op = VolterraOperator.from_boundary(self.b)

    def _densities(self, a: float):
        u, n = self.b.nodes, self.b.n
        f = np.zeros_like(u)
        f[1:] = heat_kernel(u[1:], a - n[1:])
        g = np.zeros_like(u)
        # the u = 0 node of (N - a) / u * f is 0/0 with a vanishing limit
        g[1:] = (n[1:] - a) / u[1:] * f[1:]
        return self.op.solve(f, RhsKind.CUSTOM).phi, self.op.solve(g, RhsKind.CUSTOM).phi

    def green(self, a: float, b) -> np.ndarray:
        """Density of X_Upsilon at b killed at the level a."""
        _, b = _check(self.dp.big_upsilon, a, b)
        b = np.atleast_1d(b)
        phi, _ = self._densities(a)
        return heat_kernel(self.b.big_upsilon, b - self.b.n_end) - double_layer(self.b, phi, b - a)

    def pdf(self, a: float, b) -> np.ndarray:
        _, b = _check(self.dp.big_upsilon, a, b)
        b = np.atleast_1d(b)
        phi, chi = self._densities(a)
        z = b - a
        return -double_layer(self.b, phi, z, derivative=True) + double_layer(self.b, chi, z)


def joint_pdf_time_dependent(dp: DriftPath, a, b, per_decade: int = 64):
    """pi(Upsilon, a, b) for a piecewise-linear cumulative drift; ``a`` scalar or array."""
    a_arr, b_arr = _check(dp.big_upsilon, a, b)
    md = MinimumDensity(dp, per_decade)
    a_b = np.broadcast_arrays(a_arr, b_arr)
    out = np.empty(a_b[0].shape)
    flat_a, flat_b, flat_o = a_b[0].ravel(), a_b[1].ravel(), out.reshape(-1)
    for av in np.unique(flat_a):
        sel = flat_a == av
        flat_o[sel] = md.pdf(float(av), flat_b[sel])
    return out[()] if out.ndim == 0 else out


def pdf_grid(dp: DriftPath, a_values, b_values, per_decade: int = 64) -> np.ndarray:
    """pi on the product grid (a, b); entries with b < a are 0."""
    md = MinimumDensity(dp, per_decade)
    b_values = np.asarray(b_values, dtype=float)
    out = np.zeros((len(a_values), b_values.size))
    for i, av in enumerate(a_values):
        live = b_values >= av
        if np.any(live):
            out[i, live] = md.pdf(float(av), b_values[live])
    return out
