"""Heat potentials for the conditioned one-dimensional barrier problem.

On one variance path the log-price is X = N_u + W_u in the scaled clock u,
so the barrier at xi becomes the moving boundary xi - N_u for a standard
Brownian motion.  The killed density is represented as a heat potential whose
density solves a weakly singular Volterra equation of the second kind

    phi(u) + int_0^u Theta Xi / sqrt(2 pi (u - u')) phi(u') du' = f(u),

discretized by product integration against the 1/sqrt singularity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr, ndtr

from .domain import NumericalError
from .paths import ConditionalCoefficients

SQ2PI = math.sqrt(2.0 * math.pi)


class SingularDenominator(NumericalError):
    pass


class RhsKind(str, enum.Enum):
    GREEN_BOUNDARY = "GreenBoundary"
    NO_TOUCH_BACKWARD = "NoTouchBackward"
    CALL_BACKWARD = "CallBackward"
    CUSTOM = "Custom"


class Mode(str, enum.Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"


def heat_kernel(u, y):
    """H(u, y) = exp(-y^2 / 2u) / sqrt(2 pi u)."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-y * y / (2.0 * u)) / np.sqrt(2.0 * np.pi * u)


@dataclass(frozen=True)
class MovingBoundary:
    """Cumulative drift ``n`` on the clock ``nodes``; the barrier sits at xi - n.

    Forward boundaries start at n[0] = 0.  Reversed (backward-time) boundaries
    start at N_Upsilon instead.
    """

    nodes: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if nodes.ndim != 1 or nodes.shape != n.shape:
            raise ValueError("nodes and n must be 1-d arrays of equal length")
        if nodes.size < 2:
            raise ValueError("need at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "n", n)

    @property
    def big_upsilon(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_end(self) -> float:
        return float(self.n[-1])

    def interp(self, u):
        return np.interp(u, self.nodes, self.n)

    def reversed(self) -> "MovingBoundary":
        """Backward-time boundary: varpi_k = Upsilon - u_{K-k}, O_k = N_{K-k}."""
        return MovingBoundary(self.big_upsilon - self.nodes[::-1], self.n[::-1].copy())

    def refined(self, factor: int, power: float = 1.0) -> "MovingBoundary":
        """Split every interval into ``factor`` pieces, N linear in between.

        ``power > 1`` grades the new nodes toward the left end of each
        interval, where a slope change leaves a square-root singularity in
        the density.
        """
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        if not power >= 1.0:
            raise ValueError("grading power must be >= 1")
        if factor == 1:
            return self
        frac = (np.arange(factor) / factor) ** power
        du = np.diff(self.nodes)
        dn = np.diff(self.n)
        u = np.append((self.nodes[:-1, None] + frac * du[:, None]).ravel(), self.nodes[-1])
        n = np.append((self.n[:-1, None] + frac * dn[:, None]).ravel(), self.n[-1])
        return MovingBoundary(u, n)

    def with_layer(self, per_decade: int, decades: int = 8, at: str = "start") -> "MovingBoundary":
        """Add geometric nodes toward u = 0 (``at="start"``) or toward u = Upsilon (``at="end"``).

        A heat kernel observed at distance z from the boundary varies on the
        scale z^2 in u, which these nodes resolve for every z they cover.
        N is interpolated linearly; nodes closer than 1e-3 of their own
        distance to the end than an existing node are dropped.
        """
        if per_decade < 1 or decades < 1:
            raise ValueError("per_decade and decades must be >= 1")
        if at not in ("start", "end"):
            raise ValueError("at must be 'start' or 'end'")
        ups = self.big_upsilon
        dist = ups * np.logspace(-decades, 0, per_decade * decades + 1)[:-1]
        extra = dist if at == "start" else ups - dist
        gap = np.abs(extra[:, None] - self.nodes[None, :]).min(axis=1)
        u = np.union1d(self.nodes, extra[gap > 1e-3 * dist])
        return MovingBoundary(u, np.interp(u, self.nodes, self.n))

    def graded_short_steps(self, jump: float = 8.0) -> "MovingBoundary":
        """Grade the mesh geometrically (ratio 2) around intervals much shorter than a neighbour.

        A near-zero variance step shrinks its clock interval while N still
        moves, so the boundary almost jumps and the density spikes there.
        Without grading, the linear density spreads that spike over the much
        wider neighbouring intervals.  Only neighbours more than ``jump``
        times wider receive nodes, so regular paths are returned unchanged.
        """
        u = self.nodes
        w = np.diff(u)
        extra = []
        for j, h in enumerate(w):
            if j > 0 and w[j - 1] > jump * h:
                d = 2.0 * h
                while d < w[j - 1] - d / 2:
                    extra.append(u[j] - d)
                    d *= 2.0
            if j + 1 < w.size and w[j + 1] > jump * h:
                d = 2.0 * h
                while d < w[j + 1] - d / 2:
                    extra.append(u[j + 1] + d)
                    d *= 2.0
        if not extra:
            return self
        nodes = np.union1d(u, extra)
        return MovingBoundary(nodes, np.interp(nodes, u, self.n))

    @classmethod
    def from_coeffs(cls, coeffs: ConditionalCoefficients) -> "MovingBoundary":
        """Boundary of one variance path, N_u = M_{t(u)} on the path nodes."""
        if coeffs.upsilon.ndim != 1:
            raise ValueError("expected coefficients of a single path")
        return cls(coeffs.upsilon, coeffs.m)

    @classmethod
    def constant_drift(cls, lam: float, big_upsilon: float, n_intervals: int) -> "MovingBoundary":
        u = np.linspace(0.0, big_upsilon, n_intervals + 1)
        return cls(u, lam * u)


@dataclass(frozen=True)
class KernelPieces:
    theta: np.ndarray
    xi: np.ndarray


def kernel_pieces(b: MovingBoundary) -> KernelPieces:
    """Theta(u_k, u_l) and Xi(u_k, u_l) on the lower triangle (zero above it)."""
    u, n = b.nodes, b.n
    du = u[:, None] - u[None, :]
    lower = du > 0
    theta = np.zeros_like(du)
    theta[lower] = -(n[:, None] - n[None, :])[lower] / du[lower]
    slope = np.empty_like(u)
    slope[1:] = -np.diff(n) / np.diff(u)
    slope[0] = slope[1]
    np.fill_diagonal(theta, slope)
    xi = np.where(lower, np.exp(-np.where(lower, du, 0.0) * theta**2 / 2.0), 0.0)
    np.fill_diagonal(xi, 1.0)
    return KernelPieces(theta, xi)


def kernel_matrix(b: MovingBoundary) -> np.ndarray:
    """K_{k,l} = Theta Xi / sqrt(2 pi), the smooth part of the Volterra kernel."""
    kp = kernel_pieces(b)
    return kp.theta * kp.xi / SQ2PI


def product_trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Pi_{k,l} = Delta_{l,l-1} / (sqrt(Delta_{k,l-1}) + sqrt(Delta_{k,l})), 1 <= l <= k."""
    u = np.asarray(grid, dtype=float)
    n = u.size
    sq = np.sqrt(np.clip(u[:, None] - u[None, :], 0.0, None))
    pi = np.zeros((n, n))
    rows, cols = np.tril_indices(n, -1)
    cols = cols + 1
    pi[rows, cols] = (u[cols] - u[cols - 1]) / (sq[rows, cols - 1] + sq[rows, cols])
    return pi


def product_linear_weights(grid: np.ndarray) -> np.ndarray:
    """Row k integrates the linear interpolant of the nodal values against 1/sqrt(u_k - u').

    Exact for piecewise-linear integrands; node l collects the weights of the
    two intervals it bounds.
    """
    u = np.asarray(grid, dtype=float)
    n = u.size
    rows, cols = np.tril_indices(n, -1)
    cols = cols + 1
    a = np.sqrt(u[rows] - u[cols])
    b = np.sqrt(u[rows] - u[cols - 1])
    h = u[cols] - u[cols - 1]
    total = 2.0 * h / (a + b)
    # int (s - lo) / sqrt(s) ds over the interval, divided by its length
    upper = (2.0 / 3.0) * h * (b + 2.0 * a) / (a + b) ** 2
    w = np.zeros((n, n))
    np.add.at(w, (rows, cols), total - upper)
    np.add.at(w, (rows, cols - 1), upper)
    return w


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Classic recursion weights: node l gets Pi_{k,l} + Pi_{k,l+1}."""
    pi = product_trapezoid_weights(grid)
    w = pi.copy()
    w[:, :-1] += pi[:, 1:]
    return np.tril(w)


_RULES = {"trapezoid": _trapezoid_weights, "linear": product_linear_weights}


@dataclass(frozen=True)
class VolterraSolution:
    grid: np.ndarray
    phi: np.ndarray
    rhs_kind: RhsKind = RhsKind.CUSTOM


class VolterraOperator:
    """Discretized operator I + W; row k is the quadrature of the equation at u_k.

    Built from a kernel matrix, ``rule="trapezoid"`` averages the nodal values
    of K phi over each interval against the exact 1/sqrt weight (the classic
    recursion) and ``rule="linear"`` integrates their linear interpolant
    exactly.  Built from a boundary, ``rule="exact"`` integrates the full
    kernel exactly with phi linear.  Factor once, solve for many right-hand
    sides.
    """

    def __init__(self, grid: np.ndarray, weights: np.ndarray, rule: str = "custom"):
        grid = np.asarray(grid, dtype=float)
        n = grid.size
        w = np.tril(np.asarray(weights, dtype=float))
        if w.shape != (n, n):
            raise ValueError("weights must be an (n, n) matrix on the grid")
        w[0, :] = 0.0
        a = w + np.eye(n)
        bad = np.flatnonzero(np.abs(np.diag(a)) < 1e-12)
        if bad.size:
            raise SingularDenominator(f"1 + sqrt(Delta) K_kk vanishes at node {bad[0]}")
        self.grid = grid
        self.rule = rule
        self.matrix = a

    @classmethod
    def from_kernel(cls, grid, kernel: np.ndarray, rule: str = "trapezoid") -> "VolterraOperator":
        grid = np.asarray(grid, dtype=float)
        kernel = np.asarray(kernel, dtype=float)
        if kernel.shape != (grid.size, grid.size):
            raise ValueError("kernel must be an (n, n) matrix on the grid")
        if rule not in _RULES:
            raise ValueError(f"unknown quadrature rule {rule!r}")
        return cls(grid, _RULES[rule](grid) * kernel, rule)

    @classmethod
    def from_boundary(cls, b: MovingBoundary, rule: str = "exact") -> "VolterraOperator":
        if rule == "exact":
            return cls(b.nodes, exact_kernel_weights(b), rule)
        return cls.from_kernel(b.nodes, kernel_matrix(b), rule)

    def solve(self, f, rhs_kind: RhsKind = RhsKind.CUSTOM) -> VolterraSolution:
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.grid.size:
            raise ValueError("rhs length does not match the grid")
        phi = solve_triangular(self.matrix, f, lower=True, check_finite=False)
        return VolterraSolution(self.grid, phi, RhsKind(rhs_kind))


def _kernel_on_grid(kernel, grid):
    if callable(kernel):
        u = np.asarray(grid, dtype=float)
        uk, ul = np.meshgrid(u, u, indexing="ij")
        return np.tril(np.asarray(kernel(uk, ul), dtype=float))
    return np.asarray(kernel, dtype=float)


def solve_volterra(
    kernel: np.ndarray | Callable, f, grid, rhs_kind: RhsKind = RhsKind.CUSTOM, rule: str = "trapezoid"
) -> VolterraSolution:
    """Solve the weakly singular Volterra equation by product integration.

    ``kernel`` is the matrix K_{k,l} (only the lower triangle is used) or a
    vectorized callable K(u, u').  The default rule reproduces
    :func:`solve_volterra_recursive` to rounding.
    """
    grid = np.asarray(grid, dtype=float)
    if not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    return VolterraOperator.from_kernel(grid, _kernel_on_grid(kernel, grid), rule).solve(f, rhs_kind)


def solve_volterra_recursive(kernel, f, grid) -> np.ndarray:
    """Node-by-node trapezoid recursion; reference for the matrix solve."""
    u = np.asarray(grid, dtype=float)
    f = np.asarray(f, dtype=float)
    kk = _kernel_on_grid(kernel, u)
    pi = product_trapezoid_weights(u)
    phi = np.empty_like(f)
    phi[0] = f[0]
    for k in range(1, u.size):
        sq = math.sqrt(u[k] - u[k - 1])
        acc = f[k] - sq * kk[k, k - 1] * phi[k - 1]
        l = np.arange(1, k)
        acc -= np.sum(pi[k, l] * (kk[k, l] * phi[l] + kk[k, l - 1] * phi[l - 1]))
        den = 1.0 + sq * kk[k, k]
        if abs(den) < 1e-12:
            raise SingularDenominator(f"1 + sqrt(Delta) K_kk vanishes at node {k}")
        phi[k] = acc / den
    return phi


def boundary_rhs_green(b: MovingBoundary, xi: float) -> np.ndarray:
    """f(u) = H(u, xi - N_u), with the u -> 0 limit f(0) = 0."""
    if not xi < 0:
        raise ValueError("xi must be < 0")
    f = np.zeros_like(b.nodes)
    f[1:] = heat_kernel(b.nodes[1:], xi - b.n[1:])
    return f


# --- exact interval integrals ------------------------------------------------
#
# N is linear between grid nodes, so on every interval the boundary offset seen
# from a fixed time is affine in the lag s: y(s) = C + L s.  The kernel
# k(s, y) = y exp(-y^2 / 2s) / sqrt(2 pi s^3) and H(s, y) are then integrated
# exactly against 1 and s, leaving the density as the only interpolated factor.

_SMALL_DRIFT = 1e-4  # L^2 s below this uses the expansion of exp(-L^2 s / 2)


def _antiderivatives(c, lam, s):
    """Antiderivatives in s of k, s k, H and s H for y = c + lam s (lam != 0)."""
    pos = s > 0
    ss = np.where(pos, s, 1.0)
    sq = np.sqrt(ss)
    lim = np.where(c > 0, -np.inf, np.where(c < 0, np.inf, 0.0))
    a = np.where(pos, -(c + lam * s) / sq, lim)
    b = np.where(pos, (lam * s - c) / sq, lim)
    e = np.where(pos, np.exp(-((c + lam * s) ** 2) / (2.0 * ss)), np.where(c == 0, 1.0, 0.0))
    # e^{-2 c lam} N(b) up to a constant, in the branch that cannot overflow
    with np.errstate(over="ignore"):
        t = np.where(c < 0, -np.exp(-2.0 * c * lam + log_ndtr(-b)), np.exp(-2.0 * c * lam + log_ndtr(b)))
    na = ndtr(a)
    k0 = 2.0 * t
    p = na + t
    q = (t - na) / lam
    r = (q + c * p - 2.0 * np.sqrt(s) * e / SQ2PI) / lam**2
    return k0, q, r


def _driftless(c, s):
    """int_0^s of (c s^-3/2, s^-1/2, s^1/2, s^3/2) e^{-c^2/2s} / sqrt(2 pi)."""
    ac = np.abs(c)
    pos = s > 0
    ss = np.where(pos, s, 1.0)
    zero = ac == 0
    e = np.where(pos, np.exp(-ac * ac / (2.0 * ss)), np.where(zero, 1.0, 0.0))
    nn = np.where(pos, ndtr(-ac / np.sqrt(ss)), np.where(zero, 0.5, 0.0))
    w1 = 2.0 * np.sqrt(s) * e - 2.0 * SQ2PI * ac * nn
    w11 = (2.0 / 3.0) * s**1.5 * e - (ac * ac / 3.0) * w1
    w111 = 0.4 * (s**2.5 * e - 0.5 * ac * ac * w11)
    return 2.0 * np.sign(c) * nn, w1 / SQ2PI, w11 / SQ2PI, w111 / SQ2PI


def _e_over_sqrt(c, lam, s):
    pos = s > 0
    ss = np.where(pos, s, 1.0)
    return np.where(pos, np.exp(-((c + lam * ss) ** 2) / (2.0 * ss)) / np.sqrt(2.0 * np.pi * ss), 0.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_NARROW = 1e-3  # intervals with h < _NARROW * lo use Gauss-Legendre on the smooth integrand


def _narrow_integrals(c, lam, lo, hi):
    """Gauss-Legendre values of int (1, s - lo) k, int (1, s - lo) H and the c-derivatives."""
    half = 0.5 * (hi - lo)
    s = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_X
    w = half[:, None] * _GL_W
    y = c[:, None] + lam[:, None] * s
    h = np.exp(-y * y / (2.0 * s)) / np.sqrt(2.0 * np.pi * s)
    k = y / s * h
    dk = (1.0 - y * y / s) / s * h
    m = s - lo[:, None]
    return tuple(np.sum(w * v, axis=1) for v in (k, m * k, h, m * h, dk, m * dk))


def interval_integrals(c, lam, lo, hi, derivative: bool = False):
    """Integrals over s in [lo, hi] for y = c + lam s.

    Returns (int k, int (s - lo) k, int H, int (s - lo) H), and with
    ``derivative=True`` also d/dc of the first two.  ``c = 0`` exactly means
    y = lam s with no jump at s = 0; pass a tiny positive ``c`` for the limit
    from above.
    """
    c, lam, lo, hi = (np.array(x, dtype=float) for x in np.broadcast_arrays(c, lam, lo, hi))
    k0, q, r = np.zeros_like(c), np.zeros_like(c), np.zeros_like(c)
    narrow = hi - lo < _NARROW * lo
    small = ~narrow & (lam * lam * hi < _SMALL_DRIFT)
    big = ~narrow & ~small
    if np.any(big):
        args = c[big], lam[big]
        k0[big], q[big], r[big] = (
            x1 - x0 for x1, x0 in zip(_antiderivatives(*args, hi[big]), _antiderivatives(*args, lo[big]))
        )
    if np.any(small):
        cs, ls = c[small], lam[small]
        p0, q0, r0, s0 = (x1 - x0 for x1, x0 in zip(_driftless(cs, hi[small]), _driftless(cs, lo[small])))
        f = np.exp(-cs * ls)
        half = 0.5 * ls * ls
        q[small] = f * (q0 - half * r0)
        r[small] = f * (r0 - half * s0)
        k0[small] = f * (p0 - half * cs * q0) + ls * q[small]
    # moments about s = 0, then shifted to s = lo
    k1 = c * q + lam * r
    if derivative:
        dk0 = -2.0 * lam * k0 - 2.0 * (_e_over_sqrt(c, lam, hi) - _e_over_sqrt(c, lam, lo))
        dk1 = q - c * k0 - lam * k1 - lo * dk0
    k1 = k1 - lo * k0
    r = r - lo * q
    if np.any(narrow):
        nk0, nk1, nq, nr, ndk0, ndk1 = _narrow_integrals(c[narrow], lam[narrow], lo[narrow], hi[narrow])
        k0[narrow], k1[narrow], q[narrow], r[narrow] = nk0, nk1, nq, nr
        if derivative:
            dk0[narrow], dk1[narrow] = ndk0, ndk1
    if not derivative:
        return k0, k1, q, r
    return k0, k1, q, r, dk0, dk1


def _linear_split(i0, i1, h):
    """Weights on (right, left) node of int w dens ds, dens linear; i1 is the moment about lo."""
    left = i1 / h
    return i0 - left, left


def _slopes(b: MovingBoundary) -> np.ndarray:
    return np.diff(b.n) / np.diff(b.nodes)


def exact_kernel_weights(b: MovingBoundary, block: int = 256) -> np.ndarray:
    """W with (W phi)_k = int_0^{u_k} Theta Xi / sqrt(2 pi (u_k - u')) phi(u') du', phi linear."""
    u, n = b.nodes, b.n
    size = u.size
    lam = _slopes(b)
    w = np.zeros((size, size))
    for start in range(1, size, block):
        rows = np.arange(start, min(start + block, size))
        kk, ll = np.nonzero(np.arange(1, size)[None, :] <= rows[:, None])
        kk = rows[kk]
        ll = ll + 1
        lo = u[kk] - u[ll]
        hi = u[kk] - u[ll - 1]
        lam_l = lam[ll - 1]
        c = np.where(kk == ll, 0.0, n[kk] - n[ll] - lam_l * lo)
        k0, k1, _, _ = interval_integrals(c, lam_l, lo, hi)
        right, left = _linear_split(k0, k1, hi - lo)
        np.add.at(w, (kk, ll), -right)
        np.add.at(w, (kk, ll - 1), -left)
    return w


def _end_offsets(b: MovingBoundary):
    """Per interval: (c, lam, lo, hi) with N_U - N(U - s) = c + lam s."""
    lam = _slopes(b)
    lo = b.big_upsilon - b.nodes[1:]
    hi = b.big_upsilon - b.nodes[:-1]
    c = b.n_end - b.n[1:] - lam * lo
    c[-1] = 0.0
    return c, lam, lo, hi


def double_layer(b: MovingBoundary, dens, z, derivative: bool = False, block: int = 64):
    """Double-layer potential D(Z) = int k(s, Z - N_U + N_{U-s}) dens ds for Z >= 0.

    ``Z = 0`` is the limit from above.  With ``derivative=True`` returns dD/dZ.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < 0):
        raise ValueError("double layer is evaluated on the side Z >= 0")
    dens = np.asarray(dens, dtype=float)
    c, lam, lo, hi = _end_offsets(b)
    h = hi - lo
    zz = np.maximum(z, 1e-300)
    out = np.empty_like(z)
    for start in range(0, z.size, block):
        zc = zz[start:start + block, None]
        res = interval_integrals(zc - c, -lam, lo, hi, derivative)
        i0, i1 = (res[4], res[5]) if derivative else (res[0], res[1])
        right, left = _linear_split(i0, i1, h)
        out[start:start + block] = right @ dens[1:] + left @ dens[:-1]
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite double-layer value")
    return out


def _heat_layer(b: MovingBoundary, dens) -> float:
    """int_0^U H(U - u', N_U - N_u') dens(u') du' with dens linear."""
    c, lam, lo, hi = _end_offsets(b)
    _, _, q, r = interval_integrals(c, lam, lo, hi)
    right, left = _linear_split(q, r, hi - lo)
    return float(right @ dens[1:] + left @ dens[:-1])


# --- constant-drift closed forms ----------------------------------------------


def constant_drift_phi(u, xi: float, lam: float):
    """Exact density for the boundary xi - lam u."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = heat_kernel(u, xi - lam * u) + lam * math.exp(2 * xi * lam) * ndtr((xi + lam * u) / np.sqrt(u))
    return np.where(u > 0, out, 0.0)[()]


def constant_drift_green(T: float, x, xi: float, lam: float):
    """Image solution H(T, X - lam T) - e^{2 xi lam} H(T, X - lam T - 2 xi)."""
    x = np.asarray(x, dtype=float)
    return heat_kernel(T, x - lam * T) - math.exp(2 * xi * lam) * heat_kernel(T, x - lam * T - 2 * xi)


def constant_drift_survival(T: float, xi: float, lam: float) -> float:
    """Probability that X = lam t + W_t stays above xi up to T."""
    sq = math.sqrt(T)
    return float(ndtr((lam * T - xi) / sq) - math.exp(2 * xi * lam) * ndtr((xi + lam * T) / sq))


# --- per-path pricer ----------------------------------------------------------


CURVE_LAYER = 16  # start-layer nodes per decade used by the forward curves
GREEN_LAYER = 16  # end-layer nodes per decade used by the Green's function


class HeatPotentialPricer:
    """All heat-potential quantities for one boundary and barrier.

    ``b`` is the boundary on the path nodes.  The forward and the reversed
    boundary are each refined ``refine`` times with nodes graded by ``grading``
    toward the start of every path step, in their own time direction.
    ``start_layer`` and ``end_layer`` add that many geometric nodes per
    decade toward u = 0 and u = Upsilon on the forward boundary.
    Prices are undiscounted and per unit of spot; the wrappers below apply
    e^{-rT} and S0.  Volterra solves are cached.
    """

    def __init__(
        self,
        b: MovingBoundary,
        xi: float,
        refine: int = 4,
        grading: float = 2.0,
        rule: str = "exact",
        start_layer: int = 0,
        end_layer: int = 0,
    ):
        if not xi < 0:
            raise ValueError("xi must be < 0")
        self.coarse = b.graded_short_steps()
        self.refine = int(refine)
        self.grading = float(grading)
        self.start_layer = int(start_layer)
        self.end_layer = int(end_layer)
        self.b = self.coarse.refined(self.refine, self.grading)
        if self.start_layer:
            self.b = self.b.with_layer(self.start_layer, at="start")
        if self.end_layer:
            self.b = self.b.with_layer(self.end_layer, at="end")
        self.rule = rule
        self.xi = float(xi)
        self._fwd_op: VolterraOperator | None = None
        self._bwd_op: VolterraOperator | None = None
        self._rb: MovingBoundary | None = None
        self._phi: VolterraSolution | None = None
        self._psi_nt: VolterraSolution | None = None

    @property
    def forward_operator(self) -> VolterraOperator:
        if self._fwd_op is None:
            self._fwd_op = VolterraOperator.from_boundary(self.b, self.rule)
        return self._fwd_op

    @property
    def reversed_boundary(self) -> MovingBoundary:
        if self._rb is None:
            self._rb = self.coarse.reversed().refined(self.refine, self.grading)
        return self._rb

    @property
    def backward_operator(self) -> VolterraOperator:
        if self._bwd_op is None:
            self._bwd_op = VolterraOperator.from_boundary(self.reversed_boundary, self.rule)
        return self._bwd_op

    @property
    def phi(self) -> VolterraSolution:
        if self._phi is None:
            self._phi = self.forward_operator.solve(boundary_rhs_green(self.b, self.xi), RhsKind.GREEN_BOUNDARY)
        return self._phi

    def green(self, x) -> np.ndarray:
        """Killed density of X_T at x (zero below the barrier).

        Near the barrier the double layer draws on the last moments before
        Upsilon, so without an end layer the evaluation uses a sibling
        pricer that has one.
        """
        if not self.end_layer:
            return self._sibling(end_layer=GREEN_LAYER).green(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        above = x >= self.xi
        if np.any(above):
            xa = x[above]
            out[above] = heat_kernel(self.b.big_upsilon, xa - self.b.n_end) - double_layer(
                self.b, self.phi.phi, xa - self.xi
            )
        return out

    def survival(self, mode: Mode = Mode.BACKWARD) -> float:
        mode = Mode(mode)
        ups = self.b.big_upsilon
        if mode is Mode.FORWARD:
            free = float(ndtr((self.b.n_end - self.xi) / math.sqrt(ups)))
            return free - _heat_layer(self.b, self.phi.phi)
        return float(self.survival_curve(0.0, mode)[0])

    def survival_curve(self, x, mode: Mode = Mode.FORWARD) -> np.ndarray:
        """No-touch value as a function of the initial log-spot x (zero at or below xi).

        Neither operator depends on the barrier level.  Backward mode needs a
        single solve for all x but converges slowly when x is close to xi;
        forward mode solves once per x with the barrier shifted to xi - x.
        """
        mode = Mode(mode)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        live = x > self.xi
        if not np.any(live):
            return out
        if mode is Mode.FORWARD:
            base = self._layered()
            out[live] = [base._shifted(xv).survival(mode) for xv in x[live]]
            return out
        if self._psi_nt is None:
            ones = np.ones_like(self.reversed_boundary.nodes)
            self._psi_nt = self.backward_operator.solve(ones, RhsKind.NO_TOUCH_BACKWARD)
        out[live] = 1.0 - double_layer(self.reversed_boundary, self._psi_nt.phi, x[live] - self.xi)
        return out

    def call_curve(self, x, k: float, mode: Mode = Mode.FORWARD) -> np.ndarray:
        """Down-and-out call in units of S_0 = 1 as a function of the initial log-spot x."""
        mode = Mode(mode)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        base = self._layered() if mode is Mode.FORWARD else self
        for i, xv in enumerate(x):
            if xv > self.xi:
                out[i] = math.exp(xv) * base._shifted(xv).call(k - xv, mode)[0]
        return out

    def _layered(self) -> "HeatPotentialPricer":
        """This pricer with a start layer, resolving barriers shifted close to the spot."""
        base = self if self.start_layer else self._sibling(start_layer=CURVE_LAYER)
        base.forward_operator
        return base

    def _sibling(self, **layers) -> "HeatPotentialPricer":
        kw = {"start_layer": self.start_layer, "end_layer": self.end_layer, **layers}
        return HeatPotentialPricer(self.coarse, self.xi, self.refine, self.grading, self.rule, **kw)

    def _shifted(self, x: float) -> "HeatPotentialPricer":
        """Pricer for the initial log-spot x, sharing the barrier-independent operators."""
        if x == 0.0:
            return self
        q = HeatPotentialPricer(
            self.coarse, self.xi - x, self.refine, self.grading, self.rule, self.start_layer, self.end_layer
        )
        q._fwd_op, q._rb, q._bwd_op = self._fwd_op, self._rb, self._bwd_op
        return q

    def call(self, k, mode: Mode = Mode.FORWARD, literal: bool = False) -> np.ndarray:
        """Undiscounted down-and-out call per unit spot.

        Strikes below the barrier reduce to the strike-at-barrier call plus
        (e^xi - e^k) no-touches.
        """
        mode = Mode(mode)
        k = np.atleast_1d(np.asarray(k, dtype=float))
        low = k < self.xi
        if np.any(low):
            kk = np.where(low, self.xi, k)
            out = self._call(np.append(kk, self.xi), mode, literal)
            below = out[-1] + (math.exp(self.xi) - np.exp(k)) * self.survival(mode)
            return np.where(low, below, out[:-1])
        return self._call(k, mode, literal)

    def _call(self, k, mode: Mode, literal: bool) -> np.ndarray:
        ups = self.b.big_upsilon
        sq = math.sqrt(ups)
        n_end = self.b.n_end
        free = math.exp(n_end + ups / 2.0) * ndtr((n_end - k + ups) / sq) - np.exp(k) * ndtr((n_end - k) / sq)
        if mode is Mode.FORWARD:
            if literal:
                raise ValueError("literal form applies to the backward mode only")
            s = ups - self.b.nodes
            c = n_end + self.xi - self.b.n
            with np.errstate(divide="ignore", invalid="ignore"):
                arg = np.where(s > 0, (c[None, :] - k[:, None] + s) / np.sqrt(s), 0.0)
            vals = np.exp(c + s / 2.0) * ndtr(arg)
            # at s = 0, c = xi <= k: the indicator limit is 0 (1/2 when k = xi)
            vals[:, -1] = np.where(np.isclose(k, self.xi, rtol=0, atol=1e-14), 0.5 * math.exp(self.xi), 0.0)
            dens = vals * self.phi.phi
            integral = np.sum(0.5 * np.diff(self.b.nodes) * (dens[:, 1:] + dens[:, :-1]), axis=1)
            return free - integral
        rb = self.reversed_boundary
        w, o = rb.nodes, rb.n
        o0 = o[0]
        out = np.empty_like(k)
        for j, kj in enumerate(k):
            f = np.zeros_like(w)
            tau = (np.full_like(w[1:], ups) if literal else w[1:])
            c = self.xi - o[1:] + o0
            st = np.sqrt(tau)
            f[1:] = np.exp(c + tau / 2.0) * ndtr((c - kj + tau) / st) - math.exp(kj) * ndtr((c - kj) / st)
            psi = self.backward_operator.solve(f, RhsKind.CALL_BACKWARD)
            out[j] = free[j] - double_layer(rb, psi.phi, -self.xi)[0]
        return out

    def put(self, k, mode: Mode = Mode.FORWARD) -> np.ndarray:
        """Undiscounted down-and-out put per unit spot via call/no-touch parity."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        out = np.zeros_like(k)
        live = k >= self.xi
        if np.any(live):
            kl = k[live]
            calls = self._call(np.append(kl, self.xi), mode, False)
            nt = self.survival(mode)
            out[live] = calls[:-1] - calls[-1] - (math.exp(self.xi) - np.exp(kl)) * nt
        return out


def green_function(b: MovingBoundary, xi: float, x, refine: int = 4, grading: float = 2.0) -> np.ndarray:
    """Killed density at time Upsilon on ``x`` (undiscounted)."""
    return HeatPotentialPricer(b, xi, refine, grading).green(x)


def no_touch_price(
    b: MovingBoundary, xi: float, r: float, T: float, mode: Mode = Mode.BACKWARD, refine: int = 4, grading: float = 2.0
) -> float:
    return math.exp(-r * T) * HeatPotentialPricer(b, xi, refine, grading).survival(mode)


def barrier_call_price(
    b: MovingBoundary,
    xi: float,
    k,
    r: float,
    T: float,
    s0: float = 1.0,
    mode: Mode = Mode.FORWARD,
    literal: bool = False,
    refine: int = 4,
    grading: float = 2.0,
):
    out = math.exp(-r * T) * s0 * HeatPotentialPricer(b, xi, refine, grading).call(k, mode, literal)
    return out if np.ndim(k) else float(out[0])
