import math

import numpy as np
import pytest
from scipy.special import roots_legendre

from hybrid_barrier.minpdf import (
    DomainError,
    DriftPath,
    MinimumDensity,
    joint_pdf_bm,
    joint_pdf_drifted,
    joint_pdf_time_dependent,
    pdf_grid,
)
from hybrid_barrier.potentials import constant_drift_green


def test_bm_example():
    assert joint_pdf_bm(1.0, -0.5, 0.0) == pytest.approx(2 * math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-12)


def test_drifted_reduces_to_bm():
    assert joint_pdf_drifted(1.0, -0.3, 0.2, 0.0) == pytest.approx(joint_pdf_bm(1.0, -0.3, 0.2), rel=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        joint_pdf_bm(1.0, 0.1, 0.2)
    with pytest.raises(DomainError):
        joint_pdf_bm(1.0, -0.5, -0.6)
    with pytest.raises(DomainError):
        DriftPath(np.array([0.0, 1.0]), np.array([0.1, 0.2]))


@pytest.mark.parametrize("lam", [-0.5, 0.0, 0.5])
def test_constant_drift_matches_closed_form(lam):
    dp = DriftPath.constant(lam, 1.0, 50)
    a, b = -0.4, np.array([-0.3, 0.0, 0.4, 1.0])
    got = joint_pdf_time_dependent(dp, a, b)
    assert np.max(np.abs(got - joint_pdf_drifted(1.0, a, b, lam))) < 1e-4


def test_killed_green_matches_image_solution():
    lam = 0.4
    md = MinimumDensity(DriftPath.constant(lam, 1.0, 50))
    b = np.linspace(-0.4, 1.5, 20)
    assert np.max(np.abs(md.green(-0.4, b) - constant_drift_green(1.0, b, -0.4, lam))) < 1e-4


def test_marginal_of_minimum_recovers_free_density():
    # int_{a < min(b, 0)} pi(a, b) da = H(Upsilon, b - N_Upsilon) for constant drift
    lam = 0.3
    dp = DriftPath.constant(lam, 1.0, 50)
    b = 0.2
    lo, hi = b - 8.0, min(b, 0.0)
    x, w = roots_legendre(120)
    a = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    vals = joint_pdf_time_dependent(dp, a, np.full_like(a, b))
    marginal = 0.5 * (hi - lo) * np.dot(w, vals)
    assert marginal == pytest.approx(constant_drift_green(1.0, b, -50.0, lam), abs=1e-4)


def test_piecewise_drift_nonnegative_grid():
    u = np.linspace(0.0, 1.0, 11)
    n = np.cumsum(np.r_[0.0, np.where(u[1:] < 0.5, 0.8, -0.6) * 0.1])
    dp = DriftPath(u, n)
    grid = pdf_grid(dp, [-1.0, -0.5, -0.1], np.linspace(-1.2, 1.5, 28))
    assert grid.min() > -1e-8
    assert np.all(grid[0, :2] == 0.0)
