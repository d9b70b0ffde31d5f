import math

import numpy as np
import pytest

from hybrid_barrier.fdm import (
    FdmPathPricer,
    PathIncrements,
    SpatialGrid,
    call_payoff,
    cn_backward_price,
    cn_forward_green,
    no_touch_payoff,
    price_from_green,
    step_coefficients,
)
from hybrid_barrier.potentials import constant_drift_green, constant_drift_survival

XI = -0.5


def test_grid_hits_origin():
    g = SpatialGrid.build(XI, 3.0, 100)
    assert g.nodes[g.origin] == pytest.approx(0.0, abs=1e-14)
    assert g.nodes[0] == XI
    with pytest.raises(ValueError):
        SpatialGrid.build(0.1, 3.0, 100)


def test_step_coefficients():
    st = step_coefficients([0.1], [0.2], 0.5)[0]
    assert st.alpha == pytest.approx(0.05) and st.beta == pytest.approx(0.2)


def test_constant_drift_green_and_survival():
    lam = 0.3
    inc = PathIncrements.constant(lam, 1.0, 400)
    fd = FdmPathPricer(inc, XI, n_space=800)
    x = np.linspace(XI, 2.0, 50)
    assert np.max(np.abs(fd.green(x) - np.maximum(constant_drift_green(1.0, x, XI, lam), 0.0))) < 1e-3
    exact = constant_drift_survival(1.0, XI, lam)
    assert fd.survival("Backward") == pytest.approx(exact, abs=1e-3)
    assert fd.survival("Forward") == pytest.approx(exact, abs=1e-3)


def test_forward_backward_duality(path0):
    fd = FdmPathPricer(PathIncrements.from_coeffs(path0, 4), XI, n_space=400)
    ks = np.log([0.8, 1.0, 1.2])
    assert np.allclose(fd.call(ks, "Forward"), fd.call(ks, "Backward"), atol=1e-3)
    assert fd.put(ks, "Forward") == pytest.approx(fd.put(ks, "Backward"), abs=1e-3)


def test_green_nonnegative_and_mass_below_one(path0):
    fd = FdmPathPricer(PathIncrements.from_coeffs(path0, 2), XI, n_space=200)
    g = fd.green_values
    assert abs(g[0]) < 1e-15
    assert g.min() > -1e-8
    assert 0.0 < fd.grid.dx * g.sum() <= 1.0


def test_rannacher_start_is_close(path0):
    inc = PathIncrements.from_coeffs(path0, 2)
    a = FdmPathPricer(inc, XI, 400).call([0.0])[0]
    b = FdmPathPricer(inc, XI, 400, rannacher=True).call([0.0])[0]
    assert a == pytest.approx(b, abs=1e-3)


def test_payoffs_and_discounting():
    g = SpatialGrid.build(XI, 3.0, 100)
    assert no_touch_payoff(g)[0] == 0.0
    pay = call_payoff(g, 0.0)
    assert pay[0] == 0.0 and np.all(pay >= 0)
    dens = np.zeros(g.m + 1)
    dens[g.origin] = 1.0 / g.dx
    assert price_from_green(dens, no_touch_payoff(g), g, 1.0, 0.03) == pytest.approx(math.exp(-0.03))
    inc = PathIncrements.constant(0.0, 1e-12, 2)
    vals = cn_backward_price(inc, no_touch_payoff(g), g, 1.0, 0.0)
    assert vals[g.origin] == pytest.approx(1.0, abs=1e-9)
    assert cn_forward_green(inc, g)[g.origin] * g.dx == pytest.approx(1.0, abs=1e-6)


def test_increments_rules(path0):
    a = PathIncrements.from_coeffs(path0, 2)
    b = PathIncrements.from_coeffs(path0, 2, midpoint="average")
    assert a.big_upsilon == pytest.approx(b.big_upsilon, rel=1e-12)
    with pytest.raises(ValueError):
        PathIncrements.from_coeffs(path0, 2, midpoint="nope")
