import math

import numpy as np
import pytest

from hybrid_barrier.domain import BarrierContract, HestonParams, PayoffKind
from hybrid_barrier.mcs2d import Mcs2dConfig, mc2d_barrier_price, mc2d_barrier_prices, mc2d_killed_density, survival_weights
from hybrid_barrier.vanilla import bs_down_out_call, bs_no_touch, lewis_lipton_call


def test_survival_weights():
    x = np.array([[0.0, 0.1], [0.0, -0.6]])
    w = survival_weights(x, np.full((2, 1), 0.04), -0.5, 0.02, bridge=True)
    assert 0.0 < w[0] <= 1.0 and w[1] == 0.0
    w_plain = survival_weights(x, np.full((2, 1), 0.04), -0.5, 0.02, bridge=False)
    assert w_plain.tolist() == [1.0, 0.0]


def test_deterministic_variance_matches_black_scholes():
    # rho = 0: the bridge variance (1 - rho^2) v is then the whole spot variance
    p = HestonParams(r=0.03, kappa=1e-6, theta=0.09, epsilon=1e-6, rho=0.0, v0=0.09)
    res = mc2d_barrier_price(p, BarrierContract(1.0, 0.8), Mcs2dConfig(50_000, 52, True, 1))
    assert abs(res.price - bs_no_touch(1.0, 0.8, 1.0, 0.03, 0.3)) < 3 * res.std_error + 1e-3


def test_bridge_lowers_no_touch(heston):
    c = BarrierContract(1.0, math.exp(-0.5))
    a = mc2d_barrier_price(heston, c, Mcs2dConfig(20_000, 52, True, 3)).price
    b = mc2d_barrier_price(heston, c, Mcs2dConfig(20_000, 52, False, 3)).price
    assert a < b


def test_strike_vector_and_determinism(heston):
    cfg = Mcs2dConfig(5000, 26, True, 5, chunk=1500)
    a = mc2d_barrier_prices(heston, 1.0, 0.9, PayoffKind.DOWN_OUT_CALL, [0.8, 1.0, 1.2], cfg)
    b = mc2d_barrier_prices(heston, 1.0, 0.9, PayoffKind.DOWN_OUT_CALL, [0.8, 1.0, 1.2], cfg)
    assert [r.price for r in a] == [r.price for r in b]
    assert a[0].price > a[1].price > a[2].price > 0
    assert a[1].extra["strike"] == 1.0


def test_killed_density(heston):
    edges = np.linspace(-0.5, 1.5, 21)
    centres, dens, se = mc2d_killed_density(heston, -0.5, 1.0, edges, Mcs2dConfig(20_000, 52, True, 0))
    assert centres.shape == dens.shape == se.shape == (20,)
    assert np.all(dens >= 0)
    assert np.sum(dens) * 0.1 < math.exp(-0.03)


def test_config_validation():
    with pytest.raises(ValueError):
        Mcs2dConfig(n_paths=1)
    assert Mcs2dConfig(k_steps=52).steps_for(0.5) == 26


def test_gbm_limit_down_and_out_call():
    p = HestonParams(r=0.03, kappa=1e-6, theta=0.09, epsilon=1e-6, rho=0.0, v0=0.09)
    res = mc2d_barrier_price(p, BarrierContract(1.0, 0.9, PayoffKind.DOWN_OUT_CALL, 1.0), Mcs2dConfig(50_000, 52, True, 2))
    assert abs(res.price - bs_down_out_call(1.0, 1.0, 0.9, 1.0, 0.03, 0.3)) < 3 * res.std_error


def test_remote_barrier_is_the_vanilla(heston):
    res = mc2d_barrier_price(
        heston, BarrierContract(1.0, math.exp(-50.0), PayoffKind.DOWN_OUT_CALL, 1.0), Mcs2dConfig(20_000, 52, True, 4)
    )
    assert abs(res.price - lewis_lipton_call(heston, 1.0, 1.0)) < 3 * res.std_error


def test_monitoring_gap_shrinks_like_inverse_root_steps(heston):
    c = BarrierContract(1.0, math.exp(-0.5))
    gaps = []
    for k in (52, 208, 832):
        on = mc2d_barrier_price(heston, c, Mcs2dConfig(20_000, k, True, 6)).price
        off = mc2d_barrier_price(heston, c, Mcs2dConfig(20_000, k, False, 6)).price
        gaps.append(off - on)
    assert all(g > 0 for g in gaps)
    # each fourfold refinement should roughly halve the gap
    for a, b in zip(gaps, gaps[1:]):
        assert 1.4 < a / b < 2.8


def test_standard_error_scaling(heston):
    c = BarrierContract(1.0, math.exp(-0.5))
    a = mc2d_barrier_price(heston, c, Mcs2dConfig(10_000, 52, True, 1)).std_error
    b = mc2d_barrier_price(heston, c, Mcs2dConfig(40_000, 52, True, 2)).std_error
    assert a / b == pytest.approx(2.0, rel=0.2)
