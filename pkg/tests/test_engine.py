import json
import math

import numpy as np
import pytest

from hybrid_barrier.domain import BarrierContract, Method, PayoffKind, VanillaContract
from hybrid_barrier.engine import (
    ConfigError,
    ExperimentConfig,
    InnerSettings,
    InnerSolverError,
    averaged_green,
    bench,
    fmt,
    inner_pricer,
    load_config,
    price_barrier_hybrid,
    price_barrier_hybrid_strikes,
    run_experiment,
)
from hybrid_barrier.potentials import Mode


def test_inner_settings_validation():
    with pytest.raises(ValueError):
        InnerSettings(refine=0)


def test_inner_pricer_dispatch(path0):
    assert inner_pricer(path0, -0.5, Method.HYBRID_MHP).survival() == pytest.approx(
        inner_pricer(path0, -0.5, Method.HYBRID_FDM, InnerSettings(fdm_space=400, fdm_refine=4)).survival(), abs=2e-3
    )
    with pytest.raises(ValueError):
        inner_pricer(path0, -0.5, Method.MCS2D)


def test_hybrid_prices_are_seed_matched(heston):
    c = BarrierContract(1.0, math.exp(-0.5))
    a = price_barrier_hybrid(heston, c, Method.HYBRID_MHP, n_paths=40, seed=3)
    b = price_barrier_hybrid(heston, c, Method.HYBRID_FDM, n_paths=40, seed=3)
    assert abs(a.price - b.price) < 2e-3
    assert 0 < a.price < math.exp(-0.03)
    assert a.extra["inner_time_per_path"] > 0


def test_chunking_and_workers_do_not_change_prices(heston):
    args = (heston, 1.0, 0.9, PayoffKind.DOWN_OUT_CALL, [0.9, 1.1], Method.HYBRID_FDM)
    a = price_barrier_hybrid_strikes(*args, n_paths=30, seed=1, chunk=30)
    b = price_barrier_hybrid_strikes(*args, n_paths=30, seed=1, chunk=7)
    c = price_barrier_hybrid_strikes(*args, n_paths=30, seed=1, chunk=10, workers=2)
    assert [r.price for r in a] == [r.price for r in b] == [r.price for r in c]


def test_barrier_not_exceeding_vanilla(heston):
    from hybrid_barrier.vanilla import lewis_lipton_call

    res = price_barrier_hybrid_strikes(
        heston, 1.0, 0.9, PayoffKind.DOWN_OUT_CALL, [0.8, 1.0, 1.2], Method.HYBRID_MHP, n_paths=20
    )
    for r in res:
        assert r.price <= lewis_lipton_call(heston, r.extra["strike"], 1.0) + 3 * r.std_error


def test_averaged_green_cross_method(heston):
    x = np.linspace(-0.5, 1.5, 41)
    a = averaged_green(heston, -0.5, 200, 52, 0, x, Method.HYBRID_MHP)
    b = averaged_green(heston, -0.5, 200, 52, 0, x, Method.HYBRID_FDM)
    assert np.max(np.abs(a.density - b.density)) < 2e-3
    assert a.density.min() > -1e-8
    assert np.trapezoid(a.density, x) < math.exp(-0.03)


def test_inner_solver_error_carries_index():
    err = InnerSolverError(7, ZeroDivisionError("x"))
    assert err.path_index == 7 and isinstance(err.cause, ZeroDivisionError)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=())
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=(Method.WILLARD_MC,))
    with pytest.raises(ConfigError):
        ExperimentConfig(contract=VanillaContract(1.0, 1.0), methods=(Method.WILLARD_MC,),
                         n_paths={Method.WILLARD_MC: 50})
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=(Method.HYBRID_MHP,), n_paths={Method.MCS2D: 100})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seeds": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": {"kappa": 1.0, "foo": 2}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"k_steps": 5.5})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": {"rho": 1.5}})


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(
        contract=BarrierContract(1.0, 0.9, PayoffKind.DOWN_OUT_CALL, 1.0),
        methods=(Method.HYBRID_MHP, Method.MCS2D),
        n_paths={Method.HYBRID_MHP: 10, Method.MCS2D: 100},
        strikes=(0.9, 1.1),
    )
    d = cfg.to_dict()
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps(d))
    back = load_config(f)
    assert back.hash() == cfg.hash()
    assert back.inner_settings.mode is Mode.FORWARD
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_fmt_is_stable():
    assert fmt(1 / 3) == fmt(0.3333333333333333)
    assert fmt(3) == "3"


def test_run_experiment_outputs(heston, tmp_path):
    cfg = ExperimentConfig(
        contract=BarrierContract(1.0, 0.9, PayoffKind.DOWN_OUT_CALL, 1.0),
        methods=(Method.HYBRID_MHP, Method.HYBRID_FDM, Method.MCS2D),
        n_paths={Method.HYBRID_MHP: 20, Method.HYBRID_FDM: 20, Method.MCS2D: 2000},
        strikes=(0.9, 1.1),
        out_dir=str(tmp_path),
    )
    rep = run_experiment(cfg)
    names = sorted(p.name for p in rep.files)
    assert names == ["comparison.csv", "manifest.json", "results.csv"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_hash"] == cfg.hash()
    assert manifest["seed"] == 0
    assert len(rep.differences()) == 3 * 2
    assert set(rep.speedups())


def test_vanilla_experiment_has_implied_vols(tmp_path):
    cfg = ExperimentConfig(
        contract=VanillaContract(1.0, 1.0),
        methods=(Method.LEWIS_LIPTON, Method.WILLARD_MC),
        n_paths={Method.WILLARD_MC: 2000},
        strikes=(0.9, 1.0),
        out_dir=str(tmp_path),
    )
    rep = run_experiment(cfg)
    iv, se = rep.implied_vols[Method.WILLARD_MC][1]
    ll_iv, ll_se = rep.implied_vols[Method.LEWIS_LIPTON][1]
    assert ll_se == 0.0
    assert abs(iv - ll_iv) < 3 * se + 1e-6
    assert "implied_vol" in (tmp_path / "results.csv").read_text().splitlines()[0]


def test_bench_small(tmp_path):
    rep = bench(n_paths=2, repeats=1, out_dir=tmp_path)
    assert rep.mhp_refine is not None and rep.fdm_grid is not None
    assert rep.ratio > 0
    assert (tmp_path / "bench.csv").exists() and (tmp_path / "bench_scaling.csv").exists()
    assert set(rep.summary()) >= {"fdm_over_mhp", "scaling_exponent"}


def test_discounting_applied_once_in_the_remote_barrier_limit(heston):
    # with the barrier far away a hybrid call is the conditional Black-Scholes call on the same path
    from hybrid_barrier.paths import conditional_coeffs, simulate_variance_paths, terminal_functionals
    from hybrid_barrier.engine import single_path
    from hybrid_barrier.willard import conditional_call

    vp = simulate_variance_paths(heston, 1.0, 52, 5, seed=9)
    i_t, j_t = terminal_functionals(vp, heston)
    c = conditional_coeffs(vp, heston)
    for j in range(5):
        pr = inner_pricer(single_path(c, j), -50.0, Method.HYBRID_MHP)
        assert math.exp(-heston.r) * pr.call([0.0])[0] == pytest.approx(
            conditional_call(i_t[j], j_t[j], heston, 1.0, 1.0), abs=1e-12
        )


def test_averaged_green_cross_method_full_scale(heston):
    x = np.linspace(-0.5, 1.5, 41)
    a = averaged_green(heston, -0.5, 10_000, 52, 0, x, Method.HYBRID_MHP)
    b = averaged_green(heston, -0.5, 10_000, 52, 0, x, Method.HYBRID_FDM)
    assert np.max(np.abs(a.density - b.density)) < 2e-3
