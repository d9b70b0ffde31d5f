"""Acceptance criteria 1-9, each at its stated tolerance and budget."""

import filecmp
import math
import time

import numpy as np
import pytest
from scipy.special import roots_legendre

from hybrid_barrier.domain import BarrierContract, Method, PayoffKind, VanillaContract
from hybrid_barrier.engine import ExperimentConfig, InnerSettings, averaged_green, bench, inner_pricer, run_experiment, single_path
from hybrid_barrier.minpdf import DriftPath, joint_pdf_drifted, joint_pdf_time_dependent, pdf_grid
from hybrid_barrier.paths import conditional_coeffs, simulate_variance_paths, terminal_functionals
from hybrid_barrier.potentials import (
    HeatPotentialPricer,
    Mode,
    MovingBoundary,
    VolterraOperator,
    boundary_rhs_green,
    constant_drift_phi,
    heat_kernel,
)
from hybrid_barrier.repro import FINE
from hybrid_barrier.vanilla import bs_call, implied_vol
from hybrid_barrier.willard import conditional_call

XI = -0.5
X_GRID = np.linspace(XI, 1.5, 81)


@pytest.fixture(scope="module")
def fine_pairs(paths20):
    """(MHP, FDM) per-path pricers at the resolution used for the per-path criteria."""
    return [
        (inner_pricer(c, XI, Method.HYBRID_MHP, FINE), inner_pricer(c, XI, Method.HYBRID_FDM, FINE)) for c in paths20
    ]


def test_criterion_1_volterra_oracle(criterion):
    start = time.perf_counter()
    b = MovingBoundary.constant_drift(0.5, 1.0, 1000)
    phi = VolterraOperator.from_boundary(b).solve(boundary_rhs_green(b, XI)).phi
    err = float(np.max(np.abs(phi - constant_drift_phi(b.nodes, XI, 0.5))))
    secs = time.perf_counter() - start
    assert criterion(1, err < 1e-4 and secs < 1.0, f"max error {err:.2e} (< 1e-4), {secs:.2f} s (< 1 s)")


def test_criterion_2_per_path_green(criterion, paths20):
    start = time.perf_counter()
    diff = 0.0
    for c in paths20:
        mhp = inner_pricer(c, XI, Method.HYBRID_MHP, FINE)
        fdm = inner_pricer(c, XI, Method.HYBRID_FDM, FINE)
        diff = max(diff, float(np.max(np.abs(mhp.green(X_GRID) - fdm.green(X_GRID)))))
    secs = time.perf_counter() - start
    assert criterion(2, diff < 1e-3 and secs < 30.0, f"max |G_MHP - G_FDM| {diff:.2e} (< 1e-3), {secs:.1f} s (< 30 s)")


def test_criterion_3_per_path_no_touch(criterion, fine_pairs):
    diff = max(abs(m.survival(Mode.BACKWARD) - f.survival("Backward")) for m, f in fine_pairs)
    assert criterion(3, diff < 1e-3, f"max per-path no-touch diff {diff:.2e} (< 1e-3)")


def test_criterion_4_per_path_call(criterion, fine_pairs):
    diff = max(abs(m.call([0.0], Mode.FORWARD)[0] - f.call([0.0], "Backward")[0]) for m, f in fine_pairs)
    assert criterion(4, diff < 1e-4, f"max per-path call (K = 1) diff {diff:.2e} (< 1e-4)")


def test_criterion_5_vanilla_cross_check(criterion, heston, tmp_path):
    start = time.perf_counter()
    strikes = (0.6, 0.8, 1.0, 1.25, 1.5)
    cfg = ExperimentConfig(
        heston, VanillaContract(1.0, 1.0), (Method.LEWIS_LIPTON, Method.WILLARD_MC),
        {Method.WILLARD_MC: 100_000}, strikes, out_dir=str(tmp_path),
    )
    rep = run_experiment(cfg, write=False)
    secs = time.perf_counter() - start
    worst = 0.0
    for (ll, _), (wm, se) in zip(rep.implied_vols[Method.LEWIS_LIPTON], rep.implied_vols[Method.WILLARD_MC]):
        worst = max(worst, abs(ll - wm) / se)
    ok = worst < 3.0 and secs < 120.0
    assert criterion(5, ok, f"max |IV_LL - IV_W| / se {worst:.2f} (< 3), {secs:.1f} s (< 120 s)")


def test_criterion_6_hybrid_vs_brute_force(criterion, heston, tmp_path):
    start = time.perf_counter()
    methods = (Method.HYBRID_MHP, Method.MCS2D)
    n = {Method.HYBRID_MHP: 10_000, Method.MCS2D: 100_000}
    strikes = tuple(np.round(np.arange(0.8, 1.3001, 0.05), 2))
    worst = 0.0
    for contract, ks in (
        (BarrierContract(1.0, math.exp(XI), PayoffKind.NO_TOUCH), ()),
        (BarrierContract(1.0, 0.9, PayoffKind.DOWN_OUT_CALL, 1.0), strikes),
    ):
        cfg = ExperimentConfig(heston, contract, methods, dict(n), ks, bridge=True, out_dir=str(tmp_path))
        for d in run_experiment(cfg, write=False).differences():
            worst = max(worst, abs(d["diff"]) / d["combined_se"])
    secs = time.perf_counter() - start
    ok = worst < 3.0 and secs < 600.0
    assert criterion(6, ok, f"max |MHP - MCS2D| / combined se {worst:.2f} (< 3), {secs:.0f} s (< 600 s)")


def test_criterion_7_speed(criterion, heston, tmp_path):
    rep = bench(heston, XI, n_paths=20, seed=0, tol=1e-3, repeats=3, out_dir=tmp_path)
    ok = rep.mhp_refine is not None and rep.fdm_grid is not None and rep.mhp_time <= 0.1 * rep.fdm_time
    detail = (
        f"MHP refine={rep.mhp_refine} {1e3 * rep.mhp_time:.2f} ms/path, FDM grid={rep.fdm_grid} "
        f"{1e3 * rep.fdm_time:.2f} ms/path, FDM/MHP {rep.ratio:.2f} (>= 10)"
    )
    assert criterion(7, ok, detail)


def test_bench_scaling_exponent(heston):
    rep = bench(heston, XI, n_paths=2, repeats=3)
    assert rep.mhp_time > 0 and rep.fdm_time > 0
    assert 1.7 <= rep.scaling_exponent <= 2.3


def test_criterion_8_minimum_density(criterion, paths20):
    lam = 0.5
    dp = DriftPath.constant(lam, 1.0, 50)
    a = np.array([-1.0, -0.5, -0.25, -0.1])
    b = np.linspace(-0.05, 1.5, 32)
    aa, bb = np.meshgrid(a, b, indexing="ij")
    closed = float(np.max(np.abs(joint_pdf_time_dependent(dp, aa, bb) - joint_pdf_drifted(1.0, aa, bb, lam))))

    # integrating pi over the minimum recovers the free density H(U, b - N_U); checked on a rough path too
    x, w = roots_legendre(120)
    marg = 0.0
    rough = DriftPath(paths20[0].upsilon, paths20[0].m)
    for path in (dp, rough):
        ups, n_end = path.big_upsilon, float(path.n[-1])
        for bv in (-0.3, 0.0, 0.2, 0.5):
            lo, hi = bv - 8.0 * math.sqrt(ups), min(bv, 0.0)
            av = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            got = 0.5 * (hi - lo) * np.dot(w, joint_pdf_time_dependent(path, av, np.full_like(av, bv)))
            marg = max(marg, abs(got - heat_kernel(ups, bv - n_end)))

    grid = np.linspace(-1.2, 1.5, 55)
    low = min(float(pdf_grid(p, [-1.0, -0.5, -0.25, -0.1, -0.02], grid).min()) for p in (dp, rough))
    ok = closed < 1e-4 and marg < 1e-4 and low >= 0.0
    assert criterion(8, ok, f"closed form {closed:.2e} (< 1e-4), marginal {marg:.2e} (< 1e-4), min pdf {low:.1e} (>= 0)")


def test_criterion_9_properties(criterion, heston, paths20, tmp_path):
    vp = simulate_variance_paths(heston, 1.0, 52, 20, seed=2024)
    i_t, j_t = terminal_functionals(vp, heston)
    log_k = np.log([0.8, 1.0, 1.2])
    zero = dual = order = 0.0
    surv_ok = True
    df = math.exp(-heston.r)
    for j, c in enumerate(paths20):
        mhp = inner_pricer(c, XI, Method.HYBRID_MHP)
        zero = max(zero, abs(mhp.green([XI])[0]))
        nt_f, nt_b = mhp.survival(Mode.FORWARD), mhp.survival(Mode.BACKWARD)
        surv_ok &= 0.0 <= nt_f <= 1.0 and 0.0 <= nt_b <= 1.0
        dual = max(dual, abs(nt_f - nt_b), float(np.max(np.abs(mhp.call(log_k, Mode.FORWARD) - mhp.call(log_k, Mode.BACKWARD)))))
        doc = df * inner_pricer(c, math.log(0.9), Method.HYBRID_MHP).call(log_k)
        van = np.array([conditional_call(i_t[j], j_t[j], heston, math.exp(k), 1.0) for k in log_k])
        order = max(order, float(np.max(doc - van)))

    sigmas = np.arange(0.05, 1.0001, 0.05)
    iv = max(abs(implied_vol(bs_call(1.0, 1.0, 1.0, 0.03, s), 1.0, 1.0, 1.0, 0.03) - s) for s in sigmas)

    def run(out):
        cfg = ExperimentConfig(
            heston, BarrierContract(1.0, 0.9, PayoffKind.DOWN_OUT_CALL, 1.0),
            (Method.HYBRID_MHP, Method.HYBRID_FDM, Method.MCS2D),
            {Method.HYBRID_MHP: 20, Method.HYBRID_FDM: 20, Method.MCS2D: 2000}, (0.9, 1.1), seed=11, out_dir=str(out),
        )
        run_experiment(cfg)

    run(tmp_path / "a")
    run(tmp_path / "b")
    same = all(
        filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False) for f in ("results.csv", "comparison.csv")
    )
    ok = zero < 1e-5 and dual < 1e-3 and order <= 0.0 and surv_ok and iv < 1e-8 and same
    detail = (
        f"G(xi) {zero:.1e} (< 1e-5), duality {dual:.1e} (< 1e-3), max(DOC - vanilla) {order:.1e} (<= 0), "
        f"survival in [0, 1] {surv_ok}, IV round trip {iv:.1e} (< 1e-8), byte-identical CSVs {same}"
    )
    assert criterion(9, ok, detail)
