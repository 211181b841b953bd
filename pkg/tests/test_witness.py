import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hlab.grid import BoxGrid, GridBudgetError, Region, sample
from hlab.hausdorff import Symbol, apply, reduce_to_profile
from hlab.witness import (GrowthReport, GrowthRow, WitnessParams, build_instance, envelope_scan, fit_slope,
                          growth_experiment, make_bump, min_feasible_j, split_main_error, unboundedness_verdict,
                          witness_grid)

BOX = reduce_to_profile(Symbol.builtin("box"))


def _c_oracle(j):
    g = make_bump()
    return quad(lambda v: float(g(np.array(v))) * (v + 2.0**j) ** -2, -2, 2, points=[-1, 1], epsabs=0,
                epsrel=1e-13, limit=200)[0]


def test_instance_example():
    inst = build_instance(WitnessParams(0.5, 8, 16), 12)
    assert inst.A == pytest.approx((0.875, 1.125))
    assert inst.a_lo == pytest.approx(3586.75)
    assert inst.a_hi == pytest.approx(4604.75)
    assert inst.E_measure == pytest.approx(1019.0)
    assert inst.Xi_measure == pytest.approx(1015.0)
    assert inst.center == 4096.0


@pytest.mark.parametrize("p", [0.25, 0.5, 0.75, 0.9])
def test_measures_scale_like_target(p):
    params = WitnessParams(p, 8, 16)
    theta = params.theta
    for j in params.js:
        inst = build_instance(params, j)
        scale = 2.0 ** ((1 - theta) * j)
        assert 1.0 <= inst.E_measure / scale <= 4.0
        assert inst.Xi_measure > 0
        assert inst.Xi[0] - inst.E[0] == pytest.approx(2.0)


def test_parameter_errors():
    for p in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(ValueError, match="0<p<1"):
            WitnessParams(p, 8, 10)
    thr = min_feasible_j(0.25)
    with pytest.raises(ValueError, match=f"j >= {thr}"):
        build_instance(WitnessParams(0.25, thr, thr + 4), thr - 1)
    with pytest.raises(ValueError):
        WitnessParams(0.5, 10, 8)


def test_envelope_chain():
    inst = build_instance(WitnessParams(0.5, 8, 16), 10)
    env = envelope_scan(inst, 32)
    assert len(env.x) == 32
    assert env.chain_holds().all()
    assert np.all(env.e1_measure > 0)
    assert np.all(env.e0_measure >= env.e1_measure)
    with pytest.raises(ValueError):
        envelope_scan(inst, 8)


def test_split_sums_to_apply():
    inst = build_instance(WitnessParams(0.5, 6, 10), 6)
    grid = witness_grid(inst)
    # in one dimension the gaussian profile is 2 e^{-pi r^2}; rescale so phi(1) = 1
    gauss = reduce_to_profile(Symbol.builtin("gaussian")).scaled(math.exp(math.pi) / 2.0)
    main, err = split_main_error(gauss, inst, grid)
    gj = sample(inst.g_j, BoxGrid.from_range(inst.center - 2, inst.center + 2, 0.125))
    total = apply(gauss, gj, grid)
    assert np.max(np.abs(main.values + err.values - total.values)) < 1e-8 * np.max(np.abs(total.values))


@pytest.mark.parametrize("j", [6, 8])
def test_main_term_matches_quadrature(j):
    inst = build_instance(WitnessParams(0.5, 6, 10), j)
    grid = witness_grid(inst)
    main, err = split_main_error(BOX, inst, grid)
    c = _c_oracle(j)
    xs = np.round(np.linspace(inst.E[0], inst.E[1], 10) / 0.125) * 0.125
    for x in xs:
        assert main.at(float(x)) == pytest.approx(c * x, rel=1e-6)


def test_main_term_lower_bound_and_box_error_vanishes():
    j = 8
    inst = build_instance(WitnessParams(0.5, 6, 10), j)
    grid = witness_grid(inst)
    main, err = split_main_error(BOX, inst, grid)
    region = Region.from_boxes(grid, [inst.E])
    vals = main.values[region.mask]
    # the plateau of g_j has width 2, so H^M g_j(x) >= |E^1_{j,x}| >= 2 x / (2^j + 1)^2
    x = grid.points()[region.mask]
    assert np.all(vals >= 2 * x / (2.0**j + 1) ** 2 * (1 - 1e-9))
    # box profile equals phi(1) on A_j, so the error term vanishes on E_j
    assert np.max(np.abs(err.values[region.mask])) < 1e-10


def test_mollified_main_lower_bound():
    params = WitnessParams(0.5, 6, 10)
    rep = growth_experiment(BOX, params, mollified=True)
    for row in rep.rows:
        # main term is >= 2^-j / 2 on E_j and the mollifier has mass >= 2, so each point of Xi_j gets >= 2^-j
        assert row.main_p >= (2.0 ** -row.j) ** 0.5 * row.Xi_j_measure * 0.5


def test_g_norm_translation_invariant():
    rep = growth_experiment(BOX, WitnessParams(0.5, 6, 10))
    norms = rep.column("g_norm")
    np.testing.assert_allclose(norms, rep.g_norm_reference, rtol=1e-12)
    assert rep.g_norm_reference > 0


def test_box_growth_and_verdict():
    rep = growth_experiment(BOX, WitnessParams(0.5, 6, 10))
    assert rep.slope_main == pytest.approx(rep.target_slope, rel=0.15)
    assert rep.slope_total == pytest.approx(rep.slope_main, rel=1e-9)
    assert np.all(rep.column("error_p") < 1e-12 * rep.column("main_p"))
    v = unboundedness_verdict(rep)
    assert v.status == "unbounded-witnessed" and v.label == "unbounded-witnessed"
    text = rep.to_csv(["# hlab witness"], v)
    assert text.splitlines()[1] == "j,main_p,error_p,total_p,eps_j,E_j_measure,Xi_j_measure"
    assert "# verdict=unbounded-witnessed" in text
    assert "np." not in text


def test_zero_branch():
    zero = reduce_to_profile(Symbol.builtin("zero"))
    rep = growth_experiment(zero, WitnessParams(0.5, 6, 10))
    assert np.all(rep.column("total_p") == 0)
    assert np.all(rep.column("eps_j") == 0)
    assert unboundedness_verdict(rep).label == "inconclusive: zero branch"


def test_verdict_needs_five_rows():
    rep = growth_experiment(BOX, WitnessParams(0.5, 6, 9))
    with pytest.raises(ValueError, match="at least 5"):
        unboundedness_verdict(rep)


def test_verdict_rejects_varying_norms():
    rows = tuple(GrowthRow(j, 2.0**j, 0.0, 2.0**j, 0.0, 1.0, 1.0, 1.0 + j) for j in range(5))
    rep = GrowthReport(0.5, False, rows, 1.0, 1.0, "fake", 1.0)
    assert unboundedness_verdict(rep).status == "inconclusive"


def test_verdict_thresholds_are_configurable():
    rows = tuple(GrowthRow(j, 2.0 ** (0.2 * j), 0.0, 2.0 ** (0.2 * j), 0.0, 1.0, 1.0, 1.0) for j in range(8, 17))
    rep = GrowthReport(0.5, False, rows, 0.2, 0.2, "slow", 1.0)
    assert unboundedness_verdict(rep).status == "unbounded-witnessed"
    assert unboundedness_verdict(rep, slope_fraction=0.5, min_growth=8.0).status == "inconclusive"


def test_normalization_required():
    scaled = BOX.scaled(2.0)
    with pytest.raises(ValueError, match="phi\\(1\\)"):
        growth_experiment(scaled, WitnessParams(0.5, 6, 10))
    rep = growth_experiment(scaled, WitnessParams(0.5, 6, 10), normalize=True)
    assert rep.slope_main == pytest.approx(growth_experiment(BOX, WitnessParams(0.5, 6, 10)).slope_main)


def test_budget_error_names_max_j():
    with pytest.raises(GridBudgetError, match="max feasible j"):
        growth_experiment(BOX, WitnessParams(0.5, 8, 30))


def test_eps_decays_for_gaussian():
    gauss = reduce_to_profile(Symbol.builtin("gaussian"))
    gauss = gauss.scaled(1.0 / float(gauss(np.array(1.0))))
    rep = growth_experiment(gauss, WitnessParams(0.5, 6, 10))
    eps = rep.column("eps_j")
    assert np.all(np.diff(eps) < 0)
    for j, e in zip(rep.js, eps):
        d = 2.0 ** (-0.25 * j)
        oracle = quad(lambda r: abs(math.exp(-math.pi * (r * r - 1)) - 1), 1 - d, 1 + d, points=[1.0],
                      epsabs=0, epsrel=1e-12)[0] / (2 * d)
        assert e == pytest.approx(oracle, rel=1e-6)
    # phi is smooth at 1, so eps_j / delta tends to |phi'(1)| / 2 = pi
    ratios = eps / 2.0 ** (-0.25 * rep.js)
    assert np.all(np.diff(ratios) < 0) and ratios[-1] > math.pi


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=12), st.floats(-2, 2))
def test_fit_slope_recovers_exact_lines(noise, slope):
    js = np.arange(len(noise))
    vals = 2.0 ** (slope * js + 1.0)
    assert fit_slope(js, vals) == pytest.approx(slope, abs=1e-9)
    assert math.isnan(fit_slope(js, -vals))
