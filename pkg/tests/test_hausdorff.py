import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hlab.descriptors import bump, gaussian, indicator
from hlab.grid import BoxGrid, SampledFunction, sample
from hlab.hausdorff import (InterpolationWarning, RadialProfile, Symbol, apply, apply_dual,
                            check_local_integrability, deviation_average, dual_profile, duality_check,
                            lebesgue_report, read_profile_csv, reduce_to_profile, sphere_area,
                            write_profile_csv)
from hlab.quadrature import QuadratureError, integrate_interval, integrate_segments


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_quadrature_tail_and_errors():
    val = integrate_interval(lambda r: np.exp(-r), 0.0, 1.0) + integrate_segments(
        lambda r, rows: np.exp(-r), np.array([[1.0, np.inf]]))[0]
    assert val == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(QuadratureError):
        integrate_segments(lambda r, rows: r, np.array([[0.0, np.inf]]))
    with pytest.raises(QuadratureError):
        integrate_interval(lambda r: np.sin(1.0 / r) / r**2, 1e-4, 1.0, max_level=3)


def test_reduce_box_profile_one_dimension():
    phi = reduce_to_profile(Symbol.builtin("box", 1))
    r = np.array([0.25, 0.5, 0.75, 1.0, 1.5, 1.6, 3.0])
    np.testing.assert_array_equal(phi(r), [0, 1, 1, 1, 1, 0, 0])


def test_reduce_zero_profile():
    phi = reduce_to_profile(Symbol.builtin("zero", 1))
    assert phi.zero
    assert np.all(phi(np.linspace(0.1, 5, 17)) == 0)


def test_reduce_two_dimensional_gaussian():
    # radial closed form versus the circle quadrature of the same kernel written in Cartesian form
    radial = reduce_to_profile(Symbol.builtin("gaussian", 2))
    cart = reduce_to_profile(Symbol(2, lambda y: np.exp(-np.pi * np.sum(y * y, axis=-1)), "cart"))
    r = np.array([0.3, 1.0, 2.0])
    exact = 2 * np.pi * r * np.exp(-np.pi * r**2)
    np.testing.assert_allclose(radial(r), exact, rtol=1e-13)
    np.testing.assert_allclose(cart(r), exact, rtol=1e-8)
    assert cart.value(1.0) == pytest.approx(0.2715, abs=1e-4)


def test_non_radial_two_dimensional_profile():
    # Phi(y) = y_1^2 on the unit annulus: phi(r) = r^3 * pi on [1/2, 3/2]
    sym = Symbol(2, lambda y: y[..., 0] ** 2, "x-squared", support=(0.5, 1.5), breakpoints=(0.5, 1.5))
    phi = reduce_to_profile(sym)
    assert phi.value(1.0) == pytest.approx(math.pi, rel=1e-8)


def test_box_apply_closed_form():
    f = sample(indicator(0, 1), BoxGrid.parse("-1:3:0.001"))
    out = apply(reduce_to_profile(Symbol.builtin("box")), f)
    x = out.grid.points()
    expected = np.where(x >= 0, np.maximum(0.0, 1.5 - np.maximum(x, 0.5)), 0.0)
    assert out.at(1.0) == pytest.approx(0.5, abs=1e-12)
    assert np.max(np.abs(out.values - expected)) < 1e-10


def test_zero_symbol_is_exactly_zero():
    sym = Symbol.builtin("zero", 1)
    f = sample(gaussian(1.0), BoxGrid.parse("-4:4:1/8"))
    assert np.all(apply(reduce_to_profile(sym), f).values == 0)
    assert np.all(apply_dual(sym, f).values == 0)
    assert dual_profile(sym).zero


def _smooth_tests():
    return [lambda t: np.exp(-((t - 3) ** 2)), lambda t: np.exp(-((t - 1.5) ** 2) / 0.5) * (1 + 0.3 * t)]


@pytest.mark.parametrize("k", [0, 1])
def test_hardy_matches_averaging_form(k):
    func = _smooth_tests()[k]
    f = sample(lambda t: func(t), BoxGrid.parse("-1:12:1/64"))
    f = SampledFunction(f.grid, f.values, source=_descriptor(func, -1.0, 12.0))
    out = apply(reduce_to_profile(Symbol.builtin("hardy")), f, BoxGrid.parse("1:4:1"))
    for x in (1.0, 2.0, 4.0):
        oracle = quad(func, 0, x, epsabs=0, epsrel=1e-13)[0] / x
        assert out.at(x) == pytest.approx(oracle, rel=1e-5)


@pytest.mark.parametrize("k", [0, 1])
def test_adjoint_hardy_matches_tail_form(k):
    func = _smooth_tests()[k]
    f = SampledFunction(BoxGrid.parse("0:12:1/64"), np.zeros(769), source=_descriptor(func, 0.0, 12.0))
    out = apply(reduce_to_profile(Symbol.builtin("adjoint-hardy")), f, BoxGrid.parse("1:4:1"))
    for x in (1.0, 2.0, 4.0):
        oracle = x * quad(lambda t: func(t) / t**2, x, 12.0, epsabs=0, epsrel=1e-13)[0]
        assert out.at(x) == pytest.approx(oracle, rel=1e-5)


def test_cesaro_matches_weighted_average():
    func = _smooth_tests()[0]
    f = SampledFunction(BoxGrid.parse("0:12:1/64"), np.zeros(769), source=_descriptor(func, 0.0, 12.0))
    out = apply(reduce_to_profile(Symbol.builtin("cesaro")), f, BoxGrid.parse("1:4:1"))
    for x in (1.0, 2.0, 4.0):
        oracle = 2 / x * quad(lambda t: (1 - t / x) * func(t), 0, x, epsabs=0, epsrel=1e-13)[0]
        assert out.at(x) == pytest.approx(oracle, rel=1e-5)


def _descriptor(func, lo, hi):
    from hlab.descriptors import from_callable
    return from_callable(lambda x: np.where((x >= lo) & (x <= hi), func(x), 0.0), 1, ((lo, hi),))


def test_dual_profile_examples():
    box = dual_profile(Symbol.builtin("box"))
    r = np.array([0.5, 2 / 3, 1.0, 1.5, 2.0, 2.5])
    np.testing.assert_allclose(box(r), np.where((r >= 2 / 3) & (r <= 2), r**-3.0, 0.0), rtol=1e-14)
    assert box.value(1.0) == pytest.approx(1.0)
    gauss = dual_profile(Symbol.builtin("gaussian"))
    # (Phi(1/2) + Phi(-1/2)) * 2^-3 with Phi(y) = exp(-pi y^2)
    assert gauss.value(2.0) == pytest.approx(2 * math.exp(-math.pi / 4) / 8, rel=1e-14)
    assert dual_profile(Symbol.builtin("zero")).value(1.3) == 0.0


def test_dual_profile_two_dimensional_consistency():
    sym_r = Symbol.builtin("gaussian", 2)
    sym_c = Symbol(2, lambda y: np.exp(-np.pi * np.sum(y * y, axis=-1)), "cart")
    r = np.array([0.5, 1.0, 3.0])
    np.testing.assert_allclose(dual_profile(sym_c)(r), dual_profile(sym_r)(r), rtol=1e-8)


def test_apply_dual_matches_direct_quadrature():
    sym = Symbol.builtin("box")
    f = sample(gaussian(0.4, 1.0), BoxGrid.parse("-6:6:1/16"))
    rng = np.random.default_rng(11)
    xs = np.round(rng.uniform(-3, 3, 10) * 16) / 16
    out = apply_dual(sym, f)
    g = gaussian(0.4, 1.0)
    for x in xs:
        # int Phi(y) |y| f(|y| x) dy over both half-lines
        oracle = 2 * quad(lambda y: 0.5 * y * g(np.array(y * x)), 0.5, 1.5, epsabs=0, epsrel=1e-13)[0]
        assert out.at(x) == pytest.approx(oracle, rel=1e-6, abs=1e-14)


def test_lebesgue_report_examples():
    box = lebesgue_report(reduce_to_profile(Symbol.builtin("box")), 1.0)
    assert np.all(box.eps == 0) and box.value == 1.0 and box.verdict == "lebesgue-with-value-1"
    lin = lebesgue_report(RadialProfile(lambda r: r, name="r"), 1.0)
    np.testing.assert_allclose(lin.eps, lin.deltas / 2, rtol=1e-9)
    jump = RadialProfile(lambda r: ((r >= 1) & (r <= 2)).astype(float), (1.0, 2.0), (1.0, 2.0), "jump")
    rep = lebesgue_report(jump, 1.0)
    np.testing.assert_allclose(rep.eps, 0.5, rtol=1e-9)
    assert rep.verdict == "not-lebesgue"
    assert deviation_average(RadialProfile(lambda r: r), 1.0, 0.25) == pytest.approx(0.125, rel=1e-10)


def test_tabulated_profile_roundtrip_and_validation():
    r = np.geomspace(2.0**-4, 2.0**4, 161)
    prof = RadialProfile.from_table(r, np.exp(-r))
    buf = io.StringIO()
    write_profile_csv(prof, buf)
    back = read_profile_csv(io.StringIO(buf.getvalue()))
    assert buf.getvalue().startswith("# profile n=1\n")
    np.testing.assert_allclose(back(r), prof(r), rtol=1e-15)
    with pytest.raises(ValueError):
        RadialProfile.from_table(np.linspace(1, 2, 5), np.ones(5))
    with pytest.raises(ValueError):
        RadialProfile.from_table(np.geomspace(2.0**-30, 1, 5), np.ones(5))


def test_local_integrability_rejects_singular_profile():
    bad = RadialProfile(lambda r: 1.0 / np.abs(r - 1.0) ** 1.5, name="singular", breakpoints=(1.0,))
    with pytest.raises(ValueError):
        check_local_integrability(bad)


def test_interpolated_input_warns_and_is_accurate():
    g = BoxGrid.parse("0:8:1/64")
    x = g.points()
    f = SampledFunction(g, np.exp(-((x - 3) ** 2)))
    with pytest.warns(InterpolationWarning):
        out = apply(reduce_to_profile(Symbol.builtin("box")), f, BoxGrid.parse("2:4:1"))
    exact = apply(reduce_to_profile(Symbol.builtin("box")), sample(lambda t: np.exp(-((t - 3) ** 2)), g),
                  BoxGrid.parse("2:4:1"))
    np.testing.assert_allclose(out.values, exact.values, rtol=1e-6)


def test_threads_do_not_change_results():
    f = sample(bump(3.0), BoxGrid.parse("0:8:1/32"))
    phi = reduce_to_profile(Symbol.builtin("box"))
    a = apply(phi, f, chunk=64)
    b = apply(phi, f, chunk=64, threads=3)
    np.testing.assert_array_equal(a.values, b.values)


def test_duality_box_gaussian():
    rep = duality_check(Symbol.builtin("box"), sample(gaussian(), BoxGrid.parse("-16:16:1/32")), refine=4)
    assert rep.discrepancy < 1e-3


coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=15, deadline=None)
@given(coef, coef, st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(a, b, c1, c2):
    grid = BoxGrid.parse("-6:6:1/4")
    f, g = sample(bump(c1), grid), sample(gaussian(c2, 0.8), grid)
    phi = reduce_to_profile(Symbol.builtin("box"))
    combo = SampledFunction(grid, a * f.values + b * g.values,
                            source=_descriptor(lambda x: a * bump(c1)(x) + b * gaussian(c2, 0.8)(x), -6, 6))
    lhs = apply(phi, combo).values
    rhs = a * apply(phi, f).values + b * apply(phi, g).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + np.max(np.abs(rhs)))


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(0.3, 2), st.sampled_from(["box", "gaussian", "hardy", "adjoint-hardy"]))
def test_positivity(center, width, name):
    grid = BoxGrid.parse("-8:8:1/4")
    out = apply(reduce_to_profile(Symbol.builtin(name)), sample(gaussian(center, width), grid))
    assert np.all(out.values >= 0)


def test_warnings_are_not_raised_for_closed_forms():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        apply(reduce_to_profile(Symbol.builtin("box")), sample(bump(), BoxGrid.parse("-3:3:1/8")))
