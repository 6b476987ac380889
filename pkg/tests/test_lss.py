import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as o
from rmtclt.ensembles import PopulationShape, build_f_pair, draw_entries, draw_sample
from rmtclt.errors import LogOnAtom
from rmtclt.lss import (
    TestFunction,
    centering_integral,
    deterministic_centering_gap,
    f_centering_integral,
    lss_covariance,
    lss_f_matrix,
    lss_from_eigs,
    pan_contour,
)
from rmtclt.stieltjes import Ratio, SpectralWeights

MP = SpectralWeights.point_mass()
TWO_LEVEL = SpectralWeights((1.0, 2.0), (0.5, 0.5))
X, X2 = TestFunction.monomial(1), TestFunction.monomial(2)


# --- TestFunction -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text,expect",
    [("x", (0, 1)), ("x^2", (0, 0, 1)), ("x**3", (0, 0, 0, 1)), ("1", (1,)), ("poly:1,0,2", (1, 0, 2))],
)
def test_parse_polynomials(text, expect):
    f = TestFunction.parse(text)
    assert f.kind == "polynomial" and f.coeffs == tuple(float(c) for c in expect)


def test_parse_and_str_round_trip():
    for text in ("x", "x^2", "log", "exp", "1", "poly:1.0,0.0,2.0"):
        assert str(TestFunction.parse(text)) == text


def test_parse_rejects_garbage_and_high_degree():
    with pytest.raises(ValueError):
        TestFunction.parse("sin")
    with pytest.raises(ValueError):
        TestFunction.monomial(9)


def test_evaluation():
    x = np.array([0.5, 2.0])
    assert np.allclose(TestFunction.parse("poly:1,2,3")(x), 1 + 2 * x + 3 * x**2)
    assert np.allclose(TestFunction("log")(x), np.log(x))


# --- centering -----------------------------------------------------------------------------


@pytest.mark.parametrize("y", [0.1, 0.5, 0.9, 2.0])
def test_mp_first_moment_is_one(y):
    assert centering_integral(X, y, MP) == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("k", range(0, 5))
def test_mp_moments(k):
    assert centering_integral(TestFunction.monomial(k), 0.5, MP) == pytest.approx(o.mp_moment(k, 0.5), abs=1e-10)


def test_log_centering():
    assert centering_integral(TestFunction("log"), 0.5, MP) == pytest.approx(o.mp_log_mean(0.5), abs=1e-10)


def test_log_on_atom_rejected():
    with pytest.raises(LogOnAtom):
        centering_integral(TestFunction("log"), 2.0, MP)


def test_polynomial_with_atom_includes_atom():
    # y = 2: x^2 moment is 1 + y; constant 1 integrates to 1 including the atom mass 1/2
    assert centering_integral(TestFunction.monomial(0), 2.0, MP) == pytest.approx(1, abs=1e-10)
    assert centering_integral(X2, 2.0, MP) == pytest.approx(3, abs=1e-10)


@pytest.mark.parametrize("f", ["x", "x^2", "x^3", "log", "exp", "poly:1,-2,0.5"])
@pytest.mark.parametrize("h", [MP, TWO_LEVEL])
def test_dual_route_agreement(f, h):
    from rmtclt.density import integrate_density
    from rmtclt.lss import _contour_moment
    from rmtclt.stieltjes import CovarianceLSD

    model = CovarianceLSD(0.5, h)
    fn = TestFunction.parse(f)
    a = _contour_moment(model, fn, 1e-12)
    b = integrate_density(model, fn, model.support_intervals())
    assert abs(a - b) < 1e-6


def test_f_centering_dual_route():
    assert f_centering_integral(X, 0.5, 0.25) == pytest.approx(o.f_mean(0.25), abs=1e-10)
    from rmtclt.density import integrate_density
    from rmtclt.stieltjes import FMatrixLSD

    fm = FMatrixLSD(0.5, 0.25)
    log = TestFunction("log")
    assert abs(f_centering_integral(log, 0.5, 0.25) - integrate_density(fm, log, fm.support_intervals())) < 1e-5


coef = st.floats(-2, 2, allow_nan=False)


@given(st.lists(coef, min_size=1, max_size=5), st.lists(coef, min_size=1, max_size=5), st.floats(-3, 3))
def test_lss_linear_in_f(a, b, c):
    s = draw_sample(20, 40, seed=0)
    fa, fb = TestFunction("polynomial", tuple(a)), TestFunction("polynomial", tuple(b))
    lhs = lss_covariance(s, fa + fb.scale(c)).value
    rhs = lss_covariance(s, fa).value + c * lss_covariance(s, fb).value
    assert abs(lhs - rhs) < 1e-10 * max(1, abs(lhs))


# --- statistics ------------------------------------------------------------------------------


def test_lss_trace_identity():
    s = draw_sample(30, 60, seed=2)
    v = lss_covariance(s, X, use_centralized=True)
    assert v.value == pytest.approx(np.trace(s.S) - 30, abs=1e-10)
    assert v.statistic_kind == "X_p" and v.ratios == (30 / 59,)
    w = lss_covariance(s, X, use_centralized=False)
    assert w.value == pytest.approx(np.trace(s.B) - 30, abs=1e-10)


def test_lss_p_equals_one():
    vals = [lss_covariance(draw_sample(1, 500, seed=k), X).value for k in range(200)]
    assert abs(np.mean(vals)) < 3 * np.std(vals) / np.sqrt(200)


def test_convention_bridge_is_centering_gap():
    s = draw_sample(40, 80, seed=1)
    for f in (X2, TestFunction("log"), TestFunction("exp")):
        eig = s.eigs_S
        wrong = lss_from_eigs(eig, f, Ratio.of(40, 80), MP).value
        right = lss_from_eigs(eig, f, Ratio.centralized(40, 80), MP).value
        gap, _ = deterministic_centering_gap(f, 40, 80, MP)
        assert abs((wrong - right) - gap) < 1e-10


def test_gap_examples():
    gap, lim = deterministic_centering_gap(X, 100, 200)
    assert abs(gap) < 1e-10 and abs(lim) < 1e-10
    gap, lim = deterministic_centering_gap(X2, 100, 200)
    assert gap == pytest.approx(o.GAP_X2_100_200, abs=1e-10)
    assert lim == pytest.approx(o.GAP_X2_LIMIT, abs=1e-10)


@pytest.mark.parametrize("f", ["x^2", "x^3", "log"])
def test_gap_converges_at_rate_one_over_n(f):
    fn = TestFunction.parse(f)
    errs = []
    for n in (100, 400, 1600):
        gap, lim = deterministic_centering_gap(fn, n // 2, n)
        errs.append(abs(gap - lim))
    assert 1 / 8 < errs[1] / errs[0] < 1 / 2 and 1 / 8 < errs[2] / errs[1] < 1 / 2


def test_gap_two_level_population():
    h = PopulationShape.two_level(50).spectral_weights()
    gap, lim = deterministic_centering_gap(X2, 50, 100, h)
    gap2, lim2 = deterministic_centering_gap(X2, 400, 800, h)
    assert abs(lim - lim2) < 1e-8
    assert abs(gap2 - lim2) < abs(gap - lim)


def test_pan_diagnostic_is_finite():
    assert np.isfinite(pan_contour(X2, 0.5))


def test_f_matrix_statistic():
    pair = build_f_pair(draw_entries(50, 100, seed=1), draw_entries(50, 200, seed=2))
    v = lss_f_matrix(pair, X)
    assert v.statistic_kind == "W_p" and v.ratios == (50 / 99, 50 / 199)
    assert v.value == pytest.approx(np.sum(pair.eigs_F) - 50 / (1 - 50 / 199), abs=1e-9)
    w = lss_f_matrix(pair, TestFunction("log"), use_centralized=False)
    assert np.isfinite(w.value)


def test_degenerate_f_pair():
    x = draw_entries(20, 60, seed=3)
    pair = build_f_pair(x, x)
    v = lss_f_matrix(pair, X2, use_centralized=False)
    assert v.value == pytest.approx(20 * (1 - f_centering_integral(X2, 20 / 60, 20 / 60)), abs=1e-8)
