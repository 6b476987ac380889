import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmtclt.ensembles import (
    EntryLaw,
    MatrixSample,
    PopulationShape,
    build_f_pair,
    centralized_cov,
    delta_matrix,
    draw_entries,
    draw_sample,
    dump_matrix,
    hermitian_eigs,
    load_matrix,
    simplified_cov,
)
from rmtclt.errors import DimensionMismatch, NotHermitian, SingularSy
from rmtclt.lemmas import verify_interlacing

LAWS = [EntryLaw("real-gaussian"), EntryLaw("complex-gaussian"), EntryLaw("real-threepoint")]
shapes = st.sampled_from(["identity", "two-level"])
laws = st.sampled_from(LAWS)


def make_shape(kind, p):
    return PopulationShape.identity() if kind == "identity" else PopulationShape.two_level(p)


# --- entry laws ---------------------------------------------------------------------


def test_builtin_moment_constants():
    rg, cg, tp = LAWS
    assert (rg.fourth_abs_moment, rg.kappa, rg.beta) == (3.0, 2, 0.0)
    assert (cg.fourth_abs_moment, cg.kappa, cg.beta, cg.second_raw_moment) == (2.0, 1, 0.0, 0j)
    assert (tp.fourth_abs_moment, tp.kappa, tp.beta) == (3.0, 2, 0.0)


def test_threepoint_sample_moments():
    x = draw_entries(1000, 1000, EntryLaw("real-threepoint"), seed=3).ravel()
    se2 = math.sqrt((9 * 2 / 6 - 1) / x.size)  # Var X^2 = E X^4 - 1
    se4 = math.sqrt((81 * 2 / 6 - 9) / x.size)  # Var X^4 = E X^8 - 9
    assert abs(np.mean(x**2) - 1) < 3 * se2
    assert abs(np.mean(x**4) - 3) < 3 * se4
    assert set(np.unique(x)) <= {-math.sqrt(3), 0.0, math.sqrt(3)}


def test_complex_gaussian_second_raw_moment():
    x = draw_entries(500, 500, EntryLaw("complex-gaussian"), seed=1).ravel()
    assert abs(np.mean(x * x)) < 5 / math.sqrt(x.size)
    assert abs(np.mean(np.abs(x) ** 2) - 1) < 5 * math.sqrt(1 / x.size)


def test_draws_are_reproducible():
    for law in LAWS:
        a = draw_entries(7, 9, law, seed=42)
        b = draw_entries(7, 9, law, seed=42)
        assert a.tobytes() == b.tobytes()
    assert not np.array_equal(draw_entries(7, 9, seed=1), draw_entries(7, 9, seed=2))


def test_custom_discrete_law():
    law = EntryLaw("custom-discrete", values=(-1.0, 1.0), probs=(0.5, 0.5))
    assert law.fourth_abs_moment == 1.0 and law.beta == -2.0
    x = draw_entries(3, 4, law, seed=0)
    assert set(np.unique(x)) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        EntryLaw("custom-discrete", values=(0.0, 2.0), probs=(0.5, 0.5))
    with pytest.raises(ValueError):
        EntryLaw("custom-discrete", values=(-1.0, 1.0), probs=(0.4, 0.5))
    with pytest.raises(ValueError):
        EntryLaw("student-t")


def test_fourth_moment_relation():
    for law in LAWS:
        assert abs(law.fourth_abs_moment - (law.beta + 1 + law.kappa)) < 1e-15


# --- covariance constructions ----------------------------------------------------------


@given(st.integers(1, 12), st.integers(2, 20), laws, shapes, st.integers(0, 2**32))
def test_exact_decomposition_property(p, n, law, shape_kind, seed):
    shape = make_shape(shape_kind, p)
    x = draw_entries(p, n, law, seed)
    s, _ = centralized_cov(x, shape)
    b, _ = simplified_cov(x, shape)
    d = delta_matrix(x, shape)
    nb = max(np.linalg.norm(b), 1e-300)
    assert np.linalg.norm(s - (b - d)) <= 1e-12 * nb
    assert np.linalg.norm(s - s.conj().T) <= 1e-13 * nb
    assert np.min(np.linalg.eigvalsh(b)) >= -1e-12 * nb
    assert np.min(np.linalg.eigvalsh(s)) >= -1e-12 * nb


@given(st.integers(1, 12), st.integers(2, 20), laws, st.integers(0, 2**32))
def test_interlacing_property(p, n, law, seed):
    assert verify_interlacing(MatrixSample(p, n, draw_entries(p, n, law, seed)))


def test_equal_columns_give_zero_s():
    x = np.tile(np.arange(1.0, 4.0)[:, None], (1, 2))
    s, eigs = centralized_cov(x)
    assert np.allclose(s, 0) and np.allclose(eigs, 0)


def test_centering_invariance():
    x = draw_entries(6, 15, seed=2)
    c = np.random.default_rng(0).normal(size=(6, 1))
    s1, _ = centralized_cov(x)
    s2, _ = centralized_cov(x + c)
    assert np.max(np.abs(s1 - s2)) < 1e-12


def test_single_column_rank_one():
    x = draw_entries(5, 1, seed=4)
    b, eigs = simplified_cov(x)
    assert np.allclose(b, x @ x.T)
    assert np.sum(eigs > 1e-12) == 1


def test_zero_mean_columns_delta():
    x = draw_entries(5, 4, seed=5)
    x = np.hstack([x, -x])
    n = x.shape[1]
    b, _ = simplified_cov(x)
    assert np.allclose(delta_matrix(x), -b / (n - 1), atol=1e-14)


def test_delta_has_at_most_one_eigenvalue_above_shift():
    for seed in range(20):
        s = draw_sample(10, 30, seed=seed)
        shifted = np.linalg.eigvalsh(s.Delta + s.B / (s.n - 1))
        assert np.sum(shifted > 1e-10) <= 1


def test_scaling_identity_and_downdate():
    s = draw_sample(8, 20, seed=9)
    g = s.gammas
    gbar = g.mean(axis=1, keepdims=True)
    scaled = (s.n / (s.n - 1)) * (s.B - s.n * gbar @ gbar.T)
    assert np.linalg.norm(s.S - scaled) < 1e-12 * np.linalg.norm(s.B)
    assert np.allclose(s.downdated * s.n / (s.n - 1), s.S)


def test_dimension_errors():
    with pytest.raises(DimensionMismatch):
        centralized_cov(np.ones((3, 1)))
    with pytest.raises(DimensionMismatch):
        simplified_cov(np.ones(3))
    with pytest.raises(DimensionMismatch):
        PopulationShape("diagonal", (1.0, 2.0)).diag(3)


def test_wishart_trace_mean():
    vals = [np.trace(centralized_cov(draw_entries(20, 40, seed=s))[0]) for s in range(400)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - 20) < 3 * se


def test_simplified_trace_mean_two_level():
    shape = PopulationShape.two_level(20)
    vals = [np.trace(simplified_cov(draw_entries(20, 40, seed=s), shape)[0]) for s in range(400)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - 30) < 3 * se


def test_two_level_spectral_weights():
    h = PopulationShape.two_level(6).spectral_weights()
    assert h.atoms == (1.0, 2.0) and h.weights == pytest.approx((0.5, 0.5))


# --- F pairs ----------------------------------------------------------------------------


def test_same_sample_gives_unit_f_spectrum():
    x = draw_entries(10, 40, seed=1)
    pair = build_f_pair(x, x)
    assert np.max(np.abs(pair.eigs_F - 1)) < 1e-10
    assert np.max(np.abs(pair.eigs_G - 1)) < 1e-10


def test_f_eigs_independent_of_population():
    x, y = draw_entries(10, 30, seed=1), draw_entries(10, 60, seed=2)
    a = build_f_pair(x, y, PopulationShape.identity())
    b = build_f_pair(x, y, PopulationShape("diagonal", tuple(np.linspace(1, 2, 10))))
    assert np.max(np.abs(a.eigs_F - b.eigs_F)) < 1e-10 * max(1, a.eigs_F[0])
    assert np.all(a.eigs_F >= 0) and np.all(a.eigs_G >= 0)


def test_f_eigs_invariant_to_column_shifts():
    x, y = draw_entries(10, 30, seed=1), draw_entries(10, 60, seed=2)
    c = np.arange(10.0)[:, None]
    a = build_f_pair(x, y).eigs_F
    b = build_f_pair(x + c, y - c).eigs_F
    assert np.max(np.abs(a - b)) < 1e-10 * a[0]


def test_g_spectrum_matches_f_limit():
    from scipy.stats import kstest

    from rmtclt.density import invert_f_density

    pair = build_f_pair(draw_entries(50, 100, seed=3), draw_entries(50, 200, seed=4))
    gd = invert_f_density(0.5, 0.25)
    ks = kstest(pair.eigs_G, gd.cdf).statistic
    assert ks < 0.05 + 1.36 / math.sqrt(50)  # one sample of 50 eigenvalues


def test_f_pair_preconditions():
    with pytest.raises(DimensionMismatch):
        build_f_pair(draw_entries(10, 30), draw_entries(10, 10))
    with pytest.raises(DimensionMismatch):
        build_f_pair(draw_entries(10, 30), draw_entries(9, 30))
    y = np.zeros((3, 10))
    y[0] = draw_entries(1, 10, seed=1)
    with pytest.raises(SingularSy):
        build_f_pair(draw_entries(3, 10), y)


# --- eigen solver and dumps ----------------------------------------------------------------


def test_hermitian_eigs_examples():
    assert np.allclose(hermitian_eigs(np.eye(3)), 1)
    assert list(hermitian_eigs(np.diag([3.0, 1.0, 2.0]))) == [3.0, 2.0, 1.0]
    with pytest.raises(NotHermitian):
        hermitian_eigs(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(st.integers(1, 15), st.integers(0, 2**32))
def test_hermitian_eigs_trace_and_backward_error(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
    m = a + a.conj().T
    lam = hermitian_eigs(m)
    assert abs(lam.sum() - np.trace(m).real) <= 1e-11 * max(1, np.abs(lam).sum())
    w, q = np.linalg.eigh(m)
    assert np.linalg.norm(m - (q * w) @ q.conj().T) <= 1e-12 * np.linalg.norm(m) * p
    assert np.all(np.diff(lam) <= 0)


@pytest.mark.parametrize("law", LAWS)
def test_dump_round_trip(tmp_path, law):
    x = draw_entries(4, 6, law, seed=0)
    path = tmp_path / "m.bin"
    dump_matrix(x, path)
    raw = path.read_bytes()
    assert raw[:4] == b"RMTM" and len(raw) == 16 + x.size * (16 if np.iscomplexobj(x) else 8)
    y = load_matrix(path)
    assert y.dtype == x.dtype and np.array_equal(x, y)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(ValueError):
        load_matrix(path)
