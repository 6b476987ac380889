"""Acceptance criteria 1-11 at their stated tolerances.

Each check returns ``(passed, message)``; the pytest wrappers print one
``CRITERION k: PASS|FAIL`` line apiece.  Run standalone with
``python3 tests/test_acceptance.py``.  Monte Carlo seeds are fixed in
advance (``1000 + k`` and ``2000 + k`` for the two arms of criterion ``k``).
"""

import time

import numpy as np
import pytest

from rmtclt.density import invert_density, invert_f_density
from rmtclt.ensembles import EntryLaw
from rmtclt.harness import ExperimentConfig, bias_demonstration, compare_pipelines, run_experiment
from rmtclt.lemmas import (
    RATE_BAND,
    lemma_suite,
    verify_exact_decompositions,
    verify_f_decomposition,
    verify_interlacing_sweep,
    verify_shift_limit,
)
from rmtclt.lss import TestFunction, deterministic_centering_gap
from rmtclt.stieltjes import CovarianceLSD, SpectralWeights, mp_quadratic, shift_limit

MP = SpectralWeights.point_mass()


def z_grid():
    re = np.linspace(-1.0, 6.0, 10)
    im = np.geomspace(0.05, 5.0, 10)
    return (re[:, None] + 1j * im[None, :]).ravel()


def _timed(fn, budget):
    t0 = time.perf_counter()
    ok, msg = fn()
    dt = time.perf_counter() - t0
    within = dt < budget
    return ok and within, f"{msg}; {dt:.1f}s (budget {budget:.0f}s{'' if within else ', EXCEEDED'})"


def criterion_1():
    zs = z_grid()
    worst = 0.0
    for y in (0.1, 0.5, 1.0, 2.0):
        m, _ = CovarianceLSD(y, MP).companion(zs)
        ref = np.array([mp_quadratic(z, y) for z in zs])
        worst = max(worst, float(np.max(np.abs(m - ref))))
    return worst < 1e-10, f"max |solver - closed form| = {worst:.2e} over 400 points"


def criterion_2():
    ratios = {}
    ok = True
    for z in (4.0, 1 + 1j):
        rep = verify_shift_limit(z, 0.5, (100, 200, 400, 800))
        ratios[str(z)] = [round(float(r), 4) for r in rep.rate_ratios]
        ok &= all(0.25 <= r <= 0.75 for r in rep.rate_ratios)
    return ok, f"error ratios {ratios}"


def criterion_3():
    worst = 0.0
    for z in z_grid():
        m = mp_quadratic(z, 0.5)
        # implicit derivative of z m^2 + (z + 1 - y) m + 1 = 0
        dm = -(m * m + m) / (2 * z * m + z + 1 - 0.5)
        comb = (m + z * dm) * (1 + z * m) / (-z * m)
        worst = max(worst, abs(shift_limit(z, 0.5, MP) + comb))
    return worst < 1e-10, f"max |L + combined limit| = {worst:.2e}"


def criterion_4():
    dec = verify_exact_decompositions(p=50, n=100, reps=100, seed=1004)
    inter = verify_interlacing_sweep(p=50, n=100, reps=1000, seed=2004)
    worst = max(dec.estimates[0].values())
    viol = inter.estimates[0]["violations"]
    return dec.passed and inter.passed, f"max relative error {worst:.2e}; {viol} interlacing violations"


def criterion_5():
    rep = verify_f_decomposition(1 + 1j, p=50, n=100, big_n=200, reps=100, seed=1005)
    return rep.passed, f"max |LHS - RHS| = {rep.estimates[0]['max_abs_diff']:.2e}"


def criterion_6():
    suite = lemma_suite(z=1 + 1j, y=0.5, n_values=(100, 200, 400), reps=200, seed=1006)
    parts, ok = [], True
    for key in ("4.2", "4.3", "4.4", "4.6"):
        r = suite[key].rate_ratios
        good = all(RATE_BAND[0] <= v <= RATE_BAND[1] for v in r)
        ok &= good
        parts.append(f"{key} ratios {[round(float(v), 3) for v in r]}")
    for key in ("4.4", "4.6"):
        rel = suite[key].estimates[-1]["rel_error"]
        ok &= rel < 0.10
        parts.append(f"{key} rel err {rel:.3f}")
    return ok, "; ".join(parts)


def criterion_7():
    cfg = ExperimentConfig("cov-centralized", 100, 200, f=TestFunction.monomial(1), reps=2000,
                           master_seed=1007)
    st = run_experiment(cfg).stats
    target = 2 * 100 / 199
    ok = abs(st.mean) < 3 * st.se_mean and abs(st.variance / target - 1) < 0.15
    return ok, (f"mean {st.mean:.4f} (SE {st.se_mean:.4f}); variance {st.variance:.4f} "
                f"vs {target:.4f}")


def _equivalence(pipe_a, pipe_b, fs, k, **dims):
    ok, parts = True, []
    for f in fs:
        tf = TestFunction.parse(f)
        ca = ExperimentConfig(pipe_a, f=tf, reps=2000, master_seed=1000 + k, **dims)
        cb = ExperimentConfig(pipe_b, f=tf, reps=2000, master_seed=2000 + k, **dims)
        rep, _, _ = compare_pipelines(ca, cb)
        ok &= rep.verdict
        parts.append(f"f={f}: diff {rep.mean_diff:.3f} ({rep.mean_diff / rep.mean_diff_se:.2f} SE), "
                     f"var ratio {rep.var_ratio:.3f}, KS p {rep.ks_pvalue:.3f}")
    return ok, "; ".join(parts)


def criterion_8():
    return _equivalence("cov-centralized", "cov-simplified", ("x^2", "log"), 8, p=100, n=200)


def criterion_9():
    return _equivalence("f-centralized", "f-simplified", ("x", "log"), 9, p=50, n=100, N=200)


def criterion_10():
    cfg = ExperimentConfig("cov-centralized", 100, 200, f=TestFunction.monomial(2), reps=200,
                           master_seed=1010)
    out = bias_demonstration(cfg)
    exact = 100**2 / (200 * 199)
    gap_big, _ = deterministic_centering_gap(TestFunction.monomial(2), 800, 1600)
    ok = (abs(out["offset"] - exact) < 1e-10 and abs(out["limit"] - 0.25) < 1e-10
          and abs(gap_big / out["limit"] - 1) < 0.01)
    return ok, (f"offset {out['offset']:.12f} vs {exact:.12f}; contour limit {out['limit']:.10f}; "
                f"gap at n=1600 {gap_big:.6f}")


def criterion_11():
    mp = invert_density(0.5, MP)
    fd = invert_f_density(0.5, 0.25)
    h = np.sqrt(0.5 + 0.25 - 0.125)
    edges = ((1 - h) ** 2 / 0.75**2, (1 + h) ** 2 / 0.75**2)
    e_err = max(abs(fd.support_lo - edges[0]), abs(fd.support_hi - edges[1]))
    m1, m2 = mp.total_mass(), fd.total_mass()
    ok = abs(m1 - 1) < 1e-4 and abs(m2 - 1) < 1e-4 and e_err < 1e-3
    return ok, f"mass MP {m1:.7f}, F {m2:.7f}; F edge error {e_err:.2e}"


CRITERIA = {
    1: (criterion_1, 1),
    2: (criterion_2, 1),
    3: (criterion_3, 1),
    4: (criterion_4, 30),
    5: (criterion_5, 60),
    6: (criterion_6, 600),
    7: (criterion_7, 300),
    8: (criterion_8, 600),
    9: (criterion_9, 900),
    10: (criterion_10, 60),
    11: (criterion_11, 30),
}


def evaluate(k):
    fn, budget = CRITERIA[k]
    ok, msg = _timed(fn, budget)
    return ok, f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {msg}"


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    ok, line = evaluate(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
