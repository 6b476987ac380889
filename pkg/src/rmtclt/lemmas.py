"""Numerical verification of the resolvent lemmas behind the centralized CLT.

Exact identities are checked to machine precision on every sample.  Limit
statements are checked by Monte Carlo: the mean against the predicted
deterministic limit, and the mean squared error against a ``1/n`` rate via
``MSE(2n)/MSE(n)``.

Throughout ``A = B - zI`` and ``S - zI = A - Delta``.  All random quantities
are evaluated in the eigenbasis of ``B``, where ``A^{-1}`` is diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from ._parallel import derive_seed, ordered_map
from .ensembles import EntryLaw, MatrixSample, draw_entries, hermitian_eigs
from .errors import SingularResolvent
from .stieltjes import (
    Ratio,
    SpectralWeights,
    _mp_stieltjes_and_derivative,
    combined_correction_limit,
    empirical_conditional_transform,
    f_lsd_transform,
    finite_n_pair,
    g_factor,
    g_factor_prime,
    shift_limit,
    solve_companion,
)

RATE_BAND = (0.25, 0.8)
SHIFT_RATE_BAND = (0.25, 0.75)
MEAN_REL_TOL = 0.10
IDENTITY_TOL = 1e-10
F_IDENTITY_TOL = 1e-6
COLLISION_EPS = 1e-8
MAX_RESAMPLE = 10


def _cjson(v):
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _cjson(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_cjson(x) for x in v]
    return v


@dataclass
class VerifierReport:
    """Outcome of one verifier run; ``passed`` follows the rule in ``criteria``."""

    lemma_id: str
    n_values: list
    estimates: list
    predicted_limit: complex | None
    rate_ratios: list
    passed: bool
    reps: int
    seed: int | None
    criteria: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return _cjson(
            {
                "lemma_id": self.lemma_id,
                "n_values": list(self.n_values),
                "estimates": self.estimates,
                "predicted_limit": self.predicted_limit,
                "rate_ratios": self.rate_ratios,
                "pass": bool(self.passed),
                "reps": self.reps,
                "seed": self.seed,
                "criteria": self.criteria,
                "details": self.details,
            }
        )


def _ratios(seq):
    return [b / a if a > 0 else math.inf for a, b in zip(seq, seq[1:])]


def _in_band(ratios, band):
    return all(band[0] <= r <= band[1] for r in ratios)


# ---------------------------------------------------------------------------
# per-sample quantities
# ---------------------------------------------------------------------------


class _Eigenframe:
    """``B``, ``Delta`` and ``S`` expressed in the eigenbasis of ``B``."""

    def __init__(self, sample):
        g = sample.gammas
        n = sample.n
        lam, q = np.linalg.eigh(sample.B)
        self.lam = lam
        self.w = q.conj().T @ g  # gamma_k in the eigenbasis, columnwise
        self.n = n
        self.p = sample.p
        if n < 2:
            self.delta = None
            return
        wbar = self.w.mean(axis=1)
        self.delta = (n * n / (n - 1)) * np.outer(wbar, wbar.conj()) - np.diag(lam) / (n - 1)
        self.delta = 0.5 * (self.delta + self.delta.conj().T)
        self.abs2_delta = np.abs(self.delta) ** 2

    def r(self, z):
        return 1.0 / (self.lam - z)

    def s_eigs(self):
        return np.linalg.eigvalsh(np.diag(self.lam) - self.delta)


def _sample_quantities(frame, z, z2, want):
    """Dict of the requested per-sample statistics at ``z`` (and ``z2``)."""
    out = {}
    r = frame.r(z)
    if "quadform" in want or "quadform_sq" in want:
        a2 = np.abs(frame.w) ** 2
        out["quadform"] = a2.T @ r
        out["quadform_sq"] = a2.T @ r**2
        out["quadform_fd"] = (a2.T @ frame.r(z + 1e-5) - a2.T @ frame.r(z - 1e-5)) / 2e-5
    if frame.delta is None:
        return out
    dd = np.real(np.diag(frame.delta))
    out["trace_delta"] = np.sum(r * dd)
    out["trace_delta_sq"] = np.sum(r**2 * dd)
    out["delta_quadratic"] = (r**2) @ frame.abs2_delta @ r
    if z2 is not None:
        out["delta_two_point"] = r @ frame.abs2_delta @ frame.r(z2)
        out["delta_two_point_deriv"] = (r**2) @ frame.abs2_delta @ frame.r(z2)
    if "combined" in want:
        mu = frame.s_eigs()
        if np.min(np.abs(mu - z)) < COLLISION_EPS:
            raise SingularResolvent(f"z = {z} within {COLLISION_EPS} of an eigenvalue of S")
        s_inv = np.linalg.inv(np.diag(frame.lam - z) - frame.delta)
        m = r[:, None] * frame.delta  # A^{-1} Delta
        nn = frame.delta * r[None, :]  # Delta A^{-1}
        nn2 = nn @ nn
        t1 = out["trace_delta_sq"]
        t2 = out["delta_quadratic"]  # tr A^{-1}(Delta A^{-1})^2, equal by cyclicity
        t3 = np.trace(s_inv @ nn2 @ nn)
        out["combined"] = t1 + t2 + t3
        exact = np.sum(1.0 / (mu - z)) - np.sum(r)
        out["identity_err"] = abs(out["combined"] - exact) / max(abs(exact), 1.0)
        mm = m @ m
        out["quad_sinv"] = np.trace(mm @ s_inv)
        out["cubic_sinv"] = np.trace(mm @ m @ s_inv)
    return out


def sample_statistics(sample, z=1 + 1j, z2=None, combined=False):
    """Lemma quantities of one realized sample.

    Keys: ``quadform`` and ``quadform_sq`` (arrays over ``k``),
    ``trace_delta``, ``trace_delta_sq``, ``delta_quadratic``, and with
    ``z2`` the two-point forms.  ``combined=True`` adds the three-term
    correction, its exact-identity error, and the terms compared by the
    cubic/quadratic relation (``cubic_sinv``, ``quad_sinv``).
    """
    want = {"quadform"} | ({"combined"} if combined else set())
    return _sample_quantities(_Eigenframe(sample), complex(z), z2, want)


def _draw(p, n, law, seed_key, master, attempt=0):
    seed = derive_seed(master, *seed_key, attempt)
    return MatrixSample(p, n, draw_entries(p, n, law, seed), seed=seed)


def _mc_pass(z, y, law, n_values, reps, seed, want, z2=None, threads=None):
    """Monte Carlo draws for every ``n``; returns per-n arrays and resample counts."""
    per_n = {}
    resampled = {}
    for n in n_values:
        p = max(1, int(round(y * n)))

        def one(r, n=n, p=p):
            for attempt in range(MAX_RESAMPLE):
                sample = _draw(p, n, law, (n, r), seed, attempt)
                try:
                    return _sample_quantities(_Eigenframe(sample), z, z2, want), attempt
                except SingularResolvent:
                    continue
            raise SingularResolvent(f"replication {r} failed {MAX_RESAMPLE} times")

        rows = ordered_map(one, range(reps), threads)
        keys = rows[0][0].keys()
        per_n[n] = {k: np.array([row[0][k] for row in rows]) for k in keys}
        resampled[n] = int(sum(row[1] for row in rows))
    return per_n, resampled


def _limits(z, y, h=None):
    h = SpectralWeights.point_mass() if h is None else h
    cv = solve_companion(z, y, h)
    return g_factor(cv), g_factor_prime(cv, h)


# ---------------------------------------------------------------------------
# public verifiers
# ---------------------------------------------------------------------------


def verify_shift_limit(z=4.0, y=0.5, n_values=(100, 200, 400, 800), h=None):
    """Deterministic first-order convergence of ``p (m_n - m_{n-1})`` to ``L(z)``."""
    h = SpectralWeights.point_mass() if h is None else h
    target = shift_limit(z, y, h)
    errs, est = [], []
    for n in n_values:
        p = int(round(y * n))
        a, b = finite_n_pair(z, p, n, h)
        val = p * (a - b)
        errs.append(abs(val - target))
        est.append({"n": n, "p": p, "value": complex(val), "error": errs[-1]})
    rr = _ratios(errs)
    return VerifierReport(
        "4.1", list(n_values), est, complex(target), rr, _in_band(rr, SHIFT_RATE_BAND),
        0, None, {"rate_band": list(SHIFT_RATE_BAND)},
    )


def verify_quadform(z=1 + 1j, y=0.5, law=EntryLaw(), n_values=(100, 200, 400), reps=200, seed=0):
    """MSE of ``gamma_k^* A^{-1} gamma_k`` about ``g(z)``, averaged over all ``k``."""
    g, _ = _limits(z, y)
    vals, _ = _mc_pass(z, y, law, n_values, reps, seed, {"quadform"})
    return _report_from("4.2", vals, "quadform", g, n_values, reps, seed)


def verify_quadform_sq(z=1 + 1j, y=0.5, law=EntryLaw(), n_values=(100, 200, 400), reps=200, seed=0):
    """Same protocol for ``gamma_k^* A^{-2} gamma_k`` against ``g'(z)``.

    ``details["finite_difference_gap"]`` is the largest difference between
    the quadratic form and a central difference of ``gamma_k^* A^{-1} gamma_k``.
    """
    _, gp = _limits(z, y)
    vals, _ = _mc_pass(z, y, law, n_values, reps, seed, {"quadform"})
    rep = _report_from("4.2'", vals, "quadform_sq", gp, n_values, reps, seed)
    rep.details["finite_difference_gap"] = max(
        float(np.max(np.abs(vals[n]["quadform_sq"] - vals[n]["quadform_fd"]))) for n in n_values
    )
    return rep


def _report_from(lemma_id, vals, key, target, n_values, reps, seed, mean_rule=False):
    arr = [vals[n][key] for n in n_values]
    mses = [float(np.mean(np.abs(a - target) ** 2)) for a in arr]
    rr = _ratios(mses)
    est = []
    for n, a, m in zip(n_values, arr, mses):
        mean = complex(a.mean())
        per_rep = a.reshape(a.shape[0], -1).mean(axis=1)
        se = float(np.sqrt(np.var(per_rep, ddof=1) / per_rep.size))
        e = {"n": n, "mean": mean, "mse": m, "abs_error": abs(mean - target), "se": se}
        if target != 0:
            e["rel_error"] = abs(mean - target) / abs(target)
        est.append(e)
    passed = _in_band(rr, RATE_BAND)
    crit = {"rate_band": list(RATE_BAND)}
    if mean_rule:
        rel = est[-1]["rel_error"]
        # errors must not grow beyond Monte Carlo noise as n increases
        decreasing = all(
            b["abs_error"] <= a["abs_error"] + 2 * math.hypot(a["se"], b["se"])
            for a, b in zip(est, est[1:])
        )
        crit.update({"mean_rel_tol": MEAN_REL_TOL, "largest_n_rel_error": rel,
                     "error_nonincreasing": decreasing})
        passed = passed and rel < MEAN_REL_TOL and decreasing
    return VerifierReport(lemma_id, list(n_values), est, complex(target), rr, passed, reps, seed, crit)


def lemma_suite(z=1 + 1j, y=0.5, law=EntryLaw(), n_values=(100, 200, 400), reps=200, seed=0,
                z2=2 + 1j, threads=None):
    """Run the Monte Carlo lemma checks on one shared set of draws.

    Returns a dict of reports keyed ``"4.2"``, ``"4.2'"``, ``"4.3"``,
    ``"4.3'"``, ``"4.4"``, ``"4.4-two-point"``, ``"4.5"`` and ``"4.6"``.
    """
    g, gp = _limits(z, y)
    g2, _ = _limits(z2, y)
    comb = combined_correction_limit(z, y, SpectralWeights.point_mass())
    L = shift_limit(z, y, SpectralWeights.point_mass())
    vals, resampled = _mc_pass(z, y, law, n_values, reps, seed,
                               {"quadform", "combined"}, z2=z2, threads=threads)
    out = {
        "4.2": _report_from("4.2", vals, "quadform", g, n_values, reps, seed),
        "4.2'": _report_from("4.2'", vals, "quadform_sq", gp, n_values, reps, seed),
        "4.3": _report_from("4.3", vals, "trace_delta", 0, n_values, reps, seed),
        "4.3'": _report_from("4.3'", vals, "trace_delta_sq", 0, n_values, reps, seed),
        "4.4": _report_from("4.4", vals, "delta_quadratic", g * gp, n_values, reps, seed, True),
        "4.4-two-point": _report_from("4.4-two-point", vals, "delta_two_point", g * g2,
                                      n_values, reps, seed, True),
        "4.6": _report_from("4.6", vals, "combined", comb, n_values, reps, seed, True),
    }
    # the two-point derivative form g'(z1) g(z2) as a diagnostic
    out["4.4-two-point"].details["derivative_form"] = [
        {"n": n, "mean": complex(vals[n]["delta_two_point_deriv"].mean()), "target": complex(gp * g2)}
        for n in n_values
    ]
    # exact three-term expansion on every sample
    ident = max(float(np.max(vals[n]["identity_err"])) for n in n_values)
    out["4.6"].details.update({"max_identity_error": ident, "resampled": resampled})
    out["4.6"].criteria["identity_tol"] = IDENTITY_TOL
    out["4.6"].passed = out["4.6"].passed and ident < IDENTITY_TOL
    # cancellation against the shift limit
    canc = [abs(complex(vals[n]["combined"].mean()) + L) for n in n_values]
    out["4.6"].details["cancellation"] = {"shift_limit": complex(L), "residual": canc}
    # relation between cubic and quadratic correction terms
    rel = [abs(complex(np.mean(vals[n]["cubic_sinv"] - g * vals[n]["quad_sinv"]))) for n in n_values]
    mse = [float(np.mean(np.abs(vals[n]["cubic_sinv"] - g * vals[n]["quad_sinv"]) ** 2)) for n in n_values]
    out["4.5"] = VerifierReport(
        "4.5", list(n_values),
        [{"n": n, "abs_mean": a, "mse": m} for n, a, m in zip(n_values, rel, mse)],
        0j, _ratios(mse), _in_band(_ratios(mse), RATE_BAND), reps, seed,
        {"rate_band": list(RATE_BAND)},
    )
    return out


def verify_trace_delta(z=1 + 1j, y=0.5, law=EntryLaw(), n_values=(100, 200, 400), reps=200, seed=0):
    """``E|tr A^{-1} Delta|^2 = O(1/n)``; ``tr A^{-2} Delta`` is reported in ``details``."""
    vals, _ = _mc_pass(z, y, law, n_values, reps, seed, set())
    rep = _report_from("4.3", vals, "trace_delta", 0, n_values, reps, seed)
    sq = _report_from("4.3'", vals, "trace_delta_sq", 0, n_values, reps, seed)
    rep.details["trace_delta_sq"] = {"estimates": sq.estimates, "rate_ratios": sq.rate_ratios}
    rep.passed = rep.passed and sq.passed
    return rep


def verify_delta_quadratic(z=1 + 1j, y=0.5, law=EntryLaw(), n_values=(100, 200, 400), reps=200,
                           seed=0, z2=2 + 1j):
    """``tr(A^{-2} Delta A^{-1} Delta)`` against ``g g'``; two-point form in ``details``."""
    g, gp = _limits(z, y)
    g2, _ = _limits(z2, y)
    vals, _ = _mc_pass(z, y, law, n_values, reps, seed, set(), z2=z2)
    rep = _report_from("4.4", vals, "delta_quadratic", g * gp, n_values, reps, seed, True)
    two = _report_from("4.4-two-point", vals, "delta_two_point", g * g2, n_values, reps, seed, True)
    rep.details["two_point"] = two.to_dict()
    return rep


def verify_combined_correction(z=1 + 1j, y=0.5, law=EntryLaw(), n_values=(100, 200, 400), reps=200,
                               seed=0):
    """Three-term correction against ``g g'/(-z m)``, its exact identity, and cancellation."""
    rep = lemma_suite(z, y, law, n_values, reps, seed)
    out = rep["4.6"]
    out.details["lemma_4_5"] = rep["4.5"].to_dict()
    return out


def exact_decomposition_errors(sample, z=1 + 1j):
    """Relative errors of ``S = B - Delta``, the scaling identity and the resolvent expansion."""
    b, s, d = sample.B, sample.S, sample.Delta
    n = sample.n
    nb = np.linalg.norm(b)
    g = sample.gammas
    gbar = g.mean(axis=1, keepdims=True)
    scaled = (n / (n - 1)) * (b - n * (gbar @ gbar.conj().T))
    p = sample.p
    eye = np.eye(p)
    a_inv = np.linalg.inv(b - z * eye)
    s_inv = np.linalg.inv(s - z * eye)
    da = d @ a_inv
    da3 = da @ da @ da
    expansion = a_inv + a_inv @ da + a_inv @ da @ da + s_inv @ da3
    return {
        "decomposition": float(np.linalg.norm(s - (b - d)) / nb),
        "scaling": float(np.linalg.norm(s - scaled) / nb),
        "resolvent": float(np.linalg.norm(s_inv - expansion) / np.linalg.norm(s_inv)),
    }


def verify_exact_decompositions(p=50, n=100, reps=100, law=EntryLaw(), seed=0, z=1 + 1j):
    errs = ordered_map(lambda r: exact_decomposition_errors(_draw(p, n, law, (r,), seed), z), range(reps))
    worst = {k: max(e[k] for e in errs) for k in errs[0]}
    passed = all(v < IDENTITY_TOL for v in worst.values())
    return VerifierReport("3.1", [n], [worst], None, [], passed, reps, seed,
                          {"identity_tol": IDENTITY_TOL})


def interlacing_violations(sample, slack=1e-10):
    """Count interlacing and trace-bound violations for the rank-one downdate of ``B``."""
    lam = sample.eigs_B
    mu = hermitian_eigs(sample.downdated, check=False)
    tol = slack * max(1.0, abs(lam[0]))
    bad = int(np.sum(mu > lam + tol))
    bad += int(np.sum(mu[:-1] < lam[1:] - tol))
    if np.sum(lam - mu) > lam[0] - mu[-1] + tol:
        bad += 1
    return bad


def verify_interlacing(sample, slack=1e-10):
    """True when ``lambda_{i+1} <= mu_i <= lambda_i`` and the trace bound both hold."""
    return interlacing_violations(sample, slack) == 0


def verify_interlacing_sweep(p=50, n=100, reps=1000, law=EntryLaw(), seed=0):
    counts = ordered_map(lambda r: interlacing_violations(_draw(p, n, law, (r,), seed)), range(reps))
    total = int(sum(counts))
    return VerifierReport("interlacing", [n], [{"p": p, "violations": total}], None, [],
                          total == 0, reps, seed, {"slack": 1e-10})


def f_identity_terms(z, p, n, sy_eigs, y2):
    """Both sides of the exact decomposition of the conditional F-matrix shift.

    Parameters
    ----------
    z : complex
    p, n : int
        Dimension and the X sample size; the first ratio is ``p/(n-1)``.
    sy_eigs : array
        Eigenvalues of the realized ``S_y``.
    y2 : float
        Ratio of the Marchenko-Pastur law that replaces ``F^{S_y}``.

    Returns
    -------
    lhs, rhs : complex
        ``lhs = p (m_E - m_F)`` where ``m_E`` is driven by the ESD of
        ``S_y^{-1}`` and ``m_F`` by its limit.  ``rhs`` is the closed-form
        fraction built from ``tr(S_y + m_F I)^{-1} - p m_MP(-m_F)``, scaled by
        ``(n-1)/p`` to convert companion differences.
    """
    y1 = p / (n - 1)
    t = np.asarray(sy_eigs, dtype=float)
    mf = f_lsd_transform(z, y1, y2)
    me = empirical_conditional_transform(z, Ratio(y1), t)
    # Stieltjes transforms from companions at ratio y1
    m_e = (me + (1 - y1) / z) / y1
    m_f = (mf + (1 - y1) / z) / y1
    lhs = p * (m_e - m_f)
    mp, _ = _mp_stieltjes_and_derivative(np.array([-mf]), y2)
    num = -y1 * mf * me * (np.sum(1.0 / (t + mf)) - p * complex(mp[0]))
    den = 1.0 - y1 * np.mean(mf * me / ((t + mf) * (t + me)))
    rhs = num / den * (n - 1) / p
    return complex(lhs), complex(rhs)


def verify_f_decomposition(z=1 + 1j, p=50, n=100, big_n=200, law=EntryLaw(), reps=100, seed=0):
    """Check the exact conditional decomposition on ``reps`` realized ``S_y``."""
    if p > big_n - 1:
        raise ValueError("need p <= N - 1")
    y2 = p / (big_n - 1)

    def one(r):
        from .ensembles import centralized_cov

        ey = draw_entries(p, big_n, law, derive_seed(seed, r))
        eigs = centralized_cov(ey)[1]
        lhs, rhs = f_identity_terms(z, p, n, eigs, y2)
        return lhs, rhs

    rows = ordered_map(one, range(reps))
    diffs = [abs(a - b) for a, b in rows]
    est = [{"max_abs_diff": max(diffs), "mean_abs_lhs": float(np.mean([abs(a) for a, _ in rows]))}]
    return VerifierReport("F", [n], est, None, [], max(diffs) < F_IDENTITY_TOL, reps, seed,
                          {"identity_tol": F_IDENTITY_TOL}, {"N": big_n, "p": p})


LEMMA_IDS = ("4.1", "4.2", "4.2'", "4.3", "4.4", "4.6", "F", "interlacing", "3.1")
