"""Linear spectral statistics and their deterministic centering terms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math
import re

import numpy as np

from .contour import contour_integrate
from .density import integrate_density
from .errors import CenteringMismatch, LogOnAtom
from .stieltjes import (
    DEFAULT_TOL,
    CovarianceLSD,
    FMatrixLSD,
    Ratio,
    SpectralWeights,
    as_ratio,
)

MAX_DEGREE = 8
CROSS_CHECK_TOL = 1e-6
CONTOUR_TOL = 1e-12


@dataclass(frozen=True)
class TestFunction:
    """Analytic test function: a polynomial (ascending coefficients), ``log`` or ``exp``."""

    __test__ = False  # keep pytest from collecting this class

    kind: str
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("polynomial", "log", "exp"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == "polynomial":
            c = tuple(float(v) for v in self.coeffs)
            if not c:
                raise ValueError("polynomial needs at least one coefficient")
            if len(c) - 1 > MAX_DEGREE:
                raise ValueError(f"polynomial degree must be <= {MAX_DEGREE}")
            object.__setattr__(self, "coeffs", c)

    @classmethod
    def polynomial(cls, *coeffs):
        return cls("polynomial", coeffs)

    @classmethod
    def monomial(cls, k):
        return cls("polynomial", (0.0,) * k + (1.0,))

    @classmethod
    def parse(cls, text):
        """Read ``"x"``, ``"x^3"``, ``"1"``, ``"log"``, ``"exp"`` or ``"poly:c0,c1,..."``."""
        s = text.strip().lower().replace(" ", "")
        if s in ("log", "exp"):
            return cls(s)
        if s == "x":
            return cls.monomial(1)
        m = re.fullmatch(r"x(?:\^|\*\*)(\d+)", s)
        if m:
            return cls.monomial(int(m.group(1)))
        if s.startswith("poly:"):
            return cls("polynomial", tuple(float(v) for v in s[5:].split(",")))
        try:
            return cls.polynomial(float(s))
        except ValueError:
            raise ValueError(f"cannot parse test function {text!r}") from None

    def __call__(self, x):
        x = np.asarray(x)
        if self.kind == "log":
            return np.log(x)
        if self.kind == "exp":
            return np.exp(x)
        # Horner, highest degree first
        out = np.zeros_like(x, dtype=np.result_type(x, float))
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    @property
    def degree(self):
        return len(self.coeffs) - 1 if self.kind == "polynomial" else None

    def __str__(self):
        if self.kind != "polynomial":
            return self.kind
        nz = [k for k, c in enumerate(self.coeffs) if c != 0]
        if len(nz) == 1 and self.coeffs[nz[0]] == 1:
            k = nz[0]
            return "1" if k == 0 else ("x" if k == 1 else f"x^{k}")
        return "poly:" + ",".join(repr(c) for c in self.coeffs)

    def __add__(self, other):
        if self.kind != "polynomial" or other.kind != "polynomial":
            return NotImplemented
        k = max(len(self.coeffs), len(other.coeffs))
        a = np.pad(self.coeffs, (0, k - len(self.coeffs)))
        b = np.pad(other.coeffs, (0, k - len(other.coeffs)))
        return TestFunction("polynomial", tuple(a + b))

    def scale(self, c):
        if self.kind != "polynomial":
            raise ValueError("only polynomials can be scaled")
        return TestFunction("polynomial", tuple(c * v for v in self.coeffs))


@dataclass(frozen=True)
class LssValue:
    """A realized linear spectral statistic ``sum f(lambda_i) - p * centering``."""

    value: float
    statistic_kind: str
    ratios: tuple
    f: TestFunction
    raw_sum: float = float("nan")
    centering: float = float("nan")


def _transform(model):
    def m_of(z):
        mu, _ = model.companion(z)
        return model.stieltjes(z, mu)

    return m_of


def _contour_moment(model, f, tol):
    """``-(1/2 pi i) closed integral f(z) m(z) dz`` around the support (atom included)."""
    iv = model.support_intervals()
    lo, hi = iv[0][0], iv[-1][1]
    width = hi - lo
    margin = max(0.1 * width, 0.05)
    atom = model.atom_at_zero
    if f.kind == "log":
        if atom > 0:
            raise LogOnAtom("log is not integrable against a law with an atom at 0")
        if not lo > 0:
            raise LogOnAtom("log needs a support bounded away from 0")
        val = contour_integrate(
            lambda z: f(z) * _transform(model)(z),
            (lo, hi),
            margin=(min(margin, lo / 2), margin),
            branch_at_origin=True,
            tol=tol,
        )
    else:
        if atom > 0:
            lo = min(lo, 0.0)
        val = contour_integrate(
            lambda z: f(z) * _transform(model)(z), (lo, hi), margin=margin, tol=tol
        )
    return -val.real


def _density_moment(model, f):
    return integrate_density(model, f, model.support_intervals())


def _dual_route(model, f, check):
    val = _contour_moment(model, f, CONTOUR_TOL)
    if check:
        alt = _density_moment(model, f)
        if abs(val - alt) > CROSS_CHECK_TOL * max(1.0, abs(val)):
            raise CenteringMismatch(
                f"contour {val!r} vs density {alt!r} for f = {f} (diff {abs(val - alt):.2e})"
            )
    return val


@lru_cache(maxsize=512)
def _centering_cached(f, y, h, check):
    return _dual_route(CovarianceLSD(Ratio.limit(y), h), f, check)


@lru_cache(maxsize=512)
def _f_centering_cached(f, y1, y2, check):
    return _dual_route(FMatrixLSD(y1, y2), f, check)


def centering_integral(f, ratio, h, check=True):
    """``integral f dF^{y,H}`` by the contour route, cross-checked by density quadrature.

    Parameters
    ----------
    f : TestFunction
    ratio : Ratio or float
    h : SpectralWeights
    check : bool
        Also integrate the inverted density and raise
        :class:`CenteringMismatch` if the two routes differ by more than 1e-6.
    """
    return _centering_cached(f, float(as_ratio(ratio)), h, bool(check))


def f_centering_integral(f, y1, y2, check=True):
    """``integral f dF_{(y1, y2)}`` for the F-matrix limit, dual-route as above."""
    return _f_centering_cached(f, float(y1), float(y2), bool(check))


def covariance_ratio(p, n, use_centralized):
    return Ratio.centralized(p, n) if use_centralized else Ratio.of(p, n)


def lss_covariance(sample, f, use_centralized=True, check=False):
    """``X_p(f)`` for one sample.

    Centralized: eigenvalues of ``S`` centered at ``F^{p/(n-1), H_p}``.
    Simplified: eigenvalues of ``B`` centered at ``F^{p/n, H_p}``.
    """
    ratio = covariance_ratio(sample.p, sample.n, use_centralized)
    eigs = sample.eigs_S if use_centralized else sample.eigs_B
    return lss_from_eigs(eigs, f, ratio, sample.shape.spectral_weights(sample.p), check)


def lss_from_eigs(eigs, f, ratio, h, check=False):
    eigs = np.asarray(eigs, dtype=float)
    p = eigs.size
    raw = float(np.sum(f(eigs)))
    c = centering_integral(f, ratio, h, check)
    return LssValue(raw - p * c, "X_p", (float(ratio),), f, raw, c)


def f_ratios(p, n, big_n, use_centralized):
    if use_centralized:
        return p / (n - 1), p / (big_n - 1)
    return p / n, p / big_n


def lss_f_matrix(pair, f, use_centralized=True, check=False):
    """``W_p(f)`` for one F-matrix pair (``F`` centralized, ``G`` simplified)."""
    p, n, big_n = pair.p, pair.sample_x.n, pair.sample_y.n
    y1, y2 = f_ratios(p, n, big_n, use_centralized)
    eigs = pair.eigs_F if use_centralized else pair.eigs_G
    raw = float(np.sum(f(np.asarray(eigs))))
    c = f_centering_integral(f, y1, y2, check)
    return LssValue(raw - p * c, "W_p", (y1, y2), f, raw, c)


def _shift_limit_vec(z, y, h):
    model = CovarianceLSD(Ratio.limit(y), h)
    mu, _ = model.companion(z)
    t, w = h.t, h.w
    d = 1.0 + mu[..., None] * t
    dmu = 1.0 / (1.0 / mu**2 - y * np.sum(w * t**2 / d**2, axis=-1))
    return (1.0 + z * mu) * (mu + z * dmu) / (z * mu)


def _pan_vec(z, y, h):
    model = CovarianceLSD(Ratio.limit(y), h)
    mu, _ = model.companion(z)
    t, w = h.t, h.w
    d = 1.0 + mu[..., None] * t
    num = y * mu * np.sum(w * t / d**2, axis=-1)
    den = z * (1.0 - y * np.sum(w * mu[..., None] ** 2 * t**2 / d**2, axis=-1))
    return num / den


def _limit_contour(f, y, h, integrand):
    model = CovarianceLSD(Ratio.limit(y), h)
    lo, hi = model.support
    margin = max(0.1 * (hi - lo), 0.05)
    kw = {"margin": margin}
    if f.kind == "log":
        kw = {"margin": (min(margin, lo / 2), margin), "branch_at_origin": True}
    elif model.atom_at_zero > 0:
        lo = min(lo, 0.0)
    return contour_integrate(lambda z: f(z) * integrand(z, y, h), (lo, hi), tol=1e-10, **kw)


def deterministic_centering_gap(f, p, n, h_p=None):
    """Offset between the two centering conventions and its large-n limit.

    Returns
    -------
    gap : float
        ``p * (integral f dF^{p/(n-1),H_p} - integral f dF^{p/n,H_p})``.
    limit : float
        ``(1/2 pi i) closed integral f(z) L(z) dz`` with ``L`` the shift
        limit at ``y = p/n``.
    """
    h_p = SpectralWeights.point_mass() if h_p is None else h_p
    a = centering_integral(f, Ratio.centralized(p, n), h_p, check=False)
    b = centering_integral(f, Ratio.of(p, n), h_p, check=False)
    limit = _limit_contour(f, p / n, h_p, _shift_limit_vec)
    return p * (a - b), float(limit.real)


def pan_contour(f, y, h=None):
    """``(1/2 pi i) closed integral f(z) P(z) dz`` for the alternative bias integrand."""
    h = SpectralWeights.point_mass() if h is None else h
    return float(_limit_contour(f, y, h, _pan_vec).real)


def mp_moment(k, y):
    """``k``-th moment of the Marchenko-Pastur law (Narayana polynomial)."""
    if k == 0:
        return 1.0
    return sum(
        math.comb(k, r) * math.comb(k, r - 1) / k * y ** (r - 1) for r in range(1, k + 1)
    )


__all__ = [
    "DEFAULT_TOL",
    "LssValue",
    "TestFunction",
    "centering_integral",
    "deterministic_centering_gap",
    "f_centering_integral",
    "lss_covariance",
    "lss_f_matrix",
    "lss_from_eigs",
    "mp_moment",
    "pan_contour",
]
