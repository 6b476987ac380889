"""Companion Stieltjes transforms of sample-covariance and F-matrix limits.

Everything here is deterministic.  The central object is the companion
transform ``m_under(z)``, the unique solution in the upper half-plane of::

    z = -1/m_under + y * integral t / (1 + t*m_under) dH(t)

for a discrete population spectrum ``H``.  The plain Stieltjes transform of
the limiting spectral distribution follows from ``m_under`` through
``m(z) = -(1/z) * integral dH(t) / (1 + t*m_under)``, which is algebraically
identical to ``m_under = -(1-y)/z + y*m`` but stays finite near ``z = 0``.

Solvers are vectorized over arrays of ``z``.  Points close to the real axis
are reached by continuation in the imaginary part, so that the returned
branch is always the boundary value from the upper half-plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import (
    BranchAmbiguity,
    BranchError,
    InvalidPoint,
    InvalidRatio,
    NearSingular,
    NonConvergence,
    SingularInput,
)

DEFAULT_TOL = 1e-12
MAX_ITER = 500
SINGULAR_EPS = 1e-14

# imaginary parts visited on the way from Im z = 1 down to the real axis
_CONTINUATION = tuple(10.0 ** -k for k in range(0, 11))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralWeights:
    """A discrete probability measure on ``[0, inf)``.

    Used for population spectra ``H`` / ``H_p`` and for empirical spectral
    distributions.  Integrals against it are exact weighted sums.
    """

    atoms: tuple
    weights: tuple

    def __post_init__(self):
        atoms = tuple(float(a) for a in np.ravel(self.atoms))
        weights = tuple(float(w) for w in np.ravel(self.weights))
        if not atoms:
            raise ValueError("SpectralWeights needs at least one atom")
        if len(atoms) != len(weights):
            raise ValueError("atoms and weights must have the same length")
        if any(a < 0 or not math.isfinite(a) for a in atoms):
            raise ValueError("atoms must be finite and nonnegative")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, t=1.0):
        return cls((t,), (1.0,))

    @classmethod
    def from_values(cls, values, decimals=12):
        """Empirical measure of ``values`` (ties merged after rounding)."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("empty spectrum")
        uniq, counts = np.unique(np.round(values, decimals), return_counts=True)
        weights = counts / counts.sum()
        # restore exact normalization lost to float division
        weights[-1] = 1.0 - math.fsum(weights[:-1])
        return cls(tuple(uniq), tuple(weights))

    @cached_property
    def t(self):
        return np.asarray(self.atoms)

    @cached_property
    def w(self):
        return np.asarray(self.weights)

    def integrate(self, phi):
        """Return ``sum_i w_i * phi(t_i)``."""
        return np.sum(self.w * phi(self.t))

    @property
    def mass_at_zero(self):
        return float(self.w[self.t == 0.0].sum())

    def to_dict(self):
        return {"atoms": list(self.atoms), "weights": list(self.weights)}


@dataclass(frozen=True)
class Ratio:
    """Dimension-to-sample-size ratio, optionally remembering ``(p, n)``."""

    value: float
    p: int | None = None
    n: int | None = None

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise InvalidRatio(f"ratio must be finite and >= 0, got {self.value}")

    @classmethod
    def of(cls, p, n):
        if p < 1 or n < 1:
            raise InvalidRatio("p and n must be positive")
        return cls(p / n, p, n)

    @classmethod
    def centralized(cls, p, n):
        """The ratio ``p/(n-1)`` used to center statistics of centralized matrices."""
        if n < 2:
            raise InvalidRatio("centralized ratio needs n >= 2")
        return cls(p / (n - 1), p, n - 1)

    @classmethod
    def limit(cls, y):
        return cls(float(y))

    def __float__(self):
        return float(self.value)


def as_ratio(ratio):
    return ratio if isinstance(ratio, Ratio) else Ratio.limit(ratio)


@dataclass(frozen=True)
class CompanionValue:
    z: complex
    m_under: complex
    m: complex
    ratio: Ratio
    residual: float
    h: SpectralWeights = field(default=None, repr=False, compare=False)

    @property
    def y(self):
        return self.ratio.value


# ---------------------------------------------------------------------------
# generic vectorized solver
# ---------------------------------------------------------------------------


def _newton_solve(z, m0, inner, tol, maxiter):
    """Solve ``-1/m + inner(m) = z`` for ``m``, vectorized over ``z``.

    ``inner`` returns ``(value, derivative)``.  Each iteration tries a Newton
    step and keeps it only if it lowers the residual (and, for ``Im z > 0``,
    stays in the upper half-plane); otherwise the contraction
    ``m <- 1/(inner(m) - z)`` is taken.  Real ``z`` gets Newton only.
    A point freezes one iteration after first meeting ``tol``.
    """
    m = m0.copy()
    real_z = z.imag == 0
    val, dval = inner(m)
    with np.errstate(all="ignore"):
        res = np.abs(-1.0 / m + val - z)
    done = np.zeros(m.shape, dtype=bool)
    for _ in range(maxiter):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        ma, za, ra = m[idx], z[idx], res[idx]
        va, dva, rz = val[idx], dval[idx], real_z[idx]
        with np.errstate(all="ignore"):
            cand = ma - (-1.0 / ma + va - za) / (1.0 / ma**2 + dva)
        ok = np.isfinite(cand) & ((cand.imag > 0) | rz)
        cand = np.where(ok, cand, ma)
        cv, cdv = inner(cand)
        with np.errstate(all="ignore"):
            cres = np.abs(-1.0 / cand + cv - za)
        better = ok & (cres < ra)
        new_m = np.where(better, cand, ma)
        new_v = np.where(better, cv, va)
        new_dv = np.where(better, cdv, dva)
        new_r = np.where(better, cres, ra)
        fp = ~better & ~rz & ~(ra <= tol)
        if fp.any():
            with np.errstate(all="ignore"):
                mf = 1.0 / (va[fp] - za[fp])
            fv, fdv = inner(mf)
            with np.errstate(all="ignore"):
                new_r[fp] = np.abs(-1.0 / mf + fv - za[fp])
            new_m[fp], new_v[fp], new_dv[fp] = mf, fv, fdv
        m[idx], val[idx], dval[idx], res[idx] = new_m, new_v, new_dv, new_r
        stuck = ~better & ~fp
        done[idx] = (ra <= tol) | stuck
    return m, res


def _continuation_solve(z, inner, tol=DEFAULT_TOL, maxiter=MAX_ITER):
    """Solve for arbitrary complex ``z`` (either half-plane, real allowed).

    Lower half-plane points are solved by conjugation.  Every point starts
    at ``Im = max(Im z, 1)`` and walks down the continuation ladder to its own
    imaginary part; real points finish with a Newton solve on the axis.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    lower = z.imag < 0
    zu = np.where(lower, z.conj(), z)
    x, v = zu.real, zu.imag
    m = -1.0 / (x + 1j * np.maximum(v, 1.0))
    for eta in _CONTINUATION:
        stage = v < eta
        if not stage.any():
            break
        zs = x[stage] + 1j * eta
        m[stage], _ = _newton_solve(zs, m[stage], inner, tol, maxiter)
    m, res = _newton_solve(zu, m, inner, tol, maxiter)
    m = np.where(lower, m.conj(), m)
    return m.reshape(shape), res.reshape(shape)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class _SilversteinModel:
    """Shared machinery for models defined by a companion fixed-point equation."""

    y: float

    def _inner(self, m):  # pragma: no cover - abstract
        raise NotImplementedError

    def stieltjes(self, z, m_under):
        raise NotImplementedError

    def support_intervals(self):
        """Closed intervals carrying the continuous part, or ``None`` if unknown."""
        return None

    @property
    def atom_at_zero(self):
        return 0.0

    @property
    def support(self):
        iv = self.support_intervals()
        return (iv[0][0], iv[-1][1])

    def _check_real_points(self, z):
        iv = self.support_intervals()
        if iv is None:
            return
        lo, hi = iv[0][0], iv[-1][1]
        gap = 1e-3 * max(hi - lo, 1e-12)
        xr = np.asarray(z)[np.asarray(z).imag == 0].real
        for a, b in iv:
            if np.any((xr > a - gap) & (xr < b + gap)):
                raise InvalidPoint(f"real z within {gap:.2e} of support [{a:.6g}, {b:.6g}]")
        if np.any(np.abs(xr) < 1e-12):
            raise InvalidPoint("z = 0 is a pole of the companion transform")

    def companion(self, z, tol=DEFAULT_TOL, maxiter=MAX_ITER, strict=True):
        """Vectorized companion transform; raises if any point misses ``tol``."""
        z = np.asarray(z, dtype=complex)
        if strict:
            self._check_real_points(z)
        m, res = _continuation_solve(z, self._inner, tol, maxiter)
        if strict:
            bad = ~(res <= tol)
            if bad.any():
                raise NonConvergence("companion solver", float(np.nanmax(res)))
            real = z.imag == 0
            if real.any():
                mr = m[real]
                if np.any(np.abs(mr.imag) > 1e-9 * np.maximum(np.abs(mr), 1.0)):
                    raise InvalidPoint("real z lies inside the spectral support")
                m = m.copy()
                m[real] = mr.real
        return m, res

    def boundary_companion(self, x, eps_schedule=(), tol=DEFAULT_TOL, maxiter=200):
        """Boundary values ``m_under(x + i0)`` for real ``x``.

        Solves along ``x + i*eps`` for each ``eps`` in the schedule, then
        polishes at ``eps = 0``.  Inside the support the axis equation has a
        conjugate pair of roots; the one with ``Im >= 0`` is returned.  Where
        the axis polish fails the last schedule value is kept.
        """
        x = np.asarray(x, dtype=float).ravel()
        z0 = x + 1j * (eps_schedule[0] if len(eps_schedule) else 1.0)
        m, _ = _continuation_solve(z0, self._inner, tol, maxiter)
        for eps in eps_schedule[1:]:
            m, _ = _newton_solve(x + 1j * eps, m, self._inner, tol, maxiter)
        last = m.copy()
        # axis polish: plain Newton, any half-plane
        mr = m.copy()
        for _ in range(maxiter):
            val, dval = self._inner(mr)
            f = -1.0 / mr + val - x
            with np.errstate(all="ignore"):
                step = f / (1.0 / mr**2 + dval)
            mr = mr - np.where(np.isfinite(step), step, 0)
            if np.all(np.abs(f) <= tol):
                break
        val, _ = self._inner(mr)
        ok = np.isfinite(mr) & (np.abs(-1.0 / mr + val - x) <= 1e3 * tol)
        mr = np.where(mr.imag < 0, mr.conj(), mr)
        return np.where(ok, mr, last)

    def density(self, x, eps_schedule=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)):
        """Continuous-part density at real ``x`` via Stieltjes inversion."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0
        if pos.any():
            mu = self.boundary_companion(x[pos], eps_schedule)
            m = self.stieltjes(x[pos] + 0j, mu)
            out[pos] = np.maximum(m.imag, 0.0) / np.pi
        return out


class CovarianceLSD(_SilversteinModel):
    """Limiting spectral law ``F^{y,H}`` of ``T^{1/2} X X^* T^{1/2} / n``."""

    def __init__(self, ratio, h):
        self.ratio = as_ratio(ratio)
        self.y = float(self.ratio.value)
        self.h = h
        self._t = h.t
        self._w = h.w

    def _inner(self, m):
        d = 1.0 + m[..., None] * self._t
        val = self.y * np.sum(self._w * self._t / d, axis=-1)
        dval = -self.y * np.sum(self._w * self._t**2 / d**2, axis=-1)
        return val, dval

    def stieltjes(self, z, m_under):
        d = 1.0 + np.asarray(m_under)[..., None] * self._t
        return -np.sum(self._w / d, axis=-1) / np.asarray(z)

    @property
    def atom_at_zero(self):
        h0 = self.h.mass_at_zero
        if self.y == 0:
            return h0
        return max(0.0, 1.0 - min(1.0 - h0, 1.0 / self.y))

    def support_intervals(self):
        return _covariance_support(self.y, self.h)


class FMatrixLSD(_SilversteinModel):
    """Limiting spectral law ``F_{(y1, y2)}`` of ``S_x S_y^{-1}``.

    The population measure is the law of ``1/t`` under the Marchenko-Pastur
    law with ratio ``y2``, so the inner integral is
    ``y1 * integral dF_{y2}(t) / (t + m_under) = y1 * m_MP(-m_under)``.
    """

    def __init__(self, y1, y2):
        if not y1 > 0:
            raise InvalidRatio("y1 must be positive")
        if not 0 < y2 < 1:
            raise InvalidRatio("y2 must lie in (0, 1)")
        self.y = self.y1 = float(y1)
        self.y2 = float(y2)

    def _inner(self, m):
        zeta = -np.asarray(m, dtype=complex)
        mm, dmm = _mp_stieltjes_and_derivative(zeta, self.y2)
        return self.y1 * mm, -self.y1 * dmm

    def stieltjes(self, z, m_under):
        m_under = np.asarray(m_under)
        mm, _ = _mp_stieltjes_and_derivative(-m_under, self.y2)
        return -(1.0 - m_under * mm) / np.asarray(z)

    @property
    def atom_at_zero(self):
        return max(0.0, 1.0 - 1.0 / self.y1)

    def support_intervals(self):
        return [f_support(self.y1, self.y2)]


class EmpiricalConditionalLSD(_SilversteinModel):
    """Model driven by a realized spectrum ``{t_i}`` of ``S_y``.

    Population measure is the ESD of ``S_y^{-1}``; the inner integral is
    ``y * (1/p) sum_i 1/(t_i + m_under)``.
    """

    def __init__(self, ratio, sy_eigs):
        t = np.asarray(sy_eigs, dtype=float).ravel()
        if t.size == 0 or np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise SingularInput("S_y eigenvalues must be finite and positive")
        self.ratio = as_ratio(ratio)
        self.y = float(self.ratio.value)
        self._s = t

    def _inner(self, m):
        d = self._s + np.asarray(m)[..., None]
        return self.y * np.mean(1.0 / d, axis=-1), -self.y * np.mean(1.0 / d**2, axis=-1)

    def stieltjes(self, z, m_under):
        d = self._s + np.asarray(m_under)[..., None]
        return -np.mean(self._s / d, axis=-1) / np.asarray(z)

    @property
    def atom_at_zero(self):
        return max(0.0, 1.0 - 1.0 / self.y) if self.y > 0 else 0.0


# ---------------------------------------------------------------------------
# support of F^{y,H} for discrete H
# ---------------------------------------------------------------------------


def _critical_values(y, h):
    """Real critical points of ``x(m) = -1/m + y*sum w t/(1+t m)``."""
    keep = h.t > 0
    t, w = h.t[keep], h.w[keep]
    P = np.polynomial.Polynomial
    if t.size == 0 or y == 0:
        return np.array([]), np.array([])
    sq = [P([1.0, ti]) ** 2 for ti in t]
    prod_all = P([1.0])
    for s in sq:
        prod_all = prod_all * s
    acc = P([0.0])
    for i, (ti, wi) in enumerate(zip(t, w)):
        term = P([wi * ti**2])
        for j, s in enumerate(sq):
            if j != i:
                term = term * s
        acc = acc + term
    poly = prod_all - y * P([0.0, 0.0, 1.0]) * acc
    roots = poly.roots()
    scale = max(1.0, np.max(np.abs(roots))) if roots.size else 1.0
    roots = roots[np.abs(roots.imag) < 1e-9 * scale].real
    poles = np.concatenate([[0.0], -1.0 / t])
    roots = roots[np.min(np.abs(roots[:, None] - poles[None, :]), axis=1) > 1e-12] if roots.size else roots
    xs = -1.0 / roots + y * np.sum(w * t / (1.0 + np.outer(roots, t)), axis=1) if roots.size else roots
    return roots, xs


_SUPPORT_CACHE = {}


def _covariance_support(y, h):
    key = (y, h)
    if key in _SUPPORT_CACHE:
        return _SUPPORT_CACHE[key]
    if y == 0:
        pos = sorted(set(a for a in h.atoms))
        result = [(a, a) for a in pos]
        _SUPPORT_CACHE[key] = result
        return result
    if len([a for a in h.atoms if a > 0]) > 16:
        return None
    _, xs = _critical_values(y, h)
    # the support sits in [0, inf), so 0 is always a candidate edge
    edges = np.unique(np.round(np.concatenate([[0.0], xs[xs > -1e-12].clip(min=0.0)]), 14))
    model = CovarianceLSD(y, h)
    intervals = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        d = model.density(np.array([mid]))[0]
        if d > 1e-9:
            if intervals and abs(intervals[-1][1] - a) < 1e-12:
                intervals[-1] = (intervals[-1][0], float(b))
            else:
                intervals.append((float(a), float(b)))
    if not intervals:
        result = None
    else:
        result = intervals
    _SUPPORT_CACHE[key] = result
    return result


# ---------------------------------------------------------------------------
# Marchenko-Pastur closed form
# ---------------------------------------------------------------------------


def _mp_roots(z, y):
    """Both roots of ``z m^2 + (z + 1 - y) m + 1 = 0`` (numerically stable)."""
    z = np.asarray(z, dtype=complex)
    b = z + 1.0 - y
    disc = np.sqrt(b * b - 4.0 * z)
    # choose the sign that avoids cancellation
    sgn = np.where((b.conj() * disc).real >= 0, 1.0, -1.0)
    q = -0.5 * (b + sgn * disc)
    with np.errstate(all="ignore"):
        r1 = q / z
        r2 = 1.0 / q
    return r1, r2, disc


def _mp_companion(z, y):
    """Vectorized companion transform for ``H = delta_1``.

    Off the axis the root with ``sign(Im m) = sign(Im z)``; on the axis the
    real root on the increasing branch of ``x(m)`` (the one continuous with
    ``-1/z`` at infinity if both qualify).
    """
    z = np.asarray(z, dtype=complex)
    r1, r2, _ = _mp_roots(z, y)
    s = np.sign(z.imag)
    out = np.where((r1.imag * s) > (r2.imag * s), r1, r2)
    real = s == 0
    if real.any():
        a, b = r1[real].real, r2[real].real
        with np.errstate(all="ignore"):
            inc_a = 1.0 / a**2 - y / (1.0 + a) ** 2 > 0
            inc_b = 1.0 / b**2 - y / (1.0 + b) ** 2 > 0
            ref = -1.0 / z[real].real
        closer_a = np.abs(a - ref) <= np.abs(b - ref)
        pick_a = inc_a & (~inc_b | closer_a)
        out[real] = np.where(pick_a, a, b)
        complex_pair = np.abs(r1[real].imag) > 1e-12 * np.maximum(np.abs(r1[real]), 1.0)
        if complex_pair.any():
            raise BranchError("inner Marchenko-Pastur evaluation inside its support")
    return out


def _mp_stieltjes_and_derivative(zeta, y):
    """Stieltjes transform of the MP law (ratio ``y``) and its derivative."""
    zeta = np.asarray(zeta, dtype=complex)
    mu = _mp_companion(zeta, y)
    s = np.sign(zeta.imag)
    if np.any(mu.imag * s < 0):
        raise BranchError("inner Marchenko-Pastur value on the wrong half-plane")
    one = 1.0 + mu
    m = -1.0 / (zeta * one)
    dmu = 1.0 / (1.0 / mu**2 - y / one**2)
    dm = 1.0 / (zeta**2 * one) + dmu / (zeta * one**2)
    return m, dm


def mp_quadratic(z, y):
    """Closed-form companion transform for an identity population.

    Root of ``z m^2 + (z + 1 - y) m + 1 = 0``: the one with ``Im m > 0`` when
    ``Im z > 0``; for real ``z`` outside ``[(1-sqrt y)^2, (1+sqrt y)^2]`` the
    real root on the increasing branch of ``x(m)``.
    """
    z = complex(z)
    if y < 0:
        raise InvalidRatio("y must be >= 0")
    r1, r2, disc = (complex(v) for v in _mp_roots(z, y))
    if z.imag != 0:
        s = math.copysign(1.0, z.imag)
        return r1 if r1.imag * s > r2.imag * s else r2
    if z == 0:
        raise BranchAmbiguity("z = 0")
    x = z.real
    if abs(disc) <= 1e-12 * max(1.0, abs(z.real + 1 - y)):
        raise BranchAmbiguity(f"z = {x} sits on a support edge")
    if abs(disc.imag) > 0 and abs(disc.real) < abs(disc.imag):
        # inside the support: return the upper boundary value
        return r1 if r1.imag > r2.imag else r2

    def slope(m):
        return 1.0 / m**2 - y / (1.0 + m) ** 2

    cands = [r.real for r in (r1, r2) if math.isfinite(r.real) and r.real != 0 and r.real != -1]
    inc = [m for m in cands if slope(m) > 0]
    if len(inc) == 1:
        return complex(inc[0])
    if not inc:
        raise BranchAmbiguity(f"no increasing-branch root at z = {x}")
    # both increasing: the Stieltjes value is the one continuous with -1/z at infinity
    return complex(min(inc, key=lambda m: abs(m + 1.0 / x)))


# ---------------------------------------------------------------------------
# public scalar operations
# ---------------------------------------------------------------------------


def _residual(z, m, y, h):
    return abs(z - (-1.0 / m + y * h.integrate(lambda t: t / (1.0 + t * m))))


def solve_companion(z, ratio, h, tol=DEFAULT_TOL):
    """Solve the Silverstein equation at a single point.

    Parameters
    ----------
    z : complex
        Evaluation point; ``Im z != 0`` or real and away from the support.
    ratio : Ratio or float
        Dimension ratio ``y``.  ``y = 0`` gives ``m_under = -1/z``.
    h : SpectralWeights
        Population spectral distribution.
    tol : float
        Bound on the returned residual.

    Returns
    -------
    CompanionValue
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ratio = as_ratio(ratio)
    z = complex(z)
    model = CovarianceLSD(ratio, h)
    m_arr, res_arr = model.companion(np.array([z]), tol=tol)
    m_under = complex(m_arr[0])
    m = complex(model.stieltjes(np.array([z]), m_arr)[0])
    if z.imag == 0:
        m = complex(m.real)
    return CompanionValue(z, m_under, m, ratio, _residual(z, m_under, ratio.value, h), h)


def companion_derivative(cv, h=None):
    """``d m_under / dz`` from differentiating the fixed-point equation."""
    h = cv.h if h is None else h
    m = cv.m_under
    den = 1.0 / m**2 - cv.y * h.integrate(lambda t: t**2 / (1.0 + t * m) ** 2)
    if abs(den) < SINGULAR_EPS:
        raise NearSingular(f"derivative denominator {abs(den):.2e} at z = {cv.z}")
    return 1.0 / den


def g_factor(cv):
    """``g(z) = 1 + z*m_under(z)``, the limit of ``gamma_k^* A^{-1} gamma_k``."""
    return 1.0 + cv.z * cv.m_under


def g_factor_prime(cv, h=None):
    """``g'(z) = m_under + z*m_under'``."""
    return cv.m_under + cv.z * companion_derivative(cv, h)


def finite_n_pair(z, p, n, h_p, tol=DEFAULT_TOL):
    """Stieltjes transforms ``(m_n^0(z), m_{n-1}^0(z))`` at ratios ``p/n`` and ``p/(n-1)``."""
    if n < 2:
        raise InvalidRatio("finite_n_pair needs n >= 2")
    a = solve_companion(z, Ratio.of(p, n), h_p, tol)
    b = solve_companion(z, Ratio.centralized(p, n), h_p, tol)
    return a.m, b.m


def shift_limit(z, y, h, tol=DEFAULT_TOL):
    """Limit ``L(z)`` of ``p*(m_n^0 - m_{n-1}^0)``: ``g(z) g'(z) / (z m_under)``."""
    cv = solve_companion(z, y, h, tol)
    mu = cv.m_under
    return (1.0 + cv.z * mu) * (mu + cv.z * companion_derivative(cv, h)) / (cv.z * mu)


def combined_correction_limit(z, y, h, tol=DEFAULT_TOL):
    """Limit of ``tr(S - z)^{-1} - tr(B - z)^{-1}``: ``g(z) g'(z) / (-z m_under)``."""
    cv = solve_companion(z, y, h, tol)
    return g_factor(cv) * g_factor_prime(cv) / (-cv.z * cv.m_under)


def pan_integrand(z, y, h, tol=DEFAULT_TOL):
    """Integrand of the additive bias correction for centralized covariances.

    ``y m int t dH/(1+t m)^2 / (z (1 - y int m^2 t^2 dH/(1+t m)^2))`` with
    ``m = m_under(z)``.  Reported as a diagnostic next to :func:`shift_limit`.
    """
    y = float(y)
    if y == 0:
        return 0j
    cv = solve_companion(z, y, h, tol)
    m = cv.m_under
    num = y * m * h.integrate(lambda t: t / (1.0 + t * m) ** 2)
    den = cv.z * (1.0 - y * h.integrate(lambda t: m**2 * t**2 / (1.0 + t * m) ** 2))
    if abs(den) < SINGULAR_EPS:
        raise NearSingular("bias integrand denominator vanishes")
    return num / den


def f_support(y1, y2):
    """Support ``((1-h)^2/(1-y2)^2, (1+h)^2/(1-y2)^2)``, ``h = sqrt(y1 + y2 - y1 y2)``."""
    if not y1 > 0 and y1 != 0:
        raise InvalidRatio("y1 must be >= 0")
    if not 0 <= y2 < 1:
        raise InvalidRatio("y2 must lie in [0, 1)")
    hh = math.sqrt(y1 + y2 - y1 * y2)
    c = (1.0 - y2) ** 2
    return ((1.0 - hh) ** 2 / c, (1.0 + hh) ** 2 / c)


def f_lsd_transform(z, y1, y2, tol=DEFAULT_TOL):
    """Companion transform of the F-matrix limit at ``z`` (upper half-plane branch)."""
    z = complex(z)
    if y1 == 0:
        return -1.0 / z
    model = FMatrixLSD(y1, y2)
    m, _ = model.companion(np.array([z]), tol=tol)
    return complex(m[0])


def empirical_conditional_transform(z, ratio, sy_eigs, tol=DEFAULT_TOL):
    """Companion transform with population ``F^{S_y^{-1}}`` given realized ``S_y`` eigenvalues."""
    model = EmpiricalConditionalLSD(ratio, sy_eigs)
    m, _ = model.companion(np.array([complex(z)]), tol=tol)
    return complex(m[0])
