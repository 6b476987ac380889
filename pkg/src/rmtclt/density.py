"""Spectral densities by Stieltjes inversion on a grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stieltjes import CovarianceLSD, FMatrixLSD, as_ratio

DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
EDGE_LEVEL = 1e-6


@dataclass(frozen=True)
class GridDensity:
    """Continuous part of a spectral law sampled on a grid, plus an atom at 0."""

    support_lo: float
    support_hi: float
    xs: np.ndarray
    density: np.ndarray
    atom_at_zero: float
    intervals: tuple = ()

    def total_mass(self):
        return float(np.trapezoid(self.density, self.xs)) + self.atom_at_zero

    def moment(self, k):
        return float(np.trapezoid(self.xs**k * self.density, self.xs))

    def cdf(self, x):
        """Distribution function (atom included) by cumulative trapezoid."""
        from scipy.integrate import cumulative_trapezoid

        c = cumulative_trapezoid(self.density, self.xs, initial=0.0)
        return self.atom_at_zero * (np.asarray(x) >= 0) + np.interp(x, self.xs, c, left=0.0)

    def to_csv(self, fh):
        fh.write("x,density\n")
        for x, d in zip(self.xs, self.density):
            fh.write(f"{float(x)!r},{float(d)!r}\n")


def _locate_edges(model, xs, dens, eps_schedule, level=EDGE_LEVEL, iters=60):
    """Refine every grid crossing of ``level`` by bisection on the true density."""
    above = dens > level
    flips = np.flatnonzero(above[1:] != above[:-1])
    if flips.size == 0:
        return []
    a, b = xs[flips].copy(), xs[flips + 1].copy()
    rising = ~above[flips]
    for _ in range(iters):
        mid = 0.5 * (a + b)
        up = model.density(mid, eps_schedule) > level
        # keep the bracket [a, b] with a on the same side as the left grid point
        go_right = up != rising
        a = np.where(go_right, mid, a)
        b = np.where(go_right, b, mid)
    edges = 0.5 * (a + b)
    out = []
    start = xs[0] if above[0] else None
    for e, r in zip(edges, rising):
        if r:
            start = e
        elif start is not None:
            out.append((float(start), float(e)))
            start = None
    if start is not None:
        out.append((float(start), float(xs[-1])))
    return out


def _invert(model, nominal, grid_size, eps_schedule):
    if grid_size < 256:
        raise ValueError("grid_size must be >= 256")
    eps_schedule = tuple(eps_schedule)
    if not eps_schedule or eps_schedule[-1] < 1e-6 or any(
        b >= a for a, b in zip(eps_schedule, eps_schedule[1:])
    ):
        raise ValueError("eps_schedule must be strictly decreasing and end >= 1e-6")
    lo, hi = nominal
    pad = 0.1 * (hi - lo)
    xs = np.linspace(lo - pad, hi + pad, grid_size)
    dens = model.density(xs, eps_schedule)
    # Im m at finite eps leaves roundoff-level mass outside the support
    dens[dens < 1e-14 * max(dens.max(), 1.0)] = 0.0
    intervals = _locate_edges(model, xs, dens, eps_schedule)
    if intervals:
        s_lo, s_hi = intervals[0][0], intervals[-1][1]
    else:
        s_lo, s_hi = lo, hi
    return GridDensity(s_lo, s_hi, xs, dens, model.atom_at_zero, tuple(intervals))


def invert_density(ratio, h, grid_size=8192, eps_schedule=DEFAULT_EPS):
    """Density of ``F^{y,H}`` on a grid spanning the support plus 10% margins.

    Values are ``Im m(x + i0)/pi``: the companion equation is solved along
    ``x + i*eps`` for each ``eps`` in ``eps_schedule`` and then polished on
    the real axis.  Support endpoints are where the density crosses 1e-6.
    """
    model = CovarianceLSD(as_ratio(ratio), h)
    iv = model.support_intervals()
    if iv is None:
        raise ValueError("support of this population could not be bracketed")
    return _invert(model, (iv[0][0], iv[-1][1]), grid_size, eps_schedule)


def invert_f_density(y1, y2, grid_size=8192, eps_schedule=DEFAULT_EPS):
    """Density of the F-matrix limit ``F_{(y1, y2)}``, as :func:`invert_density`."""
    model = FMatrixLSD(y1, y2)
    return _invert(model, model.support, grid_size, eps_schedule)


def integrate_density(model, f, intervals, nodes=2048, eps_schedule=DEFAULT_EPS):
    """``integral f dF`` by quadrature of the inverted density, atom included.

    Each support interval ``[a, b]`` is mapped through
    ``x = (a+b)/2 - (b-a)/2 cos(theta)``, which turns square-root edges into
    smooth endpoints so the trapezoid rule in ``theta`` converges fast.
    """
    total = 0.0
    theta = np.linspace(0.0, np.pi, nodes + 1)
    wts = np.full(theta.shape, np.pi / nodes)
    wts[[0, -1]] *= 0.5
    for a, b in intervals:
        x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(theta)
        jac = 0.5 * (b - a) * np.sin(theta)
        inner = (x > a) & (x < b)
        vals = np.zeros(x.shape)
        vals[inner] = model.density(x[inner], eps_schedule) * np.real(f(x[inner] + 0j))
        total += float(np.sum(wts * jac * vals))
    atom = model.atom_at_zero
    if atom > 0:
        total += atom * float(np.real(f(np.array([0.0 + 0j]))[0]))
    return total
