"""Rectangle contour integrals by trapezoid quadrature with point doubling."""

from __future__ import annotations

import numpy as np

from .errors import NonConvergence, OriginInside

DEFAULT_HALF_HEIGHT = 0.5
DEFAULT_POINTS = 1024
DEFAULT_TOL = 1e-9
MAX_DOUBLINGS = 9


def rectangle(support, half_height=DEFAULT_HALF_HEIGHT, margin=None):
    """Corners ``(x_left, x_right, v)`` of the rectangle around ``support``.

    ``margin`` may be a scalar or a ``(left, right)`` pair; the default is
    10% of the support width on both sides (at least 0.05 for point supports).
    """
    lo, hi = map(float, support)
    width = hi - lo
    if margin is None:
        margin = max(0.1 * width, 0.05)
    left, right = (margin, margin) if np.isscalar(margin) else map(float, margin)
    return lo - left, hi + right, float(half_height)


def _sides(xl, xr, v):
    """Start points and edge vectors of the positively oriented rectangle."""
    starts = np.array([xl - 1j * v, xr - 1j * v, xr + 1j * v, xl + 1j * v])
    ends = np.roll(starts, -1)
    return starts, ends - starts


def contour_integrate(
    fn,
    support,
    half_height=DEFAULT_HALF_HEIGHT,
    points=DEFAULT_POINTS,
    *,
    margin=None,
    branch_at_origin=False,
    tol=DEFAULT_TOL,
    max_doublings=MAX_DOUBLINGS,
):
    """Compute ``(1/2 pi i) * closed integral of fn(z) dz`` around ``support``.

    The contour is the positively oriented rectangle
    ``[lo - dl, hi + dr] x [-v, v]``.  Each side is integrated with the
    composite trapezoid rule; the number of points doubles (only new nodes are
    evaluated) until successive Romberg-extrapolated totals differ by less
    than ``tol``.  ``fn`` must accept a complex ndarray.

    Raises
    ------
    OriginInside
        ``branch_at_origin`` is set and the rectangle contains ``z = 0``.
    NonConvergence
        ``tol`` not reached after ``max_doublings`` doublings.
    """
    if not half_height > 0:
        raise ValueError("half_height must be positive")
    xl, xr, v = rectangle(support, half_height, margin)
    if branch_at_origin and xl <= 0 <= xr:
        raise OriginInside(f"contour [{xl:.4g}, {xr:.4g}] x [-{v}, {v}] encloses the origin")
    starts, vecs = _sides(xl, xr, v)
    lengths = np.abs(vecs)
    # panels per side, proportional to side length, total about `points`
    panels = np.maximum(4, np.round(points * lengths / lengths.sum())).astype(int)

    # level 0: all nodes including both endpoints of every side
    s_nodes = [starts[k] + vecs[k] * np.linspace(0.0, 1.0, panels[k] + 1) for k in range(4)]
    vals = fn(np.concatenate(s_nodes))
    split = np.cumsum([len(s) for s in s_nodes])[:-1]
    f_sides = np.split(np.asarray(vals, dtype=complex), split)
    sums = [f[0] / 2 + f[1:-1].sum() + f[-1] / 2 for f in f_sides]

    def total(level_sums, level):
        return sum(vecs[k] / (panels[k] * 2**level) * level_sums[k] for k in range(4))

    table = [[total(sums, 0)]]
    for level in range(1, max_doublings + 1):
        count = panels * 2 ** (level - 1)
        mids = [starts[k] + vecs[k] * (np.arange(count[k]) + 0.5) / count[k] for k in range(4)]
        vals = fn(np.concatenate(mids))
        split = np.cumsum([len(s) for s in mids])[:-1]
        new = np.split(np.asarray(vals, dtype=complex), split)
        sums = [sums[k] + new[k].sum() for k in range(4)]
        row = [total(sums, level)]
        for j in range(1, level + 1):
            row.append(row[j - 1] + (row[j - 1] - table[-1][j - 1]) / (4**j - 1))
        table.append(row)
        if abs(row[-1] - table[-2][-1]) < tol * 2 * np.pi:
            return row[-1] / (2j * np.pi)
    raise NonConvergence(
        "contour quadrature", float(abs(table[-1][-1] - table[-2][-1]) / (2 * np.pi))
    )
