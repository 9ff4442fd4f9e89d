"""Smooth upper bounds on the local sensitivity of depth-based estimators.

Every bound has the form S = max_k exp(-k beta) a_k, where a_k bounds the
local sensitivity of the estimator over datasets within k substitutions of
the input. The per-k values are kept in a trace for diagnostics.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import as_rows
from .depth import (
    BOUNDED_LEVEL,
    HalfspaceRegions,
    candidate_fits,
    deepest_regression,
    general_position_check,
    tukey_median,
)
from .geometry import FeasibleRegion, extend_hull, l1_diameter

_PLATEAU_TOL = 1e-12
_CELL_CHUNK = 256


@dataclass(frozen=True, eq=False)
class SmoothBound:
    value: float
    beta: float
    trace: list = field(default_factory=list)
    argmax_k: int = 0

    @property
    def a(self):
        """Per-k sensitivity bounds a_k in trace order."""
        return np.array([t[1] for t in self.trace])


@dataclass(frozen=True)
class MedsweepGrid:
    """Cell widths for the ratio bound, plus a cap on the cells one box may span.

    A box needing more than ``max_cells`` cells gets the clip width as its
    term, which keeps work and memory bounded on widely spread data.
    """

    c_u: float
    c_v: float
    max_cells: int = 50_000

    def __post_init__(self):
        if not (self.c_u > 0 and self.c_v > 0):
            raise ValueError("grid cell widths must be positive")
        if self.max_cells < 1:
            raise ValueError("max_cells must be positive")

    @classmethod
    def default(cls, n):
        w = 8.0 / n**0.75
        return cls(w, w)


class _TraceBuilder:
    def __init__(self, beta):
        self.beta = beta
        self.trace = []
        self.best = -math.inf
        self.best_k = 0

    def add(self, k, a):
        w = math.exp(-k * self.beta) * a if a > 0 else 0.0
        self.trace.append((k, float(a), w))
        if w > self.best:
            self.best, self.best_k = w, k
        return w

    def dominated(self, k, cap):
        """True once no term from k on can exceed the running maximum."""
        return math.exp(-k * self.beta) * cap <= self.best

    def result(self):
        return SmoothBound(max(self.best, 0.0), self.beta, self.trace, self.best_k)


def _check_beta(beta):
    if not beta > 0:
        raise ValueError("beta must be positive")


# -------------------------------------------------------------------- median


def median_smooth_sensitivity(values, beta, interval, relaxed=False):
    """Smooth sensitivity of the median clipped to ``interval``.

    Order statistics are 0-indexed with lo = ceil(n/2) - 1 and hi = floor(n/2)
    (equal for odd n), so the bound covers any estimate between x_(lo) and
    x_(hi), such as the averaged median or the mean of the deepest points.
    Out-of-range order statistics are -inf below and +inf above. With
    ``relaxed`` the per-k term is the simpler spread
    x_(hi+k+1) - x_(lo-k-1), which is at most twice the tight term.
    """
    _check_beta(beta)
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ValueError("empty input")
    if isinstance(interval, FeasibleRegion):
        a, b = interval.bounds
    else:
        a, b = interval
    width = b - a
    lo, hi = (n + 1) // 2 - 1, n // 2
    padded = np.concatenate([np.full(n + 2, -np.inf), x, np.full(n + 2, np.inf)])
    off = n + 2

    def xs(idx):
        return padded[np.asarray(idx) + off]

    tb = _TraceBuilder(beta)
    for k in range(n + 1):
        if relaxed:
            ak = min(b, xs(hi + k + 1)) - max(a, xs(lo - k - 1))
        else:
            t = np.arange(k + 2)
            ak = float(np.max(np.minimum(b, xs(hi + t)) - np.maximum(a, xs(lo + t - k - 1))))
        ak = max(float(ak), 0.0)
        tb.add(k, ak)
        if ak >= width - _PLATEAU_TOL or tb.dominated(k + 1, width):
            break
    return tb.result()


# ------------------------------------------------------------ depth contours


def _contour_level(k, m, kbar, relaxed):
    """Depth level whose contour bounds a_k, or None for the whole region."""
    if relaxed:
        return m - 2 * k - 2 if 2 * k < m - 2 else None
    if k + 1 <= kbar:
        return m - 2 * k - 2
    if k + 1 < m - kbar:
        return m - k - 1 - kbar
    return None


class _NestedHulls:
    """Convex hulls of {anchors with depth >= level} for decreasing levels."""

    def __init__(self, points, depths):
        order = np.argsort(-depths, kind="stable")
        self.points = points[order]
        self.depths = depths[order]
        self.taken = 0
        self.hull = None

    def at(self, level):
        stop = int(np.searchsorted(-self.depths, -level, side="right"))
        if stop > self.taken:
            self.hull = extend_hull(self.hull, self.points[self.taken : stop])
            self.taken = stop
        return self.hull if self.taken else None


def halfspace_contour_source(data, regions=None):
    """(level -> region vertices or None, maximal depth) for planar halfspace depth."""
    regions = regions or HalfspaceRegions(data)

    def hull_at(level):
        verts = regions.polygon(level)
        return verts if len(verts) else None

    return hull_at, regions.max_depth()


def regression_contour_source(fits):
    """(level -> hull of pair fits or None, maximal depth) for regression depth."""
    return _NestedHulls(fits.theta, fits.depth).at, int(fits.depth.max())


def contour_hulls(hull_at, m, n, d, relaxed=False):
    """Yield (k, level, unclipped hull or None) until the whole-region case starts."""
    kbar = m - math.ceil(n / (1 + d))
    for k in range(n + 1):
        level = _contour_level(k, m, kbar, relaxed)
        if level is None:
            yield k, None, None
            return
        yield k, level, (hull_at(level) if level >= 1 else None)


def _contour_bound(source, n, d, beta, region, relaxed=False, min_level=1):
    """Levels below ``min_level`` have unbounded regions and take diam(region)."""
    if region.dim != 2:
        raise ValueError("contour bounds need a planar region")
    diam = region.diameter
    tb = _TraceBuilder(beta)
    for k, level, hull in contour_hulls(*source, n, d, relaxed):
        if level is None or level < min_level or hull is None:
            ak = diam
        else:
            clipped = region.clip(hull)
            ak = l1_diameter(clipped) if len(clipped) else diam
            if ak >= diam - _PLATEAU_TOL:
                ak = diam  # rounding in the clip can overshoot the region
        tb.add(k, ak)
        if level is None or ak >= diam - _PLATEAU_TOL or tb.dominated(k + 1, diam):
            break
    return tb.result()


def tukey_smooth_sensitivity(data, beta, region, relaxed=False, check_general_position=True, regions=None):
    """Smooth sensitivity of the Tukey median over ``region``.

    One-dimensional data use the closed-form median bound. In the plane the
    a_k are L1 diameters of exact halfspace-depth regions clipped to
    ``region``; without general position pass ``relaxed=True`` for the looser
    variant. ``regions`` reuses a precomputed :class:`HalfspaceRegions`.
    """
    _check_beta(beta)
    pts = as_rows(data)
    if pts.shape[1] == 1:
        return median_smooth_sensitivity(pts[:, 0], beta, region)
    if not relaxed and check_general_position and not general_position_check(pts):
        raise ValueError("data are not in general position; dither them or use relaxed=True")
    return _contour_bound(halfspace_contour_source(pts, regions), len(pts), 2, beta, region, relaxed)


def tukey_smooth_sensitivity_relaxed(data, beta, region):
    """Tukey-median bound valid without the general-position assumption."""
    return tukey_smooth_sensitivity(data, beta, region, relaxed=True)


def regdepth_smooth_sensitivity(data, beta, region, fits=None):
    """Smooth sensitivity of the deepest regression over a planar ``region``.

    Contours are anchored at the exact-fit lines through pairs of
    observations; pass ``fits`` to reuse a precomputed candidate table.
    """
    _check_beta(beta)
    rows = as_rows(data)
    if fits is None:
        fits = candidate_fits(rows)
    if len(fits) == 0:
        raise ValueError("all covariate values are equal; the slope is not identifiable")
    return _contour_bound(
        regression_contour_source(fits), len(rows), 2, beta, region, min_level=BOUNDED_LEVEL["regression"]
    )


# ----------------------------------------------------------- median of ratios


def _cell_bounds(u, v, ju, jv, grid):
    """Sorted lower and upper bounds of (u_i - cu)/(v_i - cv) over each cell."""
    u0 = ju * grid.c_u
    v0 = jv * grid.c_v
    us = np.stack([u0, u0 + grid.c_u])  # (2, C)
    vs = np.stack([v0, v0 + grid.c_v])
    num = u[None, None, :] - us[:, :, None]  # (2, C, n)
    den = v[None, None, :] - vs[:, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = num[:, None, :, :] / den[None, :, :, :]  # (2, 2, C, n)
    q = q.reshape(4, len(ju), len(u))
    lower = q.min(axis=0)
    upper = q.max(axis=0)
    pole = (v[None, :] >= v0[:, None]) & (v[None, :] <= (v0 + grid.c_v)[:, None])
    lower[pole] = -np.inf
    upper[pole] = np.inf
    lower.sort(axis=1)
    upper.sort(axis=1)
    return lower.min(axis=0), upper.max(axis=0)


def medsweep_ratio_smooth_sensitivity(u, v, beta, L, U, grid=None):
    """Smooth sensitivity of the clipped median of de-medianed ratios.

    The estimator is clip(med((u - med u) / (v - med v)), L, U) with
    med(z) = z_(floor(n/2)) (0-indexed). For each k the possible centres
    (med u, med v) of datasets within k + 1 substitutions form a box; it is
    covered by cells of a fixed grid and every ratio is bounded over each
    cell through the cell corners, with infinite bounds when the cell spans
    the pole v_i. The two centres entering a local-sensitivity term are
    bounded independently, so the sorted bounds are reduced over all covering
    cells before the order-statistic differences are taken. The term at k is
    max_t upper_(m+t) - lower_(m+t-2k-1) over t = 0..2k+1; its k = 0 value is
    the usual one, and the wider spread makes the term at k + 1 of any
    neighbour at least the term at k, which is what smoothness needs.
    """
    _check_beta(beta)
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    n = len(u)
    if n != len(v) or n < 3:
        raise ValueError("u and v need equal length n >= 3")
    if not L <= U:
        raise ValueError("need L <= U")
    grid = grid or MedsweepGrid.default(n)
    width = U - L
    tb = _TraceBuilder(beta)
    if width == 0:
        tb.add(0, 0.0)
        return tb.result()
    m = n // 2
    su, sv = np.sort(u), np.sort(v)
    max_upper = np.full(n, -np.inf)
    min_lower = np.full(n, np.inf)
    seen = None  # (ju_lo, ju_hi, jv_lo, jv_hi) already folded in
    for k in range(m):
        if m - k < 2:
            local = np.inf
        else:
            box = (
                math.floor(su[m - k - 1] / grid.c_u),
                math.floor(su[m + k + 1] / grid.c_u),
                math.floor(sv[m - k - 1] / grid.c_v),
                math.floor(sv[m + k + 1] / grid.c_v),
            )
            if (box[1] - box[0] + 1) * (box[3] - box[2] + 1) > grid.max_cells:
                # boxes only grow with k, and a neighbour's box at k + 1 holds this one
                tb.add(k, width)
                break
            ju, jv = _new_cells(box, seen)
            seen = box
            for c in range(0, len(ju), _CELL_CHUNK):
                lo_b, up_b = _cell_bounds(u, v, ju[c : c + _CELL_CHUNK], jv[c : c + _CELL_CHUNK], grid)
                np.minimum(min_lower, lo_b, out=min_lower)
                np.maximum(max_upper, up_b, out=max_upper)
            # spread 2k + 1 rather than k + 1: one substituted record can lift the
            # upper order statistics and lower the lower ones at the same time
            w = 2 * k + 1
            t = np.arange(w + 1)
            local = float(np.max(_at(max_upper, m + t, np.inf) - _at(min_lower, m + t - w, -np.inf)))
        tb.add(k, min(local, width))
        if local >= width or tb.dominated(k + 1, width):
            break
    return tb.result()


def _at(sorted_vals, idx, outside):
    """Order statistics with ``outside`` beyond either end."""
    ok = (idx >= 0) & (idx < len(sorted_vals))
    return np.where(ok, sorted_vals[np.clip(idx, 0, len(sorted_vals) - 1)], outside)


def _new_cells(box, seen):
    a0, a1, b0, b1 = box
    ju, jv = np.meshgrid(np.arange(a0, a1 + 1), np.arange(b0, b1 + 1), indexing="ij")
    ju, jv = ju.ravel(), jv.ravel()
    if seen is not None:
        s0, s1, t0, t1 = seen
        old = (ju >= s0) & (ju <= s1) & (jv >= t0) & (jv <= t1)
        ju, jv = ju[~old], jv[~old]
    return ju.astype(float), jv.astype(float)


# --------------------------------------------------------------- LS oracle


def _estimator_fn(estimator, region):
    if estimator == "median":
        a, b = region.bounds if region is not None else (-np.inf, np.inf)
        return lambda rows: np.clip(np.atleast_1d(tukey_median(rows[:, :1]).theta), a, b)
    if estimator == "tukey":
        return lambda rows: tukey_median(rows).theta
    if estimator == "deepest-reg":
        return lambda rows: deepest_regression(rows).theta
    raise ValueError(f"unknown estimator {estimator!r}")


def local_sensitivity_at_distance_oracle(data, k, estimator, trial_count, rng, region=None, inner=8):
    """Randomised lower bound on the local sensitivity at distance ``k``.

    Each trial moves up to ``k`` records to random positions, then measures
    how far single substitutions move the estimate. Draws for distance j do
    not depend on ``k``, so for a fixed ``rng`` the result is monotone in k.
    """
    rows = as_rows(data).copy()
    n, dim = rows.shape
    f = _estimator_fn(estimator, region)
    if region is not None and region.dim == 2:
        lo, hi = region.vertices.min(axis=0), region.vertices.max(axis=0)
    elif region is not None:
        lo, hi = np.full(dim, region.bounds[0]), np.full(dim, region.bounds[1])
    else:
        span = rows.max(axis=0) - rows.min(axis=0) + 1.0
        lo, hi = rows.min(axis=0) - span, rows.max(axis=0) + span
    best = 0.0
    for trial in range(trial_count):
        src = rng.child(trial, 0)
        who = src.generator.permutation(n)
        moved = lo + (hi - lo) * src.uniform((n, dim))
        cur = rows.copy()
        for j in range(min(k, n) + 1):
            if j > 0:
                cur[who[j - 1]] = moved[j - 1]
            base = f(cur)
            nb_src = rng.child(trial, 1, j)
            for _ in range(inner):
                alt = cur.copy()
                alt[nb_src.generator.integers(n)] = lo + (hi - lo) * nb_src.uniform(dim)
                best = max(best, float(np.abs(f(alt) - base).sum()))
    return best

