"""Halfspace and regression depth, their deepest points, and depth contours."""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cmp_to_key

import numpy as np

from .data import Dataset, as_rows
from .geometry import _CCW_ERRBOUND, _orient_exact, convex_hull, orient2d, orient2d_many

# angular gaps closer than this to a half-turn are settled exactly
_ANGLE_TOL = 1e-9
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class Estimate:
    theta: np.ndarray
    depth: int
    maximizer_count: int


@dataclass(frozen=True, eq=False)
class DepthContourSet:
    """Anchors with depth >= level and their convex hull clipped to the region.

    ``clipped_hull`` is None when no anchor reaches the level; it is an empty
    array when anchors exist but their hull misses the region.
    """

    level: int
    anchors: np.ndarray
    clipped_hull: np.ndarray | None

    @property
    def empty(self):
        return self.clipped_hull is None or len(self.clipped_hull) == 0


# ---------------------------------------------------------------- halfspace


def _hdepth_exact(theta, pts):
    tx, ty = Fraction(theta[0]), Fraction(theta[1])
    vecs = [(Fraction(p[0]) - tx, Fraction(p[1]) - ty) for p in pts]
    zero = sum(1 for v in vecs if v[0] == 0 and v[1] == 0)
    vecs = [v for v in vecs if v[0] != 0 or v[1] != 0]
    if not vecs:
        return zero
    best = 0
    for a in vecs:
        count = 0
        for b in vecs:
            cross = a[0] * b[1] - a[1] * b[0]
            if cross > 0 or (cross == 0 and a[0] * b[0] + a[1] * b[1] > 0):
                count += 1
        best = max(best, count)
    # the fullest open half-plane holds `best` points; its closed complement
    # through theta is the emptiest closed half-plane
    return zero + len(vecs) - best


def _hdepth_2d(theta, pts):
    v = pts - theta
    zero = (v[:, 0] == 0) & (v[:, 1] == 0)
    c0 = int(zero.sum())
    v = v[~zero]
    m = len(v)
    if m == 0:
        return c0
    phi = np.sort(np.arctan2(v[:, 1], v[:, 0]))
    ext = np.concatenate([phi, phi + 2 * np.pi, [np.inf]])
    end = phi + np.pi
    start = np.searchsorted(ext, phi, side="left")
    stop = np.searchsorted(ext, end, side="left")
    gap_after = ext[stop] - end
    gap_before = end - ext[np.maximum(stop - 1, 0)]
    if min(gap_after.min(), gap_before.min()) < _ANGLE_TOL:
        return _hdepth_exact(theta, pts)
    return c0 + m - int((stop - start).max())


def hdepth(theta, data):
    """Halfspace depth of ``theta``: fewest datapoints in a closed half-space through it."""
    pts = as_rows(data)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    d = pts.shape[1]
    if theta.shape != (d,):
        raise ValueError(f"theta has dimension {theta.size}, data has {d}")
    if d == 1:
        x = pts[:, 0]
        return int(min(np.sum(x <= theta[0]), np.sum(x >= theta[0])))
    if d == 2:
        return _hdepth_2d(theta, pts)
    raise ValueError("halfspace depth is implemented for d <= 2 only")


def halfspace_depths(data):
    """Halfspace depth of every datapoint."""
    pts = as_rows(data)
    if pts.shape[1] == 1:
        x = np.sort(pts[:, 0])
        le = np.searchsorted(x, pts[:, 0], side="right")
        ge = len(x) - np.searchsorted(x, pts[:, 0], side="left")
        return np.minimum(le, ge).astype(int)
    if pts.shape[1] != 2:
        raise ValueError("halfspace depth is implemented for d <= 2 only")
    return np.array([_hdepth_2d(p, pts) for p in pts], dtype=int)


def tukey_median(data, regions=None):
    """A point of maximal halfspace depth, with that depth.

    The estimate is the mean of the datapoints of maximal depth. In the plane
    no datapoint may reach the maximal depth (points in convex position, for
    example); the estimate is then the mean of the vertices of the deepest
    region. Pass ``regions`` to reuse a :class:`HalfspaceRegions` table.
    """
    pts = as_rows(data)
    depths = halfspace_depths(pts) if regions is None else regions.datapoint_depths
    m = int(depths.max())
    if pts.shape[1] == 2:
        regions = regions or HalfspaceRegions(pts, depths)
        top_level = regions.max_depth()
        if top_level > m:
            verts = regions.polygon(top_level)
            return Estimate(verts.mean(axis=0), top_level, len(verts))
    top = pts[depths == m]
    return Estimate(top.mean(axis=0), m, len(top))


def _clip_halfplane(poly, u, b):
    """Part of a ccw vertex list (polygon, segment or point) with u.p <= b."""
    s = poly @ u - b
    if np.all(s <= 0):
        return poly
    if np.all(s > 0):
        return poly[:0]
    h = len(poly)
    out = []
    for k in range(h):
        p, q = poly[k], poly[(k + 1) % h]
        sp, sq = s[k], s[(k + 1) % h]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            out.append(p + (sp / (sp - sq)) * (q - p))
    out = np.array(out)
    keep = np.any(out != np.roll(out, 1, axis=0), axis=1)
    keep[0] = keep[0] or len(out) == 1
    return out[keep] if keep.any() else out[:1]


class HalfspaceRegions:
    """Exact halfspace-depth regions of a planar point set.

    A point has depth >= l exactly when u.theta <= h_l(u) for every unit
    vector u, where h_l(u) is the l-th largest projection of the data on u.
    The point realising h_l only changes at normals of lines through two
    datapoints, so region l is cut out by the constraints at those normals
    whose tied block of projections covers rank l, together with a ring of
    fixed directions that keeps every gap between constraint normals below a
    half-turn. Regions are returned as ccw vertex arrays widened by a
    relative tolerance of 1e-9, which only ever enlarges them.
    """

    _RING = 16

    def __init__(self, data, depths=None):
        pts = as_rows(data, ncols=2)
        self.points = pts
        self.n = len(pts)
        self.datapoint_depths = halfspace_depths(pts) if depths is None else np.asarray(depths)
        self.tol = 1e-9 * (float(np.abs(pts).max()) + 1.0)
        ang = 2 * np.pi * np.arange(self._RING) / self._RING
        self._ring_u = np.column_stack([np.cos(ang), np.sin(ang)])
        self._ring_h = -np.sort(-(pts @ self._ring_u.T), axis=0)
        self._normals()
        self._cache = {}
        self._max = None

    def _normals(self):
        pts, n = self.points, self.n
        us, bs, rs, ts = [], [], [], []
        for i in range(n - 1):
            d = pts - pts[i]
            dup = (d[:, 0] == 0) & (d[:, 1] == 0)
            others = np.flatnonzero(~dup)
            later = others[others > i]
            if len(later) == 0:
                continue
            a = np.arctan2(d[others, 1], d[others, 0])
            srt = np.sort(a)
            ext = np.concatenate([srt - 2 * np.pi, srt, srt + 2 * np.pi])
            aj = np.arctan2(d[later, 1], d[later, 0])
            tol = _ANGLE_TOL
            left = np.searchsorted(ext, aj + np.pi - tol, "left") - np.searchsorted(ext, aj + tol, "right")
            near = np.searchsorted(ext, aj + tol, "right") - np.searchsorted(ext, aj - tol, "left")
            far = np.searchsorted(ext, aj + np.pi + tol, "right") - np.searchsorted(ext, aj + np.pi - tol, "left")
            col = np.ones(len(later), dtype=int)
            for q in np.flatnonzero((near > 1) | (far > 0)):
                side = orient2d_many(pts[i], pts[later[q]], pts[others])
                left[q] = int(np.sum(side > 0))
                col[q] = int(np.sum(side == 0))
            v = d[later]
            u = np.column_stack([-v[:, 1], v[:, 0]]) / np.hypot(v[:, 0], v[:, 1])[:, None]
            b = u @ pts[i]
            t = col + int(dup.sum())
            us += [u, -u]
            bs += [b, -b]
            rs += [left, n - left - t]
            ts += [t, t]
        if us:
            self._u = np.vstack(us)
            self._b = np.concatenate(bs)
            self._r = np.concatenate(rs)
            self._t = np.concatenate(ts)
        else:
            self._u = np.empty((0, 2))
            self._b = self._r = self._t = np.empty(0)

    def polygon(self, level):
        """Vertices of {theta : hdepth(theta) >= level}; empty when no point reaches it."""
        level = int(level)
        if level < 1:
            raise ValueError("depth regions are bounded from level 1 on")
        if level > self.n:
            return np.empty((0, 2))
        if level in self._cache:
            return self._cache[level]
        mask = (self._r < level) & (level <= self._r + self._t)
        U = np.vstack([self._ring_u, self._u[mask]])
        B = np.concatenate([self._ring_h[level - 1], self._b[mask]])
        tol = self.tol
        lo, hi = self.points.min(axis=0) - tol, self.points.max(axis=0) + tol
        poly = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
        while len(poly):
            worst = (poly @ U.T - B).max(axis=0)
            bad = np.flatnonzero(worst > tol)
            if len(bad) == 0:
                break
            for c in bad[np.argsort(-worst[bad])][:8]:
                poly = _clip_halfplane(poly, U[c], B[c] + 0.5 * tol)
                if len(poly) == 0:
                    break
        self._cache[level] = poly
        return poly

    def max_depth(self):
        """Largest level whose region is nonempty."""
        if self._max is None:
            m = int(self.datapoint_depths.max())
            while m < self.n and len(self.polygon(m + 1)):
                m += 1
            self._max = m
        return self._max


# --------------------------------------------------------------- regression


def _split_regression(data):
    rows = as_rows(data)
    if rows.shape[1] != 2:
        raise ValueError("regression depth is implemented for one covariate (d = 2) only")
    return rows[:, 0], rows[:, 1]


def _residual_signs(theta, x, y):
    # exact sign of y - (theta0 + theta1 x)
    t0, t1 = float(theta[0]), float(theta[1])
    tx = t1 * x
    r = y - (t0 + tx)
    bound = 4 * _EPS * (np.abs(y) + abs(t0) + np.abs(tx)) + 1e-300
    s = np.sign(r).astype(int)
    f0, f1 = Fraction(t0), Fraction(t1)
    for i in np.flatnonzero(np.abs(r) <= bound):
        ri = Fraction(y[i]) - f0 - f1 * Fraction(x[i])
        s[i] = (ri > 0) - (ri < 0)
    return s


def _x_cuts(xs_sorted):
    # positions between distinct covariate values, plus both ends
    change = np.flatnonzero(np.diff(xs_sorted) != 0) + 1
    return np.concatenate([[0], change, [len(xs_sorted)]])


def _depth_from_signs(signs, cuts):
    """Regression depth from residual signs ordered by covariate (rows = fits).

    Tilting a fit about a cut crosses the left points on one side of it and
    the right points on the other. With s the residual signs, z the zero
    count and c the running sign sum at the cut, the two crossing counts are
    (n + z + 2c - sum(s)) / 2 and (n + z - 2c + sum(s)) / 2.
    """
    signs = np.atleast_2d(signs)
    n = signs.shape[1]
    csum = np.zeros((signs.shape[0], n + 1), dtype=np.int32)
    np.cumsum(signs, axis=1, dtype=np.int32, out=csum[:, 1:])
    total = csum[:, -1:]
    zeros = n - np.count_nonzero(signs, axis=1)
    spread = np.abs(2 * csum[:, cuts] - total).max(axis=1)
    return (n + zeros - spread) // 2


def rdepth(theta, data):
    """Regression depth of the line y = theta0 + theta1 * x.

    Zero residuals count in every half-space, so observations on the line
    always add to the depth.
    """
    x, y = _split_regression(data)
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape != (2,):
        raise ValueError("theta must be (intercept, slope)")
    order = np.argsort(x, kind="stable")
    signs = _residual_signs(theta, x[order], y[order])
    return int(_depth_from_signs(signs, _x_cuts(x[order]))[0])


@dataclass(frozen=True, eq=False)
class CandidateFits:
    """Exact-fit lines through pairs of observations and their depths."""

    theta: np.ndarray
    depth: np.ndarray
    pairs: np.ndarray

    def __len__(self):
        return len(self.depth)

    def __iter__(self):
        return iter(zip(self.theta, self.depth.tolist()))


def candidate_fits(data, chunk_elems=1_000_000):
    """Every line through two observations with distinct x, with its regression depth.

    Residual signs of the other observations come from exact orientation
    tests, so the two defining points always have residual exactly zero.
    """
    x, y = _split_regression(data)
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    cuts = _x_cuts(xs)
    ii, jj = np.triu_indices(n, 1)
    keep = xs[ii] < xs[jj]
    ii, jj = ii[keep], jj[keep]
    if len(ii) == 0:
        return CandidateFits(np.empty((0, 2)), np.empty(0, dtype=int), np.empty((0, 2), dtype=int))
    dx = xs[jj] - xs[ii]
    slope = (ys[jj] - ys[ii]) / dx
    intercept = (xs[jj] * ys[ii] - xs[ii] * ys[jj]) / dx
    depth = np.empty(len(ii), dtype=int)
    step = max(1, chunk_elems // n)
    ymin, ymax = ys.min(), ys.max()
    for s in range(0, len(ii), step):
        i, j = ii[s : s + step], jj[s : s + step]
        ddx = (xs[j] - xs[i])[:, None]
        ddy = (ys[j] - ys[i])[:, None]
        det = ddx * (ys[None, :] - ys[i][:, None])
        det -= ddy * (xs[None, :] - xs[i][:, None])
        signs = np.sign(det).astype(np.int8)
        # row-wise bound dominating the per-entry orientation error bound
        ybig = np.maximum(np.abs(ymax - ys[i]), np.abs(ymin - ys[i]))[:, None]
        xbig = np.maximum(np.abs(xs[-1] - xs[i]), np.abs(xs[0] - xs[i]))[:, None]
        unsure = np.abs(det) <= _CCW_ERRBOUND * (np.abs(ddx) * ybig + np.abs(ddy) * xbig)
        rows = np.arange(len(i))
        signs[rows, i] = 0
        signs[rows, j] = 0
        unsure[rows, i] = False
        unsure[rows, j] = False
        for r, k in zip(*np.nonzero(unsure)):
            a, b = i[r], j[r]
            signs[r, k] = _orient_exact(xs[a], ys[a], xs[b], ys[b], xs[k], ys[k])
        depth[s : s + step] = _depth_from_signs(signs, cuts)
    pairs = np.column_stack([order[ii], order[jj]])
    return CandidateFits(np.column_stack([intercept, slope]), depth, pairs)


def deepest_regression(data, fits=None):
    """Mean of the maximal-depth candidate fits, as (intercept, slope)."""
    if fits is None:
        fits = candidate_fits(data)
    if len(fits) == 0:
        raise ValueError("all covariate values are equal; the slope is not identifiable")
    m = int(fits.depth.max())
    top = fits.theta[fits.depth == m]
    return Estimate(top.mean(axis=0), m, len(top))


# ----------------------------------------------------------------- contours


# Lowest level whose depth region is bounded. Every line through a single
# observation has regression depth at least 1, so that region is unbounded.
BOUNDED_LEVEL = {"halfspace": 1, "regression": 2}


def anchor_table(data, mode):
    """Anchor points and their depths for contour extraction.

    Regression regions are spanned by the exact fits through two
    observations. Halfspace regions are spanned by datapoints only on the
    line; planar halfspace regions come from :class:`HalfspaceRegions`.
    """
    if mode == "halfspace":
        pts = as_rows(data)
        if pts.shape[1] != 1:
            raise ValueError("planar halfspace regions are not spanned by datapoints")
        return pts, halfspace_depths(pts)
    if mode == "regression":
        fits = candidate_fits(data)
        return fits.theta, fits.depth
    raise ValueError(f"unknown depth mode {mode!r}")


def contour_from_table(points, depths, level, region):
    sel = points[depths >= level]
    if len(sel) == 0:
        return DepthContourSet(int(level), sel, None)
    if region.dim == 1:
        return DepthContourSet(int(level), sel, region.clip(sel))
    return DepthContourSet(int(level), sel, region.clip(convex_hull(sel)))


def contour(data, level, region, mode=None):
    """Depth region at ``level`` clipped to ``region``.

    ``anchors`` are the points spanning the region: datapoints on the line,
    region vertices for planar halfspace depth and exact pair fits for
    regression depth.
    """
    if level < 1:
        raise ValueError("contour level must be at least 1")
    if mode is None:
        mode = "regression" if isinstance(data, Dataset) and data.kind == "regression" else "halfspace"
    if mode == "regression" and level < BOUNDED_LEVEL[mode]:
        raise ValueError("regression depth regions below level 2 are unbounded")
    if mode == "halfspace" and as_rows(data).shape[1] == 2:
        if region.dim != 2:
            raise ValueError("region dimension does not match the data")
        verts = HalfspaceRegions(data).polygon(level)
        if len(verts) == 0:
            return DepthContourSet(int(level), verts, None)
        return DepthContourSet(int(level), verts, region.clip(verts))
    points, depths = anchor_table(data, mode)
    if region.dim != points.shape[1] and not (region.dim == 1 and points.shape[1] == 1):
        raise ValueError("region dimension does not match the data")
    return contour_from_table(points, depths, level, region)


# -------------------------------------------------------------- utilities


def dither(data, scale, rng):
    """Perturb every coordinate by independent Uniform(-scale, scale) noise."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    rows = as_rows(data)
    noise = (2.0 * rng.uniform(rows.shape) - 1.0) * scale
    out = rows + noise
    if isinstance(data, Dataset):
        return Dataset(out, data.kind)
    return out


def general_position_check(data):
    """True when no point (d=1) or line (d=2) holds more than d observations."""
    pts = as_rows(data)
    n, d = pts.shape
    if d == 1:
        return len(np.unique(pts[:, 0])) == n
    if d != 2:
        raise ValueError("general position is checked for d <= 2 only")
    if n <= 2:
        return True
    if len(np.unique(pts, axis=0)) < n:
        return False
    for i in range(n):
        others = np.delete(np.arange(n), i)
        v = pts[others] - pts[i]
        ang = np.mod(np.arctan2(v[:, 1], v[:, 0]), np.pi)
        order = np.argsort(ang)
        a = ang[order]
        close = np.flatnonzero(np.diff(a) < _ANGLE_TOL)
        pairs = [(order[k], order[k + 1]) for k in close]
        if a[-1] - a[0] > np.pi - _ANGLE_TOL:
            pairs.append((order[0], order[-1]))
        for p, q in pairs:
            if orient2d(pts[i], pts[others[p]], pts[others[q]]) == 0:
                return False
    return True


def _angle_cmp(a, b):
    ha = 0 if (a[1] > 0 or (a[1] == 0 and a[0] > 0)) else 1
    hb = 0 if (b[1] > 0 or (b[1] == 0 and b[0] > 0)) else 1
    if ha != hb:
        return ha - hb
    cross = a[0] * b[1] - a[1] * b[0]
    return -1 if cross > 0 else (1 if cross < 0 else 0)


def _origin_depth_bruteforce(vecs):
    zero = sum(1 for v in vecs if v[0] == 0 and v[1] == 0)
    vecs = [v for v in vecs if v[0] != 0 or v[1] != 0]
    if not vecs:
        return zero
    crit = []
    for v in vecs:
        crit.append((-v[1], v[0]))
        crit.append((v[1], -v[0]))
    crit.sort(key=cmp_to_key(_angle_cmp))
    dirs = list(crit)
    for k in range(len(crit)):
        a, b = crit[k], crit[(k + 1) % len(crit)]
        cross = a[0] * b[1] - a[1] * b[0]
        if cross > 0:
            dirs.append((a[0] + b[0], a[1] + b[1]))
        elif cross == 0 and a[0] * b[0] + a[1] * b[1] < 0:
            dirs.append((-a[1], a[0]))
    best = min(sum(1 for v in vecs if u[0] * v[0] + u[1] * v[1] >= 0) for u in dirs)
    return zero + best


def brute_force_depth(theta, data, mode="halfspace"):
    """Depth by exhaustive evaluation over data-induced directions, in exact arithmetic.

    Slow reference implementation: every direction normal to a line through
    ``theta`` and a datapoint is tried, together with one direction inside
    each angular gap between consecutive such normals. ``theta`` may hold
    :class:`fractions.Fraction` entries to evaluate an exact point.
    """
    rows = as_rows(data)
    theta = [t if isinstance(t, Fraction) else Fraction(float(t)) for t in np.atleast_1d(np.asarray(theta, dtype=object))]
    if mode == "halfspace":
        if rows.shape[1] == 1:
            xs = [Fraction(float(v)) for v in rows[:, 0]]
            return min(sum(v >= theta[0] for v in xs), sum(v <= theta[0] for v in xs))
        vecs = [(Fraction(float(p[0])) - theta[0], Fraction(float(p[1])) - theta[1]) for p in rows]
        return _origin_depth_bruteforce(vecs)
    if mode == "regression":
        vecs = []
        for xv, yv in rows[:, :2]:
            xf = Fraction(float(xv))
            r = Fraction(float(yv)) - theta[0] - theta[1] * xf
            s = (r > 0) - (r < 0)
            # the count -u.(1, x) sign(r) >= 0 is a halfspace count of -sign(r)(1, x)
            vecs.append((-s * Fraction(1), -s * xf))
        return _origin_depth_bruteforce(vecs)
    raise ValueError(f"unknown depth mode {mode!r}")


def depth_lower_bound(n, d):
    """The guaranteed depth of a deepest fit, ceil(n / (1 + d))."""
    return math.ceil(n / (1 + d))
