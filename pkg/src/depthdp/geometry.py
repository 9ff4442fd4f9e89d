"""Planar geometry with robust orientation tests: hulls, clipping, L1 diameters."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Shewchuk's static error bound for the 2x2 orientation determinant.
_CCW_ERRBOUND = (3.0 + 16.0 * np.finfo(float).eps) * np.finfo(float).eps


def _orient_exact(ax, ay, bx, by, cx, cy):
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def orient2d(a, b, c):
    """Sign of the turn a -> b -> c: +1 left, -1 right, 0 collinear (exact)."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])
    left = (bx - ax) * (cy - ay)
    right = (by - ay) * (cx - ax)
    det = left - right
    if abs(det) > _CCW_ERRBOUND * (abs(left) + abs(right)):
        return 1 if det > 0 else -1
    return _orient_exact(ax, ay, bx, by, cx, cy)


def orient2d_many(a, b, pts):
    """Vectorized :func:`orient2d` of fixed a, b against every row of ``pts``."""
    pts = np.asarray(pts, dtype=float)
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    left = (bx - ax) * (pts[:, 1] - ay)
    right = (by - ay) * (pts[:, 0] - ax)
    det = left - right
    out = np.sign(det).astype(int)
    unsure = np.abs(det) <= _CCW_ERRBOUND * (np.abs(left) + np.abs(right))
    for i in np.flatnonzero(unsure):
        out[i] = _orient_exact(ax, ay, bx, by, pts[i, 0], pts[i, 1])
    return out


def convex_hull(points):
    """Counterclockwise hull vertices (monotone chain, collinear points dropped).

    Returns an (h, 2) array; h is 1 for a single distinct point and 2 for a
    segment.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    pts = [tuple(p) for p in pts]

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and orient2d(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def _inside_hull_mask(hull, pts):
    # points strictly inside a ccw hull with >= 3 vertices; float test with margin
    n = len(hull)
    inside = np.ones(len(pts), dtype=bool)
    for i in range(n):
        a, b = hull[i], hull[(i + 1) % n]
        left = (b[0] - a[0]) * (pts[:, 1] - a[1])
        right = (b[1] - a[1]) * (pts[:, 0] - a[0])
        det = left - right
        inside &= det > 4 * _CCW_ERRBOUND * (np.abs(left) + np.abs(right))
    return inside


def extend_hull(hull, new_points):
    """Hull of ``hull`` vertices plus ``new_points``, skipping points clearly inside."""
    new_points = np.asarray(new_points, dtype=float).reshape(-1, 2)
    if hull is None or len(hull) == 0:
        return convex_hull(new_points)
    if len(new_points) == 0:
        return hull
    if len(hull) >= 3:
        new_points = new_points[~_inside_hull_mask(hull, new_points)]
    return convex_hull(np.vstack([hull, new_points]))


def clip_convex(subject, region):
    """Intersect a convex point set (vertex list, any size) with a convex ccw polygon.

    Sutherland-Hodgman against each closed edge half-plane. Returns an (h, 2)
    array of distinct vertices, possibly empty.
    """
    poly = [tuple(p) for p in np.asarray(subject, dtype=float).reshape(-1, 2)]
    clip = np.asarray(region, dtype=float)
    m = len(clip)
    for i in range(m):
        if not poly:
            break
        a, b = clip[i], clip[(i + 1) % m]
        sides = [orient2d(a, b, p) for p in poly]
        if min(sides) >= 0:
            continue
        out = []
        k = len(poly)
        for j in range(k):
            p, q = poly[j], poly[(j + 1) % k]
            sp, sq = sides[j], sides[(j + 1) % k]
            if sp >= 0:
                out.append(p)
            if (sp > 0 and sq < 0) or (sp < 0 and sq > 0):
                out.append(_segment_line_intersection(p, q, a, b))
        poly = out
    if not poly:
        return np.empty((0, 2))
    return np.unique(np.array(poly, dtype=float), axis=0)


def _segment_line_intersection(p, q, a, b):
    dx, dy = b[0] - a[0], b[1] - a[1]
    fp = dx * (p[1] - a[1]) - dy * (p[0] - a[0])
    fq = dx * (q[1] - a[1]) - dy * (q[0] - a[0])
    t = fp / (fp - fq)
    t = min(max(t, 0.0), 1.0)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def l1_diameter(shape):
    """Largest L1 distance between two points of an interval or convex polygon.

    Accepts a :class:`FeasibleRegion`, an ``(a, b)`` interval or an (h, 2)
    vertex array. In the plane |dx| + |dy| = max(|dx + dy|, |dx - dy|), so the
    diameter is the larger spread of the two rotated coordinates.
    """
    if isinstance(shape, FeasibleRegion):
        shape = shape.bounds if shape.dim == 1 else shape.vertices
    arr = np.asarray(shape, dtype=float)
    if arr.size == 0:
        return 0.0
    if arr.ndim == 1:
        return float(arr.max() - arr.min())
    s = arr[:, 0] + arr[:, 1]
    t = arr[:, 0] - arr[:, 1]
    return float(max(s.max() - s.min(), t.max() - t.min()))


@dataclass(frozen=True, eq=False)
class FeasibleRegion:
    """Candidate set for the estimate: an interval or a convex ccw polygon."""

    dim: int
    bounds: tuple | None = None
    vertices: np.ndarray | None = None

    def __post_init__(self):
        if self.dim == 1:
            a, b = (float(v) for v in self.bounds)
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"interval needs finite a < b, got {self.bounds}")
            object.__setattr__(self, "bounds", (a, b))
        elif self.dim == 2:
            v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
            if not np.all(np.isfinite(v)):
                raise ValueError("polygon vertices must be finite")
            hull = convex_hull(v)
            if len(hull) < 3 or len(hull) != len(np.unique(v, axis=0)):
                raise ValueError("polygon must be convex with at least 3 non-collinear vertices")
            object.__setattr__(self, "vertices", hull)
        else:
            raise ValueError("only intervals (dim 1) and polygons (dim 2) are supported")

    @classmethod
    def interval(cls, a, b):
        return cls(1, bounds=(a, b))

    @classmethod
    def polygon(cls, vertices):
        return cls(2, vertices=vertices)

    @classmethod
    def box(cls, lo, hi, dim=2):
        """[lo, hi] in one dimension or the square [lo, hi]^2."""
        if dim == 1:
            return cls.interval(lo, hi)
        return cls.polygon([(lo, lo), (hi, lo), (hi, hi), (lo, hi)])

    @property
    def diameter(self):
        return l1_diameter(self)

    def contains(self, point, tol=0.0):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if self.dim == 1:
            a, b = self.bounds
            return bool(a - tol <= point[0] <= b + tol)
        v = self.vertices
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            cross = (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0])
            if cross < -tol * np.hypot(b[0] - a[0], b[1] - a[1]):
                return False
        return True

    def clip(self, points):
        """Clipped hull of a convex vertex set (interval endpoints in 1-d)."""
        if self.dim == 1:
            pts = np.asarray(points, dtype=float).ravel()
            if pts.size == 0:
                return np.empty(0)
            lo, hi = max(pts.min(), self.bounds[0]), min(pts.max(), self.bounds[1])
            return np.array([lo, hi]) if lo <= hi else np.empty(0)
        return clip_convex(points, self.vertices)

    def scaled_square(self, diameter):
        """Square with the given L1 diameter centred where this region is centred."""
        if self.dim == 1:
            c = 0.5 * sum(self.bounds)
            return FeasibleRegion.interval(c - diameter / 2, c + diameter / 2)
        c = 0.5 * (self.vertices.min(axis=0) + self.vertices.max(axis=0))
        h = diameter / 4.0
        return FeasibleRegion.polygon(
            [(c[0] - h, c[1] - h), (c[0] + h, c[1] - h), (c[0] + h, c[1] + h), (c[0] - h, c[1] + h)]
        )

    def __repr__(self):
        if self.dim == 1:
            return f"FeasibleRegion.interval({self.bounds[0]}, {self.bounds[1]})"
        return f"FeasibleRegion.polygon({self.vertices.tolist()})"


def enlarge_linf(hull, c):
    """Minkowski sum of a convex vertex set with the L-infinity ball of radius c."""
    hull = np.asarray(hull, dtype=float).reshape(-1, 2)
    offsets = np.array([(-c, -c), (c, -c), (c, c), (-c, c)])
    return convex_hull((hull[:, None, :] + offsets[None, :, :]).reshape(-1, 2))
