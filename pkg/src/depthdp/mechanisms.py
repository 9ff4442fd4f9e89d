"""Private releases of depth-based estimators and their random-DP variants."""

import math
from dataclasses import dataclass, replace

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
from .geometry import FeasibleRegion, clip_convex, convex_hull, enlarge_linf, l1_diameter
from .sensitivity import (
    MedsweepGrid,
    SmoothBound,
    contour_hulls,
    halfspace_contour_source,
    regression_contour_source,
    median_smooth_sensitivity,
    medsweep_ratio_smooth_sensitivity,
    regdepth_smooth_sensitivity,
    tukey_smooth_sensitivity,
)
from .special import NoiseCalibration, PrivacyBudget, calibrate, laplace_sample

DEFAULT_REGION_HALF_WIDTH = 50.0


class InfeasibleError(ValueError):
    """The sample is too small for the requested random-DP guarantee."""


@dataclass(frozen=True, eq=False)
class MechanismOutput:
    estimate: np.ndarray
    noise_scale: float
    calibration: NoiseCalibration
    smooth_bound: SmoothBound
    region: FeasibleRegion | None = None
    sweeps: list | None = None
    releases: int = 1
    n_mechs: int = 1
    point_estimate: np.ndarray | None = None
    inflation: "RdpInflation | None" = None


@dataclass(frozen=True)
class RdpInflation:
    kappa_star: float
    depth_cutoff: int
    feasible: bool
    enlargement_c: float = 0.0


def _release(theta, bound, cal, rng):
    scale = bound.value / cal.alpha
    noise = laplace_sample(rng, scale, size=len(theta))
    return theta + noise, scale


def _clip_to_region(theta, region):
    if region.dim == 1:
        return np.clip(theta, *region.bounds)
    return theta


def dp_tukey_median(data, region, budget, rng, relaxed=False, regions=None):
    """Tukey median plus Laplace noise scaled by its smooth sensitivity.

    One-dimensional estimates are clipped into the interval before noise is
    added, matching the clipped order statistics in the bound.
    """
    pts = as_rows(data)
    d = pts.shape[1]
    if d not in (1, 2):
        raise ValueError("the Tukey median release supports d = 1 or 2")
    if region is None or region.dim != d:
        raise ValueError("a bounded region of matching dimension is required")
    cal = calibrate(budget, d)
    if d == 1:
        theta = _clip_to_region(tukey_median(pts).theta, region)
        bound = median_smooth_sensitivity(pts[:, 0], cal.beta, region)
    else:
        regions = regions or HalfspaceRegions(pts)
        theta = tukey_median(pts, regions).theta
        bound = tukey_smooth_sensitivity(pts, cal.beta, region, relaxed=relaxed, regions=regions)
    est, scale = _release(theta, bound, cal, rng)
    return MechanismOutput(est, scale, cal, bound, region, point_estimate=theta)


def dp_deepest_reg(data, region, budget, rng, fits=None):
    """Deepest regression line (intercept, slope) with smooth-sensitivity noise."""
    rows = as_rows(data, ncols=2)
    if region is None or region.dim != 2:
        raise ValueError("a bounded planar region is required")
    cal = calibrate(budget, 2)
    if fits is None:
        fits = candidate_fits(rows)
    theta = deepest_regression(rows, fits).theta
    bound = regdepth_smooth_sensitivity(rows, cal.beta, region, fits=fits)
    est, scale = _release(theta, bound, cal, rng)
    return MechanismOutput(est, scale, cal, bound, region, point_estimate=theta)


# ------------------------------------------------------------------ medsweep


def _med(z):
    return np.sort(z)[len(z) // 2]


def median_of_ratios(u, v):
    """med((u - med u) / (v - med v)), with x/0 read as sign(x) * inf and 0/0 as 0."""
    num = u - _med(u)
    den = v - _med(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den != 0, num / np.where(den != 0, den, 1.0), np.sign(num) * np.inf)
    r = np.where((den == 0) & (num == 0), 0.0, r)
    return _med(r)


def medsweep_mechanism_count(d, max_iter):
    """Number of primitive releases a Medsweep fit with d parameters makes."""
    if d < 2 or max_iter < 1:
        raise ValueError("need d >= 2 and max_iter >= 1")
    if d == 2:
        return (d - 1) * max_iter + 1
    return (d - 1) * (d - 2) // 2 + (d - 1) * max_iter + 1


def dp_medsweep(X, y, L, U, budget, rng, tol=1e-4, max_iter=30, grid=None):
    """Private Medsweep regression; returns (intercept, slopes...).

    Covariates are first swept against each other, then the response is
    swept against each covariate until every update is below ``tol``. Each
    release is a clipped median of de-medianed ratios with its own smooth
    sensitivity noise; the intercept is a clipped median of the final
    residual. The budget is divided evenly over the maximal release count.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = X.copy()
    y = np.asarray(y, dtype=float).copy()
    n, p = X.shape
    if n == 0 or len(y) != n:
        raise ValueError("X and y need the same nonzero number of rows")
    if not L < U:
        raise ValueError("need L < U")
    d = p + 1
    n_mechs = medsweep_mechanism_count(d, max_iter)
    cal = calibrate(budget.split(n_mechs), 1, "univariate-exact")
    grid = grid or MedsweepGrid.default(n)
    sweeps = []

    def release(u, v, tag):
        bound = medsweep_ratio_smooth_sensitivity(u, v, cal.beta, L, U, grid)
        value = float(np.clip(median_of_ratios(u, v), L, U))
        scale = bound.value / cal.alpha
        noisy = value + laplace_sample(rng, scale)
        sweeps.append({**tag, "value": noisy, "noise_scale": scale})
        return noisy

    theta_x = np.zeros((p, p))
    for k in range(1, p):
        for i in range(k):
            theta_x[i, k] = release(X[:, k], X[:, i], {"stage": "x", "target": k, "by": i})
        for i in range(k):
            X[:, k] -= X[:, i] * theta_x[i, k]

    theta = np.zeros(d)
    for j in range(max_iter):
        step = np.zeros(p)
        for k in range(p):
            step[k] = release(y, X[:, k], {"stage": "y", "target": k, "iteration": j})
            theta[k + 1] += step[k]
            y -= step[k] * X[:, k]
        if np.all(np.abs(step) <= tol):
            break

    interval = FeasibleRegion.interval(L, U)
    bound = median_smooth_sensitivity(y, cal.beta, interval)
    intercept = float(np.clip(_med(y), L, U))
    scale = bound.value / cal.alpha
    theta[0] = intercept + laplace_sample(rng, scale)
    sweeps.append({"stage": "intercept", "value": theta[0], "noise_scale": scale})

    # coefficients were fitted on swept covariates; map them back
    for k in range(p - 1, 0, -1):
        for i in range(k - 1, -1, -1):
            theta[i + 1] -= theta[k + 1] * theta_x[i, k]
    return MechanismOutput(
        theta, scale, cal, bound, interval, sweeps=sweeps, releases=len(sweeps), n_mechs=n_mechs
    )


# ------------------------------------------------------------ random DP


def _kappa_closed_form(n, log_const, gamma):
    log_term = math.log(gamma) - log_const
    return (math.sqrt(4.0 - 2.0 * (n - 2) * log_term) + 2.0) / (2.0 * (n - 2))


def _log1p_pow(base, power):
    # log(base**power + 1) without overflow
    if power == 0:
        return math.log(2.0)
    lp = power * math.log(base)
    return lp + math.log1p(math.exp(-lp))


def _check_rdp_args(n, d, gamma):
    if n <= 2:
        raise ValueError("need n >= 3")
    if d < 1:
        raise ValueError("need d >= 1")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")


def kappa_star_tukey(n, d, gamma):
    """Depth-cut radius for the random-DP Tukey median."""
    _check_rdp_args(n, d, gamma)
    log_const = math.log(16.0) + _log1p_pow(n * n - 1.0, d)
    kappa = _kappa_closed_form(n, log_const, gamma)
    cutoff = math.ceil(2 * n * kappa)
    return RdpInflation(kappa, cutoff, cutoff < math.ceil(n / (1 + d)))


def kappa_star_reg(n, d, gamma):
    """Depth-cut radius for the random-DP deepest regression."""
    _check_rdp_args(n, d, gamma)
    log_const = math.log(128.0) + 4.0 * _log1p_pow(n * n - 1.0, d - 1)
    kappa = _kappa_closed_form(n, log_const, gamma)
    cutoff = math.ceil(2 * n * kappa)
    return RdpInflation(kappa, cutoff, cutoff < math.ceil(n / (1 + d)))


def median_min_sample_size(gamma):
    """Smallest real n for which the random-DP median interval is defined."""
    lg = math.log(gamma)
    return 2.0 * (-lg + math.sqrt((lg - 4.0) * lg + 3.0) + 2.0)


def kappa_star_median(n, gamma):
    """Order-statistic radius for the random-DP median."""
    if n < 1:
        raise ValueError("need n >= 1")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    kappa = math.sqrt((1.0 - math.log(gamma)) / n)
    return RdpInflation(kappa, math.ceil(2 * n * kappa), n >= median_min_sample_size(gamma))


def _need_gamma(budget):
    if budget.gamma is None:
        raise ValueError("random-DP releases need a budget with gamma")


def rdp_median(data, budget, rng, c=None):
    """Median released over a data-driven interval of order statistics."""
    _need_gamma(budget)
    x = np.sort(as_rows(data, ncols=1)[:, 0])
    n = len(x)
    infl = kappa_star_median(n, budget.gamma)
    if not infl.feasible:
        raise InfeasibleError(f"n = {n} is below the minimum {median_min_sample_size(budget.gamma):.2f}")
    lo = math.floor(n / 2 - n * infl.kappa_star)
    hi = math.ceil(n / 2 + n * infl.kappa_star)
    a, b = x[lo - 1], x[hi - 1]
    if c is None:
        c = 1e-6 * (b - a) if b > a else 1e-6
    if c < 0 or (c == 0 and a == b):
        raise ValueError("the enlargement c must be positive when the interval is a point")
    region = FeasibleRegion.interval(a - c, b + c)
    out = dp_tukey_median(x, region, PrivacyBudget(budget.epsilon, budget.delta), rng)
    return _with_inflation(out, RdpInflation(infl.kappa_star, infl.depth_cutoff, True, c))


def _with_inflation(out, infl):
    return replace(out, inflation=infl)


def _rdp_region(hull, c):
    if c > 0:
        hull = enlarge_linf(hull, c)
    if len(hull) < 3:
        raise ValueError("the depth cut is degenerate; pass a positive enlargement c")
    return FeasibleRegion.polygon(hull)


def rdp_tukey_median(data, budget, rng, c=0.0):
    """Tukey median released over its own deep halfspace-depth region."""
    _need_gamma(budget)
    pts = as_rows(data, ncols=2)
    n = len(pts)
    if not general_position_check(pts):
        raise ValueError("random-DP Tukey median needs data in general position")
    infl = kappa_star_tukey(n, 2, budget.gamma)
    if not infl.feasible:
        raise InfeasibleError(f"n = {n} is too small for gamma = {budget.gamma}")
    regions = HalfspaceRegions(pts)
    level = max(1, math.ceil(regions.max_depth() - 2 * n * infl.kappa_star))
    region = _rdp_region(regions.polygon(level), c)
    out = dp_tukey_median(pts, region, PrivacyBudget(budget.epsilon, budget.delta), rng, regions=regions)
    return _with_inflation(out, RdpInflation(infl.kappa_star, infl.depth_cutoff, True, c))


def rdp_deepest_reg(data, budget, rng, c=None):
    """Deepest regression released over the hull of its deep candidate fits."""
    _need_gamma(budget)
    rows = as_rows(data, ncols=2)
    n = len(rows)
    infl = kappa_star_reg(n, 2, budget.gamma)
    if not infl.feasible:
        raise InfeasibleError(f"n = {n} is too small for gamma = {budget.gamma}")
    fits = candidate_fits(rows)
    level = math.ceil(fits.depth.max() - 2 * n * infl.kappa_star)
    if level < BOUNDED_LEVEL["regression"]:
        raise InfeasibleError("the depth cut reaches an unbounded regression depth region")
    hull = convex_hull(fits.theta[fits.depth >= level])
    if c is None:
        c = 1e-6 * max(l1_diameter(hull), 1.0)
    region = _rdp_region(hull, c)
    out = dp_deepest_reg(rows, region, PrivacyBudget(budget.epsilon, budget.delta), rng, fits=fits)
    return _with_inflation(out, RdpInflation(infl.kappa_star, infl.depth_cutoff, True, c))


# ------------------------------------------------------- region diameter probe


def default_region(dim=2):
    h = DEFAULT_REGION_HALF_WIDTH
    return FeasibleRegion.box(-h, h, dim)


def _first_exceeding(f, lo, hi, target, iters=200):
    """Smallest x in [lo, hi] with f(x) > target for nondecreasing f (bisection)."""
    if f(hi) <= target:
        return math.inf
    if f(lo) > target:
        return lo
    for _ in range(iters):
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        if f(mid) > target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def min_feasible_diameter(data, budget, mechanism="deepest-reg", region=None, relaxed=False):
    """Diameter of the region beyond which enlarging it raises the noise scale.

    Regions are squares centred like ``region`` (default [-50, 50]^2). Each
    term exp(-k beta) a_k of the bound grows with the region in its own way;
    the answer is the first diameter at which some term overtakes the bound
    at ``region``. Returns ``region``'s own diameter when it already binds.
    """
    region = region or default_region()
    rows = as_rows(data, ncols=2)
    n = len(rows)
    cal = calibrate(budget, 2)
    beta = cal.beta
    if mechanism == "deepest-reg":
        fits = candidate_fits(rows)
        source = regression_contour_source(fits)
        s0 = regdepth_smooth_sensitivity(rows, beta, region, fits=fits).value
        min_level = BOUNDED_LEVEL["regression"]
    elif mechanism == "tukey":
        regions = HalfspaceRegions(rows)
        source = halfspace_contour_source(rows, regions)
        s0 = tukey_smooth_sensitivity(rows, beta, region, relaxed=relaxed, regions=regions).value
        min_level = BOUNDED_LEVEL["halfspace"]
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    d0 = region.diameter
    best = math.inf
    for k, level, hull in contour_hulls(*source, n, 2, relaxed):
        w = math.exp(-k * beta)
        # a clipped set never exceeds its square, so no later term can cross before s0 / w
        if s0 / w >= best:
            break
        if level is None or level < min_level or hull is None:
            best = min(best, max(d0, s0 / w))
            if level is None:
                break
            continue
        best = min(best, _term_crossing(hull, w, s0, region, d0))
    return best


def _term_crossing(hull, weight, s0, region, d0):
    """First diameter >= d0 at which weight * a_k(diameter) exceeds s0."""

    def clipped(diam):
        return clip_convex(hull, region.scaled_square(diam).vertices)

    def term(diam):
        c = clipped(diam)
        return weight * (l1_diameter(c) if len(c) else diam)

    if term(d0) > s0:
        return d0
    centre = 0.5 * (region.vertices.min(axis=0) + region.vertices.max(axis=0))
    reach = 4.0 * float(np.abs(hull - centre).max()) * (1 + 1e-9) + 1e-300
    full = max(reach, d0)
    out = math.inf
    # while the square misses the hull the fallback term equals weight * diam
    if len(clipped(d0)) == 0:
        enter = _first_exceeding(lambda dm: float(len(clipped(dm)) > 0), d0, full, 0.5)
        if s0 / weight < enter:
            return max(d0, s0 / weight)
        d0 = enter
    if weight * l1_diameter(hull) > s0:
        out = _first_exceeding(term, d0, full, s0)
    return out
