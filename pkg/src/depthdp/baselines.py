"""Reference regression estimators used for comparison in simulations."""

import math
from dataclasses import dataclass

import numpy as np

from .data import as_rows
from .special import as_random_source, laplace_sample


@dataclass(frozen=True)
class BoundingBox:
    """The square [-c, c]^2 holding at least a fraction psi of the points."""

    c: float
    retained_count: int
    psi: float

    def contains(self, rows):
        rows = np.asarray(rows, dtype=float)
        return np.all(np.abs(rows) <= self.c, axis=1)


@dataclass(frozen=True)
class BaselineResult:
    prediction_at: tuple
    predictions: tuple | None
    failed: bool = False
    failure_reason: str | None = None
    noise_scale: float = float("nan")

    def __post_init__(self):
        if self.failed and self.predictions is not None:
            raise ValueError("a failed result carries no predictions")
        if not self.failed and self.predictions is None:
            raise ValueError("a successful result needs predictions")

    @classmethod
    def from_line(cls, intercept, slope, at, noise_scale=float("nan")):
        at = tuple(float(a) for a in at)
        return cls(at, tuple(float(intercept + slope * a) for a in at), noise_scale=noise_scale)

    @classmethod
    def failure(cls, at, reason):
        return cls(tuple(float(a) for a in at), None, True, reason)


DEFAULT_EVAL_POINTS = (-0.5, 0.5)


def _xy(data):
    rows = as_rows(data, ncols=2)
    return rows[:, 0], rows[:, 1]


def psi_bounding_box(data, psi=0.98):
    """Smallest c such that ceil(psi * n) points lie in [-c, c]^2 (non-private)."""
    if not 0 < psi <= 1:
        raise ValueError("psi must lie in (0, 1]")
    x, y = _xy(data)
    radius = np.sort(np.maximum(np.abs(x), np.abs(y)))
    need = math.ceil(psi * len(radius))
    c = float(radius[need - 1])
    return BoundingBox(c, int(np.sum(radius <= c)), psi)


def _inside(data, box):
    x, y = _xy(data)
    keep = (np.abs(x) <= box.c) & (np.abs(y) <= box.c)
    return x[keep], y[keep]


def noisy_stats(data, box, epsilon, rng, at=DEFAULT_EVAL_POINTS):
    """OLS from Laplace-perturbed sufficient statistics of the in-box points.

    The centred sums of squares and cross products each take a third of the
    budget; the intercept takes the last third. A non-positive noisy sum of
    squares ends the release with a failure.
    """
    rng = as_random_source(rng)
    x, y = _inside(data, box)
    n = len(x)
    if n == 0:
        return BaselineResult.failure(at, "no points inside the bounding box")
    width = 2.0 * box.c
    eps = epsilon / 3.0
    sens = width * width * (1.0 - 1.0 / n)
    xc, yc = x - x.mean(), y - y.mean()
    var_scale = sens / eps
    nvar = float(xc @ xc) + laplace_sample(rng.child(0), var_scale)
    ncov = float(xc @ yc) + laplace_sample(rng.child(1), var_scale)
    if nvar <= 0:
        return BaselineResult.failure(at, "noisy variance of x is not positive")
    slope = ncov / nvar
    int_scale = width * (1.0 + abs(slope)) / (n * eps)
    intercept = (y.mean() - slope * x.mean()) + laplace_sample(rng.child(2), int_scale)
    return BaselineResult.from_line(intercept, slope, at, noise_scale=var_scale)


def exp_mech_median(values, lo, hi, epsilon, rng):
    """Exponential-mechanism median on [lo, hi] with utility -|rank - n/2|.

    Values are clipped into the range; the output is uniform within an
    interval chosen with weight length * exp(epsilon * utility / 2).
    """
    z = np.clip(np.sort(np.asarray(values, dtype=float)), lo, hi)
    n = len(z)
    edges = np.concatenate([[lo], z, [hi]])
    lengths = np.diff(edges)
    utility = -np.abs(np.arange(n + 1) - n / 2.0)
    with np.errstate(divide="ignore"):
        logw = np.log(lengths) + 0.5 * epsilon * utility
    if not np.any(np.isfinite(logw)):
        return float(edges[np.argmax(utility)])
    p = np.exp(logw - logw.max())
    cdf = np.cumsum(p / p.sum())
    u = rng.uniform(2)
    j = min(int(np.searchsorted(cdf, u[0], side="right")), n)
    return float(edges[j] + u[1] * lengths[j])


def theil_sen_pairs(n, rng):
    """Random disjoint matching of indices, so each point enters one pair."""
    perm = np.argsort(rng.uniform(n))
    m = n // 2
    return perm[:m], perm[m : 2 * m]


def dp_theil_sen(data, box, epsilon, rng, at=DEFAULT_EVAL_POINTS):
    """Theil-Sen line with private medians of matched-pair slopes and intercept terms."""
    rng = as_random_source(rng)
    x, y = _inside(data, box)
    if len(np.unique(x)) < 2:
        return BaselineResult.failure(at, "fewer than two distinct x values")
    i, j = theil_sen_pairs(len(x), rng.child(0))
    dx = x[j] - x[i]
    usable = dx != 0
    if not np.any(usable):
        return BaselineResult.failure(at, "no matched pair with distinct x values")
    slopes = (y[j] - y[i])[usable] / dx[usable]
    a1, a2 = at
    bound = 2.0 * box.c / abs(a2 - a1)
    slope = exp_mech_median(slopes, -bound, bound, epsilon / 2.0, rng.child(1))
    terms = y - slope * x
    reach = box.c * (1.0 + abs(slope))
    intercept = exp_mech_median(terms, -reach, reach, epsilon / 2.0, rng.child(2))
    return BaselineResult.from_line(intercept, slope, at)


GRAD_CLIP = 10.0
GRAD_STEPS = 30
GRAD_STEP_SIZE = 0.1


def dp_grad_desc(data, epsilon, delta, rng, at=DEFAULT_EVAL_POINTS,
                 steps=GRAD_STEPS, step_size=GRAD_STEP_SIZE, clip=GRAD_CLIP):
    """Noisy gradient descent for least squares from the origin.

    Per-example gradients are clipped coordinatewise to [-clip, clip]; the
    averaged gradient has L1 sensitivity 4 * clip / n and gets Laplace noise
    at budget epsilon / steps per step. The Laplace release is pure, so
    ``delta`` is accepted for the (epsilon, delta) contract but unused.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    rng = as_random_source(rng)
    x, y = _xy(data)
    n = len(x)
    scale = 4.0 * clip / n / (epsilon / steps)
    theta = np.zeros(2)
    for t in range(steps):
        resid = theta[0] + theta[1] * x - y
        grads = np.clip(np.column_stack([resid, resid * x]), -clip, clip)
        noisy = grads.mean(axis=0) + laplace_sample(rng.child(t), scale, size=2)
        theta = theta - step_size * noisy
    return BaselineResult.from_line(theta[0], theta[1], at, noise_scale=scale)


def ols_fit(data):
    """(intercept, slope) by least squares; raises on a rank-deficient design."""
    x, y = _xy(data)
    if len(np.unique(x)) < 2:
        raise np.linalg.LinAlgError("least squares needs at least two distinct x values")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coef


def ols(data, at=DEFAULT_EVAL_POINTS):
    intercept, slope = ols_fit(data)
    return BaselineResult.from_line(intercept, slope, at, noise_scale=0.0)
