"""Randomness, Laplace noise and the calibration mathematics for smooth sensitivity."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy parameters; ``gamma`` is only set for random-DP releases."""

    epsilon: float
    delta: float
    gamma: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.gamma is not None and not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    def split(self, parts):
        """Equal share of the budget for one of ``parts`` composed releases."""
        return PrivacyBudget(self.epsilon / parts, self.delta / parts, self.gamma)


@dataclass(frozen=True)
class NoiseCalibration:
    alpha: float
    beta: float
    d: int
    rho_hat: float | None = None


class RandomSource:
    """Seeded random stream; the pair ``(seed, stream)`` fixes every draw.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys and
    drive a counter-based Philox generator, so substreams for different
    iterations or mechanisms never overlap.
    """

    def __init__(self, seed=0, stream=0):
        self.seed = int(seed)
        self.stream = stream if isinstance(stream, tuple) else (int(stream),)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, stream={self.stream})"

    def child(self, *key):
        """Independent substream addressed by integer ``key`` components."""
        return type(self)(self.seed, self.stream + tuple(int(k) for k in key))

    @property
    def generator(self):
        return self._gen

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)


class ZeroNoise(RandomSource):
    """Test double: every Laplace draw comes out exactly zero.

    Only meant for tests; no public entry point constructs it.
    """

    def uniform(self, size=None):
        if size is None:
            return 0.5
        return np.full(size, 0.5)


def as_random_source(rng):
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(np.random.SeedSequence().entropy % (2**63))
    return RandomSource(int(rng))


def laplace_sample(rng, scale, size=None):
    """Laplace(0, scale) by inverse CDF; a zero scale gives exactly zero."""
    if scale < 0 or not math.isfinite(scale):
        raise ValueError(f"scale must be finite and nonnegative, got {scale}")
    r = rng.uniform(size)
    # r in [0, 1) maps to u in [-1/2, 1/2); u = -1/2 has zero probability mass
    # but would give -inf, so it is folded onto the open interval.
    u = np.asarray(r, dtype=float) - 0.5
    u = np.where(u <= -0.5, -0.5 + 2.0**-54, u)
    x = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    if scale == 0:
        x = np.zeros_like(x)
    return float(x) if size is None else x


def lambert_w_minus1(x):
    """Lower real branch W_{-1} on [-1/e, 0), via Halley iteration."""
    x = float(x)
    if not (-_INV_E <= x < 0):
        if -_INV_E - 4e-17 <= x < -_INV_E:
            x = -_INV_E
        else:
            raise ValueError(f"W_-1 is defined on [-1/e, 0), got {x}")
    if x == -_INV_E:
        return -1.0
    if x < -0.25:
        # branch-point series in p = -sqrt(2(1 + e x))
        p = -math.sqrt(max(2.0 * (1.0 + math.e * x), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w_new = w - step
        if w_new > -1.0:
            w_new = (w - 1.0) / 2.0 if w < -1.0 else -1.0
        converged = abs(w_new - w) <= 1e-13 * abs(w_new)
        w = w_new
        if converged:
            break
    return w


def _gamma_series(a, x):
    # lower regularized P(a, x) by its power series; good for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # upper regularized Q(a, x) by Lentz's continued fraction; x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma(a, x):
    """Return (P, Q): lower and upper regularized incomplete gamma at (a, x)."""
    if a <= 0:
        raise ValueError("shape must be positive")
    if x <= 0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cf(a, x)
    return 1.0 - q, q


def gamma_quantile(p, shape):
    """Quantile of Gamma(shape, rate=1) at probability ``p``."""
    p = float(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if p > 0.5:
        return _gamma_invert(1.0 - p, shape, upper=True)
    return _gamma_invert(p, shape, upper=False)


def gamma_upper_quantile(q, shape):
    """Point x with P(Gamma(shape, 1) > x) = q.

    Use this instead of ``gamma_quantile(1 - q)`` when q is tiny: forming
    1 - q in floating point discards the low digits of q.
    """
    q = float(q)
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if q > 0.5:
        return _gamma_invert(1.0 - q, shape, upper=False)
    return _gamma_invert(q, shape, upper=True)


def _gamma_invert(target, shape, upper):
    # Newton steps on the smaller tail, kept inside a shrinking bracket
    a = float(shape)
    if a <= 0:
        raise ValueError("shape must be positive")

    def resid(x):
        lo_p, up_q = regularized_gamma(a, x)
        return (target - up_q) if upper else (lo_p - target)

    lo, hi = 0.0, max(a, 1.0)
    while resid(hi) < 0:
        lo, hi = hi, hi * 2.0
    x = 0.5 * (lo + hi)
    for _ in range(200):
        r = resid(x)
        if r == 0:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        dens = math.exp(-x + (a - 1.0) * math.log(x) - math.lgamma(a)) if x > 0 else 0.0
        x_new = x - r / dens if dens > 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(x, 1e-300) or hi - lo <= 1e-15 * hi:
            return x_new
        x = x_new
    return x


def rho_bound(delta, d, method="gamma-quantile"):
    """Bound on the upper 1-delta quantile of a sum of ``d`` unit exponentials.

    ``gamma-quantile`` is the exact quantile; ``lambert`` and ``closed-form``
    are successively looser analytic upper bounds, defined for d >= 2.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    d = int(d)
    if d < 1:
        raise ValueError("d must be a positive integer")
    if method == "gamma-quantile":
        return gamma_upper_quantile(delta, d)
    if d < 2:
        raise ValueError(f"method {method!r} requires d >= 2")
    log_d = math.log(delta)
    if method == "lambert":
        return -d * lambert_w_minus1(-math.exp(log_d / d - 1.0))
    if method == "closed-form":
        return (math.sqrt(2 * log_d * (2 * log_d - 9 * d)) + 3 * d - 2 * log_d) / 3.0
    raise ValueError(f"unknown method {method!r}")


@lru_cache(maxsize=256)
def _calibrate(epsilon, delta, d, variant):
    alpha = epsilon / 2.0
    if variant == "multivariate":
        rho = gamma_upper_quantile(delta, d)
        return NoiseCalibration(alpha, epsilon / (2.0 * rho), d, rho)
    if variant == "univariate-exact":
        if d != 1:
            raise ValueError("the univariate-exact calibration needs d = 1")
        log_d = math.log(delta)
        if epsilon / 2.0 + log_d + math.log(-log_d) > -1.0:
            raise ValueError(
                f"no exact univariate beta for epsilon={epsilon}, delta={delta}; "
                "it needs delta * exp(epsilon / 2) * log(1 / delta) <= 1 / e"
            )
        arg = delta * math.exp(epsilon / 2.0) * log_d
        beta = lambert_w_minus1(arg) - log_d - epsilon / 2.0
        if not beta > 0:
            raise ValueError(f"no positive beta for epsilon={epsilon}, delta={delta}")
        return NoiseCalibration(alpha, beta, 1, None)
    raise ValueError(f"unknown variant {variant!r}")


def calibrate(budget, d, variant="multivariate"):
    """Noise divisor alpha and smoothing rate beta for a d-dimensional release."""
    return _calibrate(float(budget.epsilon), float(budget.delta), int(d), variant)
