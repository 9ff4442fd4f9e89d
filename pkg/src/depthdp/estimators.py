"""scikit-learn style wrappers around the private depth estimators."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .geometry import FeasibleRegion
from .mechanisms import (
    default_region,
    dp_deepest_reg,
    dp_medsweep,
    dp_tukey_median,
    rdp_deepest_reg,
    rdp_median,
    rdp_tukey_median,
)
from .special import PrivacyBudget, as_random_source


def _region(bounds, dim):
    if bounds is None:
        return default_region(dim)
    if isinstance(bounds, FeasibleRegion):
        return bounds
    lo, hi = bounds
    return FeasibleRegion.box(lo, hi, dim)


class DPTukeyMedian(BaseEstimator):
    """Private Tukey median of points in one or two dimensions.

    Parameters
    ----------
    epsilon, delta : float
        Privacy budget.
    region : (lo, hi), FeasibleRegion or None
        Bounded set holding the estimate; ``None`` means [-50, 50]^d.
        Ignored when ``gamma`` is set, in which case the region is built
        from the data and the release is random-DP.
    gamma : float or None
        Random-DP failure probability.
    random_state : int, RandomSource or None
    """

    def __init__(self, epsilon=1.0, delta=1e-6, region=None, gamma=None, random_state=None):
        self.epsilon = epsilon
        self.delta = delta
        self.region = region
        self.gamma = gamma
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        d = X.shape[1]
        budget = PrivacyBudget(self.epsilon, self.delta, self.gamma)
        rng = as_random_source(self.random_state)
        if self.gamma is None:
            out = dp_tukey_median(X, _region(self.region, d), budget, rng)
        elif d == 1:
            out = rdp_median(X, budget, rng)
        else:
            out = rdp_tukey_median(X, budget, rng)
        self.location_ = np.asarray(out.estimate, dtype=float)
        self.noise_scale_ = out.noise_scale
        self.region_ = out.region
        self.n_features_in_ = d
        return self


class _LineRegressor(RegressorMixin, BaseEstimator):
    def _store(self, theta, out, n_features):
        theta = np.asarray(theta, dtype=float)
        self.intercept_ = float(theta[0])
        self.coef_ = theta[1:]
        self.noise_scale_ = out.noise_scale
        self.output_ = out
        self.n_features_in_ = n_features
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.intercept_ + X @ self.coef_


class DPDeepestRegression(_LineRegressor):
    """Private deepest regression line for a single covariate.

    ``region`` bounds (intercept, slope); ``gamma`` switches to the
    random-DP release whose region is built from the data.
    """

    def __init__(self, epsilon=1.0, delta=1e-6, region=None, gamma=None, random_state=None):
        self.epsilon = epsilon
        self.delta = delta
        self.region = region
        self.gamma = gamma
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError("deepest regression supports exactly one covariate")
        rows = np.column_stack([X[:, 0], y])
        budget = PrivacyBudget(self.epsilon, self.delta, self.gamma)
        rng = as_random_source(self.random_state)
        if self.gamma is None:
            out = dp_deepest_reg(rows, _region(self.region, 2), budget, rng)
        else:
            out = rdp_deepest_reg(rows, budget, rng)
        return self._store(out.estimate, out, 1)


class DPMedsweepRegression(_LineRegressor):
    """Private Medsweep regression for any number of covariates.

    Every sweep coefficient and the intercept are clipped to [L, U].
    """

    def __init__(self, epsilon=1.0, delta=1e-6, L=-10.0, U=10.0, tol=1e-4, max_iter=30, random_state=None):
        self.epsilon = epsilon
        self.delta = delta
        self.L = L
        self.U = U
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
        budget = PrivacyBudget(self.epsilon, self.delta)
        out = dp_medsweep(X, y, self.L, self.U, budget, as_random_source(self.random_state),
                          tol=self.tol, max_iter=self.max_iter)
        self.n_releases_ = out.releases
        return self._store(out.estimate, out, X.shape[1])
