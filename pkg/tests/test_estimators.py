import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from depthdp.estimators import DPDeepestRegression, DPMedsweepRegression, DPTukeyMedian
from depthdp.geometry import FeasibleRegion
from depthdp.mechanisms import InfeasibleError


def regression_data(rs, n=60, p=1):
    X = rs.standard_normal((n, p))
    return X, 1 + X.sum(axis=1) + 0.3 * rs.standard_normal(n)


class TestTukeyMedianEstimator:
    def test_fit(self, rs):
        m = DPTukeyMedian(epsilon=8, random_state=0).fit(rs.standard_normal((40, 2)) + 3)
        assert m.location_.shape == (2,) and m.noise_scale_ > 0 and m.n_features_in_ == 2

    def test_reproducible(self, rs):
        X = rs.standard_normal((30, 1))
        a = DPTukeyMedian(region=(-4, 4), random_state=5).fit(X).location_
        b = DPTukeyMedian(region=FeasibleRegion.interval(-4, 4), random_state=5).fit(X).location_
        np.testing.assert_array_equal(a, b)

    def test_random_dp_paths(self, rs):
        assert DPTukeyMedian(gamma=0.2, random_state=1).fit(rs.standard_normal((100, 1))).region_.dim == 1
        with pytest.raises(InfeasibleError):
            DPTukeyMedian(gamma=0.2).fit(rs.standard_normal((50, 2)))

    def test_params(self):
        m = DPTukeyMedian(epsilon=3.0, gamma=0.1)
        c = clone(m)
        assert c.get_params() == m.get_params() and c is not m


class TestRegressionEstimators:
    def test_deepest_regression(self, rs):
        X, y = regression_data(rs)
        m = DPDeepestRegression(epsilon=12, random_state=2).fit(X, y)
        assert m.coef_.shape == (1,) and m.predict(X[:5]).shape == (5,)
        assert abs(m.coef_[0] - 1) < 1 and abs(m.intercept_ - 1) < 1

    def test_deepest_regression_one_covariate(self, rs):
        X, y = regression_data(rs, p=2)
        with pytest.raises(ValueError):
            DPDeepestRegression().fit(X, y)

    def test_medsweep_many_covariates(self, rs):
        X, y = regression_data(rs, n=80, p=3)
        m = DPMedsweepRegression(epsilon=50, L=-4, U=4, max_iter=3, random_state=3).fit(X, y)
        assert m.coef_.shape == (3,) and m.n_releases_ <= 1 + 3 + 3 * 3

    def test_predict_checks(self, rs):
        X, y = regression_data(rs)
        with pytest.raises(NotFittedError):
            DPDeepestRegression().predict(X)
        m = DPMedsweepRegression(random_state=0).fit(X, y)
        with pytest.raises(ValueError):
            m.predict(np.ones((3, 2)))

    def test_score_is_available(self, rs):
        X, y = regression_data(rs, n=200)
        m = DPDeepestRegression(epsilon=12, random_state=4).fit(X, y)
        assert np.isfinite(m.score(X, y))
