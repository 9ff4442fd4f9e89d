import math

import numpy as np
import pytest
from neighbors import normal_line

from depthdp.depth import candidate_fits, deepest_regression, hdepth, tukey_median
from depthdp.geometry import FeasibleRegion, convex_hull
from depthdp.mechanisms import (
    InfeasibleError,
    _rdp_region,
    default_region,
    dp_deepest_reg,
    dp_medsweep,
    dp_tukey_median,
    kappa_star_median,
    kappa_star_reg,
    kappa_star_tukey,
    median_min_sample_size,
    median_of_ratios,
    medsweep_mechanism_count,
    min_feasible_diameter,
    rdp_deepest_reg,
    rdp_median,
    rdp_tukey_median,
)
from depthdp.sensitivity import regdepth_smooth_sensitivity, tukey_smooth_sensitivity
from depthdp.special import PrivacyBudget, RandomSource, ZeroNoise, calibrate

# independent high-precision evaluations of the closed forms (mpmath, 40 digits)
KAPPA_TUKEY_1E4 = 0.04626191239639709232
KAPPA_REG_1E5 = 0.02236544532209247421
MEDIAN_MIN_N_005 = 19.780711903065216741

BUDGET = PrivacyBudget(2.0, 1e-6)
ZERO = ZeroNoise(0)


def _polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _tight_median_bound(x, beta, lo, hi):
    """Smooth bound of the clipped median straight from its order-statistic form."""
    xs = np.clip(np.sort(x), lo, hi)
    n, m = len(xs), len(xs) // 2

    def at(i):
        return lo if i < 0 else hi if i >= n else xs[i]

    return max(
        math.exp(-k * beta) * max(at(m + t) - at(m + t - k - 1) for t in range(k + 2))
        for k in range(n + 1)
    )


class TestTukeyRelease:
    def test_worked_example(self):
        x = np.array([0.0, 0, 0, 0, 3])
        out = dp_tukey_median(x, FeasibleRegion.interval(-1, 1), BUDGET, ZERO)
        assert out.calibration.beta == pytest.approx(1 / math.log(1e6), rel=1e-12)
        assert out.calibration.alpha == 1.0
        assert out.estimate.tolist() == [0.0]
        expected = _tight_median_bound(x, out.calibration.beta, -1, 1)
        assert out.noise_scale == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_one_dimensional_scale_matches_oracle(self, seed):
        x = np.random.default_rng(seed).standard_normal(15) * 2
        out = dp_tukey_median(x, FeasibleRegion.interval(-2, 3), BUDGET, ZERO)
        expected = _tight_median_bound(x, out.calibration.beta, -2, 3)
        assert out.noise_scale == pytest.approx(expected, rel=1e-12)

    def test_zero_noise_planar(self, rs):
        pts = rs.standard_normal((25, 2))
        out = dp_tukey_median(pts, default_region(), BUDGET, ZERO)
        np.testing.assert_array_equal(out.estimate, tukey_median(pts).theta)
        assert out.noise_scale == out.smooth_bound.value / out.calibration.alpha > 0

    def test_estimate_clipped_in_one_dimension(self):
        out = dp_tukey_median(np.full(5, 9.0), FeasibleRegion.interval(-1, 1), BUDGET, ZERO)
        assert out.estimate.tolist() == [1.0]

    def test_same_stream_same_release(self, rs):
        pts = rs.standard_normal((20, 2))
        a = dp_tukey_median(pts, default_region(), BUDGET, RandomSource(4, 2))
        b = dp_tukey_median(pts, default_region(), BUDGET, RandomSource(4, 2))
        np.testing.assert_array_equal(a.estimate, b.estimate)
        assert not np.array_equal(a.estimate, a.point_estimate)

    def test_rejections(self, rs):
        with pytest.raises(ValueError):
            dp_tukey_median(rs.standard_normal((9, 3)), default_region(3), BUDGET, ZERO)
        with pytest.raises(ValueError):
            dp_tukey_median(rs.standard_normal((9, 2)), None, BUDGET, ZERO)
        with pytest.raises(ValueError):
            dp_tukey_median(rs.standard_normal((9, 2)), FeasibleRegion.interval(0, 1), BUDGET, ZERO)

    def test_collinear_needs_relaxed(self):
        pts = np.column_stack([np.arange(7.0), 2 * np.arange(7.0)])
        with pytest.raises(ValueError):
            dp_tukey_median(pts, default_region(), BUDGET, ZERO)
        assert dp_tukey_median(pts, default_region(), BUDGET, ZERO, relaxed=True).noise_scale > 0


class TestDeepestRegRelease:
    def test_exact_line(self):
        x = np.linspace(-3, 3, 15)
        out = dp_deepest_reg(np.column_stack([x, 1 + 2 * x]), default_region(), PrivacyBudget(12, 1e-6), ZERO)
        np.testing.assert_allclose(out.estimate, [1.0, 2.0], atol=1e-12)
        bound = out.smooth_bound
        assert bound.a[0] < 1e-12 and bound.argmax_k >= 1 and out.noise_scale > 0

    def test_zero_noise_and_scale(self, rs):
        rows = normal_line(rs, 40)
        fits = candidate_fits(rows)
        out = dp_deepest_reg(rows, default_region(), BUDGET, ZERO, fits=fits)
        np.testing.assert_array_equal(out.estimate, deepest_regression(rows, fits).theta)
        beta = calibrate(BUDGET, 2).beta
        s = regdepth_smooth_sensitivity(rows, beta, default_region(), fits=fits).value
        assert out.noise_scale == s / out.calibration.alpha

    @pytest.mark.parametrize("seed", range(4))
    def test_noise_positive(self, seed):
        rows = normal_line(np.random.default_rng(seed), 30)
        out = dp_deepest_reg(rows, FeasibleRegion.box(-5, 5), PrivacyBudget(12, 1e-6), RandomSource(seed))
        assert 0 < out.noise_scale < math.inf

    def test_rejections(self, rs):
        with pytest.raises(ValueError):
            dp_deepest_reg(normal_line(rs, 9), FeasibleRegion.interval(-1, 1), BUDGET, ZERO)
        with pytest.raises(ValueError):
            dp_deepest_reg(np.column_stack([np.ones(6), np.arange(6.0)]), default_region(), BUDGET, ZERO)


class TestMedsweep:
    def test_ratio_conventions(self):
        assert median_of_ratios(np.array([1.0, 2, 3]), np.array([1.0, 2, 3])) == 1.0
        # ratios [5, -inf, 0, inf, 2]: x/0 is signed infinity and 0/0 is zero
        u = np.array([0.0, 1, 5, 6, 7])
        v = np.array([0.0, 1, 1, 1, 2])
        assert median_of_ratios(u, v) == 2.0

    def test_exact_line_one_sweep(self, rs):
        x = rs.standard_normal(31)
        out = dp_medsweep(x, 1 + 2 * x, -10, 10, BUDGET, ZERO, max_iter=1)
        np.testing.assert_allclose(out.estimate, [1.0, 2.0], atol=1e-12)
        assert out.releases == out.n_mechs == 2

    def test_exact_plane(self, rs):
        X = rs.standard_normal((41, 2))
        X[:, 1] += 0.5 * X[:, 0]
        y = 1 + 2 * X[:, 0] - X[:, 1]
        out = dp_medsweep(X, y, -10, 10, BUDGET, ZERO, tol=1e-13, max_iter=60)
        np.testing.assert_allclose(out.estimate, [1.0, 2.0, -1.0], atol=1e-10)

    @pytest.mark.parametrize("d,max_iter,expected", [(2, 1, 2), (2, 5, 6), (2, 30, 31), (3, 30, 62), (4, 5, 19)])
    def test_mechanism_count(self, d, max_iter, expected):
        assert medsweep_mechanism_count(d, max_iter) == expected

    @pytest.mark.parametrize("d", [2, 3, 4])
    @pytest.mark.parametrize("max_iter", [1, 5])
    def test_noisy_runs_use_every_release(self, d, max_iter):
        g = np.random.default_rng(d * 10 + max_iter)
        X = g.standard_normal((30, d - 1))
        y = 1 + X.sum(axis=1) + g.standard_normal(30)
        out = dp_medsweep(X, y, -5, 5, PrivacyBudget(4, 1e-6), RandomSource(d), max_iter=max_iter)
        assert out.releases == out.n_mechs == medsweep_mechanism_count(d, max_iter)
        assert [s["stage"] for s in out.sweeps].count("x") == (d - 1) * (d - 2) // 2

    def test_early_stop_spends_less(self, rs):
        x = rs.standard_normal(25)
        out = dp_medsweep(x, 3 - x, -10, 10, BUDGET, ZERO, max_iter=10)
        assert out.releases < out.n_mechs

    def test_per_release_budget(self, rs):
        x = rs.standard_normal(25)
        out = dp_medsweep(x, x + rs.standard_normal(25), -5, 5, PrivacyBudget(6, 1e-6), RandomSource(1), max_iter=5)
        exact = calibrate(PrivacyBudget(1.0, 1e-6 / 6), 1, "univariate-exact")
        assert out.calibration == exact

    def test_rejections(self, rs):
        x = rs.standard_normal(9)
        with pytest.raises(ValueError):
            dp_medsweep(x, x, 1, 1, BUDGET, ZERO)
        with pytest.raises(ValueError):
            dp_medsweep(np.empty((0, 1)), np.empty(0), -1, 1, BUDGET, ZERO)
        with pytest.raises(ValueError):
            medsweep_mechanism_count(1, 3)


class TestInflationRadii:
    def test_frozen_values(self):
        assert kappa_star_tukey(10_000, 2, 0.05).kappa_star == pytest.approx(KAPPA_TUKEY_1E4, rel=1e-12)
        assert kappa_star_reg(100_000, 2, 0.05).kappa_star == pytest.approx(KAPPA_REG_1E5, rel=1e-12)
        assert median_min_sample_size(0.05) == pytest.approx(MEDIAN_MIN_N_005, rel=1e-14)

    @pytest.mark.parametrize("fn", [kappa_star_tukey, kappa_star_reg])
    def test_monotone(self, fn):
        ns = [10, 50, 200, 1000, 10**4, 10**6]
        ks = [fn(n, 2, 0.1).kappa_star for n in ns]
        assert all(a > b for a, b in zip(ks, ks[1:]))
        gs = [fn(500, 2, g).kappa_star for g in (0.5, 0.2, 0.05, 1e-3, 1e-9)]
        assert all(a < b for a, b in zip(gs, gs[1:]))

    def test_regression_radius_dominates(self):
        for n in (5, 30, 300, 3000, 10**5):
            for d in (2, 3, 4):
                for g in (0.5, 0.05, 1e-6):
                    assert kappa_star_reg(n, d, g).kappa_star >= kappa_star_tukey(n, d, g).kappa_star

    def test_feasibility_flags(self):
        assert not kappa_star_tukey(50, 2, 0.2).feasible
        assert kappa_star_tukey(1000, 2, 0.2).feasible
        assert not kappa_star_reg(1000, 2, 0.2).feasible
        assert kappa_star_reg(1200, 2, 0.2).feasible
        r = kappa_star_tukey(2000, 2, 0.2)
        assert r.depth_cutoff == math.ceil(2 * 2000 * r.kappa_star)
        assert r.feasible == (r.depth_cutoff < math.ceil(2000 / 3))

    def test_domain(self):
        for fn in (kappa_star_tukey, kappa_star_reg):
            with pytest.raises(ValueError):
                fn(2, 2, 0.1)
            with pytest.raises(ValueError):
                fn(100, 2, 1.5)
        with pytest.raises(ValueError):
            kappa_star_median(100, math.e)
        with pytest.raises(ValueError):
            kappa_star_median(0, 0.1)

    @pytest.mark.parametrize("gamma", [0.5, 0.2, 0.05])
    def test_median_feasibility_equivalence(self, gamma):
        for n in range(5, 501):
            r = kappa_star_median(n, gamma)
            assert r.feasible == (n / 2 - n * r.kappa_star >= 1), n

    def test_median_minimum_sample_by_scan(self):
        first = next(n for n in range(1, 100) if kappa_star_median(n, 0.05).feasible)
        assert first == math.ceil(MEDIAN_MIN_N_005) == 20


RDP = PrivacyBudget(4.0, 1e-6, 0.2)


class TestRandomDpReleases:
    def test_needs_gamma(self, rs):
        with pytest.raises(ValueError):
            rdp_median(rs.standard_normal(100), BUDGET, ZERO)

    def test_refusals(self, rs):
        with pytest.raises(InfeasibleError):
            rdp_median(rs.standard_normal(10), RDP, ZERO)
        with pytest.raises(InfeasibleError):
            rdp_tukey_median(rs.standard_normal((200, 2)), RDP, ZERO)
        with pytest.raises(InfeasibleError):
            rdp_deepest_reg(normal_line(rs, 300), RDP, ZERO)

    def test_median_interval(self, rs):
        half = rs.standard_normal(100)
        x = np.concatenate([half, -half])
        out = rdp_median(x, RDP, ZERO, c=0.0)
        lo, hi = out.region.bounds
        med = np.sort(x)[len(x) // 2]
        assert lo < med < hi
        assert out.estimate[0] == tukey_median(x).theta[0]
        wide = rdp_median(x, RDP, ZERO, c=0.25)
        assert wide.region.bounds == pytest.approx((lo - 0.25, hi + 0.25))
        assert out.inflation.feasible and out.inflation.enlargement_c == 0.0

    def test_median_default_enlargement(self, rs):
        out = rdp_median(rs.standard_normal(200), RDP, ZERO)
        lo, hi = out.region.bounds
        assert out.inflation.enlargement_c == pytest.approx(1e-6 * (hi - lo) / (1 + 2e-6))

    def test_point_mass_needs_positive_c(self):
        with pytest.raises(ValueError):
            rdp_median(np.zeros(100), RDP, ZERO, c=0.0)
        assert rdp_median(np.zeros(100), RDP, ZERO).noise_scale > 0

    def test_tukey_region(self):
        pts = np.random.default_rng(8).standard_normal((1000, 2))
        out = rdp_tukey_median(pts, RDP, ZERO)
        theta = tukey_median(pts).theta
        np.testing.assert_array_equal(out.estimate, theta)
        assert out.region.contains(theta, tol=1e-9)
        assert _polygon_area(out.region.vertices) > 0 and out.noise_scale > 0
        # every region vertex sits in the depth cut (up to the boundary widening)
        level = max(1, math.ceil(tukey_median(pts).depth - 2 * 1000 * out.inflation.kappa_star))
        inner = out.region.vertices + 1e-6 * (theta - out.region.vertices)
        assert min(hdepth(v, pts) for v in inner) >= level

    @pytest.mark.slow
    def test_regression_region(self):
        rows = normal_line(np.random.default_rng(9), 1200)
        out = rdp_deepest_reg(rows, RDP, ZERO, c=0.01)
        np.testing.assert_array_equal(out.estimate, out.point_estimate)
        assert out.region.contains(out.estimate)
        assert _polygon_area(out.region.vertices) > 0 and out.noise_scale > 0

    def test_enlargement_gives_area(self):
        pts = np.array([[0.0, 0.0]])
        hull = convex_hull(pts)
        region = _rdp_region(hull, 0.5)
        assert _polygon_area(region.vertices) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            _rdp_region(hull, 0.0)


@pytest.mark.slow
class TestCoverage:
    def test_median(self):
        g = np.random.default_rng(1)
        hits = 0
        for _ in range(300):
            region = rdp_median(g.standard_normal(200), RDP, ZERO).region
            hits += region.contains([np.sort(g.standard_normal(200))[100]])
        assert hits / 300 >= 0.75

    def test_tukey(self):
        # pairwise reuse: each dataset's region is checked against the others' medians
        g = np.random.default_rng(2)
        sets = [g.standard_normal((1000, 2)) for _ in range(12)]
        outs = [rdp_tukey_median(p, RDP, ZERO) for p in sets]
        hits = [o.region.contains(q.estimate) for i, o in enumerate(outs) for j, q in enumerate(outs) if i != j]
        assert np.mean(hits) >= 0.75

    def test_regression(self):
        g = np.random.default_rng(3)
        outs = [rdp_deepest_reg(normal_line(g, 1200), RDP, ZERO) for _ in range(4)]
        hits = [o.region.contains(q.estimate) for i, o in enumerate(outs) for j, q in enumerate(outs) if i != j]
        assert np.mean(hits) >= 0.75


class TestMinimumDiameter:
    def test_default_box_binds_for_small_samples(self):
        rows = normal_line(np.random.default_rng(0), 50)
        assert min_feasible_diameter(rows, PrivacyBudget(4, 1e-6)) <= 400

    def test_self_check(self):
        rows = normal_line(np.random.default_rng(1), 100)
        budget = PrivacyBudget(12, 1e-6)
        beta = calibrate(budget, 2).beta
        fits = candidate_fits(rows)
        diam = min_feasible_diameter(rows, budget)
        region = default_region()
        assert diam > region.diameter

        def s(dm):
            return regdepth_smooth_sensitivity(rows, beta, region.scaled_square(dm), fits=fits).value

        base = s(region.diameter)
        assert s(0.99 * diam) == pytest.approx(base, rel=1e-9)
        assert s(1.01 * diam) > base * (1 + 1e-9)

    def test_tukey_self_check(self):
        pts = np.random.default_rng(2).standard_normal((60, 2))
        budget = PrivacyBudget(12, 1e-6)
        diam = min_feasible_diameter(pts, budget, "tukey")
        beta = calibrate(budget, 2).beta
        region = default_region()

        def s(dm):
            return tukey_smooth_sensitivity(pts, beta, region.scaled_square(dm)).value

        base = s(region.diameter)
        if diam > region.diameter:
            assert s(0.99 * diam) == pytest.approx(base, rel=1e-9)
        assert s(1.01 * diam) > base * (1 + 1e-9)

    def test_unknown_mechanism(self, rs):
        with pytest.raises(ValueError):
            min_feasible_diameter(normal_line(rs, 20), BUDGET, "medsweep")
