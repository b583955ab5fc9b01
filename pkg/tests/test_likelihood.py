import math

import numpy as np
import pytest
from scipy import integrate

from rcdtns.errors import InsufficientData, InvalidInput, ModelIncomplete
from rcdtns.likelihood import decide, fit_kde, likelihood, silverman_bandwidth

from oracles import gaussian_mixture_cdf_quadrature


class TestFitKde:
    def test_degenerate_zero_spread(self):
        density = fit_kde([0.0, 0.0])
        assert density.bandwidth > 0.0
        # closed-form total mass
        assert likelihood(density, -1e9) == pytest.approx(1.0, abs=1e-12)
        assert likelihood(density, 1e9) == pytest.approx(0.0, abs=1e-12)

    def test_two_point_mixture_value(self):
        # p(2) for kernels at 1 and 3 with h=1 is phi(1)
        density = fit_kde([1.0, 3.0], bandwidth=1.0)
        expected = math.exp(-0.5) / math.sqrt(2.0 * math.pi)
        assert density.pdf(2.0) == pytest.approx(expected, abs=1e-12)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_kde([1.0])

    def test_negative_distances_rejected(self):
        with pytest.raises(InvalidInput):
            fit_kde([1.0, -0.5])

    def test_bad_bandwidth_rejected(self):
        with pytest.raises(InvalidInput):
            fit_kde([1.0, 2.0], bandwidth=0.0)

    def test_kde_integrates_to_one(self, rng):
        draws = np.abs(rng.normal(5.0, 1.0, size=1000))
        density = fit_kde(draws)
        total, _ = integrate.quad(
            lambda x: float(density.pdf(x)), draws.min() - 10, draws.max() + 10, limit=200
        )
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_kde_mean_tracks_sample(self, rng):
        draws = rng.normal(5.0, 1.0, size=1000)
        draws = np.clip(draws, 0.0, None)
        density = fit_kde(draws)
        mean, _ = integrate.quad(
            lambda x: x * float(density.pdf(x)), -5, 15, limit=200
        )
        assert abs(mean - 5.0) <= 0.1

    def test_silverman_matches_formula(self, rng):
        d = rng.gamma(4.0, 2.0, size=200)
        h = silverman_bandwidth(d)
        sigma = np.std(d, ddof=1)
        iqr = np.percentile(d, 75) - np.percentile(d, 25)
        assert h == pytest.approx(0.9 * min(sigma, iqr / 1.34) * 200 ** (-0.2))


class TestLikelihood:
    def test_limits(self):
        density = fit_kde([1.0, 2.0, 3.0], bandwidth=0.5)
        assert likelihood(density, -1e12) == pytest.approx(1.0, abs=1e-12)
        assert likelihood(density, 1e12) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_midpoint(self):
        density = fit_kde([1.0, 3.0], bandwidth=1.0)
        assert likelihood(density, 2.0) == pytest.approx(0.5, abs=1e-12)

    def test_against_quadrature_oracle(self):
        density = fit_kde([1.0, 2.0, 4.0], bandwidth=0.5)
        value = likelihood(density, 2.5)
        oracle = 1.0 - gaussian_mixture_cdf_quadrature([1.0, 2.0, 4.0], 0.5, 2.5)
        assert value == pytest.approx(oracle, abs=1e-6)

    def test_against_quadrature_random_points(self, rng):
        pts = np.sort(rng.gamma(3.0, 1.5, size=8))
        density = fit_kde(pts, bandwidth=0.7)
        for x in rng.uniform(pts.min() - 2, pts.max() + 2, size=12):
            oracle = 1.0 - gaussian_mixture_cdf_quadrature(pts, 0.7, float(x))
            assert likelihood(density, float(x)) == pytest.approx(oracle, abs=1e-6)

    def test_non_increasing(self, rng):
        density = fit_kde(rng.gamma(3.0, 1.0, size=50))
        xs = np.linspace(-5, 30, 500)
        vals = likelihood(density, xs)
        assert np.all(np.diff(vals) <= 1e-15)

    def test_bounds(self, rng):
        density = fit_kde(rng.gamma(3.0, 1.0, size=50))
        vals = likelihood(density, np.linspace(-100, 100, 300))
        assert vals.min() >= 0.0 and vals.max() <= 1.0

    def test_scale_equivariance(self, rng):
        pts = rng.gamma(3.0, 1.0, size=40)
        c = 3.7
        d1 = fit_kde(pts, bandwidth=0.5)
        d2 = fit_kde(c * pts, bandwidth=0.5 * c)
        xs = rng.uniform(0, 10, size=20)
        v1 = likelihood(d1, xs)
        v2 = likelihood(d2, c * xs)
        assert np.abs(v1 - v2).max() <= 1e-10

    def test_calibration_on_fit_points(self, rng):
        # fraction of fitting distances with L >= alpha approximates 1 - alpha
        draws = rng.gamma(4.0, 2.0, size=2000)
        density = fit_kde(draws)
        vals = likelihood(density, draws)
        for alpha in (0.01, 0.05, 0.10):
            frac = float((vals >= alpha).mean())
            assert abs(frac - (1.0 - alpha)) <= 0.03


class TestDecide:
    def densities(self):
        return {"a": fit_kde([1.0, 2.0, 3.0], bandwidth=0.5)}

    def test_accept(self):
        outcome = decide("a", 2.0, self.densities(), alpha=0.05)
        assert outcome.accepted and outcome.class_id == "a"

    def test_reject(self):
        outcome = decide("a", 50.0, self.densities(), alpha=0.05)
        assert not outcome.accepted and outcome.class_id is None

    def test_boundary_accepts(self):
        densities = self.densities()
        # find x with L exactly alpha via bisection, then check inclusivity
        alpha = 0.05
        lo, hi = 0.0, 100.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if likelihood(densities["a"], mid) >= alpha:
                lo = mid
            else:
                hi = mid
        outcome = decide("a", lo, densities, alpha=alpha)
        assert outcome.accepted

    def test_missing_density(self):
        with pytest.raises(ModelIncomplete):
            decide("b", 1.0, self.densities(), alpha=0.05)

    def test_alpha_bounds(self):
        with pytest.raises(InvalidInput):
            decide("a", 1.0, self.densities(), alpha=0.0)
        with pytest.raises(InvalidInput):
            decide("a", 1.0, self.densities(), alpha=1.0)
