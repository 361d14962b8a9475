import numpy as np
import pytest

from tailcast.baselines import (
    ArModel,
    AutoregressiveForecaster,
    OrnsteinUhlenbeckForecaster,
    OuParams,
    estimate_ou,
    fit_ar,
    forecast_ar,
    forecast_ou,
    ou_conditional_mean,
    pacf,
    select_ar_order,
    simulate_ou,
    simulate_ou_ensemble,
)
from tailcast.diagnostics import AcfResult, acf
from tailcast.errors import NoBandCrossing, ZeroVariance

REFERENCE_PM10 = OuParams(mu=-9.47, sigma2=458.39, tau=19.02)


def exp_acf_result(T=20.0, max_lag=500, n=100_000):
    """Synthetic ACF that is exactly exp(-r/T)."""
    lags = np.arange(max_lag + 1)
    values = np.exp(-lags / T)
    band = 1.96 / np.sqrt(n)
    inside = np.flatnonzero(values[1:] < band)
    return AcfResult(lags=lags, values=values, confidence_band=band,
                     decorrelation_time=int(inside[0]) + 1, n_samples=n)


def gen_ar(phi, n, seed, c=0.0, sigma=1.0):
    rng = np.random.default_rng(seed)
    p = len(phi)
    eps = rng.standard_normal(n + 300) * sigma
    y = np.zeros(n + 300)
    for t in range(p, n + 300):
        y[t] = c + np.dot(phi, y[t - p:t][::-1]) + eps[t]
    return y[300:]


class TestEstimateOu:
    def test_tau_equals_integral_of_exponential_acf(self):
        # closed form: integral of exp(-r/20) over [0, inf) = 20
        rng = np.random.default_rng(0)
        series = rng.normal(-9.47, 21.4, 50_000)
        params = estimate_ou(series, exp_acf_result(T=20.0))
        assert params.tau == pytest.approx(20.0, abs=1.0)
        assert params.mu == pytest.approx(series.mean())
        assert params.sigma2 == pytest.approx(series.var())

    def test_no_band_crossing_raises(self):
        lags = np.arange(101)
        res = AcfResult(lags=lags, values=np.ones(101), confidence_band=0.01,
                        decorrelation_time=None, n_samples=1000)
        with pytest.raises(NoBandCrossing):
            estimate_ou(np.random.default_rng(1).normal(size=1000), res)

    def test_constant_series_propagates_zero_variance(self):
        with pytest.raises(ZeroVariance):
            acf(np.full(1000, 2.0), 100)


class TestSimulateOu:
    def test_deterministic_relaxation_limit(self):
        # sigma2 -> 0: x(tau) = mu + (x0-mu)/e within Euler error O(dt)
        params = OuParams(mu=5.0, sigma2=1e-20, tau=10.0)
        dt = 0.01
        path = simulate_ou(params, x0=15.0, steps=1000, dt=dt, seed=0)
        expected = 5.0 + 10.0 / np.e
        assert path[-1] == pytest.approx(expected, abs=10 * dt / params.tau * np.e)

    def test_stationary_ensemble_moments(self):
        params = REFERENCE_PM10
        dt = 0.05 * params.tau
        steps = int(round(10 * params.tau / dt))
        paths = simulate_ou_ensemble(params, x0=params.mu + 20.0, steps=steps,
                                     dt=dt, seed=0, n_paths=10_000)
        final = paths[:, -1]
        sigma = np.sqrt(params.sigma2)
        assert abs(final.mean() - params.mu) < 3 * sigma / 100
        assert abs(final.var() - params.sigma2) < 0.05 * params.sigma2

    def test_increment_variance_matches_diffusion(self):
        params = OuParams(mu=0.0, sigma2=4.0, tau=50.0)
        dt = 1.0
        paths = simulate_ou_ensemble(params, x0=0.0, steps=2, dt=dt, seed=3,
                                     n_paths=200_000)
        increments = paths[:, 1] - paths[:, 0] + (paths[:, 0] - params.mu) / params.tau * dt
        expected = 2 * params.sigma2 / params.tau * dt
        assert increments.var() == pytest.approx(expected, rel=0.05)

    def test_same_seed_is_bit_identical(self):
        params = OuParams(mu=1.0, sigma2=2.0, tau=5.0)
        a = simulate_ou(params, 0.0, 100, 0.5, seed=42)
        b = simulate_ou(params, 0.0, 100, 0.5, seed=42)
        np.testing.assert_array_equal(a, b)


class TestForecastOu:
    def test_fixed_point_at_the_mean(self):
        params = REFERENCE_PM10
        fc = forecast_ou(params, x0=params.mu, horizon=24, n_paths=10_000, seed=0)
        sigma = np.sqrt(params.sigma2)
        assert np.abs(fc - params.mu).max() < 0.05 * sigma

    def test_converges_to_conditional_mean_with_reference_parameters(self):
        params = REFERENCE_PM10
        x0 = params.mu + 20.0
        fc = forecast_ou(params, x0, horizon=24, n_paths=10_000, seed=0)
        cm = ou_conditional_mean(params, x0, 24)
        # closed form at the last step: mu + 20 exp(-24/19.02) = mu + 5.663
        assert cm[-1] == pytest.approx(params.mu + 5.663, abs=0.01)
        # tolerance: 3 MC standard errors plus the Euler relaxation bias
        sigma = np.sqrt(params.sigma2)
        tol = 3 * sigma / np.sqrt(10_000) + 0.25
        assert np.abs(fc - cm).max() < tol

    def test_single_path_equals_simulation(self):
        params = OuParams(mu=0.0, sigma2=1.0, tau=8.0)
        fc = forecast_ou(params, 2.0, horizon=24, n_paths=1, seed=7)
        path = simulate_ou(params, 2.0, steps=24, dt=1.0, seed=7)
        np.testing.assert_array_equal(fc, path)

    def test_conditional_mean_distance_is_non_increasing(self):
        params = REFERENCE_PM10
        cm = ou_conditional_mean(params, params.mu + 20.0, 48)
        gaps = np.abs(cm - params.mu)
        assert (np.diff(gaps) <= 0).all()


class TestSelectArOrder:
    def test_ar2_recovered_in_most_seeded_trials(self):
        hits = sum(select_ar_order(gen_ar((0.5, -0.3), 50_000, seed=100 + s),
                                   max_p=10) == 2
                   for s in range(20))
        assert hits >= 19

    def test_white_noise_floors_at_one(self):
        rng = np.random.default_rng(0)
        assert select_ar_order(rng.standard_normal(50_000), max_p=10) == 1

    def test_pacf_matches_known_ar1_value(self):
        x = gen_ar((0.6,), 100_000, seed=5)
        values = pacf(x, 5)
        assert values[0] == pytest.approx(0.6, abs=0.02)
        assert np.abs(values[1:]).max() < 0.02


class TestFitAr:
    def test_recovers_generator_coefficients(self):
        y = gen_ar((0.5, -0.3), 50_000, seed=123)
        model = fit_ar(y, 2)
        np.testing.assert_allclose(model.coefficients, [0.5, -0.3], atol=0.02)
        assert model.intercept == pytest.approx(0.0, abs=0.02)

    def test_constant_series_prediction_is_exact(self):
        # any point on the optimum line reproduces the constant; assert the
        # prediction, not the coefficients
        y = np.full(200, 4.0)
        model = fit_ar(y, 1)
        pred = model.intercept + model.coefficients[0] * 4.0
        assert pred == pytest.approx(4.0, abs=1e-9)

    def test_white_noise_variance_estimate(self):
        rng = np.random.default_rng(9)
        y = rng.normal(0.0, 2.0, 50_000)
        model = fit_ar(y, 3)
        assert model.noise_variance == pytest.approx(4.0, rel=0.05)

    def test_residuals_orthogonal_to_regressors(self):
        y = gen_ar((0.7, -0.2), 20_000, seed=4)
        model = fit_ar(y, 2)
        resid = y[2:] - (model.intercept
                         + model.coefficients[0] * y[1:-1]
                         + model.coefficients[1] * y[:-2])
        for lag in (1, 2):
            dot = np.dot(resid, y[2 - lag:-lag]) / resid.size
            assert abs(dot) < 1e-6

    def test_too_short_series_raises(self):
        with pytest.raises(ValueError):
            fit_ar(np.arange(20.0), 2)


class TestForecastAr:
    def test_zero_coefficients_forecast_intercept(self):
        model = ArModel(coefficients=np.array([0.0]), intercept=5.0,
                        noise_variance=1.0)
        np.testing.assert_allclose(forecast_ar(model, [1.0], 4), 5.0)

    def test_geometric_recursion(self):
        model = ArModel(coefficients=np.array([0.5]), intercept=0.0,
                        noise_variance=1.0)
        fc = forecast_ar(model, [8.0], 4)
        np.testing.assert_allclose(fc, [4.0, 2.0, 1.0, 0.5])

    def test_stable_model_converges_to_fixed_point(self):
        model = ArModel(coefficients=np.array([0.5, -0.3]), intercept=2.0,
                        noise_variance=1.0)
        fc = forecast_ar(model, [0.0, 0.0], 500)
        fixed_point = 2.0 / (1.0 - 0.5 + 0.3)
        assert fc[-1] == pytest.approx(fixed_point, abs=1e-9)

    def test_true_coefficients_track_noise_free_trajectory(self):
        phi = (0.6, -0.25)
        model = ArModel(coefficients=np.array(phi), intercept=0.5,
                        noise_variance=0.0)
        history = [1.0, -2.0]
        expected = list(history)
        for _ in range(10):
            expected.append(0.5 + phi[0] * expected[-1] + phi[1] * expected[-2])
        fc = forecast_ar(model, history, 10)
        np.testing.assert_allclose(fc, expected[2:], atol=1e-12)

    def test_model_dict_round_trip(self):
        model = ArModel(coefficients=np.array([0.3, 0.1]), intercept=-1.0,
                        noise_variance=2.5)
        back = ArModel.from_dict(model.to_dict())
        np.testing.assert_array_equal(back.coefficients, model.coefficients)
        assert back.order == 2


class TestForecasterWrappers:
    def test_ou_forecaster_fit_predict(self):
        series = gen_ar((0.9,), 30_000, seed=2, sigma=2.0)
        model = OrnsteinUhlenbeckForecaster(max_lag=300, n_paths=500, seed=1)
        fc = model.fit(series).predict(12)
        assert fc.shape == (12,)
        fc2 = model.predict(12, history=series[-5:])
        np.testing.assert_array_equal(fc, fc2)
        assert model.context_length() == 1
        assert model.loss_label == "-"

    def test_ar_forecaster_selects_order(self):
        series = gen_ar((0.5, -0.3), 50_000, seed=11)
        model = AutoregressiveForecaster().fit(series)
        assert model.model_.order == 2
        fc = model.predict(6)
        assert fc.shape == (6,)

    def test_get_params_contract(self):
        model = OrnsteinUhlenbeckForecaster(n_paths=7)
        assert model.get_params()["n_paths"] == 7
        clone = AutoregressiveForecaster(order=3)
        assert clone.get_params() == {"order": 3, "max_order": 10}
