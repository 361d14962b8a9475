import numpy as np
import pytest

from tailcast.errors import SpanTooShort
from tailcast.frame import TimeSeriesFrame, day_of_week, day_of_year, hourly_range
from tailcast.seasonal import (
    LoessConfig,
    SeasonalComponents,
    SeasonalDecomposer,
    decompose,
    loess_smooth,
    reseasonalize,
)

THREE_YEARS = 3 * 365 * 24


def _hours(n=THREE_YEARS, start="2015-01-01T00:00:00"):
    return hourly_range(start, n)


class TestLoess:
    def test_reproduces_exact_line(self):
        pos = np.arange(50, dtype=float)
        values = 3.0 * pos - 7.0
        for span in (0.2, 0.5, 1.0):
            sm = loess_smooth(pos, values, LoessConfig(span=span, degree=1))
            np.testing.assert_allclose(sm, values, atol=1e-9)

    def test_constant_input_constant_output(self):
        pos = np.arange(40, dtype=float)
        sm = loess_smooth(pos, np.full(40, 5.5), LoessConfig(span=0.3, degree=2))
        np.testing.assert_allclose(sm, 5.5, atol=1e-9)

    def test_noisy_sine_recovery(self):
        # oracle = the clean sine; thresholds frozen from this fixed seed
        rng = np.random.default_rng(1)
        pos = np.arange(366, dtype=float)
        clean = np.sin(2 * np.pi * pos / 366.0)
        noisy = clean + rng.normal(0.0, 0.5, 366)
        interior = slice(37, 329)

        sm2 = loess_smooth(pos, noisy, LoessConfig(span=0.15, degree=2, iterations=1))
        assert np.abs(sm2[interior] - clean[interior]).max() < 0.20

        sm1 = loess_smooth(pos, noisy, LoessConfig(span=0.15, degree=1, iterations=1))
        assert np.abs(sm1[interior] - clean[interior]).max() < 0.15

    def test_quadratic_reproduction(self):
        pos = np.arange(60, dtype=float)
        values = 0.5 * pos ** 2 - 2.0 * pos + 1.0
        sm = loess_smooth(pos, values, LoessConfig(span=0.4, degree=2))
        np.testing.assert_allclose(sm, values, atol=1e-7)

    def test_robustness_downweights_single_outlier(self):
        rng = np.random.default_rng(4)
        pos = np.arange(80, dtype=float)
        values = rng.normal(0.0, 0.1, 80)
        values[40] += 50.0
        plain = loess_smooth(pos, values, LoessConfig(span=0.3, degree=1, iterations=0))
        robust = loess_smooth(pos, values, LoessConfig(span=0.3, degree=1, iterations=2))
        assert np.abs(robust[35]) < np.abs(plain[35])
        assert np.abs(robust[40]) < np.abs(plain[40])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LoessConfig(span=0.0)
        with pytest.raises(ValueError):
            LoessConfig(span=1.5)
        with pytest.raises(ValueError):
            loess_smooth([0.0, 1.0], [1.0, 2.0], LoessConfig(degree=2))


class TestDecompose:
    def test_constant_series(self):
        ts = _hours()
        comp = decompose(np.full(THREE_YEARS, 7.25), ts)
        np.testing.assert_allclose(comp.yearly_smoothed, 7.25, atol=1e-9)
        np.testing.assert_allclose(comp.weekly, 0.0, atol=1e-9)
        np.testing.assert_allclose(comp.daily, 0.0, atol=1e-9)
        np.testing.assert_allclose(comp.residual, 0.0, atol=1e-9)

    def test_weekday_pattern_recovered_exactly(self):
        # oracle = the generating mean-zero weekday pattern
        ts = _hours()
        pattern = np.array([3.0, -1.0, 0.5, -2.0, 1.5, -1.5, -0.5])
        assert abs(pattern.mean()) < 1e-12
        x = 10.0 + pattern[day_of_week(ts)]
        comp = decompose(x, ts)
        np.testing.assert_allclose(comp.weekly, pattern, atol=1e-6)
        # weekday aliasing leaves a small wiggle in the yearly curve
        np.testing.assert_allclose(comp.yearly_smoothed, 10.0, atol=0.15)
        np.testing.assert_allclose(comp.daily, 0.0, atol=1e-6)

    def test_hourly_pattern_recovered(self):
        ts = _hours()
        hod = ts.astype("datetime64[h]").astype(int) % 24
        pattern = np.sin(2 * np.pi * np.arange(24) / 24.0)
        pattern -= pattern.mean()
        x = 5.0 + pattern[hod]
        comp = decompose(x, ts)
        np.testing.assert_allclose(comp.daily, pattern, atol=1e-6)

    def test_reconstruction_identity(self):
        rng = np.random.default_rng(0)
        ts = _hours()
        x = 40.0 + 10.0 * rng.standard_normal(THREE_YEARS)
        comp = decompose(x, ts)
        recon = comp.seasonal_at(ts) + comp.residual
        np.testing.assert_allclose(recon, x, atol=1e-9)

    def test_component_means_are_zero(self):
        rng = np.random.default_rng(5)
        ts = _hours()
        x = rng.standard_normal(THREE_YEARS).cumsum() * 0.1 + 20.0
        comp = decompose(x, ts)
        assert abs(comp.weekly.mean()) < 1e-9
        assert abs(comp.daily.mean()) < 1e-9

    def test_shift_equivariance(self):
        rng = np.random.default_rng(11)
        ts = _hours()
        x = 3.0 * rng.standard_normal(THREE_YEARS)
        a = decompose(x, ts)
        b = decompose(x + 100.0, ts)
        np.testing.assert_allclose(b.yearly_smoothed, a.yearly_smoothed + 100.0,
                                   atol=1e-9)
        np.testing.assert_allclose(b.weekly, a.weekly, atol=1e-9)
        np.testing.assert_allclose(b.daily, a.daily, atol=1e-9)
        np.testing.assert_allclose(b.residual, a.residual, atol=1e-9)

    def test_too_short_series_raises(self):
        n = 365 * 24
        with pytest.raises(SpanTooShort):
            decompose(np.zeros(n), _hours(n))

    def test_feb29_lookup_is_total(self):
        # fit on two non-leap years, then look up every hour of a leap year
        ts = _hours(2 * 365 * 24, start="2017-01-01T00:00:00")
        rng = np.random.default_rng(2)
        comp = decompose(rng.standard_normal(ts.size) + 5.0, ts)
        leap = hourly_range("2020-01-01T00:00:00", 366 * 24)
        values = comp.seasonal_at(leap)
        assert np.isfinite(values).all()
        assert (day_of_year(leap) == 366).any()


class TestReseasonalize:
    def test_inverse_identity(self):
        rng = np.random.default_rng(8)
        ts = _hours()
        x = 15.0 + 4.0 * rng.standard_normal(THREE_YEARS)
        comp = decompose(x, ts)
        back = reseasonalize(comp, comp.residual, ts)
        np.testing.assert_allclose(back, x, atol=1e-9)

    def test_zero_residuals_give_pure_seasonal(self):
        ts = _hours()
        rng = np.random.default_rng(21)
        comp = decompose(rng.standard_normal(THREE_YEARS), ts)
        curve = reseasonalize(comp, np.zeros(THREE_YEARS), ts)
        np.testing.assert_allclose(curve, comp.seasonal_at(ts), atol=1e-12)

    def test_linearity_in_residuals(self):
        ts = _hours()
        rng = np.random.default_rng(22)
        comp = decompose(rng.standard_normal(THREE_YEARS), ts)
        base = reseasonalize(comp, np.zeros(THREE_YEARS), ts)
        plus_one = reseasonalize(comp, np.ones(THREE_YEARS), ts)
        np.testing.assert_allclose(plus_one, base + 1.0, atol=1e-12)

    def test_dict_round_trip(self):
        ts = _hours()
        rng = np.random.default_rng(23)
        comp = decompose(rng.standard_normal(THREE_YEARS), ts, channel="PM10")
        back = SeasonalComponents.from_dict(comp.to_dict())
        np.testing.assert_array_equal(back.weekly, comp.weekly)
        np.testing.assert_array_equal(back.residual, comp.residual)
        assert back.channel == "PM10"


class TestSeasonalDecomposer:
    def test_transform_inverse_round_trip(self):
        ts = _hours()
        rng = np.random.default_rng(30)
        frame = TimeSeriesFrame(
            ts,
            {"a": 20.0 + rng.standard_normal(ts.size),
             "rain": np.abs(rng.standard_normal(ts.size))},
            {"a": "", "rain": "mm"},
        )
        est = SeasonalDecomposer(exempt=("rain",)).fit(frame)
        residual = est.transform(frame)
        assert "a" in est.components_
        assert "rain" not in est.components_
        np.testing.assert_array_equal(residual.values("rain"), frame.values("rain"))
        back = est.inverse_transform(residual)
        np.testing.assert_allclose(back.values("a"), frame.values("a"), atol=1e-9)

    def test_get_params_round_trip(self):
        est = SeasonalDecomposer(span=0.2, degree=1)
        params = est.get_params()
        assert params["span"] == 0.2
        clone = SeasonalDecomposer(**params)
        assert clone.get_params() == params
