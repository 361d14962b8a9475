import numpy as np
import pytest

from tailcast.base import Forecaster
from tailcast.baselines import AutoregressiveForecaster, OrnsteinUhlenbeckForecaster
from tailcast.diagnostics import compare_tails
from tailcast.errors import (
    LengthMismatch,
    TooFewSamples,
    ZeroDenominator,
    ZeroMean,
    ZeroVariance,
)
from tailcast.evaluation import (
    ChannelSpec,
    blocked_splits,
    corr,
    evaluate,
    generate_synthetic,
    nmaef,
    nmbf,
    rmse,
    windows_from_plan,
)
from tailcast.seasonal import decompose


class TestBlockedSplits:
    def test_default_ratios_on_100_samples(self):
        plan = blocked_splits(100, (0.67, 0.20, 0.13), n_folds=1)
        test = [b for b in plan.blocks if b.role == "test"]
        assert len(test) == 1
        assert (test[0].start, test[0].stop) == (87, 100)
        covered = sorted(np.concatenate([np.arange(b.start, b.stop)
                                         for b in plan.blocks]))
        assert covered == list(range(100))

    def test_blocks_are_contiguous_ordered_disjoint(self):
        plan = blocked_splits(1000, n_folds=3)
        stops = [b.stop for b in plan.blocks]
        starts = [b.start for b in plan.blocks]
        assert starts[0] == 0 and stops[-1] == 1000
        assert all(stops[i] == starts[i + 1] for i in range(len(stops) - 1))

    def test_interleaved_train_validation_per_fold(self):
        plan = blocked_splits(1000, n_folds=2)
        roles = [b.role for b in plan.blocks]
        assert roles == ["train", "validation", "train", "validation", "test"]

    def test_deterministic(self):
        a = blocked_splits(500, n_folds=2)
        b = blocked_splits(500, n_folds=2)
        assert a == b

    def test_too_few_samples_raises(self):
        with pytest.raises(TooFewSamples):
            blocked_splits(20, min_block=10)

    def test_windows_never_cross_block_boundaries(self):
        plan = blocked_splits(500, n_folds=3)
        for role in ("train", "validation", "test"):
            for start in windows_from_plan(plan, 24, role):
                block = plan.block_of(start)
                assert block.role == role
                assert start + 24 <= block.stop

    def test_cross_boundary_window_count_is_zero(self):
        plan = blocked_splits(300, n_folds=2)
        window = 16
        starts = set()
        for role in ("train", "validation", "test"):
            starts.update(windows_from_plan(plan, window, role))
        crossing = [s for s in range(300 - window + 1)
                    if plan.block_of(s) is not plan.block_of(s + window - 1)]
        assert not starts.intersection(crossing)
        assert sum(1 for s in starts if s in crossing) == 0


class TestNmbf:
    def test_perfect_prediction_is_zero(self):
        assert nmbf([1.0, 2.0, 3.0], [3.0, 1.0, 2.0]) == 0.0

    def test_double_mean_gives_one(self):
        assert nmbf([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0)

    def test_half_mean_gives_minus_one(self):
        assert nmbf([2.0, 2.0], [1.0, 1.0]) == pytest.approx(-1.0)

    def test_sign_symmetry_on_random_positive_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            o = rng.uniform(0.5, 5.0, 30)
            m = rng.uniform(0.5, 5.0, 30)
            assert nmbf(o, m) == pytest.approx(-nmbf(m, o), abs=1e-12)

    def test_zero_mean_raises(self):
        with pytest.raises(ZeroMean):
            nmbf([0.0, 0.0], [1.0, 1.0])


class TestNmaef:
    def test_perfect_prediction_is_zero(self):
        assert nmaef([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_upper_branch(self):
        assert nmaef([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0)

    def test_lower_branch_symmetric(self):
        assert nmaef([2.0, 2.0], [1.0, 1.0]) == pytest.approx(1.0)

    def test_swap_symmetry_on_positive_vectors(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            o = rng.uniform(0.5, 5.0, 25)
            m = rng.uniform(0.5, 5.0, 25)
            assert nmaef(o, m) == pytest.approx(nmaef(m, o), abs=1e-12)

    def test_zero_denominator_raises(self):
        # prediction mean below observation mean selects the sum(M) branch
        with pytest.raises(ZeroDenominator):
            nmaef([1.0, 1.0], [0.0, 0.0])


class TestRmse:
    def test_perfect_prediction_is_zero(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_arithmetic_example(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355339, abs=1e-6)

    def test_homogeneity(self):
        rng = np.random.default_rng(2)
        o = rng.normal(size=50)
        m = rng.normal(size=50)
        doubled = o + 2.0 * (m - o)
        assert rmse(o, doubled) == pytest.approx(2.0 * rmse(o, m), rel=1e-12)

    def test_literal_variant_divides_by_n(self):
        o = np.zeros(4)
        m = np.full(4, 2.0)
        assert rmse(o, m, literal=True) == pytest.approx(np.sqrt(16.0) / 4.0)

    def test_bias_variance_identity(self):
        rng = np.random.default_rng(3)
        o = rng.normal(size=200)
        m = o + rng.normal(0.3, 0.7, 200)
        err = m - o
        assert rmse(o, m) ** 2 == pytest.approx(err.var() + err.mean() ** 2,
                                                abs=1e-9)

    def test_length_mismatch_raises(self):
        with pytest.raises(LengthMismatch):
            rmse([1.0], [1.0, 2.0])


class TestCorr:
    def test_identical_series_give_one(self):
        assert corr([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_negated_series_give_minus_one(self):
        assert corr([1.0, 2.0, 3.0], [-1.0, -2.0, -3.0]) == pytest.approx(-1.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(4)
        o = rng.normal(size=100)
        assert corr(o, 3.0 * o + 7.0) == pytest.approx(1.0, abs=1e-12)

    def test_constant_series_raises(self):
        with pytest.raises(ZeroVariance):
            corr([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_literal_variant_divides_by_n(self):
        o = np.array([1.0, 2.0, 3.0, 4.0])
        assert corr(o, o, literal=True) == pytest.approx(0.25)


class _OracleForecaster(Forecaster):
    """Test double that reads the future it was given."""

    def __init__(self, series, noise=0.0):
        self.series = np.asarray(series, dtype=float)
        self.noise = noise
        self._cursor = {}

    def fit(self, X, y=None):
        return self

    def context_length(self):
        return 1

    def predict(self, horizon, history=None):
        last = float(np.ravel(history)[-1])
        pos = int(np.flatnonzero(np.isclose(self.series, last))[0])
        future = self.series[pos + 1:pos + 1 + horizon]
        return future + self.noise


class _ConstantForecaster(Forecaster):
    def __init__(self, value=0.0):
        self.value = value

    def fit(self, X, y=None):
        return self

    def context_length(self):
        return 1

    def predict(self, horizon, history=None):
        return np.full(horizon, self.value)


class TestEvaluate:
    def test_perfect_oracle_scores_perfectly(self):
        rng = np.random.default_rng(0)
        series = rng.uniform(10.0, 20.0, 400)
        plan = blocked_splits(400)
        report = evaluate({"oracle": _OracleForecaster(series)}, series, 0,
                          plan, horizons=(3, 6))
        for h in (3, 6):
            assert report.cell("oracle", "-", h, "nmbf") == pytest.approx(0.0, abs=1e-12)
            assert report.cell("oracle", "-", h, "nmaef") == pytest.approx(0.0, abs=1e-12)
            assert report.cell("oracle", "-", h, "rmse") == pytest.approx(0.0, abs=1e-12)
            assert report.cell("oracle", "-", h, "corr") == pytest.approx(1.0, abs=1e-9)

    def test_constant_predictor_yields_null_corr_not_crash(self):
        rng = np.random.default_rng(1)
        series = rng.uniform(5.0, 6.0, 300)
        plan = blocked_splits(300)
        report = evaluate({"const": _ConstantForecaster(5.5)}, series, 0, plan,
                          horizons=(3,))
        assert report.cell("const", "-", 3, "corr") is None
        assert report.cell("const", "-", 3, "rmse") is not None

    def test_ar_beats_ou_on_ar2_data(self):
        # persistent pseudo-periodic AR(2): the two-lag state carries
        # information the single-value OU relaxation cannot represent
        rng = np.random.default_rng(7)
        n = 6000
        eps = rng.standard_normal(n + 500)
        y = np.zeros(n + 500)
        for t in range(2, n + 500):
            y[t] = 1.9 * y[t - 1] - 0.905 * y[t - 2] + eps[t]
        series = y[500:]
        plan = blocked_splits(n)
        train_block = plan.blocks[0]
        train = series[train_block.start:train_block.stop]
        models = {
            "ou": OrnsteinUhlenbeckForecaster(max_lag=400, n_paths=400, seed=0).fit(train),
            "ar": AutoregressiveForecaster(order=2).fit(train),
        }
        report = evaluate(models, series, 0, plan, horizons=(3, 6, 12, 24),
                          stride=8)
        for h in (3, 6, 12, 24):
            assert (report.cell("ar", "-", h, "rmse")
                    < report.cell("ou", "-", h, "rmse"))

    def test_invert_maps_back_to_raw_scale(self):
        rng = np.random.default_rng(3)
        series = rng.uniform(1.0, 2.0, 300)
        plan = blocked_splits(300)
        shift = 100.0
        report = evaluate({"oracle": _OracleForecaster(series)}, series, 0,
                          plan, horizons=(3,),
                          invert=lambda v, idx: np.asarray(v) + shift)
        assert report.cell("oracle", "-", 3, "rmse") == pytest.approx(0.0, abs=1e-12)

    def test_report_serialization(self, tmp_path):
        rng = np.random.default_rng(4)
        series = rng.uniform(3.0, 4.0, 300)
        plan = blocked_splits(300)
        report = evaluate({"oracle": _OracleForecaster(series, noise=0.5)},
                          series, 0, plan, horizons=(3,))
        d = report.to_dict()
        assert d["cells"][0]["model"] == "oracle"
        csv_path = tmp_path / "metrics.csv"
        report.write_csv(csv_path)
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("metric,model")
        assert "-:h3" in header


class TestTrainIndexHygiene:
    def test_window_provenance_stays_in_role_blocks(self):
        plan = blocked_splits(2000, n_folds=2)
        window_len = 72
        train_idx = set(plan.indices("train"))
        val_idx = set(plan.indices("validation"))
        test_idx = set(plan.indices("test"))
        for start in windows_from_plan(plan, window_len, "train"):
            accessed = set(range(start, start + window_len))
            assert accessed <= train_idx
            assert not accessed & val_idx
            assert not accessed & test_idx


class TestGenerateSynthetic:
    def test_zero_spec_gives_constant_series(self):
        frame = generate_synthetic(
            {"flat": ChannelSpec(level=3.0, noise_scale=0.0)},
            n_hours=100, seed=0)
        np.testing.assert_allclose(frame.values("flat"), 3.0)

    def test_daily_amplitude_recovered_by_decompose(self):
        frame = generate_synthetic(
            {"x": ChannelSpec(level=10.0, daily_amp=4.0, noise="gaussian",
                              noise_scale=0.3)},
            n_hours=3 * 365 * 24, seed=5)
        comp = decompose(frame.values("x"), frame.timestamps)
        amplitude = (comp.daily.max() - comp.daily.min()) / 2.0
        assert amplitude == pytest.approx(4.0, rel=0.02)

    def test_lognormal_noise_prefers_lognormal_tail(self):
        frame = generate_synthetic(
            {"x": ChannelSpec(noise="lognormal", noise_scale=1.0,
                              lognormal_sigma=1.0)},
            n_hours=20_000, seed=6)
        fit = compare_tails(frame.values("x"))
        assert fit.preferred == "lognormal"

    def test_symmetric_lognormal_is_centered_and_heavy(self):
        frame = generate_synthetic(
            {"x": ChannelSpec(noise="lognormal-symmetric", noise_scale=1.0,
                              lognormal_sigma=1.5)},
            n_hours=50_000, seed=7)
        x = frame.values("x")
        assert abs(np.median(x)) < 0.05
        assert np.abs(x).max() > 10 * np.abs(x).std()

    def test_mix_couples_channels(self):
        frame = generate_synthetic(
            {"a": ChannelSpec(noise="gaussian", noise_scale=1.0),
             "b": ChannelSpec(noise_scale=0.0, mix=(("a", 2.0),))},
            n_hours=500, seed=8)
        np.testing.assert_allclose(frame.values("b"), 2.0 * frame.values("a"))

    def test_seeded_determinism_and_metadata(self):
        spec = {"x": ChannelSpec(yearly_amp=1.0, ar=(0.5,), noise_scale=0.7)}
        a = generate_synthetic(spec, 1000, seed=9)
        b = generate_synthetic(spec, 1000, seed=9)
        np.testing.assert_array_equal(a.values("x"), b.values("x"))
        assert a.metadata["channels"]["x"]["ar"] == [0.5]
        assert a.metadata["seed"] == 9
