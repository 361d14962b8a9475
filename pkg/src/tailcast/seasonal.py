"""Three-scale additive seasonal adjustment and its exact inverse.

A series is split into a LOESS-smoothed day-of-year curve, a weekday
pattern, an hour-of-day pattern and a residual. The residual is defined
as the remainder, so reconstruction is an identity by construction:

    x(t) = yearly_smoothed[doy(t)] + weekly[dow(t)] + daily[hod(t)] + residual[t]

The weekly and daily vectors are mean-zero; the overall level lives in
the yearly curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateFit, SpanTooShort
from .frame import TimeSeriesFrame, day_of_week, day_of_year, hour_of_day

N_DOY = 366
YEAR_HOURS = 365 * 24


@dataclass(frozen=True)
class LoessConfig:
    """Locally weighted scatterplot smoothing parameters.

    span : fraction of points entering each local fit, in (0, 1]
    degree : local polynomial degree
    iterations : bisquare robustness reweighting passes (>= 0)
    """

    span: float = 0.15
    degree: int = 2
    iterations: int = 1

    def __post_init__(self):
        if not 0 < self.span <= 1:
            raise ValueError("span must be in (0, 1]")
        if self.degree < 0 or self.iterations < 0:
            raise ValueError("degree and iterations must be non-negative")


def loess_smooth(positions, values, cfg: LoessConfig = LoessConfig()) -> np.ndarray:
    """Smooth `values` observed at `positions` by local polynomial regression.

    At each position the span-nearest points are fit with a weighted
    least-squares polynomial under tricube weights; robustness iterations
    reweight by the bisquare of the residuals.

    Raises
    ------
    DegenerateFit
        A local system has fewer effective points than coefficients.
    """
    x = np.asarray(positions, dtype=float)
    y = np.asarray(values, dtype=float)
    n = x.size
    if n < cfg.degree + 2:
        raise ValueError(f"need at least degree+2={cfg.degree + 2} points")
    # the farthest neighbor gets tricube weight 0, so keep degree+2 in reach
    m = min(max(int(np.ceil(cfg.span * n)), cfg.degree + 2), n)

    robust = np.ones(n)
    smoothed = y.copy()
    for iteration in range(cfg.iterations + 1):
        smoothed = _loess_pass(x, y, m, cfg.degree, robust)
        if iteration == cfg.iterations:
            break
        resid = y - smoothed
        s = np.median(np.abs(resid))
        if s <= 0:
            break
        u = resid / (6.0 * s)
        robust = np.clip(1.0 - u * u, 0.0, None) ** 2
    return smoothed


def _loess_pass(x, y, m, degree, robust):
    n = x.size
    out = np.empty(n)
    order = np.argsort(x, kind="stable")
    xs, ys, rs = x[order], y[order], robust[order]
    for j in range(n):
        # span-nearest window around the target position
        lo, hi = _nearest_window(xs, j, m)
        xi, yi, ri = xs[lo:hi], ys[lo:hi], rs[lo:hi]
        d = np.abs(xi - xs[j])
        dmax = d.max()
        if dmax == 0:
            w = ri.copy()
        else:
            w = (1.0 - (d / dmax) ** 3) ** 3 * ri
        if np.count_nonzero(w > 0) < degree + 1:
            raise DegenerateFit(
                f"local system at position {xs[j]} has rank < {degree + 1}"
            )
        out[j] = _weighted_polyval(xi - xs[j], yi, w, degree)
    inverse = np.empty(n, dtype=int)
    inverse[order] = np.arange(n)
    return out[inverse]


def _nearest_window(xs, j, m):
    """Indices [lo, hi) of the m sorted positions nearest xs[j]."""
    n = xs.size
    lo, hi = j, j + 1
    while hi - lo < m:
        if lo == 0:
            hi += 1
        elif hi == n:
            lo -= 1
        elif xs[j] - xs[lo - 1] <= xs[hi] - xs[j]:
            lo -= 1
        else:
            hi += 1
    return lo, hi


def _weighted_polyval(dx, y, w, degree):
    """Evaluate the weighted LS polynomial fit at dx = 0."""
    sw = np.sqrt(w)
    V = np.vander(dx, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(V * sw[:, None], y * sw, rcond=None)
    if rank < degree + 1:
        raise DegenerateFit("singular weighted polynomial system")
    return coeffs[0]


@dataclass(frozen=True)
class SeasonalComponents:
    """Additive components of one channel plus reconstruction metadata.

    yearly_raw : 366-vector of per-day-of-year means (before smoothing)
    yearly_smoothed : 366-vector, LOESS-smoothed yearly curve (carries the level)
    weekly : 7-vector, mean-zero
    daily : 24-vector, mean-zero
    residual : full-length remainder
    """

    yearly_raw: np.ndarray
    yearly_smoothed: np.ndarray
    weekly: np.ndarray
    daily: np.ndarray
    residual: np.ndarray
    channel: str = ""

    def seasonal_at(self, timestamps) -> np.ndarray:
        """Sum of the three seasonal terms at each timestamp."""
        doy = day_of_year(timestamps) - 1
        dow = day_of_week(timestamps)
        hod = hour_of_day(timestamps)
        return self.yearly_smoothed[doy] + self.weekly[dow] + self.daily[hod]

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "yearly_raw": self.yearly_raw.tolist(),
            "yearly_smoothed": self.yearly_smoothed.tolist(),
            "weekly": self.weekly.tolist(),
            "daily": self.daily.tolist(),
            "residual": self.residual.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeasonalComponents":
        return cls(
            yearly_raw=np.asarray(d["yearly_raw"], dtype=float),
            yearly_smoothed=np.asarray(d["yearly_smoothed"], dtype=float),
            weekly=np.asarray(d["weekly"], dtype=float),
            daily=np.asarray(d["daily"], dtype=float),
            residual=np.asarray(d["residual"], dtype=float),
            channel=d.get("channel", ""),
        )


def decompose(values, timestamps, loess: LoessConfig = LoessConfig(),
              channel: str = "", pad_days: int = 30) -> SeasonalComponents:
    """Split one channel into yearly/weekly/daily components and a residual.

    Step 1: daily-averaged data are averaged per day of year, then
    LOESS-smoothed with circular padding; per-weekday means of the daily
    averages (centered over the 7 slots) give the weekly component.
    Step 2: both day-scale components are subtracted from the hourly data.
    Step 3: per-hour-of-day means give the daily component (centered, its
    mean folded into the yearly curve); the residual is the remainder.

    Raises
    ------
    SpanTooShort
        Series covers less than 2 full years.
    """
    x = np.asarray(values, dtype=float)
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    if x.size != ts.size:
        raise ValueError("values and timestamps must have equal length")
    if ts.size < 2 * YEAR_HOURS:
        raise SpanTooShort(
            f"{ts.size} hours < 2 years; day-of-year averages need >= 2 full years"
        )

    days = ts.astype("datetime64[D]")
    day_codes = (days - days[0]).astype(int)
    n_days = day_codes[-1] + 1
    day_sums = np.bincount(day_codes, weights=x, minlength=n_days)
    day_counts = np.bincount(day_codes, minlength=n_days)
    daily_avg = day_sums / day_counts
    unique_days = days[0] + np.arange(n_days)

    doy_d = day_of_year(unique_days) - 1
    dow_d = day_of_week(unique_days)

    yearly_raw = _slot_means(doy_d, daily_avg, N_DOY)
    yearly_smoothed = _smooth_circular(yearly_raw, loess, pad_days)

    weekly = _slot_means(dow_d, daily_avg, 7)
    weekly = weekly - weekly.mean()

    doy = day_of_year(ts) - 1
    dow = day_of_week(ts)
    hod = hour_of_day(ts)
    partial = x - yearly_smoothed[doy] - weekly[dow]
    daily = _slot_means(hod, partial, 24)
    level = daily.mean()
    daily = daily - level
    yearly_smoothed = yearly_smoothed + level

    residual = x - yearly_smoothed[doy] - weekly[dow] - daily[hod]
    return SeasonalComponents(
        yearly_raw=yearly_raw,
        yearly_smoothed=yearly_smoothed,
        weekly=weekly,
        daily=daily,
        residual=residual,
        channel=channel,
    )


def _slot_means(codes, values, n_slots):
    """Per-slot means; empty slots are filled from the nearest occupied slot
    (circularly), so every calendar lookup is total."""
    sums = np.bincount(codes, weights=values, minlength=n_slots)
    counts = np.bincount(codes, minlength=n_slots)
    means = np.full(n_slots, np.nan)
    occupied = counts > 0
    means[occupied] = sums[occupied] / counts[occupied]
    if not occupied.all():
        idx = np.flatnonzero(occupied)
        for j in np.flatnonzero(~occupied):
            dist = np.minimum((idx - j) % n_slots, (j - idx) % n_slots)
            means[j] = means[idx[np.argmin(dist)]]
    return means


def _smooth_circular(values, cfg, pad):
    padded = np.concatenate([values[-pad:], values, values[:pad]])
    positions = np.arange(-pad, values.size + pad, dtype=float)
    smoothed = loess_smooth(positions, padded, cfg)
    return smoothed[pad:pad + values.size]


def reseasonalize(components: SeasonalComponents, predicted_residuals, timestamps) -> np.ndarray:
    """Inverse of :func:`decompose`: residuals back to the raw scale."""
    r = np.asarray(predicted_residuals, dtype=float)
    return r + components.seasonal_at(timestamps)


class SeasonalDecomposer(TransformerMixin, BaseEstimator):
    """Per-channel seasonal adjustment with the fit/transform/inverse API.

    Components are learned from the fit frame; transform returns the
    frame of residuals, inverse_transform restores the raw scale.
    Channels listed in `exempt` (sparse, event-like series such as
    precipitation) pass through untouched.
    """

    def __init__(self, span: float = 0.15, degree: int = 2, iterations: int = 1,
                 exempt: tuple = ()):
        self.span = span
        self.degree = degree
        self.iterations = iterations
        self.exempt = exempt

    def _config(self) -> LoessConfig:
        return LoessConfig(span=self.span, degree=self.degree, iterations=self.iterations)

    def fit(self, frame: TimeSeriesFrame, y=None):
        cfg = self._config()
        self.components_ = {
            name: decompose(frame.channels[name], frame.timestamps, cfg, channel=name)
            for name in frame.channel_names
            if name not in self.exempt
        }
        return self

    def transform(self, frame: TimeSeriesFrame) -> TimeSeriesFrame:
        adjusted = {
            name: frame.channels[name] - comp.seasonal_at(frame.timestamps)
            for name, comp in self.components_.items()
        }
        return frame.with_channels(adjusted)

    def inverse_transform(self, frame: TimeSeriesFrame) -> TimeSeriesFrame:
        restored = {
            name: reseasonalize(comp, frame.channels[name], frame.timestamps)
            for name, comp in self.components_.items()
        }
        return frame.with_channels(restored)
