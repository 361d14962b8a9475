"""CSV parsing, kNN imputation, wind-direction encoding and mean-centering.

Input dialect: header row of channel names, ISO-8601 timestamps in the
first column, decimal-point reals, empty cell = missing. Gaps in the
hourly grid are filled with missing-marker rows up to a configurable
limit, then imputed on the raw scale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    GapTooLarge,
    InsufficientNeighbors,
    MissingColumn,
    NonMonotonicTime,
    UnknownDirection,
)
from .frame import HOUR, TimeSeriesFrame

# Table-style observation schema: (channel, unit)
DEFAULT_SCHEMA = [
    ("SO2", "ppm"),
    ("CO", "ppm"),
    ("NO2", "ppm"),
    ("PM10", "ug/m3"),
    ("PM2.5", "ug/m3"),
    ("temperature", "degC"),
    ("wind_speed", "m/s"),
    ("wind_dir_sin", ""),
    ("wind_dir_cos", ""),
    ("pressure", "hPa"),
    ("humidity", "%"),
    ("precipitation", "mm"),
]

COMPASS_16 = [
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
    "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW",
]


@dataclass(frozen=True)
class ImputationConfig:
    """Neighbor count for kNN imputation; distance is Euclidean over
    co-occurring channels, scaled by per-channel standard deviation."""

    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def parse_csv(path, schema=DEFAULT_SCHEMA, max_gap_hours: int = 72) -> TimeSeriesFrame:
    """Parse an observation CSV into a validated hourly frame.

    Unparseable or empty cells become NaN. Missing timestamp rows are
    inserted as all-NaN rows when the gap is at most `max_gap_hours`.

    Raises
    ------
    MissingColumn
        A schema channel is absent from the header.
    NonMonotonicTime
        Timestamps out of order, duplicated, or off the hourly grid.
    GapTooLarge
        A timestamp gap exceeds `max_gap_hours` missing rows.
    """
    names = [name for name, _ in schema]
    units = dict(schema)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    for name in names:
        if name not in header[1:]:
            raise MissingColumn(f"channel {name!r} not in CSV header")
    col_of = {name: header.index(name) for name in names}

    stamps = []
    data = []
    for row in rows:
        try:
            stamps.append(np.datetime64(datetime.fromisoformat(row[0]), "s"))
        except ValueError as exc:
            raise NonMonotonicTime(f"unparseable timestamp {row[0]!r}") from exc
        data.append([_parse_cell(row[col_of[n]]) if col_of[n] < len(row) else math.nan
                     for n in names])
    ts = np.array(stamps, dtype="datetime64[s]")
    values = np.asarray(data, dtype=float)

    steps = np.diff(ts) / HOUR.astype("timedelta64[s]")
    if np.any(steps <= 0):
        raise NonMonotonicTime("timestamps must be strictly increasing")
    if np.any(steps != np.floor(steps)):
        raise NonMonotonicTime("timestamps must sit on the hourly grid")

    gaps = steps.astype(int) - 1
    if np.any(gaps > max_gap_hours):
        worst = int(gaps.max())
        raise GapTooLarge(f"{worst} consecutive missing rows exceeds {max_gap_hours}")
    if np.any(gaps > 0):
        n_total = len(ts) + int(gaps.sum())
        full_ts = ts[0] + np.arange(n_total) * HOUR.astype("timedelta64[s]")
        full = np.full((n_total, len(names)), math.nan)
        pos = ((ts - ts[0]) / HOUR.astype("timedelta64[s]")).astype(int)
        full[pos] = values
        ts, values = full_ts, full

    channels = {n: values[:, j] for j, n in enumerate(names)}
    return TimeSeriesFrame(ts, channels, units)


def _parse_cell(cell: str) -> float:
    cell = cell.strip()
    if not cell:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        return math.nan


def write_csv(frame: TimeSeriesFrame, path, float_fmt: str = ".9g") -> None:
    """Write a frame back to the input CSV dialect (NaN -> empty cell)."""
    names = frame.channel_names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + names)
        iso = frame.timestamps.astype("datetime64[s]").astype(str)
        cols = [frame.channels[n] for n in names]
        for i in range(len(frame)):
            row = [iso[i]]
            for col in cols:
                v = col[i]
                row.append("" if math.isnan(v) else format(v, float_fmt))
            writer.writerow(row)


def impute_knn(frame: TimeSeriesFrame, cfg: ImputationConfig = ImputationConfig()) -> TimeSeriesFrame:
    """Fill missing cells from the k nearest complete rows.

    Distance between a query row and a complete row is Euclidean over the
    channels observed in the query row, each scaled by that channel's
    standard deviation over complete rows. Every missing cell in a row is
    replaced by the mean of its channel over the same k neighbors.

    Raises
    ------
    InsufficientNeighbors
        Fewer than `cfg.k` complete rows exist.
    """
    X = frame.to_matrix()
    missing = np.isnan(X)
    if not missing.any():
        return frame

    complete = ~missing.any(axis=1)
    pool = X[complete]
    if pool.shape[0] < cfg.k:
        raise InsufficientNeighbors(
            f"{pool.shape[0]} complete rows < k={cfg.k}"
        )
    scale = pool.std(axis=0)
    scale[scale == 0] = 1.0

    out = X.copy()
    for i in np.flatnonzero(missing.any(axis=1)):
        obs = ~missing[i]
        if obs.any():
            diff = (pool[:, obs] - X[i, obs]) / scale[obs]
            dist = np.einsum("ij,ij->i", diff, diff)
        else:
            dist = np.zeros(pool.shape[0])
        neighbors = np.argsort(dist, kind="stable")[: cfg.k]
        fill = pool[neighbors].mean(axis=0)
        out[i, missing[i]] = fill[missing[i]]

    channels = {n: out[:, j] for j, n in enumerate(frame.channel_names)}
    return frame.with_channels(channels)


def encode_wind_direction(direction: str) -> tuple[float, float]:
    """Map a 16-point compass label to (sin, cos) of its meteorological
    bearing (N = 0 degrees, clockwise in steps of 22.5)."""
    label = direction.strip().upper()
    try:
        index = COMPASS_16.index(label)
    except ValueError:
        raise UnknownDirection(f"unknown compass label {direction!r}") from None
    theta = math.radians(index * 22.5)
    return math.sin(theta), math.cos(theta)


def center(frame: TimeSeriesFrame, means: dict[str, float] | None = None):
    """Subtract per-channel means (no division by standard deviation).

    With `means=None` the means are computed from the frame itself; pass
    training-split means to apply the same shift to validation/test data.
    Returns the centered frame and the means used, for inversion.
    """
    if means is None:
        means = {n: float(np.nanmean(v)) for n, v in frame.channels.items()}
    shifted = {n: frame.channels[n] - means.get(n, 0.0) for n in frame.channel_names}
    return frame.with_channels(shifted), means


def uncenter(frame: TimeSeriesFrame, means: dict[str, float]) -> TimeSeriesFrame:
    """Inverse of :func:`center`."""
    restored = {n: frame.channels[n] + means.get(n, 0.0) for n in frame.channel_names}
    return frame.with_channels(restored)


class KnnImputer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`impute_knn` (neighbors come from the
    transformed frame itself, so fit is a no-op)."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, frame: TimeSeriesFrame, y=None):
        return self

    def transform(self, frame: TimeSeriesFrame) -> TimeSeriesFrame:
        return impute_knn(frame, ImputationConfig(k=self.k))


class MeanCenterer(TransformerMixin, BaseEstimator):
    """Learn per-channel means on the training frame, subtract everywhere."""

    def __init__(self):
        pass

    def fit(self, frame: TimeSeriesFrame, y=None):
        _, self.means_ = center(frame)
        return self

    def transform(self, frame: TimeSeriesFrame) -> TimeSeriesFrame:
        shifted, _ = center(frame, self.means_)
        return shifted

    def inverse_transform(self, frame: TimeSeriesFrame) -> TimeSeriesFrame:
        return uncenter(frame, self.means_)
