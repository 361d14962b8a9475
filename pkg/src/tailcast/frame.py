"""Timestamped multivariate hourly series.

The frame is the exchange format between every pipeline stage: named
channels of equal length on a strictly increasing hourly grid. Missing
values are NaN. Frames are immutable after construction; every transform
returns a new frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonMonotonicTime

HOUR = np.timedelta64(1, "h")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Hourly multivariate series with named channels.

    Parameters
    ----------
    timestamps : np.ndarray
        datetime64 vector, strictly increasing with a constant 1 h step.
    channels : dict
        channel name -> float vector, one value per timestamp (NaN = missing).
    units : dict
        channel name -> unit string.
    metadata : dict
        Free-form provenance (e.g. synthetic generation parameters).
    """

    timestamps: np.ndarray
    channels: dict[str, np.ndarray]
    units: dict[str, str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        if ts.ndim != 1 or ts.size == 0:
            raise ValueError("timestamps must be a non-empty 1-D vector")
        steps = np.diff(ts)
        if ts.size > 1 and not np.all(steps == HOUR.astype(steps.dtype)):
            raise NonMonotonicTime("timestamps must increase in 1 h steps")
        object.__setattr__(self, "timestamps", _readonly(ts))
        chans = {}
        for name, values in self.channels.items():
            v = np.asarray(values, dtype=float)
            if v.shape != ts.shape:
                raise ValueError(
                    f"channel {name!r} has length {v.size}, expected {ts.size}"
                )
            chans[name] = _readonly(v)
        object.__setattr__(self, "channels", chans)

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def channel_names(self) -> list[str]:
        return list(self.channels)

    def values(self, name: str) -> np.ndarray:
        return self.channels[name]

    def to_matrix(self, names=None) -> np.ndarray:
        """Stack channels into an (n_samples, n_channels) matrix."""
        names = list(names) if names is not None else self.channel_names
        return np.column_stack([self.channels[n] for n in names])

    def with_channels(self, new_channels: dict[str, np.ndarray], **meta) -> "TimeSeriesFrame":
        """Copy of the frame with some channels replaced."""
        merged = dict(self.channels)
        merged.update(new_channels)
        return TimeSeriesFrame(
            self.timestamps, merged, dict(self.units), {**self.metadata, **meta}
        )

    def slice(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            self.timestamps[start:stop],
            {k: v[start:stop] for k, v in self.channels.items()},
            dict(self.units),
            dict(self.metadata),
        )

    def has_missing(self) -> bool:
        return any(np.isnan(v).any() for v in self.channels.values())

    # calendar lookups used by the seasonal component tables
    def day_of_year(self) -> np.ndarray:
        """Ordinal day of year, 1..366."""
        return day_of_year(self.timestamps)

    def day_of_week(self) -> np.ndarray:
        """Weekday index, Monday=0 .. Sunday=6."""
        return day_of_week(self.timestamps)

    def hour_of_day(self) -> np.ndarray:
        return hour_of_day(self.timestamps)


def day_of_year(ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype="datetime64[s]")
    days = ts.astype("datetime64[D]")
    year_start = days.astype("datetime64[Y]").astype("datetime64[D]")
    return (days - year_start).astype(int) + 1


def day_of_week(ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype="datetime64[s]")
    # 1970-01-01 was a Thursday (index 3 with Monday=0)
    return (ts.astype("datetime64[D]").astype(int) + 3) % 7


def hour_of_day(ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype="datetime64[s]")
    return ts.astype("datetime64[h]").astype(int) % 24


def hourly_range(start, n_hours: int) -> np.ndarray:
    """n_hours consecutive hourly timestamps from `start` (ISO string or datetime64)."""
    t0 = np.datetime64(start, "s")
    return t0 + np.arange(n_hours) * HOUR.astype("timedelta64[s]")
