"""Blocked cross-validation, the four report metrics, model comparison,
and the synthetic-series generator used as the acceptance oracle.

Blocks are contiguous and time-ordered; training and validation blocks
interleave across the pre-test span so both see multiple seasons, and
the test block is the final contiguous stretch. No sliding window may
cross a block boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LengthMismatch,
    TooFewSamples,
    ZeroDenominator,
    ZeroMean,
    ZeroVariance,
)
from .frame import TimeSeriesFrame, hourly_range

DEFAULT_RATIOS = (0.67, 0.20, 0.13)
DEFAULT_HORIZONS = (3, 6, 12, 24)


@dataclass(frozen=True)
class Block:
    role: str          # "train" | "validation" | "test"
    start: int         # inclusive
    stop: int          # exclusive

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class SplitPlan:
    """Ordered, contiguous, non-overlapping role-labelled index blocks."""

    blocks: tuple
    ratios: tuple

    def indices(self, role: str) -> np.ndarray:
        parts = [np.arange(b.start, b.stop) for b in self.blocks if b.role == role]
        return np.concatenate(parts) if parts else np.array([], dtype=int)

    def block_of(self, index: int) -> Block:
        for b in self.blocks:
            if b.start <= index < b.stop:
                return b
        raise IndexError(index)

    def to_dict(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "blocks": [{"role": b.role, "start": b.start, "stop": b.stop}
                       for b in self.blocks],
        }


def blocked_splits(n_samples: int, ratios=DEFAULT_RATIOS, n_folds: int = 1,
                   min_block: int = 1) -> SplitPlan:
    """Deterministic blocked split: interleaved train/validation blocks
    over the pre-test span, test as the final contiguous block.

    Raises
    ------
    TooFewSamples
        Any block would be shorter than min_block.
    """
    r_train, r_val, r_test = ratios
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    n_test = int(round(n_samples * r_test))
    pre = n_samples - n_test

    blocks = []
    # cut the pre-test span into n_folds (train, validation) pairs
    bounds = np.round(np.linspace(0, pre, n_folds + 1)).astype(int)
    for i in range(n_folds):
        lo, hi = int(bounds[i]), int(bounds[i + 1])
        span = hi - lo
        cut = lo + int(round(span * r_train / (r_train + r_val)))
        blocks.append(Block("train", lo, cut))
        blocks.append(Block("validation", cut, hi))
    blocks.append(Block("test", pre, n_samples))

    if any(len(b) < max(min_block, 1) for b in blocks):
        sizes = [len(b) for b in blocks]
        raise TooFewSamples(f"block sizes {sizes} with min_block={min_block}")
    return SplitPlan(blocks=tuple(blocks), ratios=tuple(ratios))


def windows_from_plan(plan: SplitPlan, window_len: int, role: str) -> np.ndarray:
    """Window start indices such that [start, start+window_len) lies fully
    inside a single block of the given role, so no window crosses a boundary."""
    starts = []
    for b in plan.blocks:
        if b.role != role:
            continue
        starts.extend(range(b.start, b.stop - window_len + 1))
    return np.asarray(starts, dtype=int)


# --- metrics -------------------------------------------------------------------

def nmbf(actual, predicted) -> float:
    """Normalized mean bias factor; positive means overestimation.

    M_bar/O_bar - 1 when the prediction mean is at least the observation
    mean, else 1 - O_bar/M_bar.

    Raises
    ------
    ZeroMean
        The active branch denominator mean is zero.
    """
    o, m = _metric_pair(actual, predicted)
    o_bar, m_bar = o.mean(), m.mean()
    if m_bar >= o_bar:
        if o_bar == 0:
            raise ZeroMean("observation mean is zero")
        return float(m_bar / o_bar - 1.0)
    if m_bar == 0:
        raise ZeroMean("prediction mean is zero")
    return float(1.0 - o_bar / m_bar)


def nmaef(actual, predicted) -> float:
    """Normalized mean absolute error factor (branch chosen by the means).

    Raises
    ------
    ZeroDenominator
        The active branch denominator sum is zero.
    """
    o, m = _metric_pair(actual, predicted)
    err = np.abs(m - o).sum()
    denom = o.sum() if m.mean() >= o.mean() else m.sum()
    if denom == 0:
        raise ZeroDenominator("branch denominator sums to zero")
    return float(err / denom)


def rmse(actual, predicted, literal: bool = False) -> float:
    """Root mean squared error.

    The standard sqrt(mean(e^2)) convention; `literal=True` switches to
    the alternative sqrt(sum(e^2))/N form for auditability.
    """
    o, m = _metric_pair(actual, predicted)
    sq = np.sum((m - o) ** 2)
    if literal:
        return float(np.sqrt(sq) / o.size)
    return float(np.sqrt(sq / o.size))


def corr(actual, predicted, literal: bool = False) -> float:
    """Pearson correlation; `literal=True` adds a 1/N prefactor variant
    kept for auditability.

    Raises
    ------
    ZeroVariance
        Either series is constant.
    """
    o, m = _metric_pair(actual, predicted)
    od, md = o - o.mean(), m - m.mean()
    denom = np.sqrt(np.sum(md ** 2) * np.sum(od ** 2))
    if denom == 0:
        raise ZeroVariance("correlation needs non-constant series")
    value = float(np.sum(md * od) / denom)
    return value / o.size if literal else value


def _metric_pair(actual, predicted):
    o = np.asarray(actual, dtype=float)
    m = np.asarray(predicted, dtype=float)
    if o.shape != m.shape or o.size == 0:
        raise LengthMismatch(f"shapes {o.shape} and {m.shape}")
    return o.ravel(), m.ravel()


METRICS = {"nmbf": nmbf, "nmaef": nmaef, "rmse": rmse, "corr": corr}


# --- model evaluation -------------------------------------------------------------

@dataclass
class MetricsReport:
    """Per (model, loss, horizon) metric table with per-cell failures kept
    as None instead of aborting the run."""

    entries: dict = field(default_factory=dict)
    horizons: tuple = DEFAULT_HORIZONS

    def add(self, model: str, loss: str, horizon: int, values: dict, n: int):
        self.entries[(model, loss, horizon)] = {"metrics": values, "n": n}

    def cell(self, model: str, loss: str, horizon: int, metric: str):
        return self.entries[(model, loss, horizon)]["metrics"][metric]

    def models(self) -> list:
        seen = []
        for model, loss, _ in self.entries:
            if (model, loss) not in seen:
                seen.append((model, loss))
        return seen

    def to_dict(self) -> dict:
        out = []
        for (model, loss, horizon), payload in sorted(self.entries.items()):
            out.append({
                "model": model, "loss": loss, "horizon": horizon,
                "n": payload["n"], **payload["metrics"],
            })
        return {"horizons": list(self.horizons), "cells": out}

    def write_csv(self, path, float_fmt: str = ".9g") -> None:
        """Rows = metric x model, columns = loss x horizon."""
        pairs = self.models()
        losses = list(dict.fromkeys(loss for _, loss in pairs))
        names = list(dict.fromkeys(model for model, _ in pairs))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "model"]
                            + [f"{loss}:h{h}" for loss in losses for h in self.horizons])
            for metric in METRICS:
                for name in names:
                    row = [metric, name]
                    for loss in losses:
                        for h in self.horizons:
                            cell = self.entries.get((name, loss, h))
                            if cell is None or cell["metrics"][metric] is None:
                                row.append("")
                            else:
                                row.append(format(cell["metrics"][metric], float_fmt))
                    writer.writerow(row)


def evaluate(models: dict, matrix, target_col: int, plan: SplitPlan,
             horizons=DEFAULT_HORIZONS, stride: int = 1,
             invert=None) -> MetricsReport:
    """Roll each fitted model over the test block and score every horizon.

    For each forecast origin the model sees its trailing context (inside
    the test block only) and emits max(horizons) steps; the h-step-ahead
    value is scored against the actual at lead h. `invert`, when given,
    maps (values, absolute_indices) back to the reporting scale before
    metrics are computed. Per-cell metric failures become None cells.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    h_max = max(horizons)
    report = MetricsReport(horizons=tuple(horizons))

    test_blocks = [b for b in plan.blocks if b.role == "test"]
    for name, model in models.items():
        ctx = model.context_length()
        per_lead_pred = {h: [] for h in horizons}
        per_lead_act = {h: [] for h in horizons}
        for b in test_blocks:
            for origin in range(b.start + ctx, b.stop - h_max + 1, stride):
                history = M[origin - ctx:origin]
                if model.multivariate:
                    pred = model.predict(h_max, history=history,
                                         tau_start=origin - ctx)
                else:
                    pred = model.predict(h_max, history=history[:, target_col])
                actual = M[origin:origin + h_max, target_col]
                idx = np.arange(origin, origin + h_max)
                if invert is not None:
                    pred = invert(pred, idx)
                    actual = invert(actual, idx)
                for h in horizons:
                    per_lead_pred[h].append(pred[h - 1])
                    per_lead_act[h].append(actual[h - 1])
        for h in horizons:
            actual = np.asarray(per_lead_act[h])
            predicted = np.asarray(per_lead_pred[h])
            values = {}
            for metric_name, fn in METRICS.items():
                try:
                    values[metric_name] = fn(actual, predicted)
                except (ZeroMean, ZeroDenominator, ZeroVariance):
                    values[metric_name] = None
            report.add(name, model.loss_label, h, values, actual.size)
    return report


# --- synthetic generator ------------------------------------------------------------

@dataclass(frozen=True)
class ChannelSpec:
    """One synthetic channel: three sinusoids plus AR-filtered noise.

    noise kinds: "gaussian"; "lognormal" (exp(N(0, lognormal_sigma)) minus
    its median, a one-sided heavy right tail); "lognormal-symmetric" (the
    same spikes with a random sign, median and mean both zero). `mix` adds
    a weighted sum of other channels' finished values, for coupled targets.
    """

    level: float = 0.0
    yearly_amp: float = 0.0
    weekly_amp: float = 0.0
    daily_amp: float = 0.0
    ar: tuple = ()
    noise: str = "gaussian"
    noise_scale: float = 1.0
    lognormal_sigma: float = 1.0
    mix: tuple = ()            # ((source_channel, weight), ...)


def generate_synthetic(channels: dict, n_hours: int, seed: int,
                       start="2016-01-01T00:00:00") -> TimeSeriesFrame:
    """Deterministic synthetic frame; generation parameters are embedded
    in the frame metadata.

    Channels are generated in insertion order, so `mix` sources must
    precede the channels that reference them.
    """
    ts = hourly_range(start, n_hours)
    t = np.arange(n_hours, dtype=float)
    values: dict[str, np.ndarray] = {}
    meta = {"seed": seed, "n_hours": n_hours, "start": str(ts[0]), "channels": {}}
    for name, spec in channels.items():
        rng = np.random.default_rng(seed + _stable_hash(name))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
        x = (
            spec.level
            + spec.yearly_amp * np.sin(2.0 * np.pi * t / (24.0 * 365.25) + phase[0])
            + spec.weekly_amp * np.sin(2.0 * np.pi * t / 168.0 + phase[1])
            + spec.daily_amp * np.sin(2.0 * np.pi * t / 24.0 + phase[2])
        )
        if spec.noise_scale > 0:
            if spec.noise == "gaussian":
                eps = rng.standard_normal(n_hours)
            elif spec.noise == "lognormal":
                eps = rng.lognormal(0.0, spec.lognormal_sigma, n_hours) - 1.0
            elif spec.noise == "lognormal-symmetric":
                eps = rng.lognormal(0.0, spec.lognormal_sigma, n_hours) - 1.0
                eps = eps * rng.choice([-1.0, 1.0], n_hours)
            else:
                raise ValueError(f"unknown noise kind {spec.noise!r}")
            eps = eps * spec.noise_scale
            x = x + _ar_filter(eps, spec.ar)
        for source, weight in spec.mix:
            x = x + weight * values[source]
        values[name] = x
        meta["channels"][name] = {
            "level": spec.level, "yearly_amp": spec.yearly_amp,
            "weekly_amp": spec.weekly_amp, "daily_amp": spec.daily_amp,
            "ar": list(spec.ar), "noise": spec.noise,
            "noise_scale": spec.noise_scale,
            "lognormal_sigma": spec.lognormal_sigma,
            "mix": [list(m) for m in spec.mix],
        }
    units = {name: "" for name in channels}
    return TimeSeriesFrame(ts, values, units, metadata=meta)


def _ar_filter(eps: np.ndarray, phi: tuple) -> np.ndarray:
    if not phi:
        return eps
    p = len(phi)
    out = np.zeros_like(eps)
    coeff = np.asarray(phi, dtype=float)
    for t in range(eps.size):
        lo = max(t - p, 0)
        window = out[lo:t][::-1]
        out[t] = eps[t] + float(np.dot(coeff[: window.size], window))
    return out


def _stable_hash(name: str) -> int:
    import zlib
    return zlib.crc32(name.encode("utf-8"))
