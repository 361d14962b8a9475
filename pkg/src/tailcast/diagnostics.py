"""Dependence and tail diagnostics for a single channel.

Covers the autocorrelation function with decay classification, detrended
fluctuation analysis, and complementary-CDF tail fitting (power law vs
log-normal), applicable before and after deseasonalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import (
    NoPositiveData,
    NonPositiveValue,
    SeriesTooShort,
    SingularDetrend,
    TailTooSmall,
    TooFewPositiveLags,
    ZeroVariance,
)

Z_95 = 1.96


@dataclass
class AcfResult:
    """Autocorrelation values with the confidence band and decay verdict.

    decorrelation_time is the first lag whose correlation falls inside the
    band (None if that never happens within max_lag); classification is
    filled by :func:`classify_dependence`.
    """

    lags: np.ndarray
    values: np.ndarray
    confidence_band: float
    decorrelation_time: int | None
    n_samples: int
    classification: str = "unclassified"

    def to_dict(self) -> dict:
        return {
            "lags": self.lags.tolist(),
            "values": self.values.tolist(),
            "confidence_band": self.confidence_band,
            "decorrelation_time": self.decorrelation_time,
            "n_samples": self.n_samples,
            "classification": self.classification,
        }


@dataclass
class DfaResult:
    """Fluctuation function V(s) with the fitted exponent.

    h is the log-log slope over fit_range; xi = 1 - h when that lies in
    (0, 1), otherwise None (the short-range / xi > 1 regime, where the
    exponent relation pins h at 1/2 rather than determining xi).
    """

    segment_sizes: np.ndarray
    fluctuations: np.ndarray
    h: float
    xi: float | None
    fit_range: tuple[int, int]
    detrend_order: int

    def to_dict(self) -> dict:
        return {
            "segment_sizes": self.segment_sizes.tolist(),
            "fluctuations": self.fluctuations.tolist(),
            "h": self.h,
            "xi": self.xi,
            "fit_range": list(self.fit_range),
            "detrend_order": self.detrend_order,
        }


@dataclass
class TailFit:
    """Fitted tail models over the common region x >= x_m and the verdict."""

    powerlaw: tuple[float, float]          # (x_m, alpha)
    lognormal: tuple[float, float]         # (mu, sigma), fit on positive data
    loglik_ratio: float                    # sum(ln f_LN - ln f_PL) over tail
    preferred: str                         # "lognormal" | "powerlaw"
    n_tail: int

    def to_dict(self) -> dict:
        return {
            "powerlaw": {"x_m": self.powerlaw[0], "alpha": self.powerlaw[1]},
            "lognormal": {"mu": self.lognormal[0], "sigma": self.lognormal[1]},
            "loglik_ratio": self.loglik_ratio,
            "preferred": self.preferred,
            "n_tail": self.n_tail,
        }


@dataclass
class DependenceReport:
    """ACF + DFA of one channel bundled for serialization."""

    acf: AcfResult
    dfa: DfaResult
    classification: str

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "acf": self.acf.to_dict(),
            "dfa": self.dfa.to_dict(),
        }


def acf(series, max_lag: int) -> AcfResult:
    """Normalized autocorrelation C(r) for lags 0..max_lag.

    The series is mean-centered first; C(r) is the mean lagged product
    over the mean square, so C(0) = 1. The 95% confidence band is
    +/- 1.96/sqrt(N).

    Raises
    ------
    ZeroVariance
        The series is constant.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    x = x - x.mean()
    denom = np.mean(x * x)
    if denom == 0:
        raise ZeroVariance("constant series has no autocorrelation")
    values = np.empty(max_lag + 1)
    values[0] = 1.0
    for r in range(1, max_lag + 1):
        values[r] = np.mean(x[:-r] * x[r:]) / denom
    band = Z_95 / np.sqrt(n)
    inside = np.flatnonzero(np.abs(values[1:]) < band)
    decorrelation = int(inside[0]) + 1 if inside.size else None
    return AcfResult(
        lags=np.arange(max_lag + 1),
        values=values,
        confidence_band=float(band),
        decorrelation_time=decorrelation,
        n_samples=n,
    )


def classify_dependence(acf_result: AcfResult, min_fit_lags: int = 10) -> str:
    """Label the decay as short-range, long-range, or inconclusive.

    Both an exponential decay exp(-r/T) and a power law r^-xi are fit (in
    log space) to the initial contiguous run of correlations above the
    confidence band (isolated band-level blips at large lags carry no
    decay information). Long-range requires the power law to win with xi
    in (0, 1); a winning exponential, or a fitted xi > 1, means
    short-range.

    Raises
    ------
    TooFewPositiveLags
        Fewer than 3 positive correlations exist at positive lags.
    """
    if acf_result.lags[-1] < 100:
        raise ValueError("classification requires acf computed with max_lag >= 100")
    r = acf_result.lags[1:].astype(float)
    c = acf_result.values[1:]
    if np.count_nonzero(c > 0) < 3:
        raise TooFewPositiveLags("need at least 3 positive-correlation lags")
    above = c > acf_result.confidence_band
    run = int(np.argmin(above)) if not above.all() else above.size
    if run < min_fit_lags:
        return "inconclusive"
    usable = np.zeros(c.size, dtype=bool)
    usable[:run] = True

    rr, cc = r[usable], np.log(c[usable])
    exp_slope, exp_icpt = np.polyfit(rr, cc, 1)
    pl_slope, pl_icpt = np.polyfit(np.log(rr), cc, 1)
    sse_exp = np.sum((cc - (exp_icpt + exp_slope * rr)) ** 2)
    sse_pl = np.sum((cc - (pl_icpt + pl_slope * np.log(rr))) ** 2)
    xi = -pl_slope

    if sse_pl < sse_exp and 0 < xi < 1:
        return "long-range"
    if sse_exp <= sse_pl or xi > 1:
        return "short-range"
    return "inconclusive"


def default_sizes(n: int, n_sizes: int = 16, s_min: int = 16) -> np.ndarray:
    """Geometric segment-size grid from s_min to n/4."""
    s_max = n // 4
    if s_max < s_min:
        raise SeriesTooShort(f"series length {n} < {4 * s_min}")
    grid = np.geomspace(s_min, s_max, n_sizes)
    return np.unique(np.round(grid).astype(int))


def dfa(series, detrend_order: int = 2, sizes=None, fit_range=None) -> DfaResult:
    """Detrended fluctuation analysis of a series.

    The profile (cumulative sum of the mean-centered series) is cut into
    non-overlapping segments of each size, taken from both the start and
    the end (2*N_s per size). Each segment is detrended by an order-n
    least-squares polynomial; V(s) is the root mean of the per-segment
    residual variances. h is the log-log slope over fit_range (default:
    the upper half of the size grid).

    Raises
    ------
    SeriesTooShort
        N < 4 * max(sizes).
    SingularDetrend
        A segment size does not support the detrending order.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    sizes = default_sizes(n) if sizes is None else np.asarray(sizes, dtype=int)
    if n < 4 * sizes.max():
        raise SeriesTooShort(f"series length {n} < 4*max(sizes)={4 * sizes.max()}")
    if detrend_order < 1:
        raise ValueError("detrend_order must be >= 1")

    profile = np.cumsum(x - x.mean())
    fluct = np.empty(sizes.size)
    for j, s in enumerate(sizes):
        if s <= detrend_order:
            raise SingularDetrend(f"segment size {s} <= detrend order {detrend_order}")
        n_seg = n // s
        head = profile[: n_seg * s].reshape(n_seg, s)
        tail = profile[n - n_seg * s:].reshape(n_seg, s)
        segments = np.vstack([head, tail])
        t = np.arange(1, s + 1, dtype=float)
        coeffs = np.polynomial.polynomial.polyfit(t, segments.T, detrend_order)
        detrended = segments - np.polynomial.polynomial.polyval(t, coeffs).reshape(segments.shape)
        variances = np.mean(detrended ** 2, axis=1)
        fluct[j] = np.sqrt(np.mean(variances))

    if fit_range is None:
        fit_sizes = sizes[sizes.size // 2:]
    else:
        lo, hi = fit_range
        fit_sizes = sizes[(sizes >= lo) & (sizes <= hi)]
    mask = np.isin(sizes, fit_sizes)
    if np.any(fluct[mask] <= 0):
        h = float("nan")
    else:
        h = float(np.polyfit(np.log(sizes[mask]), np.log(fluct[mask]), 1)[0])
    xi = 1.0 - h if 0.0 < 1.0 - h < 1.0 else None
    return DfaResult(
        segment_sizes=sizes,
        fluctuations=fluct,
        h=h,
        xi=xi,
        fit_range=(int(fit_sizes[0]), int(fit_sizes[-1])),
        detrend_order=detrend_order,
    )


def dependence_report(series, max_lag: int = 200, detrend_order: int = 2) -> DependenceReport:
    """Convenience bundle: ACF, classification and DFA of one series."""
    a = acf(series, max_lag)
    a.classification = classify_dependence(a)
    d = dfa(series, detrend_order=detrend_order)
    return DependenceReport(acf=a, dfa=d, classification=a.classification)


def empirical_ccdf(series) -> tuple[np.ndarray, np.ndarray]:
    """Empirical complementary CDF of the strictly positive values.

    Returns the sorted unique values and the fraction of the (positive)
    sample strictly greater than each.

    Raises
    ------
    NoPositiveData
        Fewer than 10 strictly positive values.
    """
    x = np.asarray(series, dtype=float)
    x = np.sort(x[x > 0])
    if x.size < 10:
        raise NoPositiveData(f"{x.size} positive values < 10")
    values = np.unique(x)
    greater = x.size - np.searchsorted(x, values, side="right")
    return values, greater / x.size


def powerlaw_ccdf(x, x_m: float, alpha: float) -> np.ndarray:
    """Pareto tail CCDF: (x_m/x)^alpha for x >= x_m, 1 below x_m."""
    x = np.asarray(x, dtype=float)
    return np.where(x < x_m, 1.0, (x_m / np.maximum(x, x_m)) ** alpha)


def lognormal_ccdf(x, mu: float, sigma: float) -> np.ndarray:
    """Log-normal CCDF via the error function."""
    x = np.asarray(x, dtype=float)
    return 0.5 - 0.5 * erf((np.log(x) - mu) / (np.sqrt(2.0) * sigma))


def fit_powerlaw(series, x_m: float | None = None, min_tail: int = 50,
                 max_candidates: int = 100) -> tuple[float, float]:
    """Continuous maximum-likelihood Pareto tail fit.

    alpha is the CCDF tail exponent of (x_m/x)^alpha, estimated as
    n_tail / sum(ln(x_i/x_m)). When x_m is not given it is chosen to
    minimize the Kolmogorov-Smirnov distance between the empirical and
    fitted tail CCDFs, over unique sample values between the 50th and
    99th percentiles (subsampled to at most max_candidates).

    Raises
    ------
    NoPositiveData
        No strictly positive values.
    TailTooSmall
        Fewer than min_tail points above x_m, or a degenerate log-sum.
    """
    x = np.asarray(series, dtype=float)
    x = np.sort(x[x > 0])
    if x.size == 0:
        raise NoPositiveData("power-law fit needs positive values")
    if x_m is not None:
        return float(x_m), _hill_alpha(x, float(x_m), min_tail)

    lo, hi = np.percentile(x, [50, 99])
    candidates = np.unique(x[(x >= lo) & (x <= hi)])
    if candidates.size == 0:
        raise TailTooSmall("no x_m candidates between the 50th and 99th percentiles")
    if candidates.size > max_candidates:
        pick = np.linspace(0, candidates.size - 1, max_candidates).astype(int)
        candidates = candidates[pick]

    best = None
    for cand in candidates:
        tail = x[np.searchsorted(x, cand, side="left"):]
        if tail.size < min_tail:
            continue
        logsum = np.sum(np.log(tail / cand))
        if logsum <= 0:
            continue
        alpha = tail.size / logsum
        ks = _ks_distance(tail, cand, alpha)
        if best is None or ks < best[0]:
            best = (ks, float(cand), float(alpha))
    if best is None:
        raise TailTooSmall(f"no candidate x_m leaves >= {min_tail} tail points")
    return best[1], best[2]


def _hill_alpha(sorted_x, x_m, min_tail):
    tail = sorted_x[np.searchsorted(sorted_x, x_m, side="left"):]
    if tail.size < min_tail:
        raise TailTooSmall(f"{tail.size} points above x_m={x_m} < {min_tail}")
    logsum = np.sum(np.log(tail / x_m))
    if logsum <= 0:
        raise TailTooSmall("zero log-sum: all tail values equal x_m")
    return float(tail.size / logsum)


def _ks_distance(tail, x_m, alpha):
    n = tail.size
    fitted = (x_m / tail) ** alpha
    emp_hi = 1.0 - np.arange(n) / n          # just below each point
    emp_lo = 1.0 - np.arange(1, n + 1) / n   # at each point (strictly greater)
    return max(np.abs(emp_hi - fitted).max(), np.abs(emp_lo - fitted).max())


def fit_lognormal(series, sigma_floor: float = 1e-8) -> tuple[float, float]:
    """Log-normal MLE: mean and standard deviation of the log values.

    Raises
    ------
    NonPositiveValue
        Any value <= 0.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 10:
        raise ValueError("log-normal fit needs >= 10 points")
    if np.any(x <= 0):
        raise NonPositiveValue("log-normal fit requires strictly positive values")
    logs = np.log(x)
    mu = float(logs.mean())
    sigma = float(max(logs.std(), sigma_floor))
    return mu, sigma


def compare_tails(series, x_m: float | None = None) -> TailFit:
    """Fit both tail models on a common region and compare likelihoods.

    The common tail defaults to x >= median of the positive values (the
    lower bound of the x_m candidate grid), which keeps the region where
    the two families actually differ in shape. The power law is the tail
    MLE there; the log-normal is the MLE of all positive data, conditioned
    on the tail so both densities are normalized over the same support.
    loglik_ratio sums ln f_LN - ln f_PL over the tail points, so a
    positive value prefers the log-normal.
    """
    x = np.asarray(series, dtype=float)
    x = np.sort(x[x > 0])
    if x.size < 10:
        raise NoPositiveData(f"{x.size} positive values < 10")
    if x_m is None:
        x_m = float(np.percentile(x, 50))
    xm, alpha = fit_powerlaw(x, x_m=x_m)
    mu, sigma = fit_lognormal(x)
    tail = x[np.searchsorted(x, xm, side="left"):]

    log_tail = np.log(tail)
    ll_pl = np.log(alpha) + alpha * np.log(xm) - (alpha + 1.0) * log_tail
    ll_ln = (
        -0.5 * ((log_tail - mu) / sigma) ** 2
        - log_tail - np.log(sigma) - 0.5 * np.log(2.0 * np.pi)
        - np.log(lognormal_ccdf(xm, mu, sigma))
    )
    ratio = float(np.sum(ll_ln - ll_pl))
    return TailFit(
        powerlaw=(float(xm), float(alpha)),
        lognormal=(mu, sigma),
        loglik_ratio=ratio,
        preferred="lognormal" if ratio > 0 else "powerlaw",
        n_tail=int(tail.size),
    )
