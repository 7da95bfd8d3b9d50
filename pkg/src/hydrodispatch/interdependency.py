"""Upstream/downstream coupling: per-season lag estimation by cross
correlation of streamflow, and head-conditioned regression of downstream
generation on lagged upstream generation.

Lag convention: positive lag means the downstream plant trails the upstream
one, so lag k correlates upstream(t) against downstream(t + k). Pairs whose
shifted partner falls outside the season are dropped, never wrapped.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError, SingularityError, ValidationError
from .hydrology import Season, season_of
from .series import TimeSeries, from_epoch_hour

DEFAULT_MAX_LAG = 12
MIN_LAG_OVERLAP = 24
MIN_FIT_OVERLAP = 48


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson product-moment correlation of two equal-length sequences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-d and equal length")
    if len(x) < 3:
        raise InsufficientDataError("need at least 3 samples")
    dx, dy = x - x.mean(), y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise SingularityError("correlation undefined for a constant series")
    # rounding in sqrt can push a perfect correlation an ulp past 1
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class LagProfile:
    """Correlation against downstream shift for lags 0..max_lag."""

    upstream: str
    downstream: str
    season: Season
    correlations: Mapping[int, float]
    best_lag: int

    def table(self) -> list[tuple[int, float]]:
        return sorted(self.correlations.items())


@dataclass(frozen=True)
class CascadeLink:
    """Fitted relation downstream_mw = a + b*upstream_mw + c*upstream_head."""

    upstream: str
    downstream: str
    season: Season | None
    lag: int
    intercept: float
    mw_coef: float
    head_coef: float
    r_squared: float
    n_samples: int

    def predict(self, upstream_mw: float, upstream_head: float) -> float:
        return self.intercept + self.mw_coef * upstream_mw \
            + self.head_coef * upstream_head


def _season_mask(series: TimeSeries, season: Season | None) -> np.ndarray:
    if season is None:
        return np.ones(len(series), dtype=bool)
    return np.array([season_of(from_epoch_hour(int(h))) is season
                     for h in series.hours])


def _paired(up: TimeSeries, down: TimeSeries, lag: int, season: Season | None
            ) -> tuple[np.ndarray, np.ndarray]:
    """Values of upstream(t) and downstream(t + lag), both in-season."""
    up = up.dropna()
    down = down.dropna()
    down_index = {int(h): i for i, h in enumerate(down.hours)}
    up_keep = _season_mask(up, season)
    down_keep = _season_mask(down, season)
    ui, di = [], []
    for i, h in enumerate(up.hours):
        if not up_keep[i]:
            continue
        j = down_index.get(int(h) + lag)
        if j is None or not down_keep[j]:
            continue
        ui.append(i)
        di.append(j)
    return up.values[ui], down.values[di]


def lag_scan(upstream_flow: TimeSeries, downstream_flow: TimeSeries,
             max_lag: int = DEFAULT_MAX_LAG, season: Season | None = None,
             upstream: str = "upstream", downstream: str = "downstream"
             ) -> LagProfile:
    """Correlate upstream flow with downstream flow shifted by each lag in
    0..max_lag; best lag is the argmax, ties broken by the smaller lag."""
    if max_lag < 0:
        raise ValidationError("max_lag must be >= 0")
    correlations: dict[int, float] = {}
    for lag in range(max_lag + 1):
        xu, xd = _paired(upstream_flow, downstream_flow, lag, season)
        if len(xu) < MIN_LAG_OVERLAP:
            raise InsufficientDataError(
                f"lag {lag}: only {len(xu)} overlapping in-season samples,"
                f" need {MIN_LAG_OVERLAP}")
        correlations[lag] = pearson(xu, xd)
    best_lag = max(correlations, key=lambda k: (correlations[k], -k))
    return LagProfile(upstream, downstream, season, correlations, best_lag)


def align_and_fit(upstream_mw: TimeSeries, upstream_head: TimeSeries,
                  downstream_mw: TimeSeries, lag: int,
                  season: Season | None = None,
                  upstream: str = "upstream", downstream: str = "downstream"
                  ) -> CascadeLink:
    """Shift downstream generation by the lag and regress it on upstream
    generation and upstream head.

    A constant head regressor is dropped (coefficient reported as 0) rather
    than making the normal equations singular; a constant MW regressor is an
    error.
    """
    # mw and head series may gap differently; restrict both to common hours
    # so the two pairings select identical downstream samples
    up_mw_c, up_head_c = _common_hours(upstream_mw, upstream_head)
    up_mw, down = _paired(up_mw_c, downstream_mw, lag, season)
    up_head, _ = _paired(up_head_c, downstream_mw, lag, season)
    if len(up_mw) < MIN_FIT_OVERLAP:
        raise InsufficientDataError(
            f"only {len(up_mw)} aligned samples, need {MIN_FIT_OVERLAP}")

    if np.ptp(up_mw) == 0.0:
        raise SingularityError("upstream MW is constant; regression is rank-deficient")
    head_constant = np.ptp(up_head) == 0.0
    if head_constant:
        design = np.column_stack([np.ones(len(up_mw)), up_mw])
    else:
        design = np.column_stack([np.ones(len(up_mw)), up_mw, up_head])
    coef, *_ = np.linalg.lstsq(design, down, rcond=None)
    fitted = design @ coef
    ss_res = float(np.sum((down - fitted) ** 2))
    ss_tot = float(np.sum((down - down.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else \
        (0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot)
    head_coef = 0.0 if head_constant else float(coef[2])
    return CascadeLink(upstream, downstream, season, lag, float(coef[0]),
                       float(coef[1]), head_coef, r2, len(up_mw))


def _common_hours(a: TimeSeries, b: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    a, b = a.dropna(), b.dropna()
    hours = np.intersect1d(a.hours, b.hours)
    ai = np.searchsorted(a.hours, hours)
    bi = np.searchsorted(b.hours, hours)
    return (TimeSeries(hours, a.values[ai]), TimeSeries(hours, b.values[bi]))


@dataclass(frozen=True)
class BucketRegression:
    """Regression of downstream on upstream MW within one head bucket."""

    head_low: float
    head_high: float
    n_samples: int
    mean_upstream_mw: float
    mean_downstream_mw: float
    intercept: float
    slope: float
    r_squared: float


def head_partition_compare(upstream_mw: np.ndarray, upstream_head: np.ndarray,
                           downstream_mw: np.ndarray,
                           head_buckets: Sequence[tuple[float, float]],
                           min_samples: int = 24) -> list[BucketRegression]:
    """Per-head-bucket regression of aligned (upstream MW, downstream MW).

    Buckets with fewer than ``min_samples`` aligned points are excluded with
    a warning; fewer than two surviving buckets is an error.
    """
    upstream_mw = np.asarray(upstream_mw, dtype=float)
    upstream_head = np.asarray(upstream_head, dtype=float)
    downstream_mw = np.asarray(downstream_mw, dtype=float)
    if not (len(upstream_mw) == len(upstream_head) == len(downstream_mw)):
        raise ValidationError("aligned arrays must share a length")
    if len(head_buckets) < 2:
        raise ValidationError("need at least 2 head buckets")

    results = []
    for low, high in head_buckets:
        mask = (upstream_head >= low) & (upstream_head < high)
        n = int(mask.sum())
        if n < min_samples:
            warnings.warn(f"head bucket [{low}, {high}) has {n} samples,"
                          f" need {min_samples}; excluded", stacklevel=2)
            continue
        x, y = upstream_mw[mask], downstream_mw[mask]
        if np.ptp(x) == 0.0:
            warnings.warn(f"head bucket [{low}, {high}) has constant upstream MW;"
                          " excluded", stacklevel=2)
            continue
        design = np.column_stack([np.ones(n), x])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = design @ coef
        ss_res = float(np.sum((y - fitted) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else \
            (0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot)
        results.append(BucketRegression(low, high, n, float(x.mean()),
                                        float(y.mean()), float(coef[0]),
                                        float(coef[1]), r2))
    if len(results) < 2:
        raise InsufficientDataError(
            f"only {len(results)} usable head buckets, need 2")
    return results
