"""Turbine efficiency: per-observation efficiency, curve fitting and
extrapolation, and the preferred operating band.

Efficiency comes from the hydropower relation P = eta * K * Q * H with
Q in cfs, H in feet and P in MW; K folds in water density, gravity and the
unit conversions (1 cfs*ft = 11810 W at eta = 1). Observed points cover only
the flows a unit actually ran at, so a straight line fitted in (flow, power)
space extends the curve over 10%..110% of the observed maximum flow.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .datastore import EfficiencyPoint, Store
from .errors import (DataQualityError, DataQualityWarning, InsufficientDataError,
                     SingularityError, ValidationError)

# MW per (cfs * ft) at unit efficiency.
MW_PER_CFS_FT = 8.4674e-5

# Efficiencies in (1.0, MAX_CREDIBLE_EFFICIENCY] are kept but flagged:
# head/flow telemetry error routinely nudges computed values past 1.
MAX_CREDIBLE_EFFICIENCY = 1.05

DEFAULT_THRESHOLD = 0.90

CURVE_CSV_HEADER = ["unit_id", "flow_cfs", "head_ft", "power_mw", "efficiency",
                    "estimated"]


def compute_efficiency(power_mw: float, flow_cfs: float, head_ft: float) -> float:
    """Efficiency implied by one (P, Q, H) observation."""
    if flow_cfs <= 0:
        raise ValidationError(f"flow must be > 0, got {flow_cfs}")
    if head_ft <= 0:
        raise ValidationError(f"head must be > 0, got {head_ft}")
    eta = power_mw / (MW_PER_CFS_FT * flow_cfs * head_ft)
    if eta > MAX_CREDIBLE_EFFICIENCY:
        raise DataQualityError(
            f"efficiency {eta:.4f} above {MAX_CREDIBLE_EFFICIENCY}; check P/Q/H units")
    if eta > 1.0:
        warnings.warn(f"efficiency {eta:.4f} above 1; retained but suspect",
                      DataQualityWarning, stacklevel=2)
    return eta


def fit_ols(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Ordinary least squares line through (x, y): returns (slope, intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-d and equal length")
    if len(x) < 2:
        raise InsufficientDataError("need at least 2 points")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise SingularityError("x values are all equal; slope is undefined")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    return slope, ym - slope * xm


@dataclass(frozen=True)
class EfficiencyCurve:
    """Raw plus extrapolated efficiency points for a unit at one head regime."""

    unit_id: str
    points: tuple[EfficiencyPoint, ...]  # ascending flow
    slope: float  # fitted flow -> power line
    intercept: float
    threshold: float
    band: tuple[float, float] | None  # flow range with efficiency >= threshold

    def __post_init__(self):
        flows = [p.flow for p in self.points]
        if any(b <= a for a, b in zip(flows, flows[1:])):
            raise ValidationError("curve points must be strictly ascending in flow")
        if self.band is not None and self.band[0] > self.band[1]:
            raise ValidationError("band low must be <= band high")

    def raw_points(self) -> list[EfficiencyPoint]:
        return [p for p in self.points if not p.estimated]

    def power_at(self, flow: float) -> float:
        return self.intercept + self.slope * flow

    def flow_at(self, power: float) -> float:
        if self.slope == 0:
            raise SingularityError("flat flow->power fit cannot be inverted")
        return (power - self.intercept) / self.slope


def efficient_band(curve: EfficiencyCurve | Sequence[EfficiencyPoint],
                   threshold: float) -> tuple[float, float] | None:
    """Smallest and largest flow whose interpolated efficiency clears the
    threshold; None when no point qualifies."""
    points = curve.points if isinstance(curve, EfficiencyCurve) else tuple(curve)
    if not points:
        return None
    flows = np.array([p.flow for p in points])
    effs = np.array([p.efficiency for p in points])
    above = effs >= threshold
    if not above.any():
        return None

    def crossing(i: int, j: int) -> float:
        # linear interpolation of the threshold crossing between points i, j
        f = (threshold - effs[i]) / (effs[j] - effs[i])
        return float(flows[i] + f * (flows[j] - flows[i]))

    first = int(np.argmax(above))
    low = flows[first] if first == 0 else crossing(first - 1, first)
    last = int(len(points) - 1 - np.argmax(above[::-1]))
    high = flows[last] if last == len(points) - 1 else crossing(last + 1, last)
    return float(low), float(high)


def interpolate_efficiency(curve: EfficiencyCurve, flow: float) -> float:
    """Piecewise-linear efficiency at a flow, clamped to the curve ends."""
    flows = np.array([p.flow for p in curve.points])
    effs = np.array([p.efficiency for p in curve.points])
    return float(np.interp(flow, flows, effs))


def build_curve(unit_id: str, samples: Iterable[tuple[float, float, float]],
                threshold: float = DEFAULT_THRESHOLD,
                n_estimated: int = 25) -> EfficiencyCurve:
    """Fit a curve from matched (flow_cfs, head_ft, power_mw) observations.

    Raw points come straight from the observations (implausible ones are
    dropped with a warning); the OLS flow->power line synthesizes estimated
    points outside the observed flow range, covering 10%..110% of the maximum
    observed flow at the median observed head.
    """
    raw: list[EfficiencyPoint] = []
    by_flow: dict[float, EfficiencyPoint] = {}
    for flow, head, power in samples:
        if flow is None or head is None or power is None:
            continue
        if flow <= 0 or head <= 0 or power <= 0:
            continue
        try:
            eta = compute_efficiency(power, flow, head)
        except DataQualityError:
            warnings.warn(f"{unit_id}: dropped observation with implausible"
                          f" efficiency (P={power}, Q={flow}, H={head})",
                          DataQualityWarning, stacklevel=2)
            continue
        # repeated flows collapse to the latest observation (curve needs
        # strictly ascending flow)
        by_flow[flow] = EfficiencyPoint(unit_id, flow, head, power, eta, False)
    raw = sorted(by_flow.values(), key=lambda p: p.flow)
    if len(raw) < 5:
        raise InsufficientDataError(
            f"{unit_id}: need >= 5 valid observations, have {len(raw)}")

    slope, intercept = fit_ols([p.flow for p in raw], [p.power for p in raw])
    med_head = float(np.median([p.head for p in raw]))
    qmin, qmax = raw[0].flow, raw[-1].flow

    estimated: list[EfficiencyPoint] = []
    raw_flows = {p.flow for p in raw}
    for q in np.linspace(0.10 * qmax, 1.10 * qmax, n_estimated):
        q = float(q)
        if qmin <= q <= qmax or q in raw_flows:
            continue  # estimated points only extend beyond the observed range
        p_hat = intercept + slope * q
        if p_hat <= 0:
            continue
        eta = p_hat / (MW_PER_CFS_FT * q * med_head)
        if eta <= 0 or eta > MAX_CREDIBLE_EFFICIENCY:
            continue
        estimated.append(EfficiencyPoint(unit_id, q, med_head, p_hat, eta, True))

    points = tuple(sorted(raw + estimated, key=lambda p: p.flow))
    band = efficient_band(points, threshold)
    return EfficiencyCurve(unit_id, points, slope, intercept, threshold, band)


def build_curves_by_head(unit_id: str,
                         samples: Iterable[tuple[float, float, float]],
                         threshold: float = DEFAULT_THRESHOLD,
                         bucket_width: float = 5.0) -> list[EfficiencyCurve]:
    """One curve per head bucket of the given width (multi-head families)."""
    buckets: dict[int, list[tuple[float, float, float]]] = {}
    for obs in samples:
        flow, head, power = obs
        if head is None or head <= 0:
            continue
        buckets.setdefault(int(head // bucket_width), []).append(obs)
    curves = []
    for key in sorted(buckets):
        try:
            curves.append(build_curve(unit_id, buckets[key], threshold))
        except InsufficientDataError:
            continue
    return curves


def curve_from_points(unit_id: str, points: Sequence[EfficiencyPoint],
                      threshold: float = DEFAULT_THRESHOLD) -> EfficiencyCurve:
    """Reconstruct a curve (fit and band) from persisted points."""
    points = tuple(sorted(points, key=lambda p: p.flow))
    raw = [p for p in points if not p.estimated]
    if len(raw) < 2:
        raise InsufficientDataError(f"{unit_id}: need >= 2 raw points to refit")
    slope, intercept = fit_ols([p.flow for p in raw], [p.power for p in raw])
    return EfficiencyCurve(unit_id, points, slope, intercept, threshold,
                           efficient_band(points, threshold))


def save_curve(store: Store, curve: EfficiencyCurve) -> int:
    return store.replace_efficiency_points(curve.unit_id, list(curve.points))


def load_curve(store: Store, unit_id: str,
               threshold: float = DEFAULT_THRESHOLD) -> EfficiencyCurve | None:
    points = store.efficiency_points(unit_id)
    if not points:
        return None
    return curve_from_points(unit_id, points, threshold)


def write_curve_csv(curve: EfficiencyCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_CSV_HEADER)
        for p in curve.points:
            writer.writerow([p.unit_id, repr(p.flow), repr(p.head), repr(p.power),
                             repr(p.efficiency), str(p.estimated).lower()])


def read_curve_csv(path: str | Path) -> list[EfficiencyPoint]:
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CURVE_CSV_HEADER:
            raise ValidationError(f"{path}: bad curve header {header!r}")
        for row in reader:
            points.append(EfficiencyPoint(row[0], float(row[1]), float(row[2]),
                                          float(row[3]), float(row[4]),
                                          row[5] == "true"))
    return points
