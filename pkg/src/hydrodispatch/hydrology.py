"""Seasonal classification, water-year typing, scenario windows, and a
seeded synthetic cascade generator used for tests and demos.

Seasons partition the twelve months into Winter (Nov-Feb), Spring (Mar-Jun)
and Summer (Jul-Oct), a split consistent with snowmelt-driven basins where
flow peaks in spring. Water years are classed Dry/Average/Wet by terciles
(33.3rd / 66.7th percentile) of the historical annual mean flows.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .datastore import (ACTIVITY_THRESHOLD_MW, PlantSample, StaticPlant, StaticUnit,
                        Store, UnitSample)
from .errors import InsufficientDataError, NotFoundError, ValidationError
from .series import to_utc

DRY_PERCENTILE = 33.3
WET_PERCENTILE = 66.7


class Season(enum.Enum):
    WINTER = "winter"
    SPRING = "spring"
    SUMMER = "summer"


_SEASON_BY_MONTH = {
    11: Season.WINTER, 12: Season.WINTER, 1: Season.WINTER, 2: Season.WINTER,
    3: Season.SPRING, 4: Season.SPRING, 5: Season.SPRING, 6: Season.SPRING,
    7: Season.SUMMER, 8: Season.SUMMER, 9: Season.SUMMER, 10: Season.SUMMER,
}


def season_of(ts: datetime) -> Season:
    """Month-based season; total over all twelve months."""
    return _SEASON_BY_MONTH[to_utc(ts).month]


def season_months(season: Season) -> tuple[int, ...]:
    return tuple(m for m, s in _SEASON_BY_MONTH.items() if s is season)


class WaterYearClass(enum.Enum):
    DRY = "dry"
    AVERAGE = "avg"
    WET = "wet"


@dataclass(frozen=True)
class HydroScenario:
    """Either a historical window or a (water-year class, season) request."""

    historical_window: tuple[datetime, datetime] | None = None
    water_year: WaterYearClass | None = None
    season: Season | None = None

    def __post_init__(self):
        synthetic = self.water_year is not None and self.season is not None
        historical = self.historical_window is not None
        if historical == synthetic:
            raise ValidationError(
                "scenario must set exactly one of historical_window or"
                " (water_year, season)")

    @classmethod
    def historical(cls, start: datetime, end: datetime) -> "HydroScenario":
        return cls(historical_window=(to_utc(start), to_utc(end)))

    @classmethod
    def synthetic(cls, water_year: WaterYearClass, season: Season) -> "HydroScenario":
        return cls(water_year=water_year, season=season)

    @classmethod
    def parse(cls, text: str) -> "HydroScenario":
        """Parse ``dry|avg|wet:winter|spring|summer`` or ``hist:START..END``."""
        text = text.strip()
        if ":" not in text:
            raise ValidationError(f"bad scenario {text!r}")
        kind, rest = text.split(":", 1)
        if kind == "hist":
            if ".." not in rest:
                raise ValidationError(f"bad historical window {rest!r}")
            lo, hi = rest.split("..", 1)
            try:
                start = to_utc(datetime.fromisoformat(lo))
                end = to_utc(datetime.fromisoformat(hi))
            except ValueError as exc:
                raise ValidationError(f"bad historical window {rest!r}") from exc
            return cls.historical(start, end)
        try:
            wy = WaterYearClass(kind)
            season = Season(rest)
        except ValueError as exc:
            raise ValidationError(f"bad scenario {text!r}") from exc
        return cls.synthetic(wy, season)

    def label(self) -> str:
        if self.historical_window:
            lo, hi = self.historical_window
            return f"hist:{lo.isoformat()}..{hi.isoformat()}"
        return f"{self.water_year.value}:{self.season.value}"


def annual_mean_flows(store: Store, project: str) -> dict[int, float]:
    """Calendar-year mean flow per year with any non-null flow data."""
    samples = store.query_plant_all(project)
    if not samples:
        raise NotFoundError(f"no plant data for project {project!r}")
    sums: dict[int, list[float]] = {}
    for s in samples:
        if s.flow is not None:
            sums.setdefault(s.timestamp.year, []).append(s.flow)
    return {year: float(np.mean(v)) for year, v in sorted(sums.items())}


def classify_water_year(store: Store, project: str, year: int) -> WaterYearClass:
    """Tercile classification of one year against the project's history."""
    means = annual_mean_flows(store, project)
    if len(means) < 3:
        raise InsufficientDataError(
            f"need >= 3 years of history for {project!r}, have {len(means)}")
    if year not in means:
        raise NotFoundError(f"no flow data for {project!r} in {year}")
    values = np.array(list(means.values()))
    dry_cut = float(np.percentile(values, DRY_PERCENTILE))
    wet_cut = float(np.percentile(values, WET_PERCENTILE))
    mean = means[year]
    if mean < dry_cut:
        return WaterYearClass.DRY
    if mean > wet_cut:
        return WaterYearClass.WET
    return WaterYearClass.AVERAGE


def classify_all_years(store: Store, project: str) -> dict[int, WaterYearClass]:
    return {year: classify_water_year(store, project, year)
            for year in annual_mean_flows(store, project)}


def season_window(year: int, season: Season) -> tuple[datetime, datetime]:
    """Contiguous [start, end) window of one season.

    Winter straddles the calendar boundary: the winter of ``year`` runs from
    Nov 1 of that year through Mar 1 of the next.
    """
    utc = timezone.utc
    if season is Season.WINTER:
        return datetime(year, 11, 1, tzinfo=utc), datetime(year + 1, 3, 1, tzinfo=utc)
    if season is Season.SPRING:
        return datetime(year, 3, 1, tzinfo=utc), datetime(year, 7, 1, tzinfo=utc)
    return datetime(year, 7, 1, tzinfo=utc), datetime(year, 11, 1, tzinfo=utc)


def select_scenario_window(store: Store, scenario: HydroScenario, project: str
                           ) -> tuple[datetime, datetime]:
    """Resolve a scenario to a concrete [start, end) window for a project."""
    lo, hi = store.data_range(project)
    if scenario.historical_window is not None:
        start, end = scenario.historical_window
        if start > end:
            raise ValidationError("window start must be <= end")
        if end <= lo or start > hi:
            raise NotFoundError(
                f"window {start.isoformat()}..{end.isoformat()} has no data for"
                f" {project!r}")
        return start, end
    classes = classify_all_years(store, project)
    matching = [y for y, c in classes.items() if c is scenario.water_year]
    if not matching:
        raise NotFoundError(
            f"no {scenario.water_year.value} year in the {project!r} record")
    year = max(matching)
    return season_window(year, scenario.season)


# -- synthetic cascade -------------------------------------------------------

UPSTREAM_NAME = "UP"
DOWNSTREAM_NAME = "DOWN"

# Conversion used by the synthetic dispatch rule; mirrors the efficiency
# module's constant without importing it (avoids a cycle).
_MW_PER_CFS_FT = 8.4674e-5


@dataclass
class SyntheticCascade:
    """Deterministic two-plant cascade fixture with unit-level dispatch."""

    upstream: list[PlantSample]
    downstream: list[PlantSample]
    unit_samples: list[UnitSample]
    static_plants: list[StaticPlant] = field(default_factory=list)
    static_units: list[StaticUnit] = field(default_factory=list)

    def ingest(self, store: Store) -> None:
        store.insert_static_plants(self.static_plants)
        store.insert_static_units(self.static_units)
        store.insert_plant_samples(self.upstream + self.downstream)
        store.insert_unit_samples(self.unit_samples)


def _upstream_units() -> list[StaticUnit]:
    units = []
    specs = [(40001, "U", 3, 200.0), (40002, "V", 3, 100.0), (40003, "W", 4, 25.0)]
    for bus, prefix, count, pmax in specs:
        for i in range(1, count + 1):
            units.append(StaticUnit(UPSTREAM_NAME, f"UP BUS{bus % 10}", bus,
                                    f"{prefix}{i}", nominal_pmax=pmax))
    return units


def _downstream_units() -> list[StaticUnit]:
    return [StaticUnit(DOWNSTREAM_NAME, "DOWN BUS1", 40011, f"D{i}", nominal_pmax=90.0)
            for i in range(1, 5)]


def fill_dispatch(target_mw: float, units: list[StaticUnit]) -> dict[str, float]:
    """Reference dispatch rule: load units in descending nominal power until
    the plant target is met; the marginal unit takes the partial remainder."""
    remaining = max(target_mw, 0.0)
    out: dict[str, float] = {}
    for unit in sorted(units, key=lambda u: (-u.nominal_pmax, u.unit_id)):
        if remaining <= ACTIVITY_THRESHOLD_MW:
            out[unit.unit_id] = 0.0
            continue
        take = min(unit.nominal_pmax, remaining)
        out[unit.unit_id] = take
        remaining -= take
    return out


def generate_synthetic_cascade(seed: int, hours: int, lag_hours: int,
                               noise_sigma: float,
                               start: datetime | None = None) -> SyntheticCascade:
    """Two plants on one river: downstream flow is the upstream flow delayed
    by ``lag_hours`` with multiplicative gaussian noise.

    Deterministic for a seed (PCG64 generator). Upstream flow combines an
    annual cycle, a diurnal cycle and AR(1) noise so that lagged alignment is
    identifiable; unit MW rows follow :func:`fill_dispatch`.
    """
    if lag_hours < 0 or hours <= lag_hours:
        raise ValidationError("need hours > lag_hours >= 0")
    rng = np.random.default_rng(seed)
    start = to_utc(start) if start else datetime(2020, 1, 1, tzinfo=timezone.utc)

    n = hours + lag_hours
    t = np.arange(n)
    annual = 6000.0 * np.sin(2 * np.pi * (t / (24 * 365.25) + 0.75))
    diurnal = 4000.0 * np.sin(2 * np.pi * t / 24)
    ar = np.zeros(n)
    shocks = rng.normal(0.0, 1800.0, size=n)
    for i in range(1, n):
        ar[i] = 0.7 * ar[i - 1] + shocks[i]
    up_flow = np.clip(27000.0 + annual + diurnal + ar, 1000.0, None)

    up_head = 305.0 + 20.0 * np.sin(2 * np.pi * (t / (24 * 365.25) + 0.25)) \
        + rng.normal(0.0, 1.0, size=n)
    up_storage = np.clip(4.0e5 + 8.0e4 * np.sin(2 * np.pi * t / (24 * 365.25))
                         + np.cumsum(rng.normal(0.0, 50.0, size=n)), 0.0, None)

    down_noise = rng.normal(0.0, noise_sigma, size=n) if noise_sigma > 0 else np.zeros(n)
    down_flow = np.empty(n)
    down_flow[:lag_hours] = up_flow[0]
    down_flow[lag_hours:] = up_flow[:n - lag_hours] * (1.0 + down_noise[lag_hours:])
    down_flow = np.clip(down_flow, 0.0, None)
    down_head = 168.0 + 3.0 * np.sin(2 * np.pi * t / (24 * 365.25)) \
        + rng.normal(0.0, 0.3, size=n)
    down_storage = np.clip(9.0e4 + np.cumsum(rng.normal(0.0, 20.0, size=n)), 0.0, None)

    up_units = _upstream_units()
    down_units = _downstream_units()
    up_capacity = sum(u.nominal_pmax for u in up_units)
    down_capacity = sum(u.nominal_pmax for u in down_units)

    # Generated flow is capped by turbine capacity; excess spills.
    eta = 0.9
    up_qcap = up_capacity / (_MW_PER_CFS_FT * eta * 305.0)
    down_qcap = down_capacity / (_MW_PER_CFS_FT * eta * 168.0)

    upstream, downstream, unit_samples = [], [], []
    for i in range(lag_hours, n):
        ts = start + timedelta(hours=i - lag_hours)
        q_gen_up = min(up_flow[i], up_qcap)
        up_mw = min(_MW_PER_CFS_FT * eta * q_gen_up * up_head[i], up_capacity)
        q_gen_down = min(down_flow[i], down_qcap)
        down_mw = min(_MW_PER_CFS_FT * eta * q_gen_down * down_head[i], down_capacity)

        upstream.append(PlantSample(UPSTREAM_NAME, ts, float(up_flow[i]),
                                    float(up_head[i]), float(up_storage[i]),
                                    float(max(up_flow[i] - up_qcap, 0.0)),
                                    float(up_mw)))
        downstream.append(PlantSample(DOWNSTREAM_NAME, ts, float(down_flow[i]),
                                      float(down_head[i]), float(down_storage[i]),
                                      float(max(down_flow[i] - down_qcap, 0.0)),
                                      float(down_mw)))
        for unit_id, mw in fill_dispatch(float(up_mw), up_units).items():
            unit_samples.append(UnitSample(unit_id, ts, mw))
        for unit_id, mw in fill_dispatch(float(down_mw), down_units).items():
            unit_samples.append(UnitSample(unit_id, ts, mw))

    plants = [
        StaticPlant(UPSTREAM_NAME, 47.95, -118.98, 40, 330.0),
        StaticPlant(DOWNSTREAM_NAME, 47.65, -120.07, 40, 172.0),
    ]
    return SyntheticCascade(upstream, downstream, unit_samples, plants,
                            up_units + down_units)
