from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from hydrodispatch.datastore import PlantSample, Store
from hydrodispatch.errors import (InsufficientDataError, NotFoundError,
                                  ValidationError)
from hydrodispatch.hydrology import (HydroScenario, Season, WaterYearClass,
                                     classify_all_years, classify_water_year,
                                     generate_synthetic_cascade, season_of,
                                     season_window, select_scenario_window)

UTC = timezone.utc


class TestSeasons:
    @pytest.mark.parametrize("ts,season", [
        (datetime(2020, 1, 15, tzinfo=UTC), Season.WINTER),
        (datetime(2020, 4, 10, tzinfo=UTC), Season.SPRING),
        (datetime(2020, 8, 1, tzinfo=UTC), Season.SUMMER),
    ])
    def test_examples(self, ts, season):
        assert season_of(ts) is season

    def test_total_partition(self):
        seen = [season_of(datetime(2020, m, 1, tzinfo=UTC)) for m in range(1, 13)]
        assert len(seen) == 12
        assert set(seen) == set(Season)

    def test_season_windows_are_in_season(self):
        for season in Season:
            start, end = season_window(2019, season)
            t = start
            while t < end:
                assert season_of(t) is season
                t += timedelta(days=7)


def year_store(store, means, project="P", samples_per_year=50):
    """One plant with a controlled mean flow per calendar year."""
    rows = []
    for year, mean in means.items():
        for i in range(samples_per_year):
            ts = datetime(year, 1 + (i % 12), 1 + (i // 12), tzinfo=UTC)
            rows.append(PlantSample(project, ts, float(mean), 300.0, 1e5, 0.0, 100.0))
    store.insert_plant_samples(rows)
    return store


class TestWaterYear:
    def test_extremes(self, store):
        means = {2013 + i: 100.0 + 10 * i for i in range(10)}
        year_store(store, means)
        assert classify_water_year(store, "P", 2013) is WaterYearClass.DRY
        assert classify_water_year(store, "P", 2022) is WaterYearClass.WET

    def test_percentile_oracle_means_1_to_10(self, store):
        means = {2010 + i: float(i + 1) for i in range(10)}
        year_store(store, means)
        values = np.array(sorted(means.values()))
        dry_cut = np.percentile(values, 33.3)
        wet_cut = np.percentile(values, 66.7)
        for year, mean in means.items():
            expect = (WaterYearClass.DRY if mean < dry_cut
                      else WaterYearClass.WET if mean > wet_cut
                      else WaterYearClass.AVERAGE)
            assert classify_water_year(store, "P", year) is expect
        assert classify_water_year(store, "P", 2014) is WaterYearClass.AVERAGE

    def test_roughly_even_split(self, store):
        means = {2005 + i: 50.0 + 7.0 * i for i in range(12)}
        year_store(store, means)
        classes = list(classify_all_years(store, "P").values())
        for cls in WaterYearClass:
            assert 12 // 3 - 1 <= classes.count(cls) <= 12 // 3 + 2

    def test_degenerate_all_equal_is_average(self, store):
        year_store(store, {2015 + i: 100.0 for i in range(5)})
        for year in range(2015, 2020):
            assert classify_water_year(store, "P", year) is WaterYearClass.AVERAGE

    def test_insufficient_history(self, store):
        year_store(store, {2020: 1.0, 2021: 2.0})
        with pytest.raises(InsufficientDataError):
            classify_water_year(store, "P", 2020)

    def test_monotone_in_own_mean(self, tmp_path):
        # raising one year's mean must never move it toward DRY
        order = {WaterYearClass.DRY: 0, WaterYearClass.AVERAGE: 1,
                 WaterYearClass.WET: 2}
        base = {2010 + i: 100.0 + 15.0 * i for i in range(7)}
        previous = None
        for k, bump in enumerate((0.0, 20.0, 50.0, 120.0)):
            s = Store(tmp_path / f"m{k}.db")
            means = dict(base)
            means[2013] = 130.0 + bump
            year_store(s, means)
            cls = classify_water_year(s, "P", 2013)
            if previous is not None:
                assert order[cls] >= order[previous]
            previous = cls


class TestScenario:
    def test_parse_synthetic(self):
        sc = HydroScenario.parse("dry:summer")
        assert sc.water_year is WaterYearClass.DRY
        assert sc.season is Season.SUMMER

    def test_parse_historical(self):
        sc = HydroScenario.parse("hist:2019-01-01T00:00..2019-02-01T00:00")
        assert sc.historical_window[0].year == 2019

    def test_parse_garbage(self):
        with pytest.raises(ValidationError):
            HydroScenario.parse("sideways:always")

    def test_exactly_one_variant(self):
        with pytest.raises(ValidationError):
            HydroScenario()

    def test_historical_identity(self, store):
        year_store(store, {2017 + i: 100.0 + i for i in range(3)})
        window = (datetime(2019, 1, 1, tzinfo=UTC), datetime(2019, 2, 1, tzinfo=UTC))
        sc = HydroScenario.historical(*window)
        assert select_scenario_window(store, sc, "P") == window

    def test_dry_summer_picks_most_recent_dry_year(self, store):
        means = {2013: 50.0, 2014: 100.0, 2015: 49.0, 2016: 110.0, 2017: 120.0,
                 2018: 105.0, 2019: 115.0}
        year_store(store, means)
        classes = classify_all_years(store, "P")
        dry_years = [y for y, c in classes.items() if c is WaterYearClass.DRY]
        assert max(dry_years) == 2015
        sc = HydroScenario.synthetic(WaterYearClass.DRY, Season.SUMMER)
        assert select_scenario_window(store, sc, "P") == season_window(2015,
                                                                       Season.SUMMER)

    def test_no_matching_class_errors(self, store):
        year_store(store, {2015 + i: 100.0 for i in range(5)})
        sc = HydroScenario.synthetic(WaterYearClass.WET, Season.WINTER)
        with pytest.raises(NotFoundError):
            select_scenario_window(store, sc, "P")

    def test_out_of_range_historical_errors(self, store):
        year_store(store, {2017 + i: 100.0 + i for i in range(3)})
        sc = HydroScenario.historical(datetime(1990, 1, 1, tzinfo=UTC),
                                      datetime(1990, 2, 1, tzinfo=UTC))
        with pytest.raises(NotFoundError):
            select_scenario_window(store, sc, "P")


class TestSyntheticCascade:
    def test_deterministic_for_seed(self):
        a = generate_synthetic_cascade(42, 300, 2, 0.05)
        b = generate_synthetic_cascade(42, 300, 2, 0.05)
        assert a.upstream == b.upstream
        assert a.downstream == b.downstream
        assert a.unit_samples == b.unit_samples

    def test_zero_lag_zero_noise_identity(self):
        c = generate_synthetic_cascade(7, 200, 0, 0.0)
        up = [s.flow for s in c.upstream]
        down = [s.flow for s in c.downstream]
        assert up == down

    def test_lagged_flow_relation_exact_without_noise(self):
        c = generate_synthetic_cascade(7, 200, 3, 0.0)
        up = {s.timestamp: s.flow for s in c.upstream}
        for s in c.downstream:
            src = s.timestamp - timedelta(hours=3)
            if src in up:
                assert s.flow == pytest.approx(up[src], rel=1e-12)

    def test_ingests_cleanly_and_satisfies_invariants(self, tmp_path):
        c = generate_synthetic_cascade(13, 300, 2, 0.05)
        store = Store(tmp_path / "c.db")
        c.ingest(store)
        assert {p.project_name for p in store.plants()} == {"UP", "DOWN"}
        up_units = store.join_units_of("UP")
        assert len(up_units) == 10
        for s in c.upstream + c.downstream:
            assert s.flow >= 0 and s.head > 0 and s.storage >= 0
            assert s.total_mw >= 0 and s.spill >= 0

    def test_unit_rows_follow_descending_fill(self):
        c = generate_synthetic_cascade(11, 100, 0, 0.0)
        by_ts = {}
        for us in c.unit_samples:
            if us.unit_id.startswith("4000"):
                by_ts.setdefault(us.timestamp, {})[us.unit_id] = us.mw
        for s in c.upstream:
            units = by_ts[s.timestamp]
            big = [units[f"40001-U{i}"] for i in (1, 2, 3)]
            mid = [units[f"40002-V{i}"] for i in (1, 2, 3)]
            # any loaded mid-size unit implies the big units are saturated
            if any(m > 0 for m in mid):
                assert all(b == 200.0 for b in big)
            total = sum(units.values())
            assert total == pytest.approx(min(s.total_mw, 1000.0), abs=1e-6)

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            generate_synthetic_cascade(1, 10, 10, 0.0)
