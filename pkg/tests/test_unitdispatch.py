import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from hydrodispatch.datastore import PlantSample, StaticUnit, UnitSample
from hydrodispatch.errors import (InsufficientDataError, ModelVersionError,
                                  ValidationError)
from hydrodispatch.mlp import TrainConfig
from hydrodispatch.unitdispatch import (CategoryTarget, TrainingRow,
                                        build_training_rows, categorize_units,
                                        load_model, model_from_dict,
                                        model_to_dict, predict_categories,
                                        save_model, split_rows, train_classifier,
                                        train_plant_model_from_rows,
                                        train_regressor)

UTC = timezone.utc
T0 = datetime(2020, 1, 1, tzinfo=UTC)


def unit(pmax, i, bus=40001, plant="Plant A"):
    return StaticUnit(plant, f"Bus{bus % 10}", bus, f"G{i}", nominal_pmax=pmax)


class TestCategorize:
    def test_three_nominal_groups(self):
        units = [unit(707.0, i, 40001) for i in range(3)] + \
                [unit(825.7, i, 40002) for i in range(3)] + \
                [unit(125.0, i, 40003) for i in range(3)]
        spec = categorize_units(units)
        assert [c.label for c in spec.categories] == ["C1", "C2", "C3"]
        assert [c.nominal_pmax for c in spec.categories] == [825.7, 707.0, 125.0]
        assert all(c.size == 3 for c in spec.categories)

    def test_single_unit(self):
        spec = categorize_units([unit(100.0, 1)])
        assert len(spec.categories) == 1

    def test_half_percent_gap_clusters_together(self):
        units = [unit(100.5, 1), unit(100.0, 2)]
        spec = categorize_units(units)
        assert len(spec.categories) == 1
        assert spec.categories[0].size == 2

    def test_every_unit_in_exactly_one_category(self):
        rng = np.random.default_rng(1)
        units = [unit(float(p), i, 40000 + i)
                 for i, p in enumerate(rng.uniform(10, 900, 25))]
        spec = categorize_units(units)
        seen = [u for c in spec.categories for u in c.unit_ids]
        assert sorted(seen) == sorted(u.unit_id for u in units)

    def test_within_category_tolerance(self):
        rng = np.random.default_rng(2)
        units = [unit(float(p), i, 40000 + i)
                 for i, p in enumerate(rng.uniform(10, 900, 40))]
        for cat in categorize_units(units).categories:
            pmaxes = [u.nominal_pmax for u in units if u.unit_id in cat.unit_ids]
            assert (max(pmaxes) - min(pmaxes)) / max(pmaxes) <= 0.011


def spec_two_categories():
    units = [unit(300.0, i, 40001) for i in (1, 2)] + \
            [unit(100.0, i, 40002) for i in (1, 2, 3)]
    return categorize_units(units)


class TestTrainingRows:
    def test_aggregation_arithmetic(self):
        spec = spec_two_categories()
        plant = [PlantSample("Plant A", T0, 1000.0, 300.0, 1e5, 0.0, 600.0)]
        units = [UnitSample("40001-G1", T0, 300.0), UnitSample("40001-G2", T0, 300.0),
                 UnitSample("40002-G1", T0, 0.0), UnitSample("40002-G2", T0, 0.0),
                 UnitSample("40002-G3", T0, 0.0)]
        rows = build_training_rows(plant, units, spec)
        assert len(rows) == 1
        c1 = rows[0].targets["C1"]
        assert c1 == CategoryTarget(True, 600.0, 300.0)
        assert rows[0].targets["C2"] == CategoryTarget(False, 0.0, 0.0)

    def test_row_count_equals_joined_hours(self):
        spec = spec_two_categories()
        plant = [PlantSample("Plant A", T0 + timedelta(hours=i), 1000.0, 300.0,
                             1e5, 0.0, 500.0) for i in range(100)]
        units = []
        for i in range(80):  # only 80 hours have unit data
            units.append(UnitSample("40001-G1", T0 + timedelta(hours=i), 250.0))
        rows = build_training_rows(plant, units, spec)
        assert len(rows) == 80

    def test_null_inputs_dropped(self):
        spec = spec_two_categories()
        plant = [PlantSample("Plant A", T0, 1000.0, None, 1e5, 0.0, 500.0),
                 PlantSample("Plant A", T0 + timedelta(hours=1), 1000.0, 300.0,
                             1e5, 0.0, 500.0)]
        units = [UnitSample("40001-G1", T0, 250.0),
                 UnitSample("40001-G1", T0 + timedelta(hours=1), 250.0)]
        rows = build_training_rows(plant, units, spec)
        assert len(rows) == 1

    def test_empty_join_is_error(self):
        spec = spec_two_categories()
        plant = [PlantSample("Plant A", T0, 1000.0, 300.0, 1e5, 0.0, 500.0)]
        units = [UnitSample("40001-G1", T0 + timedelta(hours=5), 250.0)]
        with pytest.raises(ValidationError):
            build_training_rows(plant, units, spec)

    def test_invariants_on_cascade_rows(self, cascade_store, upstream_model):
        rows = build_training_rows(cascade_store.query_plant_all("UP"),
                                   cascade_store.query_units_of_project("UP"),
                                   upstream_model.spec)
        for row in rows[::37]:
            for target in row.targets.values():
                if target.exist:
                    assert target.cat_mw >= target.unit_mw > 0
                else:
                    assert target.cat_mw == target.unit_mw == 0.0


def rule_rows(n=2000, seed=0, cut=500.0, head_coef=0.0):
    """Rows where C1 activity follows a (possibly head-dependent) MW cut."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        total = float(rng.uniform(0, 1000))
        head = float(rng.uniform(280, 330))
        storage = float(rng.uniform(1e5, 5e5))
        exist = total > cut + head_coef * (head - 305.0)
        base = 500.0 + 0.6 * total + 2.0 * (head - 300.0)
        target = (CategoryTarget(True, base, base / 3) if exist
                  else CategoryTarget(False, 0.0, 0.0))
        rows.append(TrainingRow(T0 + timedelta(hours=i), total, head, storage,
                                {"C1": target}))
    return rows


class TestClassifier:
    def test_separable_rule_high_accuracy(self):
        net, accuracy = train_classifier(rule_rows(), "C1",
                                         TrainConfig(seed=1, epochs=200))
        assert accuracy >= 0.98

    def test_same_seed_identical_weights(self):
        cfg = TrainConfig(seed=3, epochs=10)
        rows = rule_rows(400)
        a, _ = train_classifier(rows, "C1", cfg)
        b, _ = train_classifier(rows, "C1", cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_single_class_rejected(self):
        rows = rule_rows(200, cut=-1.0)  # always active
        with pytest.raises(ValidationError, match="constant"):
            train_classifier(rows, "C1", TrainConfig(seed=1, epochs=5))


class TestRegressor:
    def test_exact_linear_target_tight_intervals(self):
        rows = [r for r in rule_rows(2500, cut=-1.0)]
        net, report = train_regressor(rows, "C1",
                                      TrainConfig(seed=1, epochs=500,
                                                  learning_rate=2e-3))
        assert max(report.relative_widths()) < 0.02

    def test_too_few_active_rows(self):
        with pytest.raises(InsufficientDataError):
            train_regressor(rule_rows(60, cut=2000.0), "C1", TrainConfig())

    def test_empty_active_subset(self):
        with pytest.raises(InsufficientDataError):
            train_regressor(rule_rows(200, cut=2000.0), "C1", TrainConfig())


@pytest.fixture(scope="module")
def model():
    rows = rule_rows(head_coef=2.0)
    spec = categorize_units([unit(300.0, i) for i in (1, 2, 3)])
    return train_plant_model_from_rows(spec, rows,
                                       TrainConfig(seed=2, epochs=150)), rows


class TestPredict:

    def test_training_row_recall(self, model):
        model, rows = model
        hits = 0
        probes = [r for r in rows if r.targets["C1"].exist][:40]
        for row in probes:
            pred = predict_categories(model, *row.inputs)["C1"]
            if pred.exist and abs(pred.cat_mw - row.targets["C1"].cat_mw) \
                    <= 0.05 * row.targets["C1"].cat_mw:
                hits += 1
        assert hits >= 0.9 * len(probes)

    def test_low_probability_zeroes_outputs(self, model):
        model, rows = model
        inactive = next(r for r in rows if not r.targets["C1"].exist
                        and r.total_mw < 200)
        pred = predict_categories(model, *inactive.inputs)["C1"]
        if not pred.exist:
            assert pred.cat_mw == pred.unit_mw == 0.0 and pred.active_units == 0

    def test_unit_count_rounding(self):
        from hydrodispatch.unitdispatch import active_unit_count
        assert active_unit_count(300.0, 100.0, 5) == 3
        assert active_unit_count(260.0, 100.0, 5) == 3
        assert active_unit_count(900.0, 100.0, 5) == 5  # clamped to size
        assert active_unit_count(10.0, 100.0, 5) == 1  # at least one when active

    def test_out_of_range_inputs_warn(self, model):
        model, _ = model
        with pytest.warns(UserWarning, match="3 sigma"):
            predict_categories(model, 1e7, 300.0, 1e5)

    def test_count_clamped_to_category_size(self, model):
        model, rows = model
        for row in rows[:200]:
            pred = predict_categories(model, *row.inputs)["C1"]
            assert 0 <= pred.active_units <= 3


class TestModelFiles:
    def test_round_trip_identical_predictions(self, tmp_path, upstream_model):
        path = tmp_path / "model.json"
        save_model(upstream_model, path)
        back = load_model(path)
        assert back.plant == upstream_model.plant
        assert back.spec == upstream_model.spec
        probe = (550.0, 305.0, 4e5)
        assert predict_categories(back, *probe) == \
            predict_categories(upstream_model, *probe)

    def test_incompatible_version_rejected(self, upstream_model):
        d = model_to_dict(upstream_model)
        d["version"] = 99
        with pytest.raises(ModelVersionError):
            model_from_dict(d)

    def test_serialization_preserves_weights_bitwise(self, upstream_model):
        d = json.loads(json.dumps(model_to_dict(upstream_model)))
        back = model_from_dict(d)
        for label, cm in upstream_model.categories.items():
            if cm.classifier is not None:
                for a, b in zip(cm.classifier.weights,
                                back.categories[label].classifier.weights):
                    assert np.array_equal(a, b)


class TestPlantModelTraining:
    def test_cascade_model_categories(self, upstream_model):
        assert set(upstream_model.categories) == {"C1", "C2", "C3"}
        c2 = upstream_model.categories["C2"]
        assert c2.classifier is not None
        assert c2.accuracy >= 0.95
        c3 = upstream_model.categories["C3"]
        assert c3.constant_exist is False

    def test_split_is_chronological(self):
        rows = rule_rows(100)
        train, test = split_rows(rows, 0.8)
        assert len(train) == 80 and len(test) == 20
        assert max(r.timestamp for r in train) < min(r.timestamp for r in test)
