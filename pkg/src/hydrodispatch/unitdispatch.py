"""Two-step learned unit dispatch for one plant.

Units are grouped into categories by nominal power (C1 largest). For every
category, step one trains a classifier on whether any unit of the category is
active given plant-level inputs (total MW, head, storage); step two trains a
regressor on the category's total MW and per-active-unit average MW, using
active hours only. Prediction consults the regressor only when the classifier
fires.

Categories that never change state in the data cannot support a classifier
(that is an error at the operation level); the plant-level trainer records a
constant predictor for them instead.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .datastore import PlantSample, StaticUnit, Store, UnitSample
from .errors import (InsufficientDataError, ModelVersionError, ValidationError)
from .mlp import Mlp, TrainConfig, grad_check

MODEL_FORMAT = "hydrodispatch-model"
MODEL_FORMAT_VERSION = 1

MIN_ACTIVE_ROWS = 50

__all__ = [
    "Category", "CategorySpec", "CategoryTarget", "TrainingRow",
    "CategoryModel", "TrainedPlantModel", "CategoryPrediction",
    "categorize_units", "build_training_rows", "split_rows",
    "train_classifier", "train_regressor", "train_plant_model",
    "predict_categories", "save_model", "load_model", "grad_check",
]


@dataclass(frozen=True)
class Category:
    label: str  # C1, C2, ... in descending nominal power
    nominal_pmax: float
    unit_ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.unit_ids)


@dataclass(frozen=True)
class CategorySpec:
    plant: str
    categories: tuple[Category, ...]

    def by_label(self) -> dict[str, Category]:
        return {c.label: c for c in self.categories}

    def category_of(self, unit_id: str) -> str:
        for c in self.categories:
            if unit_id in c.unit_ids:
                return c.label
        raise ValidationError(f"unit {unit_id!r} not in any category")


def categorize_units(units: Sequence[StaticUnit], plant: str | None = None,
                     tolerance: float = 0.01) -> CategorySpec:
    """Group units by nominal power with 1% relative clustering; labels run
    C1.. in descending nominal power."""
    if not units:
        raise ValidationError("no units to categorize")
    plant = plant or units[0].project_name
    ordered = sorted(units, key=lambda u: (-u.nominal_pmax, u.unit_id))
    clusters: list[list[StaticUnit]] = []
    for unit in ordered:
        if clusters:
            anchor = clusters[-1][0].nominal_pmax
            if (anchor - unit.nominal_pmax) / anchor <= tolerance:
                clusters[-1].append(unit)
                continue
        clusters.append([unit])
    categories = tuple(
        Category(f"C{i}", float(np.median([u.nominal_pmax for u in cluster])),
                 tuple(sorted(u.unit_id for u in cluster)))
        for i, cluster in enumerate(clusters, start=1))
    return CategorySpec(plant, categories)


@dataclass(frozen=True)
class CategoryTarget:
    exist: bool
    cat_mw: float  # total MW of active units in the category
    unit_mw: float  # average MW per active unit

    def __post_init__(self):
        if not self.exist and (self.cat_mw != 0.0 or self.unit_mw != 0.0):
            raise ValidationError("inactive category must have zero MW")
        if self.exist and not (self.cat_mw >= self.unit_mw > 0.0):
            raise ValidationError(
                f"active category needs cat_mw >= unit_mw > 0, got"
                f" ({self.cat_mw}, {self.unit_mw})")


@dataclass(frozen=True)
class TrainingRow:
    timestamp: datetime
    total_mw: float
    head_ft: float
    storage_af: float
    targets: Mapping[str, CategoryTarget]

    @property
    def inputs(self) -> tuple[float, float, float]:
        return (self.total_mw, self.head_ft, self.storage_af)


def build_training_rows(plant_samples: Sequence[PlantSample],
                        unit_samples: Sequence[UnitSample],
                        spec: CategorySpec) -> list[TrainingRow]:
    """Join plant-level inputs with per-category unit aggregates by hour.

    Hours missing any of the three inputs are dropped; a unit without a
    sample at some hour counts as inactive for that hour.
    """
    unit_category: dict[str, str] = {}
    for cat in spec.categories:
        for uid in cat.unit_ids:
            unit_category[uid] = cat.label

    by_hour: dict[datetime, dict[str, list[float]]] = {}
    for us in unit_samples:
        label = unit_category.get(us.unit_id)
        if label is None:
            continue
        if us.active:
            by_hour.setdefault(us.timestamp, {}).setdefault(label, []).append(us.mw)
        else:
            by_hour.setdefault(us.timestamp, {}).setdefault(label, [])

    rows = []
    for ps in sorted(plant_samples, key=lambda s: s.timestamp):
        if ps.total_mw is None or ps.head is None or ps.storage is None:
            continue
        cat_mws = by_hour.get(ps.timestamp)
        if cat_mws is None:
            continue
        targets = {}
        for cat in spec.categories:
            active = cat_mws.get(cat.label, [])
            if active:
                total = float(sum(active))
                targets[cat.label] = CategoryTarget(True, total, total / len(active))
            else:
                targets[cat.label] = CategoryTarget(False, 0.0, 0.0)
        rows.append(TrainingRow(ps.timestamp, ps.total_mw, ps.head, ps.storage,
                                targets))
    if not rows:
        raise ValidationError("plant and unit samples share no joinable hours")
    return rows


def split_rows(rows: Sequence[TrainingRow], train_frac: float
               ) -> tuple[list[TrainingRow], list[TrainingRow]]:
    """Chronological split: the early fraction trains, the tail evaluates."""
    rows = sorted(rows, key=lambda r: r.timestamp)
    cut = int(round(len(rows) * train_frac))
    cut = min(max(cut, 1), len(rows) - 1) if len(rows) > 1 else len(rows)
    return list(rows[:cut]), list(rows[cut:])


def _input_matrix(rows: Sequence[TrainingRow]) -> np.ndarray:
    return np.array([r.inputs for r in rows], dtype=float)


def train_classifier(rows: Sequence[TrainingRow], label: str,
                     config: TrainConfig) -> tuple[Mlp, float]:
    """Step one: category-exists classifier. Returns (net, held-out accuracy)."""
    train, test = split_rows(rows, config.train_frac)
    y_train = np.array([[float(r.targets[label].exist)] for r in train])
    if len(np.unique(y_train)) < 2:
        state = "active" if y_train.size and y_train[0, 0] else "inactive"
        raise ValidationError(
            f"category {label} is always {state} in the training rows; train a"
            " constant predictor instead of a classifier")
    net = Mlp([3, *config.hidden, 1], head="sigmoid", seed=config.seed)
    net.fit(_input_matrix(train), y_train, config)
    if test:
        y_test = np.array([[float(r.targets[label].exist)] for r in test])
        prob = net.predict(_input_matrix(test))
        decided = (prob >= config.decision_threshold).astype(float)
        accuracy = float(np.mean(decided == y_test))
    else:
        accuracy = float("nan")
    return net, accuracy


@dataclass(frozen=True)
class CiReport:
    """Held-out residual spread per output: 80% interval against target mean."""

    lows: tuple[float, float]  # 10th percentile of residuals (cat_mw, unit_mw)
    highs: tuple[float, float]  # 90th percentile
    target_means: tuple[float, float]

    def widths(self) -> tuple[float, float]:
        return tuple(h - l for l, h in zip(self.lows, self.highs))

    def relative_widths(self) -> tuple[float, float]:
        return tuple(w / abs(m) if m else float("inf")
                     for w, m in zip(self.widths(), self.target_means))

    def to_dict(self) -> dict:
        return {"lows": list(self.lows), "highs": list(self.highs),
                "target_means": list(self.target_means),
                "relative_widths": list(self.relative_widths())}


def train_regressor(rows: Sequence[TrainingRow], label: str,
                    config: TrainConfig) -> tuple[Mlp, CiReport]:
    """Step two: (cat_mw, unit_mw) regressor trained on active hours only."""
    active = [r for r in rows if r.targets[label].exist]
    if len(active) < MIN_ACTIVE_ROWS:
        raise InsufficientDataError(
            f"category {label}: {len(active)} active rows, need {MIN_ACTIVE_ROWS}")
    train, test = split_rows(active, config.train_frac)
    y_train = np.array([[r.targets[label].cat_mw, r.targets[label].unit_mw]
                        for r in train])
    net = Mlp([3, *config.hidden, 2], head="identity", seed=config.seed)
    net.fit(_input_matrix(train), y_train, config)

    eval_rows = test if test else train
    y_eval = np.array([[r.targets[label].cat_mw, r.targets[label].unit_mw]
                       for r in eval_rows])
    residuals = net.predict(_input_matrix(eval_rows)) - y_eval
    lows = np.percentile(residuals, 10, axis=0)
    highs = np.percentile(residuals, 90, axis=0)
    means = y_eval.mean(axis=0)
    report = CiReport(tuple(float(v) for v in lows),
                      tuple(float(v) for v in highs),
                      tuple(float(v) for v in means))
    return net, report


@dataclass
class CategoryModel:
    label: str
    size: int
    # one of: constant_exist set (degenerate category), or classifier set
    constant_exist: bool | None = None
    classifier: Mlp | None = None
    regressor: Mlp | None = None
    accuracy: float | None = None
    ci: CiReport | None = None


@dataclass
class TrainedPlantModel:
    plant: str
    spec: CategorySpec
    config: TrainConfig
    categories: dict[str, CategoryModel] = field(default_factory=dict)
    # shared input statistics (training split), for the out-of-range warning
    input_mean: np.ndarray | None = None
    input_std: np.ndarray | None = None


def train_plant_model(store: Store, plant: str, config: TrainConfig
                      ) -> TrainedPlantModel:
    """Categorize, build rows, and run the two training steps per category."""
    units = store.join_units_of(plant)
    if not units:
        raise ValidationError(f"no registered units for plant {plant!r}")
    spec = categorize_units(units, plant)
    rows = build_training_rows(store.query_plant_all(plant),
                               store.query_units_of_project(plant), spec)
    return train_plant_model_from_rows(spec, rows, config)


def train_plant_model_from_rows(spec: CategorySpec, rows: Sequence[TrainingRow],
                                config: TrainConfig) -> TrainedPlantModel:
    model = TrainedPlantModel(spec.plant, spec, config)
    train, test = split_rows(rows, config.train_frac)
    x = _input_matrix(train)
    model.input_mean = x.mean(axis=0)
    model.input_std = x.std(axis=0)

    for cat in spec.categories:
        cm = CategoryModel(cat.label, cat.size)
        exists = [r.targets[cat.label].exist for r in train]
        if all(exists) or not any(exists):
            cm.constant_exist = bool(exists[0]) if exists else False
            held = [r.targets[cat.label].exist == cm.constant_exist for r in test]
            cm.accuracy = float(np.mean(held)) if held else 1.0
        else:
            cm.classifier, cm.accuracy = train_classifier(rows, cat.label, config)
        if cm.constant_exist is not False:
            try:
                cm.regressor, cm.ci = train_regressor(rows, cat.label, config)
            except InsufficientDataError:
                warnings.warn(f"{spec.plant}/{cat.label}: too few active rows for"
                              " a regressor; category will predict inactive",
                              stacklevel=2)
                cm.constant_exist = False
                cm.classifier = None
        model.categories[cat.label] = cm
    return model


@dataclass(frozen=True)
class CategoryPrediction:
    probability: float
    exist: bool
    cat_mw: float
    unit_mw: float
    active_units: int


def active_unit_count(cat_mw: float, unit_mw: float, size: int) -> int:
    """Units implied by the two regressor outputs: round(cat/unit), clamped
    to [1, category size]."""
    count = round(cat_mw / unit_mw) if unit_mw > 0 else size
    return min(max(int(count), 1), size)


def predict_categories(model: TrainedPlantModel, total_mw: float, head_ft: float,
                       storage_af: float) -> dict[str, CategoryPrediction]:
    """Per-category activity and MW prediction for one plant-level input."""
    x = np.array([total_mw, head_ft, storage_af], dtype=float)
    if model.input_mean is not None and model.input_std is not None:
        std = np.where(model.input_std == 0.0, 1.0, model.input_std)
        z = np.abs((x - model.input_mean) / std)
        if np.any(z > 3.0):
            warnings.warn(
                f"inputs {x.tolist()} are outside 3 sigma of the training"
                " distribution; prediction is an extrapolation", stacklevel=2)

    out: dict[str, CategoryPrediction] = {}
    for cat in model.spec.categories:
        cm = model.categories[cat.label]
        if cm.constant_exist is not None:
            prob = 1.0 if cm.constant_exist else 0.0
            decided = cm.constant_exist
        else:
            prob = float(cm.classifier.predict(x)[0, 0])
            decided = prob >= model.config.decision_threshold
        if not decided or cm.regressor is None:
            out[cat.label] = CategoryPrediction(prob, False, 0.0, 0.0, 0)
            continue
        cat_mw, unit_mw = (float(v) for v in cm.regressor.predict(x)[0])
        cat_mw = max(cat_mw, 0.0)
        unit_mw = max(unit_mw, 1e-9)
        count = active_unit_count(cat_mw, unit_mw, cat.size)
        out[cat.label] = CategoryPrediction(prob, True, cat_mw, unit_mw, count)
    return out


# -- persistence ---------------------------------------------------------------


def _category_to_dict(cm: CategoryModel) -> dict:
    return {
        "label": cm.label,
        "size": cm.size,
        "constant_exist": cm.constant_exist,
        "classifier": cm.classifier.to_dict() if cm.classifier else None,
        "regressor": cm.regressor.to_dict() if cm.regressor else None,
        "accuracy": cm.accuracy,
        "ci": cm.ci.to_dict() if cm.ci else None,
    }


def model_to_dict(model: TrainedPlantModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "plant": model.plant,
        "spec": {
            "plant": model.spec.plant,
            "categories": [
                {"label": c.label, "nominal_pmax": c.nominal_pmax,
                 "unit_ids": list(c.unit_ids)} for c in model.spec.categories],
        },
        "config": model.config.to_dict(),
        "input_mean": model.input_mean.tolist() if model.input_mean is not None else None,
        "input_std": model.input_std.tolist() if model.input_std is not None else None,
        "categories": {label: _category_to_dict(cm)
                       for label, cm in model.categories.items()},
    }


def model_from_dict(d: dict) -> TrainedPlantModel:
    if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"incompatible model file: format={d.get('format')!r}"
            f" version={d.get('version')!r}, expected {MODEL_FORMAT!r}"
            f" v{MODEL_FORMAT_VERSION}")
    spec = CategorySpec(d["spec"]["plant"], tuple(
        Category(c["label"], c["nominal_pmax"], tuple(c["unit_ids"]))
        for c in d["spec"]["categories"]))
    model = TrainedPlantModel(d["plant"], spec, TrainConfig.from_dict(d["config"]))
    if d.get("input_mean") is not None:
        model.input_mean = np.array(d["input_mean"], dtype=float)
        model.input_std = np.array(d["input_std"], dtype=float)
    for label, cd in d["categories"].items():
        ci = None
        if cd.get("ci"):
            ci = CiReport(tuple(cd["ci"]["lows"]), tuple(cd["ci"]["highs"]),
                          tuple(cd["ci"]["target_means"]))
        model.categories[label] = CategoryModel(
            label=cd["label"], size=cd["size"],
            constant_exist=cd.get("constant_exist"),
            classifier=Mlp.from_dict(cd["classifier"]) if cd.get("classifier") else None,
            regressor=Mlp.from_dict(cd["regressor"]) if cd.get("regressor") else None,
            accuracy=cd.get("accuracy"), ci=ci)
    return model


def save_model(model: TrainedPlantModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def load_model(path: str | Path) -> TrainedPlantModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
