"""Scenario-to-planning-case integration: plant MW targets, cascade
recalibration, learned per-category prediction, unit allocation, efficiency
validation/correction, and the delimited case export.

Allocation bookkeeping is exact: per-category unit shares are snapped down to
a 2^-20 MW grid so that the rational residual (unserved MW) closes the sum
identity in float arithmetic, verified at construction.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .datastore import Store
from .efficiency import (DEFAULT_THRESHOLD, EfficiencyCurve, efficient_band,
                         load_curve)
from .errors import NotFoundError, ValidationError
from .hydrology import HydroScenario, select_scenario_window
from .interdependency import CascadeLink
from .unitdispatch import (CategoryPrediction, CategorySpec, TrainedPlantModel,
                           categorize_units, predict_categories)

DEFAULT_ALPHA = 1.5

EXPORT_COLUMNS = ["Project", "Unit ID", "Pgen (MW)", "Pmax (MW)", "Head (ft)",
                  "Pgen calculated (MW)", "Pmax available (MW)"]

# Allocation grid: shares are floored to multiples of 2^-20 MW (~1e-6) so
# category sums stay exactly representable.
_GRID = 2.0 ** 20


@dataclass
class PlantTarget:
    project: str
    target_mw: float
    head_ft: float
    storage_af: float
    source: str  # user | historical | recalibrated

    def __post_init__(self):
        if self.target_mw < 0:
            raise ValidationError("target_mw must be >= 0")
        if self.head_ft <= 0:
            raise ValidationError("head_ft must be > 0")


@dataclass(frozen=True)
class DispatchRow:
    project: str
    unit_id: str
    pgen_ref: float  # reference output from the existing case
    pmax_nominal: float
    head_ft: float
    pgen_calculated: float
    pmax_available: float


def pmax_available(nominal: float, head: float, rated_head: float,
                   alpha: float = DEFAULT_ALPHA) -> float:
    """Head-derated unit capacity: nominal * min(1, (head/rated)^alpha).

    The power-1.5 law follows flow scaling with sqrt(head) and power with
    flow*head; above rated head the nameplate caps the unit.
    """
    if head <= 0 or rated_head <= 0:
        raise ValidationError("head and rated_head must be > 0")
    return nominal * min(1.0, (head / rated_head) ** alpha)


# -- cascade recalibration -----------------------------------------------------


def _topological_order(projects: Iterable[str], links: Sequence[CascadeLink]
                       ) -> list[str]:
    projects = list(projects)
    known = set(projects)
    edges = [(l.upstream, l.downstream) for l in links
             if l.upstream in known and l.downstream in known]
    indegree = {p: 0 for p in projects}
    for _, down in edges:
        indegree[down] += 1
    ready = sorted(p for p, d in indegree.items() if d == 0)
    order = []
    while ready:
        p = ready.pop(0)
        order.append(p)
        for up, down in edges:
            if up == p:
                indegree[down] -= 1
                if indegree[down] == 0:
                    ready.append(down)
        ready.sort()
    if len(order) != len(projects):
        raise ValidationError("cascade links contain a cycle")
    return order


def recalibrate_cascade(targets: Mapping[str, PlantTarget],
                        links: Sequence[CascadeLink],
                        capacity_mw: Mapping[str, float]) -> dict[str, PlantTarget]:
    """Walk the cascade in topological order and replace each downstream
    target with its link regression prediction, clamped to available capacity.

    Plants with several upstream links take the mean of the link predictions.
    Plants without upstream links keep their targets.
    """
    order = _topological_order(targets.keys(), links)
    out: dict[str, PlantTarget] = {}
    for project in order:
        inbound = [l for l in links
                   if l.downstream == project and l.upstream in out]
        if not inbound:
            out[project] = targets[project]
            continue
        predictions = [l.predict(out[l.upstream].target_mw,
                                 targets[l.upstream].head_ft) for l in inbound]
        predicted = float(np.mean(predictions))
        cap = capacity_mw.get(project, math.inf)
        clamped = min(max(predicted, 0.0), cap)
        out[project] = replace(targets[project], target_mw=clamped,
                               source="recalibrated")
    return out


# -- unit allocation -----------------------------------------------------------


@dataclass(frozen=True)
class CategoryAllocation:
    label: str
    cat_mw: float
    unit_mw: Mapping[str, float]  # active units only
    unserved: float

    def __post_init__(self):
        # conservation must close exactly in float arithmetic
        total = math.fsum(list(self.unit_mw.values()) + [self.unserved])
        if total != self.cat_mw:
            raise ValidationError(
                f"category {self.label}: allocation does not conserve MW"
                f" ({total!r} != {self.cat_mw!r})")


@dataclass(frozen=True)
class Allocation:
    unit_mw: Mapping[str, float]  # every unit of the plant; inactive -> 0
    per_category: tuple[CategoryAllocation, ...]

    @property
    def unserved(self) -> float:
        return math.fsum(c.unserved for c in self.per_category)


def _grid_floor(value: float) -> float:
    return math.floor(value * _GRID) / _GRID


def _allocate_category(label: str, cat_mw: float, active_units: Sequence[str],
                       pmax: Mapping[str, float]) -> CategoryAllocation:
    """Equal split across active units, clamped to per-unit capacity with the
    surplus re-spread over unclamped units until a fixpoint.

    Every emitted value sits on the grid, so the category sum is exact and
    the residual cat_mw - sum is exactly representable: conservation closes
    bit-for-bit, which CategoryAllocation verifies.
    """
    if cat_mw < 0:
        raise ValidationError(f"category {label}: negative MW target")
    if cat_mw > 0 and not active_units:
        raise ValidationError(f"category {label}: positive MW with no active units")
    values: dict[str, float] = {u: 0.0 for u in active_units}
    open_units = sorted(active_units)
    remaining = Fraction(cat_mw)
    while open_units and remaining > 0:
        share = _grid_floor(float(remaining) / len(open_units))
        clamped = [u for u in open_units if pmax.get(u, math.inf) <= share]
        if not clamped:
            for u in open_units:
                values[u] = share
                remaining -= Fraction(share)
            break
        for u in clamped:
            grid_pmax = _grid_floor(pmax[u])
            values[u] = grid_pmax
            remaining -= Fraction(grid_pmax)
            open_units.remove(u)
        if share == 0.0:
            break
    return CategoryAllocation(label, cat_mw, values, float(max(remaining, 0)))


def allocate_units(predictions: Mapping[str, CategoryPrediction],
                   spec: CategorySpec,
                   pmax_avail: Mapping[str, float],
                   forced_inactive: frozenset[str] = frozenset()) -> Allocation:
    """Spread each category's predicted MW equally across its active units.

    The predicted active count selects units in unit_id order, skipping any
    forced-inactive units; per-unit values never exceed pmax_avail, and the
    unallocatable surplus is reported per category as unserved.
    """
    unit_mw: dict[str, float] = {}
    per_category = []
    for cat in spec.categories:
        pred = predictions.get(cat.label)
        eligible = [u for u in cat.unit_ids if u not in forced_inactive]
        if pred is None or not pred.exist or pred.cat_mw <= 0:
            for u in cat.unit_ids:
                unit_mw[u] = 0.0
            per_category.append(CategoryAllocation(cat.label, 0.0, {}, 0.0))
            continue
        if pred.active_units <= 0:
            raise ValidationError(
                f"category {cat.label}: predicted {pred.cat_mw:.2f} MW with"
                " zero active units")
        count = min(pred.active_units, len(eligible))
        if count == 0:
            # every unit forced out: the whole category goes unserved
            alloc = CategoryAllocation(cat.label, pred.cat_mw, {}, pred.cat_mw)
        else:
            alloc = _allocate_category(cat.label, pred.cat_mw, eligible[:count],
                                       pmax_avail)
        for u in cat.unit_ids:
            unit_mw[u] = alloc.unit_mw.get(u, 0.0)
        per_category.append(alloc)
    return Allocation(unit_mw, tuple(per_category))


# -- efficiency validation and correction ---------------------------------------


@dataclass(frozen=True)
class CorrectionAction:
    action: str  # shift | absorb | deactivate
    unit_id: str
    from_mw: float
    to_mw: float
    note: str = ""


@dataclass
class CorrectionLog:
    actions: list[CorrectionAction] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    unresolved: list[str] = field(default_factory=list)  # still out of band
    residual_mw: float = 0.0  # final plant total minus original plant total

    def to_dict(self) -> dict:
        return {
            "actions": [a.__dict__ for a in self.actions],
            "warnings": self.warnings,
            "unresolved": self.unresolved,
            "residual_mw": self.residual_mw,
        }


def _mw_band(curve: EfficiencyCurve, threshold: float, pmax: float
             ) -> tuple[float, float] | None:
    """Efficiency band translated into MW through the fitted flow->power line,
    intersected with [0, pmax]."""
    band = curve.band if threshold == curve.threshold else None
    if band is None:
        band = efficient_band(curve, threshold)
    if band is None or curve.slope <= 0:
        return None
    lo = curve.power_at(band[0])
    hi = curve.power_at(band[1])
    lo, hi = min(lo, hi), max(lo, hi)
    lo, hi = max(lo, 0.0), min(hi, pmax)
    if lo > hi:
        return None
    return lo, hi


def validate_and_correct(allocation: Allocation,
                         predictions: Mapping[str, CategoryPrediction],
                         spec: CategorySpec,
                         pmax_avail: Mapping[str, float],
                         curves: Mapping[str, EfficiencyCurve],
                         threshold: float = DEFAULT_THRESHOLD
                         ) -> tuple[dict[str, float], CorrectionLog]:
    """Push out-of-band setpoints to the nearest efficient-band edge, absorb
    the plant-level MW delta with in-band units, and as a last resort
    deactivate the least-loaded offender and re-allocate its category.

    Every move is logged; the returned residual is the exact float difference
    between the final and original plant totals.
    """
    log = CorrectionLog()
    mw = dict(allocation.unit_mw)
    original_total = math.fsum(mw.values())

    bands: dict[str, tuple[float, float]] = {}
    for unit_id, value in mw.items():
        curve = curves.get(unit_id)
        if curve is None:
            if value > 0:
                log.warnings.append(f"{unit_id}: no efficiency curve; passed through")
            continue
        band = _mw_band(curve, threshold, pmax_avail.get(unit_id, math.inf))
        if band is None:
            log.warnings.append(f"{unit_id}: no operating point clears the"
                                f" {threshold:.2f} efficiency threshold")
            log.unresolved.append(unit_id)
            continue
        bands[unit_id] = band

    forced_inactive: set[str] = set()
    n_units = len(mw)
    for _ in range(max(n_units, 1)):
        offenders = [u for u, band in bands.items()
                     if u not in forced_inactive and mw[u] > 0
                     and not band[0] <= mw[u] <= band[1]]
        if not offenders:
            break
        delta = 0.0
        for u in sorted(offenders):
            lo, hi = bands[u]
            target = lo if mw[u] < lo else hi
            log.actions.append(CorrectionAction("shift", u, mw[u], target,
                                                f"moved to band edge at"
                                                f" threshold {threshold:.2f}"))
            delta += target - mw[u]
            mw[u] = target

        # absorb the delta with in-band units moving toward their band edges
        remaining = -delta  # amount still to add (+) or remove (-) elsewhere
        absorbers = [u for u in sorted(bands) if u not in offenders
                     and u not in forced_inactive and mw[u] > 0]
        for u in absorbers:
            if abs(remaining) < 1e-9:
                break
            lo, hi = bands[u]
            room = (hi - mw[u]) if remaining > 0 else (lo - mw[u])
            move = max(min(remaining, room), 0.0) if remaining > 0 \
                else min(max(remaining, room), 0.0)
            if move == 0.0:
                continue
            log.actions.append(CorrectionAction("absorb", u, mw[u], mw[u] + move,
                                                "compensating in-band adjustment"))
            mw[u] += move
            remaining -= move

        if abs(remaining) < 1e-9:
            continue

        # unabsorbable: drop the least-loaded offender and re-allocate
        victim = min(sorted(offenders), key=lambda u: mw[u])
        log.actions.append(CorrectionAction("deactivate", victim, mw[victim], 0.0,
                                            "unabsorbable correction delta"))
        forced_inactive.add(victim)
        realloc = allocate_units(predictions, spec, pmax_avail,
                                 frozenset(forced_inactive))
        for u, v in realloc.unit_mw.items():
            if u not in forced_inactive:
                mw[u] = v
        mw[victim] = 0.0

    still_out = [u for u, band in bands.items()
                 if mw[u] > 0 and not band[0] <= mw[u] <= band[1]]
    log.unresolved.extend(u for u in still_out if u not in log.unresolved)
    log.residual_mw = math.fsum(mw.values()) - original_total
    return mw, log


# -- case export -----------------------------------------------------------------


def export_case(rows: Sequence[DispatchRow], path: str | Path) -> None:
    """Write the planning-case CSV: fixed column order, two-decimal MW and
    head values, rows sorted by (project, unit_id)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPORT_COLUMNS)
        for r in sorted(rows, key=lambda r: (r.project, r.unit_id)):
            writer.writerow([r.project, r.unit_id, f"{r.pgen_ref:.2f}",
                             f"{r.pmax_nominal:.2f}", f"{r.head_ft:.2f}",
                             f"{r.pgen_calculated:.2f}", f"{r.pmax_available:.2f}"])


def read_case(path: str | Path) -> list[DispatchRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EXPORT_COLUMNS:
            raise ValidationError(f"{path}: unexpected case header {header!r}")
        for row in reader:
            rows.append(DispatchRow(row[0], row[1], float(row[2]), float(row[3]),
                                    float(row[4]), float(row[5]), float(row[6])))
    return rows


# -- end-to-end run ----------------------------------------------------------------


@dataclass
class PlantDispatch:
    project: str
    target: PlantTarget
    rows: list[DispatchRow]
    correction: CorrectionLog
    unserved_mw: float


@dataclass
class DispatchResult:
    scenario: str
    threshold: float
    seed: int | None
    alpha: float
    plants: dict[str, PlantDispatch] = field(default_factory=dict)

    def all_rows(self) -> list[DispatchRow]:
        rows = [r for p in self.plants.values() for r in p.rows]
        return sorted(rows, key=lambda r: (r.project, r.unit_id))

    def manifest(self) -> dict:
        return {
            "scenario": self.scenario,
            "threshold": self.threshold,
            "seed": self.seed,
            "alpha": self.alpha,
            "plants": {
                name: {
                    "target_mw": p.target.target_mw,
                    "head_ft": p.target.head_ft,
                    "storage_af": p.target.storage_af,
                    "target_source": p.target.source,
                    "unserved_mw": p.unserved_mw,
                    "correction": p.correction.to_dict(),
                    "rows": [r.__dict__ for r in p.rows],
                } for name, p in sorted(self.plants.items())
            },
        }


def window_target(store: Store, project: str, window: tuple[datetime, datetime]
                  ) -> PlantTarget:
    """Historical MW target: mean total MW, head and storage over the window."""
    samples = store.query_plant_window(project, window[0], window[1])
    mws = [s.total_mw for s in samples if s.total_mw is not None]
    heads = [s.head for s in samples if s.head is not None]
    storages = [s.storage for s in samples if s.storage is not None]
    if not mws or not heads:
        raise NotFoundError(f"window has no usable MW/head data for {project!r}")
    return PlantTarget(project, float(np.mean(mws)), float(np.mean(heads)),
                       float(np.mean(storages)) if storages else 0.0,
                       "historical")


def run_dispatch(store: Store, models: Mapping[str, TrainedPlantModel],
                 plants: Sequence[str], scenario: HydroScenario,
                 threshold: float = DEFAULT_THRESHOLD, seed: int | None = None,
                 alpha: float = DEFAULT_ALPHA,
                 links: Sequence[CascadeLink] = ()) -> DispatchResult:
    """Full pipeline for a set of plants under one hydro scenario.

    Deterministic for a fixed (store, models, scenario, seed): targets come
    from window means, prediction and allocation are deterministic, and the
    export ordering is fixed.
    """
    result = DispatchResult(scenario.label(), threshold, seed, alpha)

    targets: dict[str, PlantTarget] = {}
    capacity: dict[str, float] = {}
    unit_pmax: dict[str, dict[str, float]] = {}
    windows: dict[str, tuple[datetime, datetime]] = {}
    for project in plants:
        if project not in models:
            raise NotFoundError(f"no trained model for plant {project!r}")
        window = windows[project] = select_scenario_window(store, scenario, project)
        targets[project] = window_target(store, project, window)
        rated = store.get_plant(project).rated_head
        pmaxes = {
            u.unit_id: pmax_available(u.nominal_pmax, targets[project].head_ft,
                                      rated, alpha)
            for u in store.join_units_of(project)}
        unit_pmax[project] = pmaxes
        capacity[project] = math.fsum(pmaxes.values())

    targets = recalibrate_cascade(targets, links, capacity)

    for project in plants:
        model = models[project]
        target = targets[project]
        predictions = predict_categories(model, target.target_mw, target.head_ft,
                                         target.storage_af)
        allocation = allocate_units(predictions, model.spec, unit_pmax[project])
        curves = {}
        for unit_id in allocation.unit_mw:
            curve = load_curve(store, unit_id, threshold)
            if curve is not None:
                curves[unit_id] = curve
        corrected, log = validate_and_correct(allocation, predictions, model.spec,
                                              unit_pmax[project], curves, threshold)

        window = windows[project]
        rows = []
        for unit in store.join_units_of(project):
            ref_samples = store.query_unit_window(unit.unit_id, window[0], window[1])
            ref = float(np.mean([s.mw for s in ref_samples])) if ref_samples else 0.0
            rows.append(DispatchRow(
                project, unit.unit_id, ref, unit.nominal_pmax, target.head_ft,
                corrected.get(unit.unit_id, 0.0), unit_pmax[project][unit.unit_id]))
        result.plants[project] = PlantDispatch(project, target, rows, log,
                                               allocation.unserved)
    return result


def write_manifest(result: DispatchResult, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(result.manifest(), fh, indent=1, sort_keys=True)


def rows_from_manifest(path: str | Path) -> list[DispatchRow]:
    """Re-materialize export rows from a saved run manifest."""
    with open(path) as fh:
        manifest = json.load(fh)
    rows = []
    for plant in manifest.get("plants", {}).values():
        for rd in plant.get("rows", []):
            rows.append(DispatchRow(**rd))
    return sorted(rows, key=lambda r: (r.project, r.unit_id))
