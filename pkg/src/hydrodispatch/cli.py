"""Command-line entry points mirroring the HTTP API for scripted use.

Every subcommand is a thin wrapper over the library; randomized paths take
``--seed``. Failures print one machine-parsable line ``error: <code>: <msg>``
and exit 1; bad flags exit 2 with usage.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import dispatch as dispatch_mod
from . import efficiency as efficiency_mod
from . import hydrology, interdependency, unitdispatch
from .datastore import (PLANT_CSV_HEADER, STATIC_PLANT_CSV_HEADER,
                        STATIC_UNIT_CSV_HEADER, UNIT_CSV_HEADER, Store)
from .errors import HydroDispatchError, NotFoundError, ValidationError
from .mlp import TrainConfig
from .series import series_from_samples


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydrodispatch",
        description="Hydropower dispatch modeling: ingest hydrology, fit"
                    " efficiency curves, estimate cascade lags, train unit"
                    " dispatch models, and export planning cases.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load CSV files into the store")
    p.add_argument("--db", required=True, help="store path")
    p.add_argument("--static-plant-csv", help=f"header: {STATIC_PLANT_CSV_HEADER}")
    p.add_argument("--static-unit-csv", help=f"header: {STATIC_UNIT_CSV_HEADER}")
    p.add_argument("--plant-csv", help=f"header: {PLANT_CSV_HEADER}")
    p.add_argument("--unit-csv", help=f"header: {UNIT_CSV_HEADER}")

    p = sub.add_parser("synth", help="generate a deterministic synthetic cascade")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hours", type=int, default=2000)
    p.add_argument("--lag", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--db", help="ingest directly into this store")
    p.add_argument("--out-dir", help="write ingestable CSV files here")

    p = sub.add_parser("efficiency", help="fit and store a unit efficiency curve")
    p.add_argument("--db", required=True)
    p.add_argument("--unit", required=True, help="unit id")
    p.add_argument("--threshold", type=float, default=efficiency_mod.DEFAULT_THRESHOLD)
    p.add_argument("--out", help="curve CSV path (default: stdout)")
    p.add_argument("--plot", help="figure path (svg/png)")

    p = sub.add_parser("lag", help="seasonal streamflow lag scan between two plants")
    p.add_argument("--db", required=True)
    p.add_argument("--up", required=True, help="upstream project")
    p.add_argument("--down", required=True, help="downstream project")
    p.add_argument("--season", choices=[s.value for s in hydrology.Season],
                   help="restrict to one season (default: scan each in turn)")
    p.add_argument("--max-lag", type=int, default=interdependency.DEFAULT_MAX_LAG)
    p.add_argument("--json", dest="json_out", help="write a JSON report here")
    p.add_argument("--plot", help="figure path for the correlation profile")

    p = sub.add_parser("train", help="train per-category dispatch models for a plant")
    p.add_argument("--db", required=True)
    p.add_argument("--plant", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("dispatch", help="run the scenario-to-case pipeline")
    p.add_argument("--db", required=True)
    p.add_argument("--plant", action="append", required=True,
                   help="plant to dispatch (repeatable)")
    p.add_argument("--scenario", required=True,
                   help="dry|avg|wet:winter|spring|summer or hist:START..END")
    p.add_argument("--model", action="append",
                   help="trained model JSON (repeatable; default: look up"
                        " <models-dir>/<plant>.json)")
    p.add_argument("--models-dir", default="models",
                   help="directory searched when --model is not given")
    p.add_argument("--threshold", type=float, default=efficiency_mod.DEFAULT_THRESHOLD)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, default=dispatch_mod.DEFAULT_ALPHA)
    p.add_argument("--out", required=True, help="case CSV path")
    p.add_argument("--manifest", help="run manifest JSON path")
    p.add_argument("--plot", help="dispatch summary figure path")

    p = sub.add_parser("export", help="re-export a case CSV from a run manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--db", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--models-dir", default="models")

    return parser


def _cmd_ingest(args) -> int:
    store = Store(args.db)
    total = 0
    for flag, fn in (("static_plant_csv", store.ingest_static_plant_csv),
                     ("static_unit_csv", store.ingest_static_unit_csv),
                     ("plant_csv", store.ingest_plant_csv),
                     ("unit_csv", store.ingest_unit_csv)):
        path = getattr(args, flag)
        if path:
            count = fn(path)
            total += count
            print(f"{flag.replace('_csv', '')}: {count} rows")
    if total == 0:
        raise ValidationError("nothing to ingest; pass at least one CSV flag")
    return 0


def _cmd_synth(args) -> int:
    if not args.db and not args.out_dir:
        raise ValidationError("pass --db and/or --out-dir")
    cascade = hydrology.generate_synthetic_cascade(args.seed, args.hours,
                                                   args.lag, args.noise)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_cascade_csvs(cascade, out)
        print(f"wrote CSVs to {out}")
    if args.db:
        cascade.ingest(Store(args.db))
        print(f"ingested cascade ({len(cascade.upstream)} hours,"
              f" {len(cascade.unit_samples)} unit rows) into {args.db}")
    return 0


def _write_cascade_csvs(cascade, out: Path) -> None:
    with open(out / "static_plants.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATIC_PLANT_CSV_HEADER.split(","))
        for p in cascade.static_plants:
            w.writerow([p.project_name, p.latitude, p.longitude, p.area_number,
                        p.rated_head])
    with open(out / "static_units.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATIC_UNIT_CSV_HEADER.split(","))
        for u in cascade.static_units:
            w.writerow([u.project_name, u.bus_name, u.bus_number, u.id,
                        u.nominal_pmax, u.scada_bus_number or "",
                        u.scada_bus_id or ""])
    with open(out / "plant_data.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLANT_CSV_HEADER.split(","))
        for s in cascade.upstream + cascade.downstream:
            w.writerow([s.project_name, s.timestamp.isoformat(), s.flow, s.head,
                        s.storage, s.spill, s.total_mw])
    with open(out / "unit_data.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(UNIT_CSV_HEADER.split(","))
        for s in cascade.unit_samples:
            w.writerow([s.unit_id, s.timestamp.isoformat(), s.mw])


def _cmd_efficiency(args) -> int:
    store = Store(args.db)
    unit = store.get_unit(args.unit)  # not-found check first
    samples = store.query_units_of_project(unit.project_name)
    plant = store.query_plant_all(unit.project_name)
    by_hour = {s.timestamp: s for s in plant}
    observations = []
    for us in samples:
        if us.unit_id != args.unit or not us.active:
            continue
        ps = by_hour.get(us.timestamp)
        if ps is None or ps.flow is None or ps.head is None or ps.total_mw is None:
            continue
        if ps.total_mw <= 0:
            continue
        # plant flow prorated to the unit by its share of plant MW
        observations.append((ps.flow * us.mw / ps.total_mw, ps.head, us.mw))
    curve = efficiency_mod.build_curve(args.unit, observations, args.threshold)
    efficiency_mod.save_curve(store, curve)
    if args.out:
        efficiency_mod.write_curve_csv(curve, args.out)
        print(f"curve CSV: {args.out}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(efficiency_mod.CURVE_CSV_HEADER)
        for p in curve.points:
            writer.writerow([p.unit_id, p.flow, p.head, p.power, p.efficiency,
                             str(p.estimated).lower()])
    if curve.band:
        print(f"efficient band (>= {args.threshold:.2f}):"
              f" {curve.band[0]:.1f}..{curve.band[1]:.1f} cfs")
    else:
        print(f"no flow reaches efficiency {args.threshold:.2f}")
    if args.plot:
        from .plots import save_efficiency_curve
        save_efficiency_curve(curve, args.plot)
        print(f"figure: {args.plot}")
    return 0


def _cmd_lag(args) -> int:
    store = Store(args.db)
    up = series_from_samples(store.query_plant_all(args.up), "flow")
    down = series_from_samples(store.query_plant_all(args.down), "flow")
    if not len(up):
        raise NotFoundError(f"no flow data for {args.up!r}")
    if not len(down):
        raise NotFoundError(f"no flow data for {args.down!r}")
    seasons = ([hydrology.Season(args.season)] if args.season
               else list(hydrology.Season))
    profiles = []
    for season in seasons:
        try:
            profile = interdependency.lag_scan(up, down, args.max_lag, season,
                                               args.up, args.down)
        except HydroDispatchError as exc:
            print(f"{season.value}: skipped ({exc})")
            continue
        profiles.append(profile)
        print(f"season {season.value}: best lag {profile.best_lag} h")
        print("lag_hours,correlation")
        for lag, corr in profile.table():
            print(f"{lag},{corr:.6f}")
    if not profiles:
        raise NotFoundError("no season had enough overlapping data")
    if args.json_out:
        report = [{
            "upstream": p.upstream, "downstream": p.downstream,
            "season": p.season.value, "best_lag": p.best_lag,
            "correlations": {str(k): v for k, v in p.table()},
        } for p in profiles]
        with open(args.json_out, "w") as fh:
            json.dump(report, fh, indent=1)
        print(f"report: {args.json_out}")
    if args.plot:
        from .plots import save_lag_profile
        save_lag_profile(profiles[0], args.plot)
        print(f"figure: {args.plot}")
    return 0


def _cmd_train(args) -> int:
    store = Store(args.db)
    config = TrainConfig(seed=args.seed, epochs=args.epochs,
                         learning_rate=args.learning_rate)
    model = unitdispatch.train_plant_model(store, args.plant, config)
    unitdispatch.save_model(model, args.out)
    for label, cm in sorted(model.categories.items()):
        bits = [f"{label}: size {cm.size}"]
        if cm.constant_exist is not None:
            bits.append(f"constant exist={cm.constant_exist}")
        if cm.accuracy is not None:
            bits.append(f"accuracy {cm.accuracy:.4f}")
        if cm.ci is not None:
            rw = cm.ci.relative_widths()
            bits.append(f"CI widths {rw[0]:.3%}/{rw[1]:.3%} of mean")
        print("  ".join(bits))
    print(f"model: {args.out}")
    return 0


def _cmd_dispatch(args) -> int:
    store = Store(args.db)
    scenario = hydrology.HydroScenario.parse(args.scenario)
    models = {}
    for path in args.model or []:
        model = unitdispatch.load_model(path)
        models[model.plant] = model
    for plant in args.plant:
        if plant not in models:
            fallback = Path(args.models_dir) / f"{plant}.json"
            if not fallback.exists():
                raise NotFoundError(
                    f"no model for {plant!r}: pass --model or train into"
                    f" {fallback}")
            models[plant] = unitdispatch.load_model(fallback)
    result = dispatch_mod.run_dispatch(store, models, args.plant, scenario,
                                       threshold=args.threshold, seed=args.seed,
                                       alpha=args.alpha)
    rows = result.all_rows()
    dispatch_mod.export_case(rows, args.out)
    print(f"case: {args.out} ({len(rows)} rows)")
    for name, plant in sorted(result.plants.items()):
        print(f"{name}: target {plant.target.target_mw:.2f} MW"
              f" ({plant.target.source}), corrections"
              f" {len(plant.correction.actions)}, residual"
              f" {plant.correction.residual_mw:+.3f} MW")
    if args.manifest:
        dispatch_mod.write_manifest(result, args.manifest)
        print(f"manifest: {args.manifest}")
    if args.plot:
        from .plots import save_dispatch_summary
        save_dispatch_summary(rows, args.plot)
        print(f"figure: {args.plot}")
    return 0


def _cmd_export(args) -> int:
    rows = dispatch_mod.rows_from_manifest(args.manifest)
    dispatch_mod.export_case(rows, args.out)
    print(f"case: {args.out} ({len(rows)} rows)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(args.db, args.models_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "efficiency": _cmd_efficiency,
    "lag": _cmd_lag,
    "train": _cmd_train,
    "dispatch": _cmd_dispatch,
    "export": _cmd_export,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except HydroDispatchError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
