"""HTTP JSON API over the pipeline: plant browsing, hydrology time series,
and asynchronous train/dispatch jobs.

Jobs run on a small worker pool; status transitions are monotone
(queued -> running -> done | failed) and results are immutable once complete.
Every non-success response body is one ApiError object:
``{"code": ..., "message": ..., "details": ...}``.
"""
from __future__ import annotations

import io
import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import dispatch as dispatch_mod
from .datastore import Store
from .efficiency import DEFAULT_THRESHOLD
from .errors import HydroDispatchError, NotFoundError, ValidationError
from .hydrology import HydroScenario
from .mlp import TrainConfig
from .series import from_epoch_hour, to_utc
from .unitdispatch import load_model, save_model, train_plant_model

TIMESERIES_FIELDS = ("flow", "head", "storage", "spill", "total_mw")


def _api_error(status: int, code: str, message: str,
               details: dict | None = None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message,
                                 "details": details or {}})


class DispatchRequest(BaseModel):
    plants: list[str]
    scenario: str
    threshold: float = DEFAULT_THRESHOLD
    seed: int | None = None


class TrainRequest(BaseModel):
    plant: str
    config: dict[str, Any] = {}


@dataclass
class Job:
    id: str
    kind: str  # train | dispatch
    plant_key: str
    status: str = "queued"  # queued -> running -> done | failed
    result: Any = None
    error: dict | None = None
    created: datetime = field(default_factory=lambda: to_utc(datetime.utcnow()))


class JobRegistry:
    """In-memory job table with a bounded worker pool."""

    def __init__(self, workers: int = 2):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._counter = itertools.count(1)
        self._pool = ThreadPoolExecutor(max_workers=workers)

    def submit(self, kind: str, plant_key: str, fn) -> Job:
        with self._lock:
            if kind == "train":
                for job in self._jobs.values():
                    if (job.kind == "train" and job.plant_key == plant_key
                            and job.status in ("queued", "running")):
                        raise ValidationError(
                            f"training already running for {plant_key!r}",
                            details={"job_id": job.id})
            job = Job(f"{kind}-{next(self._counter)}", kind, plant_key)
            self._jobs[job.id] = job

        def run():
            with self._lock:
                job.status = "running"
            try:
                result = fn()
            except Exception as exc:  # job errors surface in the status payload
                with self._lock:
                    job.error = {
                        "code": getattr(exc, "code", "internal"),
                        "message": str(exc),
                    }
                    job.status = "failed"
                return
            with self._lock:
                job.result = result
                job.status = "done"

        self._pool.submit(run)
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"unknown job {job_id!r}")
        return job


def create_app(store_path: str | Path, models_dir: str | Path = "models",
               workers: int = 2) -> FastAPI:
    store = Store(store_path)
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    jobs = JobRegistry(workers)
    app = FastAPI(title="hydrodispatch", version="0.1.0")

    @app.exception_handler(HydroDispatchError)
    async def _domain_error(request: Request, exc: HydroDispatchError):
        status = {"not_found": 404, "validation": 422,
                  "insufficient_data": 422}.get(exc.code, 400)
        return _api_error(status, exc.code, str(exc), exc.details)

    def _model_path(plant: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_ " else "_" for c in plant)
        return models_dir / f"{safe}.json"

    # -- plants ------------------------------------------------------------

    @app.get("/api/plants")
    def list_plants():
        out = []
        for plant in store.plants():
            out.append({
                "project_name": plant.project_name,
                "latitude": plant.latitude,
                "longitude": plant.longitude,
                "area_number": plant.area_number,
                "rated_head_ft": plant.rated_head,
                "unit_count": len(store.join_units_of(plant.project_name)),
                "trained": _model_path(plant.project_name).exists(),
            })
        return out

    @app.get("/api/plants/{name}/timeseries")
    def plant_timeseries(name: str, start: str, end: str, fields: str = "flow"):
        requested = [f.strip() for f in fields.split(",") if f.strip()]
        bad = [f for f in requested if f not in TIMESERIES_FIELDS]
        if bad:
            return _api_error(400, "validation",
                              f"unknown fields: {', '.join(bad)}",
                              {"allowed": list(TIMESERIES_FIELDS)})
        try:
            t0 = to_utc(datetime.fromisoformat(start.replace("Z", "+00:00")))
            t1 = to_utc(datetime.fromisoformat(end.replace("Z", "+00:00")))
        except ValueError:
            return _api_error(400, "validation", "unparseable start/end")
        if t0 >= t1:
            return _api_error(400, "validation", "start must be before end")
        try:
            samples = store.query_plant_window(name, t0, t1)
        except NotFoundError as exc:
            return _api_error(404, "not_found", str(exc))

        by_hour = {s.timestamp: s for s in samples}
        from .series import epoch_hour
        h0, h1 = epoch_hour(t0), epoch_hour(t1)
        timeline = [from_epoch_hour(h) for h in range(h0, h1)]
        payload: dict[str, Any] = {
            "project_name": name,
            "timestamps": [t.isoformat() for t in timeline],
        }
        for fname in requested:
            payload[fname] = [getattr(by_hour[t], fname) if t in by_hour else None
                              for t in timeline]
        return payload

    # -- dispatch jobs -----------------------------------------------------

    @app.post("/api/dispatch", status_code=202)
    def submit_dispatch(req: DispatchRequest):
        if not req.plants:
            return _api_error(422, "validation", "no plants requested")
        known = {p.project_name for p in store.plants()}
        unknown = [p for p in req.plants if p not in known]
        if unknown:
            return _api_error(422, "validation",
                              f"unknown plants: {', '.join(unknown)}")
        try:
            scenario = HydroScenario.parse(req.scenario)
        except ValidationError as exc:
            return _api_error(422, "validation", str(exc))
        untrained = [p for p in req.plants if not _model_path(p).exists()]
        if untrained:
            return _api_error(409, "untrained",
                              f"no trained model for: {', '.join(untrained)}",
                              {"untrained": untrained})
        models = {p: load_model(_model_path(p)) for p in req.plants}

        def run():
            result = dispatch_mod.run_dispatch(store, models, req.plants,
                                               scenario, threshold=req.threshold,
                                               seed=req.seed)
            buf = io.StringIO()
            import csv as _csv
            w = _csv.writer(buf)
            w.writerow(dispatch_mod.EXPORT_COLUMNS)
            for r in result.all_rows():
                w.writerow([r.project, r.unit_id, f"{r.pgen_ref:.2f}",
                            f"{r.pmax_nominal:.2f}", f"{r.head_ft:.2f}",
                            f"{r.pgen_calculated:.2f}", f"{r.pmax_available:.2f}"])
            return {"manifest": result.manifest(), "export_csv": buf.getvalue()}

        job = jobs.submit("dispatch", ",".join(sorted(req.plants)), run)
        return {"run_id": job.id, "status": job.status}

    @app.get("/api/dispatch/{run_id}")
    def dispatch_status(run_id: str):
        job = jobs.get(run_id)
        if job.kind != "dispatch":
            raise NotFoundError(f"unknown dispatch run {run_id!r}")
        payload: dict[str, Any] = {"run_id": job.id, "status": job.status}
        if job.status == "failed":
            payload["error"] = job.error
        elif job.status == "done":
            manifest = job.result["manifest"]
            payload["manifest"] = manifest
            payload["rows"] = [row for plant in manifest["plants"].values()
                               for row in plant["rows"]]
            payload["correction_logs"] = {
                name: plant["correction"]
                for name, plant in manifest["plants"].items()}
        return payload

    @app.get("/api/dispatch/{run_id}/export.csv")
    def dispatch_export(run_id: str):
        job = jobs.get(run_id)
        if job.kind != "dispatch" or job.status != "done":
            raise NotFoundError(f"run {run_id!r} has no completed export")
        return PlainTextResponse(job.result["export_csv"], media_type="text/csv")

    # -- training jobs -----------------------------------------------------

    @app.post("/api/train", status_code=202)
    def submit_train(req: TrainRequest):
        known = {p.project_name for p in store.plants()}
        if req.plant not in known:
            return _api_error(422, "validation", f"unknown plant {req.plant!r}")
        try:
            config = TrainConfig.from_dict({**TrainConfig().to_dict(),
                                            **req.config})
        except TypeError as exc:
            return _api_error(422, "validation", f"bad config: {exc}")

        def run():
            model = train_plant_model(store, req.plant, config)
            save_model(model, _model_path(req.plant))
            report = {}
            for label, cm in sorted(model.categories.items()):
                report[label] = {
                    "size": cm.size,
                    "constant_exist": cm.constant_exist,
                    "accuracy": cm.accuracy,
                    "ci": cm.ci.to_dict() if cm.ci else None,
                }
            return {"plant": req.plant, "categories": report}

        try:
            job = jobs.submit("train", req.plant, run)
        except ValidationError as exc:
            return _api_error(409, "conflict", str(exc), exc.details)
        return {"job_id": job.id, "status": job.status}

    @app.get("/api/train/{job_id}")
    def train_status(job_id: str):
        job = jobs.get(job_id)
        if job.kind != "train":
            raise NotFoundError(f"unknown training job {job_id!r}")
        payload: dict[str, Any] = {"job_id": job.id, "status": job.status,
                                   "plant": job.plant_key}
        if job.status == "failed":
            payload["error"] = job.error
        elif job.status == "done":
            payload["report"] = job.result
        return payload

    return app
