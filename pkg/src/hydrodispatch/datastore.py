"""Embedded relational store for hydrology and electrical unit data.

Six tables in a single SQLite file: Plant_Data, Unit_Data, Static_Plant_Data,
Static_Unit_Data, Efficiency_Raw_Data and Efficiency_Estimated_Data. Plant
tables link on Project_Name, efficiency tables link to units on Unit_ID.

Ingestion is CSV-based with hard validation: malformed rows fail with their
line number, duplicate (key, timestamp) rows are replaced last-wins, and unit
rows must reference registered static units. Writes are serialized through a
process-level lock; reads open short-lived connections and may run
concurrently.
"""
from __future__ import annotations

import csv
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import NotFoundError, ValidationError
from .series import to_utc

# A unit counts as active when it clears this floor; suppresses telemetry noise
# around zero MW.
ACTIVITY_THRESHOLD_MW = 0.5

PLANT_CSV_HEADER = "project_name,timestamp,flow_cfs,head_ft,storage_af,spill_cfs,total_mw"
UNIT_CSV_HEADER = "unit_id,timestamp,mw"
STATIC_PLANT_CSV_HEADER = "project_name,latitude,longitude,area_number,rated_head_ft"
STATIC_UNIT_CSV_HEADER = (
    "project_name,bus_name,bus_number,id,nominal_pmax_mw,scada_bus_number,scada_bus_id"
)


def parse_timestamp(raw: str | datetime) -> datetime:
    """Parse an hour-aligned timestamp; naive values are treated as UTC."""
    if isinstance(raw, datetime):
        ts = to_utc(raw)
    else:
        text = raw.strip().replace(" ", "T")
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        try:
            ts = to_utc(datetime.fromisoformat(text))
        except ValueError as exc:
            raise ValidationError(f"unparseable timestamp {raw!r}") from exc
    if ts.minute or ts.second or ts.microsecond:
        raise ValidationError(f"timestamp {raw!r} is not aligned to a whole hour")
    return ts


def derive_unit_id(bus_number: int, id: str) -> str:
    """Unit identifier: the unit's bus number joined to its ID with a dash."""
    if not id:
        raise ValidationError("unit id must be nonempty")
    return f"{bus_number}-{id}"


def _require_nonneg(name: str, value: float | None) -> float | None:
    if value is not None and value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value}")
    return value


@dataclass(frozen=True)
class PlantSample:
    """One hourly hydrology record for a plant."""

    project_name: str
    timestamp: datetime
    flow: float | None  # cfs
    head: float | None  # ft
    storage: float | None  # acre-feet
    spill: float | None  # cfs
    total_mw: float | None

    def __post_init__(self):
        object.__setattr__(self, "timestamp", parse_timestamp(self.timestamp))
        _require_nonneg("flow", self.flow)
        _require_nonneg("spill", self.spill)
        _require_nonneg("storage", self.storage)
        _require_nonneg("total_mw", self.total_mw)
        if self.head is not None and self.head <= 0:
            raise ValidationError(f"head must be > 0, got {self.head}")


@dataclass(frozen=True)
class UnitSample:
    """One hourly MW observation for a generating unit."""

    unit_id: str
    timestamp: datetime
    mw: float
    active: bool = None  # type: ignore[assignment]  # derived when omitted

    def __post_init__(self):
        object.__setattr__(self, "timestamp", parse_timestamp(self.timestamp))
        if self.active is None:
            object.__setattr__(self, "active", self.mw > ACTIVITY_THRESHOLD_MW)


@dataclass(frozen=True)
class StaticPlant:
    project_name: str
    latitude: float
    longitude: float
    area_number: int
    rated_head: float  # ft

    def __post_init__(self):
        if not -90 <= self.latitude <= 90:
            raise ValidationError(f"latitude out of range: {self.latitude}")
        if not -180 <= self.longitude <= 180:
            raise ValidationError(f"longitude out of range: {self.longitude}")
        if self.rated_head <= 0:
            raise ValidationError("rated_head must be > 0")


@dataclass(frozen=True)
class StaticUnit:
    project_name: str
    bus_name: str
    bus_number: int
    id: str
    unit_id: str = ""  # derived from bus_number and id when omitted
    nominal_pmax: float = 0.0
    scada_bus_number: str | None = None
    scada_bus_id: str | None = None

    def __post_init__(self):
        derived = derive_unit_id(self.bus_number, self.id)
        if not self.unit_id:
            object.__setattr__(self, "unit_id", derived)
        elif self.unit_id != derived:
            raise ValidationError(
                f"unit_id {self.unit_id!r} does not match bus_number-id {derived!r}"
            )
        if self.nominal_pmax <= 0:
            raise ValidationError("nominal_pmax must be > 0")


@dataclass(frozen=True)
class EfficiencyPoint:
    """One (flow, head, power, efficiency) point of a unit's efficiency curve."""

    unit_id: str
    flow: float
    head: float
    power: float
    efficiency: float
    estimated: bool  # False: computed from observations, True: extrapolated

    def __post_init__(self):
        for name in ("flow", "head", "power", "efficiency"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.efficiency <= 0:
            raise ValidationError("efficiency must be > 0")


_SCHEMA = """
CREATE TABLE IF NOT EXISTS Plant_Data (
    Project_Name TEXT NOT NULL,
    Timestamp    TEXT NOT NULL,
    Flow         REAL,
    Head         REAL,
    Storage      REAL,
    Spill        REAL,
    Total_MW     REAL,
    PRIMARY KEY (Project_Name, Timestamp)
);
CREATE TABLE IF NOT EXISTS Unit_Data (
    Unit_ID   TEXT NOT NULL,
    Timestamp TEXT NOT NULL,
    MW        REAL NOT NULL,
    Active    INTEGER NOT NULL,
    PRIMARY KEY (Unit_ID, Timestamp)
);
CREATE TABLE IF NOT EXISTS Static_Plant_Data (
    Project_Name TEXT PRIMARY KEY,
    Latitude     REAL NOT NULL,
    Longitude    REAL NOT NULL,
    Area_Number  INTEGER NOT NULL,
    Rated_Head   REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS Static_Unit_Data (
    Project_Name     TEXT NOT NULL,
    Bus_Name         TEXT NOT NULL,
    Bus_Number       INTEGER NOT NULL,
    ID               TEXT NOT NULL,
    Unit_ID          TEXT PRIMARY KEY,
    Nominal_Pmax     REAL NOT NULL,
    SCADA_Bus_Number TEXT,
    SCADA_Bus_ID     TEXT
);
CREATE TABLE IF NOT EXISTS Efficiency_Raw_Data (
    Unit_ID    TEXT NOT NULL,
    Flow       REAL NOT NULL,
    Head       REAL NOT NULL,
    Power      REAL NOT NULL,
    Efficiency REAL NOT NULL,
    PRIMARY KEY (Unit_ID, Flow)
);
CREATE TABLE IF NOT EXISTS Efficiency_Estimated_Data (
    Unit_ID    TEXT NOT NULL,
    Flow       REAL NOT NULL,
    Head       REAL NOT NULL,
    Power      REAL NOT NULL,
    Efficiency REAL NOT NULL,
    PRIMARY KEY (Unit_ID, Flow)
);
CREATE INDEX IF NOT EXISTS idx_unit_data_ts ON Unit_Data (Timestamp);
"""


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _opt_float(raw: str, line: int, column: str, minimum: float | None = None,
               strict_min: bool = False) -> float | None:
    raw = raw.strip()
    if raw == "" or raw.lower() in ("nan", "null", "none", "-"):
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ValidationError(f"line {line}: malformed {column} value {raw!r}")
    if minimum is not None:
        if strict_min and value <= minimum:
            raise ValidationError(f"line {line}: {column} must be > {minimum}, got {value}")
        if not strict_min and value < minimum:
            raise ValidationError(f"line {line}: {column} must be >= {minimum}, got {value}")
    return value


class Store:
    """Single-file store with serialized writes and concurrent reads."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._write_lock = threading.Lock()
        with self._connect() as conn:
            conn.executescript(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30.0)
        conn.row_factory = sqlite3.Row
        return conn

    @contextmanager
    def _write(self) -> Iterator[sqlite3.Connection]:
        with self._write_lock:
            conn = self._connect()
            try:
                yield conn
                conn.commit()
            except Exception:
                conn.rollback()
                raise
            finally:
                conn.close()

    @contextmanager
    def _read(self) -> Iterator[sqlite3.Connection]:
        conn = self._connect()
        try:
            yield conn
        finally:
            conn.close()

    # -- ingestion ---------------------------------------------------------

    def _read_csv(self, path: str | Path, expected_header: str):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValidationError(f"{path}: empty file, expected header {expected_header!r}")
            if ",".join(h.strip() for h in header) != expected_header:
                raise ValidationError(
                    f"{path}: bad header {','.join(header)!r}, expected {expected_header!r}"
                )
            for line, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(expected_header.split(",")):
                    raise ValidationError(f"line {line}: expected "
                                          f"{len(expected_header.split(','))} columns, got {len(row)}")
                yield line, row

    def ingest_plant_csv(self, path: str | Path) -> int:
        """Upsert hourly plant rows from a CSV; returns rows processed."""
        samples = []
        for line, row in self._read_csv(path, PLANT_CSV_HEADER):
            try:
                samples.append(PlantSample(
                    project_name=row[0].strip(),
                    timestamp=parse_timestamp(row[1]),
                    flow=_opt_float(row[2], line, "flow_cfs", 0.0),
                    head=_opt_float(row[3], line, "head_ft", 0.0, strict_min=True),
                    storage=_opt_float(row[4], line, "storage_af", 0.0),
                    spill=_opt_float(row[5], line, "spill_cfs", 0.0),
                    total_mw=_opt_float(row[6], line, "total_mw", 0.0),
                ))
            except ValidationError as exc:
                if str(exc).startswith("line "):
                    raise
                raise ValidationError(f"line {line}: {exc}") from exc
        return self.insert_plant_samples(samples)

    def insert_plant_samples(self, samples: Iterable[PlantSample]) -> int:
        rows = [(s.project_name, _iso(s.timestamp), s.flow, s.head, s.storage,
                 s.spill, s.total_mw) for s in samples]
        with self._write() as conn:
            conn.executemany(
                "INSERT OR REPLACE INTO Plant_Data VALUES (?,?,?,?,?,?,?)", rows)
        return len(rows)

    def ingest_unit_csv(self, path: str | Path) -> int:
        """Upsert hourly unit rows; every unit_id must be registered."""
        samples = []
        for line, row in self._read_csv(path, UNIT_CSV_HEADER):
            mw = _opt_float(row[2], line, "mw", 0.0)
            if mw is None:
                raise ValidationError(f"line {line}: mw is required")
            samples.append(UnitSample(unit_id=row[0].strip(),
                                      timestamp=parse_timestamp(row[1]), mw=mw))
        return self.insert_unit_samples(samples)

    def insert_unit_samples(self, samples: Sequence[UnitSample]) -> int:
        known = {u.unit_id for u in self.all_units()}
        orphans = sorted({s.unit_id for s in samples} - known)
        if orphans:
            raise ValidationError(
                f"unknown unit ids (no Static_Unit_Data row): {', '.join(orphans)}",
                details={"orphans": orphans})
        rows = [(s.unit_id, _iso(s.timestamp), s.mw, int(s.active)) for s in samples]
        with self._write() as conn:
            conn.executemany("INSERT OR REPLACE INTO Unit_Data VALUES (?,?,?,?)", rows)
        return len(rows)

    def ingest_static_plant_csv(self, path: str | Path) -> int:
        plants = []
        for line, row in self._read_csv(path, STATIC_PLANT_CSV_HEADER):
            try:
                plants.append(StaticPlant(
                    project_name=row[0].strip(),
                    latitude=float(row[1]),
                    longitude=float(row[2]),
                    area_number=int(row[3]),
                    rated_head=float(row[4]),
                ))
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"line {line}: {exc}") from exc
        return self.insert_static_plants(plants)

    def insert_static_plants(self, plants: Iterable[StaticPlant]) -> int:
        rows = [(p.project_name, p.latitude, p.longitude, p.area_number, p.rated_head)
                for p in plants]
        with self._write() as conn:
            conn.executemany(
                "INSERT OR REPLACE INTO Static_Plant_Data VALUES (?,?,?,?,?)", rows)
        return len(rows)

    def ingest_static_unit_csv(self, path: str | Path) -> int:
        units = []
        for line, row in self._read_csv(path, STATIC_UNIT_CSV_HEADER):
            try:
                units.append(StaticUnit(
                    project_name=row[0].strip(),
                    bus_name=row[1].strip(),
                    bus_number=int(row[2]),
                    id=row[3].strip(),
                    nominal_pmax=float(row[4]),
                    scada_bus_number=row[5].strip() or None,
                    scada_bus_id=row[6].strip() or None,
                ))
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"line {line}: {exc}") from exc
        return self.insert_static_units(units)

    def insert_static_units(self, units: Sequence[StaticUnit]) -> int:
        known_plants = {p.project_name for p in self.plants()}
        missing = sorted({u.project_name for u in units} - known_plants)
        if missing:
            raise ValidationError(
                f"unknown projects (no Static_Plant_Data row): {', '.join(missing)}",
                details={"orphans": missing})
        rows = [(u.project_name, u.bus_name, u.bus_number, u.id, u.unit_id,
                 u.nominal_pmax, u.scada_bus_number, u.scada_bus_id) for u in units]
        with self._write() as conn:
            conn.executemany(
                "INSERT OR REPLACE INTO Static_Unit_Data VALUES (?,?,?,?,?,?,?,?)", rows)
        return len(rows)

    # -- queries -----------------------------------------------------------

    def _project_exists(self, conn: sqlite3.Connection, project: str) -> bool:
        for table in ("Plant_Data", "Static_Plant_Data"):
            row = conn.execute(
                f"SELECT 1 FROM {table} WHERE Project_Name = ? LIMIT 1", (project,)
            ).fetchone()
            if row:
                return True
        return False

    def query_plant_window(self, project: str, start: datetime, end: datetime
                           ) -> list[PlantSample]:
        """Samples with start <= t < end, ascending; gaps are not filled."""
        start, end = parse_timestamp(start), parse_timestamp(end)
        if start > end:
            raise ValidationError("start must be <= end")
        with self._read() as conn:
            if not self._project_exists(conn, project):
                raise NotFoundError(f"unknown project {project!r}")
            rows = conn.execute(
                "SELECT * FROM Plant_Data WHERE Project_Name = ? AND Timestamp >= ?"
                " AND Timestamp < ? ORDER BY Timestamp",
                (project, _iso(start), _iso(end))).fetchall()
        return [PlantSample(r["Project_Name"], parse_timestamp(r["Timestamp"]),
                            r["Flow"], r["Head"], r["Storage"], r["Spill"],
                            r["Total_MW"]) for r in rows]

    def query_plant_all(self, project: str) -> list[PlantSample]:
        with self._read() as conn:
            rows = conn.execute(
                "SELECT * FROM Plant_Data WHERE Project_Name = ? ORDER BY Timestamp",
                (project,)).fetchall()
        return [PlantSample(r["Project_Name"], parse_timestamp(r["Timestamp"]),
                            r["Flow"], r["Head"], r["Storage"], r["Spill"],
                            r["Total_MW"]) for r in rows]

    def query_unit_window(self, unit_id: str, start: datetime, end: datetime
                          ) -> list[UnitSample]:
        start, end = parse_timestamp(start), parse_timestamp(end)
        if start > end:
            raise ValidationError("start must be <= end")
        with self._read() as conn:
            rows = conn.execute(
                "SELECT * FROM Unit_Data WHERE Unit_ID = ? AND Timestamp >= ?"
                " AND Timestamp < ? ORDER BY Timestamp",
                (unit_id, _iso(start), _iso(end))).fetchall()
        return [UnitSample(r["Unit_ID"], parse_timestamp(r["Timestamp"]),
                           r["MW"], bool(r["Active"])) for r in rows]

    def query_units_of_project(self, project: str) -> list[UnitSample]:
        """All unit samples for every registered unit of a project."""
        with self._read() as conn:
            rows = conn.execute(
                "SELECT u.* FROM Unit_Data u JOIN Static_Unit_Data s"
                " ON u.Unit_ID = s.Unit_ID WHERE s.Project_Name = ?"
                " ORDER BY u.Timestamp, u.Unit_ID", (project,)).fetchall()
        return [UnitSample(r["Unit_ID"], parse_timestamp(r["Timestamp"]),
                           r["MW"], bool(r["Active"])) for r in rows]

    def join_units_of(self, project: str) -> list[StaticUnit]:
        """Static units of a project, stable order by unit_id."""
        with self._read() as conn:
            rows = conn.execute(
                "SELECT * FROM Static_Unit_Data WHERE Project_Name = ? ORDER BY Unit_ID",
                (project,)).fetchall()
        return [self._static_unit(r) for r in rows]

    @staticmethod
    def _static_unit(r: sqlite3.Row) -> StaticUnit:
        return StaticUnit(r["Project_Name"], r["Bus_Name"], r["Bus_Number"], r["ID"],
                          r["Unit_ID"], r["Nominal_Pmax"], r["SCADA_Bus_Number"],
                          r["SCADA_Bus_ID"])

    def all_units(self) -> list[StaticUnit]:
        with self._read() as conn:
            rows = conn.execute("SELECT * FROM Static_Unit_Data ORDER BY Unit_ID").fetchall()
        return [self._static_unit(r) for r in rows]

    def get_unit(self, unit_id: str) -> StaticUnit:
        with self._read() as conn:
            row = conn.execute("SELECT * FROM Static_Unit_Data WHERE Unit_ID = ?",
                               (unit_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"unknown unit {unit_id!r}")
        return self._static_unit(row)

    def plants(self) -> list[StaticPlant]:
        with self._read() as conn:
            rows = conn.execute(
                "SELECT * FROM Static_Plant_Data ORDER BY Project_Name").fetchall()
        return [StaticPlant(r["Project_Name"], r["Latitude"], r["Longitude"],
                            r["Area_Number"], r["Rated_Head"]) for r in rows]

    def get_plant(self, project: str) -> StaticPlant:
        with self._read() as conn:
            row = conn.execute("SELECT * FROM Static_Plant_Data WHERE Project_Name = ?",
                               (project,)).fetchone()
        if row is None:
            raise NotFoundError(f"unknown project {project!r}")
        return StaticPlant(row["Project_Name"], row["Latitude"], row["Longitude"],
                           row["Area_Number"], row["Rated_Head"])

    def data_range(self, project: str) -> tuple[datetime, datetime]:
        """(first, last) plant-data timestamps for the project."""
        with self._read() as conn:
            row = conn.execute(
                "SELECT MIN(Timestamp) lo, MAX(Timestamp) hi FROM Plant_Data"
                " WHERE Project_Name = ?", (project,)).fetchone()
        if row is None or row["lo"] is None:
            raise NotFoundError(f"no plant data for project {project!r}")
        return parse_timestamp(row["lo"]), parse_timestamp(row["hi"])

    # -- efficiency tables ---------------------------------------------------

    def replace_efficiency_points(self, unit_id: str,
                                  points: Sequence[EfficiencyPoint]) -> int:
        """Replace the stored curve for a unit in both tables."""
        with self._write() as conn:
            conn.execute("DELETE FROM Efficiency_Raw_Data WHERE Unit_ID = ?", (unit_id,))
            conn.execute("DELETE FROM Efficiency_Estimated_Data WHERE Unit_ID = ?",
                         (unit_id,))
            for p in points:
                table = "Efficiency_Estimated_Data" if p.estimated else "Efficiency_Raw_Data"
                conn.execute(f"INSERT OR REPLACE INTO {table} VALUES (?,?,?,?,?)",
                             (p.unit_id, p.flow, p.head, p.power, p.efficiency))
        return len(points)

    def efficiency_points(self, unit_id: str) -> list[EfficiencyPoint]:
        """Raw plus estimated points for a unit, ascending flow."""
        points = []
        with self._read() as conn:
            for table, estimated in (("Efficiency_Raw_Data", False),
                                     ("Efficiency_Estimated_Data", True)):
                for r in conn.execute(f"SELECT * FROM {table} WHERE Unit_ID = ?",
                                      (unit_id,)):
                    points.append(EfficiencyPoint(r["Unit_ID"], r["Flow"], r["Head"],
                                                  r["Power"], r["Efficiency"], estimated))
        points.sort(key=lambda p: p.flow)
        return points
