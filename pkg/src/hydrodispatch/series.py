"""Hourly time-series value type used by the analytics modules."""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def to_utc(ts: datetime) -> datetime:
    """Attach UTC to naive timestamps, convert aware ones."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def epoch_hour(ts: datetime) -> int:
    """Whole hours since the Unix epoch; rejects sub-hour timestamps."""
    ts = to_utc(ts)
    if ts.minute or ts.second or ts.microsecond:
        raise ValidationError(f"timestamp {ts.isoformat()} is not hour-aligned")
    return int((ts - _EPOCH).total_seconds()) // 3600


def from_epoch_hour(hour: int) -> datetime:
    return datetime.fromtimestamp(hour * 3600, tz=timezone.utc)


@dataclass(frozen=True)
class TimeSeries:
    """Immutable (timestamp, value) series keyed on whole hours.

    Gaps are simply absent hours; values may contain NaN for present-but-null
    observations, which every consumer drops.
    """

    hours: np.ndarray  # int64 epoch hours, strictly ascending
    values: np.ndarray  # float64, same length

    def __post_init__(self):
        hours = np.asarray(self.hours, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if hours.shape != values.shape or hours.ndim != 1:
            raise ValidationError("hours and values must be 1-d and equal length")
        if len(hours) > 1 and not np.all(np.diff(hours) > 0):
            raise ValidationError("timestamps must be strictly ascending")
        object.__setattr__(self, "hours", hours)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[datetime, float]]) -> "TimeSeries":
        items = sorted((epoch_hour(ts), float(v)) for ts, v in pairs)
        if not items:
            return cls(np.empty(0, dtype=np.int64), np.empty(0))
        h, v = zip(*items)
        return cls(np.array(h, dtype=np.int64), np.array(v))

    def __len__(self) -> int:
        return len(self.hours)

    def timestamps(self) -> list[datetime]:
        return [from_epoch_hour(int(h)) for h in self.hours]

    def dropna(self) -> "TimeSeries":
        keep = ~np.isnan(self.values)
        return TimeSeries(self.hours[keep], self.values[keep])


def series_from_samples(samples: Sequence, field: str) -> TimeSeries:
    """Extract one numeric field from datastore samples; null fields dropped."""
    pairs = []
    for s in samples:
        v = getattr(s, field)
        if v is not None:
            pairs.append((s.timestamp, float(v)))
    return TimeSeries.from_pairs(pairs)
