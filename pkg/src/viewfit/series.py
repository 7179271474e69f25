"""Data model, ingestion, validation and normalization of view-count series.

A series is a cumulative view-count trajectory: ordered observations
(t_i, y_i) with t in days since upload and y the running total of
views.  Two file formats are supported (see ``read_csv``/``read_json``);
both round-trip losslessly through the matching writers.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateZeroAgeError,
    DegenerateZeroViewsError,
    Diagnostic,
    NegativeIncrementError,
    ParseError,
    TooShortError,
)

# YouTube category vocabulary; anything else is mapped to "Other".
CATEGORIES = (
    "Animals", "Autos", "Comedy", "Education", "Entertainment", "Film",
    "Games", "Howto", "Music", "News", "Nonprofit", "People", "Shows",
    "Sports", "Tech", "Travel",
)
_CATEGORY_SET = frozenset(CATEGORIES)


class PopularityClass(str, enum.Enum):
    """Seven log-scale popularity buckets over total views.

    Boundaries are lower-inclusive: EUP [0,10), VUP [10,100),
    UP [100,1e3), NSP [1e3,1e4), P [1e4,1e5), VP [1e5,1e6), EP [1e6,inf).
    """

    EUP = "EUP"
    VUP = "VUP"
    UP = "UP"
    NSP = "NSP"
    P = "P"
    VP = "VP"
    EP = "EP"

    def __str__(self) -> str:
        return self.value


_POPULARITY_BOUNDS = (10, 100, 1000, 10**4, 10**5, 10**6)
_POPULARITY_ORDER = (
    PopularityClass.EUP, PopularityClass.VUP, PopularityClass.UP,
    PopularityClass.NSP, PopularityClass.P, PopularityClass.VP,
    PopularityClass.EP,
)


def popularity_class(total_views: int) -> PopularityClass:
    """Bucket a non-negative view total into its popularity class."""
    if total_views < 0:
        raise ValueError(f"total_views must be non-negative, got {total_views}")
    for bound, cls in zip(_POPULARITY_BOUNDS, _POPULARITY_ORDER):
        if total_views < bound:
            return cls
    return PopularityClass.EP


@dataclass
class SeriesRecord:
    """One video's metadata plus its cumulative view-count trajectory."""

    id: str
    observations: list  # [(t_days, y_cumulative), ...] with t strictly increasing
    title: Optional[str] = None
    category: Optional[str] = None
    age_days: int = 0
    total_views: int = 0

    def __post_init__(self):
        if self.age_days <= 0:
            # Derive age from the last observation when metadata is absent.
            self.age_days = max(1, math.ceil(self.observations[-1][0])) if self.observations else 1
        if self.total_views <= 0 and self.observations:
            self.total_views = int(round(self.observations[-1][1]))
        if self.category is not None and self.category not in _CATEGORY_SET:
            self.category = "Other"

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def t(self) -> np.ndarray:
        return np.array([obs[0] for obs in self.observations], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([obs[1] for obs in self.observations], dtype=float)

    def validation_error(self) -> Optional[tuple]:
        """Return (code, message) for the first violated invariant, else None."""
        if len(self.observations) < 2:
            return ("TOO_SHORT", f"need at least 2 observations, got {len(self.observations)}")
        t_prev, y_prev = None, None
        for i, (ti, yi) in enumerate(self.observations):
            if not (math.isfinite(ti) and math.isfinite(yi)):
                return ("NON_FINITE", f"non-finite observation at index {i}")
            if ti < 0:
                return ("NEGATIVE_TIME", f"t must be >= 0, got {ti} at index {i}")
            if yi < 0:
                return ("NEGATIVE_VIEWS", f"y must be >= 0, got {yi} at index {i}")
            if t_prev is not None and ti <= t_prev:
                return ("NON_INCREASING_T", f"t not strictly increasing at index {i}")
            if y_prev is not None and yi < y_prev:
                return ("NON_MONOTONE", f"cumulative count decreases at index {i}")
            t_prev, y_prev = ti, yi
        return None


@dataclass(frozen=True)
class NormalizedSeries:
    """Observations scaled so the last point is exactly (1, 1).

    ``scale`` keeps the original (t_n days, y_n views) so fitted curves
    and parameters can be mapped back to raw units.
    """

    u: np.ndarray  # t_i / t_n, strictly increasing, ends at 1
    v: np.ndarray  # y_i / y_n, non-decreasing, ends at 1
    scale: tuple  # (t_n, y_n)

    @property
    def n(self) -> int:
        return len(self.u)

    def denormalize(self) -> list:
        t_n, y_n = self.scale
        return [(float(ui * t_n), float(vi * y_n)) for ui, vi in zip(self.u, self.v)]


def cumulate(daily: Sequence[float]) -> list:
    """Prefix sums of per-day increments; rejects negative increments."""
    total = 0.0
    out = []
    for i, inc in enumerate(daily):
        if inc < 0:
            raise NegativeIncrementError(f"negative increment {inc} at index {i}")
        total += inc
        out.append(total)
    return out


def normalize(record: SeriesRecord) -> NormalizedSeries:
    """Scale a record to the unit square; last point becomes exactly (1, 1)."""
    t = record.t
    y = record.y
    t_n = float(t[-1])
    y_n = float(y[-1])
    if y_n <= 0:
        raise DegenerateZeroViewsError(f"series {record.id} has zero final views")
    if t_n <= 0:
        raise DegenerateZeroAgeError(f"series {record.id} has zero final time")
    u = t / t_n
    v = y / y_n
    u[-1] = 1.0
    v[-1] = 1.0
    return NormalizedSeries(u=u, v=v, scale=(t_n, y_n))


# ---------------------------------------------------------------------------
# File formats
#
# CSV: header `id,t,y`, one row per observation, rows grouped by id.
#      Optional sidecar metadata CSV: `id,title,category,age_days,total_views`.
# JSON: array of {id, title?, category?, age_days, observations: [[t,y],...]}.
# ---------------------------------------------------------------------------


def _float_cell(x: float) -> str:
    # repr round-trips doubles exactly; integral values stay compact.
    return repr(float(x))


def read_csv(path, metadata_path=None) -> tuple:
    """Read an observations CSV (plus optional metadata sidecar).

    Returns (records, diagnostics).  Records failing validation are
    rejected with a per-record Diagnostic instead of being dropped
    silently; malformed files raise ParseError.
    """
    path = Path(path)
    meta = {}
    if metadata_path is not None:
        meta = _read_metadata_csv(metadata_path)

    groups: dict = {}
    order: list = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file", locus=str(path)) from None
        if [h.strip().lower() for h in header[:3]] != ["id", "t", "y"]:
            raise ParseError(f"expected header id,t,y, got {header}", locus=f"{path}:1")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 3:
                raise ParseError(f"expected 3 columns, got {len(row)}", locus=f"{path}:{lineno}")
            rid = row[0]
            try:
                t = float(row[1])
                y = float(row[2])
            except ValueError as exc:
                raise ParseError(f"non-numeric observation: {exc}", locus=f"{path}:{lineno}") from None
            if rid not in groups:
                groups[rid] = []
                order.append(rid)
            groups[rid].append((t, y))

    records, diagnostics = [], []
    for rid in order:
        info = meta.get(rid, {})
        record = SeriesRecord(
            id=rid,
            observations=groups[rid],
            title=info.get("title"),
            category=info.get("category"),
            age_days=info.get("age_days", 0),
            total_views=info.get("total_views", 0),
        )
        _collect(record, records, diagnostics)
    return records, diagnostics


def _read_metadata_csv(path) -> dict:
    path = Path(path)
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            rid = row.get("id")
            if rid is None:
                raise ParseError("metadata CSV needs an id column", locus=f"{path}:{lineno}")
            entry = {}
            if row.get("title"):
                entry["title"] = row["title"]
            if row.get("category"):
                entry["category"] = row["category"]
            for key in ("age_days", "total_views"):
                if row.get(key):
                    try:
                        entry[key] = int(row[key])
                    except ValueError:
                        raise ParseError(
                            f"non-integer {key}: {row[key]}", locus=f"{path}:{lineno}"
                        ) from None
            meta[rid] = entry
    return meta


def read_json(path) -> tuple:
    """Read a JSON array of series objects; returns (records, diagnostics)."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", locus=f"{path}:{exc.lineno}") from None
    if not isinstance(data, list):
        raise ParseError("top-level JSON value must be an array", locus=str(path))

    records, diagnostics = [], []
    for idx, obj in enumerate(data):
        if not isinstance(obj, dict) or "id" not in obj or "observations" not in obj:
            raise ParseError("each entry needs id and observations", locus=f"{path}#{idx}")
        try:
            obs = [(float(t), float(y)) for t, y in obj["observations"]]
        except (TypeError, ValueError):
            raise ParseError("observations must be [t, y] pairs", locus=f"{path}#{idx}") from None
        record = SeriesRecord(
            id=str(obj["id"]),
            observations=obs,
            title=obj.get("title"),
            category=obj.get("category"),
            age_days=int(obj.get("age_days", 0)),
            total_views=int(obj.get("total_views", 0)),
        )
        _collect(record, records, diagnostics)
    return records, diagnostics


def _collect(record: SeriesRecord, records: list, diagnostics: list) -> None:
    err = record.validation_error()
    if err is None and record.observations:
        y_last = record.observations[-1][1]
        if record.total_views and abs(record.total_views - y_last) > 0.5:
            err = ("TOTAL_VIEWS_MISMATCH",
                   f"metadata total_views={record.total_views} but y_n={y_last}")
    if err is not None:
        diagnostics.append(Diagnostic(record.id, err[0], err[1]))
    else:
        records.append(record)


def ingest(path, metadata_path=None) -> tuple:
    """Dispatch on file extension (.csv / .json) and return (records, diagnostics)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return read_json(path)
    if suffix == ".csv":
        return read_csv(path, metadata_path=metadata_path)
    raise ParseError(f"unsupported input format {suffix!r}", locus=str(path))


def write_csv(records: Iterable[SeriesRecord], path, metadata_path=None) -> None:
    """Write observations CSV (and metadata sidecar when a path is given)."""
    records = list(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "t", "y"])
        for record in records:
            for t, y in record.observations:
                writer.writerow([record.id, _float_cell(t), _float_cell(y)])
    if metadata_path is not None:
        with open(metadata_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "title", "category", "age_days", "total_views"])
            for record in records:
                writer.writerow([
                    record.id,
                    record.title or "",
                    record.category or "",
                    record.age_days,
                    record.total_views,
                ])


def write_json(records: Iterable[SeriesRecord], path) -> None:
    data = []
    for record in records:
        obj = {"id": record.id}
        if record.title is not None:
            obj["title"] = record.title
        if record.category is not None:
            obj["category"] = record.category
        obj["age_days"] = record.age_days
        obj["observations"] = [[t, y] for t, y in record.observations]
        data.append(obj)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
