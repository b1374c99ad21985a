"""Embedded time-series store for metric points.

Storage layout: one append-only line-protocol log per measurement under a
single data directory, first line is a version header.  The full tag index
is rebuilt in memory on open; queries are answered from the index but are
contractually equal to a full scan (tested against a brute-force oracle).

Line grammar (frozen, see docs/FORMATS.md):

    <measurement>[,<tagkey>=<tagval>...] <fieldkey>=<fieldval>[,...] <timestamp_ns>

Backslash escapes commas, spaces, `=` and backslash itself inside names;
float fields are bare, integer fields carry an ``i`` suffix, string fields
are double-quoted with ``\"`` and ``\\`` escapes.
"""

from __future__ import annotations

import errno
import math
import os
import threading
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .collectors import FieldValue, InvalidPoint, MetricPoint

FORMAT_HEADER = "#cbtsdb v1"

AGGREGATES = ("none", "mean", "min", "max", "last")

MIN_TIME = 0
MAX_TIME = 2**63 - 1


class ParseError(ValueError):
    """Line does not match the grammar; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class InvalidQuery(ValueError):
    pass


class StorageFull(OSError):
    pass


@dataclass(frozen=True)
class Query:
    """Structured query: equality tag filters, grouping and aggregation."""

    measurement: str
    tag_filters: Mapping[str, str] = field(default_factory=dict)
    group_by: tuple[str, ...] = ()
    time_range: tuple[int, int] = (MIN_TIME, MAX_TIME)
    aggregate: str = "none"
    field_name: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag_filters", dict(self.tag_filters))
        object.__setattr__(self, "group_by", tuple(self.group_by))
        start, end = self.time_range
        if not start < end:
            raise InvalidQuery(f"empty time range [{start}, {end})")
        if self.aggregate not in AGGREGATES:
            raise InvalidQuery(f"unknown aggregate {self.aggregate!r}")
        if self.aggregate != "none" and not self.field_name:
            raise InvalidQuery("aggregate queries must name a field")
        if not self.measurement:
            raise InvalidQuery("measurement must be non-empty")


@dataclass(frozen=True)
class QueryGroup:
    """One group of the result: its tag values plus points or a scalar."""

    group: Mapping[str, str]
    points: Optional[tuple[tuple[int, Mapping[str, FieldValue]], ...]] = None
    value: Optional[float] = None


# ---------------------------------------------------------------------------
# line protocol


_NAME_ESCAPES = {",": "\\,", " ": "\\ ", "=": "\\=", "\\": "\\\\"}


def _escape_name(name: str) -> str:
    out = []
    for ch in name:
        out.append(_NAME_ESCAPES.get(ch, ch))
    return "".join(out)


def _escape_string_field(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def _format_field_value(value: FieldValue) -> str:
    if isinstance(value, bool):
        raise InvalidPoint("boolean fields are not part of the grammar")
    if isinstance(value, int):
        return f"{value}i"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidPoint("non-finite float field")
        return repr(value)
    return f'"{_escape_string_field(value)}"'


def serialize_point(point: MetricPoint) -> str:
    """Canonical single-line form of a point (tags and fields key-sorted)."""
    parts = [_escape_name(point.measurement)]
    for k, v in point.tags.items():
        parts.append(f",{_escape_name(k)}={_escape_name(v)}")
    fields = ",".join(
        f"{_escape_name(k)}={_format_field_value(v)}" for k, v in point.fields.items()
    )
    return f"{''.join(parts)} {fields} {point.timestamp}"


class _Scanner:
    """Cursor over a protocol line, unescaping as it goes."""

    def __init__(self, line: str):
        self.line = line
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.pos)

    def eof(self) -> bool:
        return self.pos >= len(self.line)

    def peek(self) -> str:
        return self.line[self.pos] if self.pos < len(self.line) else ""

    def take_name(self, stop: str) -> str:
        """Consume an escaped name until an unescaped stop character."""
        out = []
        while not self.eof():
            ch = self.line[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.line):
                    raise self.error("dangling escape")
                out.append(self.line[self.pos + 1])
                self.pos += 2
                continue
            if ch in stop:
                break
            out.append(ch)
            self.pos += 1
        if not out:
            raise self.error("empty name")
        return "".join(out)

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def take_string_field(self) -> str:
        self.expect('"')
        out = []
        while True:
            if self.eof():
                raise self.error("unterminated string field")
            ch = self.line[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.line):
                    raise self.error("dangling escape in string")
                out.append(self.line[self.pos + 1])
                self.pos += 2
                continue
            if ch == '"':
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1

    def take_raw(self, stop: str) -> str:
        out = []
        while not self.eof() and self.line[self.pos] not in stop:
            out.append(self.line[self.pos])
            self.pos += 1
        return "".join(out)


def parse_line(line: str) -> MetricPoint:
    """Parse one protocol line into a MetricPoint."""
    sc = _Scanner(line.rstrip("\n"))
    measurement = sc.take_name(", ")
    tags: dict[str, str] = {}
    while sc.peek() == ",":
        sc.expect(",")
        key = sc.take_name("=, ")
        sc.expect("=")
        tags[key] = sc.take_name(", ")
    if sc.eof():
        raise sc.error("missing fields section")
    sc.expect(" ")
    fields: dict[str, FieldValue] = {}
    while True:
        key = sc.take_name("=, ")
        sc.expect("=")
        if sc.peek() == '"':
            fields[key] = sc.take_string_field()
        else:
            raw = sc.take_raw(", ")
            if not raw:
                raise sc.error("empty field value")
            try:
                if raw.endswith("i"):
                    fields[key] = int(raw[:-1])
                else:
                    value = float(raw)
                    if not math.isfinite(value):
                        raise ValueError
                    fields[key] = value
            except ValueError:
                raise sc.error(f"bad field value {raw!r}") from None
        if sc.peek() == ",":
            sc.expect(",")
            continue
        break
    if sc.eof():
        raise sc.error("missing timestamp")
    sc.expect(" ")
    raw_ts = sc.take_raw(" ")
    if not sc.eof():
        raise sc.error("trailing garbage")
    try:
        timestamp = int(raw_ts)
    except ValueError:
        raise sc.error(f"bad timestamp {raw_ts!r}") from None
    try:
        return MetricPoint(measurement, tags, fields, timestamp)
    except InvalidPoint as exc:
        raise ParseError(str(exc), 0) from exc


# ---------------------------------------------------------------------------
# store


SeriesKey = tuple[tuple[str, str], ...]


class MetricStore:
    """Tag-indexed metric store over per-measurement append-only logs.

    Safe for concurrent ingest and query from multiple threads; a single
    writer lock serializes mutation and queries copy matching data while
    holding it, so readers always see a consistent snapshot.
    """

    def __init__(self, data_dir: Union[str, Path]):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._closed = False
        # measurement -> series key -> {timestamp -> fields}
        self._series: dict[str, dict[SeriesKey, dict[int, dict]]] = {}
        self._files: dict[str, object] = {}
        self._load()

    # -- internals

    def _path(self, measurement: str) -> Path:
        return self.data_dir / (urllib.parse.quote(measurement, safe="") + ".lp")

    def _load(self) -> None:
        for path in sorted(self.data_dir.glob("*.lp")):
            with open(path, "r", encoding="utf-8") as fh:
                header = fh.readline().rstrip("\n")
                if header != FORMAT_HEADER:
                    raise ParseError(f"bad store header in {path.name}", 0)
                for raw in fh:
                    raw = raw.rstrip("\n")
                    if not raw:
                        continue
                    self._index(parse_line(raw))

    def _index(self, point: MetricPoint) -> None:
        series = self._series.setdefault(point.measurement, {})
        key: SeriesKey = tuple(point.tags.items())
        series.setdefault(key, {})[point.timestamp] = dict(point.fields)

    def _append(self, point: MetricPoint) -> None:
        fh = self._files.get(point.measurement)
        if fh is None:
            path = self._path(point.measurement)
            fresh = not path.exists()
            fh = open(path, "a", encoding="utf-8")
            if fresh:
                fh.write(FORMAT_HEADER + "\n")
            self._files[point.measurement] = fh
        try:
            fh.write(serialize_point(point) + "\n")
            fh.flush()
        except OSError as exc:
            if exc.errno == errno.ENOSPC:
                raise StorageFull(str(exc)) from exc
            raise

    # -- operations

    def ingest(self, point: MetricPoint) -> None:
        """Store one point; identical (measurement, tags, ts) replaces fields."""
        if not isinstance(point, MetricPoint):
            raise InvalidPoint(f"not a MetricPoint: {point!r}")
        with self._lock:
            if self._closed:
                raise RuntimeError("store is closed")
            self._append(point)
            self._index(point)

    def ingest_line(self, line: str) -> None:
        self.ingest(parse_line(line))

    def ingest_many(self, points: Iterable[MetricPoint]) -> int:
        n = 0
        with self._lock:
            for p in points:
                self.ingest(p)
                n += 1
        return n

    def measurements(self) -> list[str]:
        with self._lock:
            return sorted(self._series)

    def tag_keys(self, measurement: str) -> list[str]:
        """All tag keys seen in a measurement."""
        with self._lock:
            keys: set[str] = set()
            for series_key in self._series.get(measurement, {}):
                keys.update(k for k, _ in series_key)
            return sorted(keys)

    def tag_values(self, measurement: str, key: str) -> list[str]:
        with self._lock:
            values: set[str] = set()
            for series_key in self._series.get(measurement, {}):
                for k, v in series_key:
                    if k == key:
                        values.add(v)
            return sorted(values)

    def query(self, q: Query) -> list[QueryGroup]:
        """Filter, group and optionally aggregate; groups sorted lexicographically."""
        start, end = q.time_range
        with self._lock:
            series = self._series.get(q.measurement, {})
            # snapshot matching points under the lock
            grouped: dict[tuple[str, ...], list[tuple[int, SeriesKey, dict]]] = {}
            for key, by_ts in series.items():
                tags = dict(key)
                if any(tags.get(k) != v for k, v in q.tag_filters.items()):
                    continue
                gkey = tuple(tags.get(k, "") for k in q.group_by)
                bucket = grouped.setdefault(gkey, [])
                for ts, fields in by_ts.items():
                    if start <= ts < end:
                        bucket.append((ts, key, dict(fields)))
        results: list[QueryGroup] = []
        for gkey in sorted(grouped):
            rows = sorted(grouped[gkey], key=lambda r: (r[0], r[1]))
            if not rows:
                continue
            group = dict(zip(q.group_by, gkey))
            if q.aggregate == "none":
                pts = tuple((ts, fields) for ts, _, fields in rows)
                results.append(QueryGroup(group=group, points=pts))
            else:
                values = [
                    (ts, key, fields[q.field_name])
                    for ts, key, fields in rows
                    if isinstance(fields.get(q.field_name), (int, float))
                    and not isinstance(fields.get(q.field_name), bool)
                ]
                if not values:
                    continue
                nums = [float(v) for _, _, v in values]
                if q.aggregate == "mean":
                    value = sum(nums) / len(nums)
                elif q.aggregate == "min":
                    value = min(nums)
                elif q.aggregate == "max":
                    value = max(nums)
                else:  # last
                    value = float(values[-1][2])
                results.append(QueryGroup(group=group, value=value))
        return results

    def close(self) -> None:
        with self._lock:
            for fh in self._files.values():
                fh.close()  # type: ignore[attr-defined]
            self._files.clear()
            self._closed = True
