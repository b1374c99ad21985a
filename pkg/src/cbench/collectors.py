"""Parsers for counter-tool and application output, plus host-state capture.

Counter table grammar (frozen, see docs/FORMATS.md): region blocks opened
by a line ``Region <name>`` followed by pipe-delimited rows
``| <metric name> | <value> |``.  Anything else is skipped, never fatal.
"""

from __future__ import annotations

import math
import os
import platform
import re
import socket
import sys
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .model import JobInstance

FieldValue = Union[float, int, str]

PERF_MEASUREMENT = "perf_counters"

# environment variables worth keeping in a reproducibility snapshot;
# a full dump would leak credentials, so this is a deliberate allowlist
ENV_ALLOW_PREFIXES = ("CB_", "OMP_")
ENV_ALLOW_EXACT = ("PATH",)


class InvalidPoint(ValueError):
    """A metric point violates the MetricPoint invariants."""


class EmptyInput(ValueError):
    """Counter output contained no metric table (failed run, not a bug)."""


@dataclass(frozen=True)
class MetricPoint:
    """One timestamped measurement: tags are metadata, fields are data."""

    measurement: str
    tags: Mapping[str, str]
    fields: Mapping[str, FieldValue]
    timestamp: int  # UTC ns

    def __post_init__(self) -> None:
        if not self.measurement:
            raise InvalidPoint("measurement must be non-empty")
        tags = dict(sorted((str(k), str(v)) for k, v in self.tags.items()))
        for k, v in tags.items():
            if not k or not v:
                raise InvalidPoint(f"empty tag key/value in {self.measurement!r}")
        if not self.fields:
            raise InvalidPoint(f"point {self.measurement!r} has no fields")
        fields: dict[str, FieldValue] = {}
        for k, v in sorted(self.fields.items()):
            if not k:
                raise InvalidPoint("empty field key")
            if k in tags:
                raise InvalidPoint(f"field key {k!r} collides with a tag key")
            if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                raise InvalidPoint(f"field {k!r} has unsupported type {type(v)}")
            if isinstance(v, float) and not math.isfinite(v):
                raise InvalidPoint(f"field {k!r} is not finite")
            fields[k] = v
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "timestamp", int(self.timestamp))

    def with_tags(self, **extra: str) -> "MetricPoint":
        """Copy of the point with extra tags merged in."""
        tags = dict(self.tags)
        tags.update({k: str(v) for k, v in extra.items()})
        return MetricPoint(self.measurement, tags, self.fields, self.timestamp)


@dataclass(frozen=True)
class ExtractionRule:
    """First regex match in a log becomes one metric point field."""

    pattern: str
    field_name: str
    unit: str
    measurement: str

    def __post_init__(self) -> None:
        compiled = re.compile(self.pattern)
        if compiled.groups != 1:
            raise ValueError(
                f"pattern {self.pattern!r} must have exactly one capture group"
            )
        object.__setattr__(self, "_compiled", compiled)

    @property
    def regex(self) -> re.Pattern:
        return self._compiled  # type: ignore[attr-defined]


@dataclass(frozen=True)
class MachineState:
    """Snapshot of the executing host for reproducibility."""

    hostname: str
    os_release: str
    cpu_model: str
    core_count: int
    frequency_info: str
    env_snapshot: Mapping[str, str]
    tool_versions: Mapping[str, str]
    captured_at: int  # UTC ns

    def __post_init__(self) -> None:
        if not self.hostname:
            raise ValueError("hostname must be non-empty")
        object.__setattr__(self, "env_snapshot", dict(sorted(self.env_snapshot.items())))
        object.__setattr__(self, "tool_versions", dict(sorted(self.tool_versions.items())))


def _job_tags(job: JobInstance) -> dict[str, str]:
    tags = {"host": job.host, "job_key": job.job_key}
    for key, value in job.variant_assignment.items():
        tags[key] = str(value)
    return tags


_REGION_RE = re.compile(r"^Region\s+(\S+)\s*$")
_ROW_RE = re.compile(r"^\|\s*(.+?)\s*\|\s*([^|]+?)\s*\|\s*$")


def parse_perf_counters(text: bytes, job: JobInstance) -> list[MetricPoint]:
    """Parse region/metric tables from counter-tool output.

    One point per (region, metric row); rows that do not parse are
    skipped.  Raises EmptyInput when no table was found at all.
    """
    decoded = text.decode("utf-8", errors="replace")
    base_tags = _job_tags(job)
    points: list[MetricPoint] = []
    region: Optional[str] = None
    for line in decoded.splitlines():
        m = _REGION_RE.match(line.strip())
        if m:
            region = m.group(1)
            continue
        if region is None:
            continue
        m = _ROW_RE.match(line.strip())
        if not m:
            continue
        metric, raw_value = m.group(1), m.group(2)
        try:
            value = float(raw_value)
        except ValueError:
            continue
        if not math.isfinite(value):
            continue
        tags = dict(base_tags)
        tags["region"] = region
        tags["metric"] = metric
        points.append(
            MetricPoint(
                measurement=PERF_MEASUREMENT,
                tags=tags,
                fields={"value": value},
                timestamp=job.pipeline_timestamp,
            )
        )
    if not points:
        raise EmptyInput("no metric table found in counter output")
    return points


def parse_app_output(
    text: bytes, rules: Sequence[ExtractionRule], job: JobInstance
) -> list[MetricPoint]:
    """Apply extraction rules to a run log; first match per rule wins."""
    if not rules:
        raise ValueError("rules must be non-empty")
    decoded = text.decode("utf-8", errors="replace")
    base_tags = _job_tags(job)
    points = []
    for rule in rules:
        m = rule.regex.search(decoded)
        if not m:
            continue
        try:
            value = float(m.group(1))
        except ValueError:
            continue
        tags = dict(base_tags)
        if rule.unit:
            tags["unit"] = rule.unit
        points.append(
            MetricPoint(
                measurement=rule.measurement,
                tags=tags,
                fields={rule.field_name: value},
                timestamp=job.pipeline_timestamp,
            )
        )
    return points


def merge_points(points: Iterable[MetricPoint]) -> list[MetricPoint]:
    """Merge points sharing (measurement, tags, timestamp) into one.

    Parsers emit one field per rule; the store replaces fields on
    duplicate keys, so multi-rule output must be merged before ingest.
    """
    merged: dict[tuple, dict] = {}
    order: list[tuple] = []
    for p in points:
        key = (p.measurement, tuple(p.tags.items()), p.timestamp)
        if key not in merged:
            merged[key] = dict(p.fields)
            order.append(key)
        else:
            merged[key].update(p.fields)
    return [
        MetricPoint(measurement=k[0], tags=dict(k[1]), fields=merged[k], timestamp=k[2])
        for k in order
    ]


def _read_first_line(path: str) -> Optional[str]:
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            return fh.readline().strip()
    except OSError:
        return None


def _cpu_model() -> str:
    try:
        with open("/proc/cpuinfo", "r", encoding="utf-8", errors="replace") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or "unavailable"


def capture_machine_state(environ: Optional[Mapping[str, str]] = None) -> MachineState:
    """Probe the running host; failed probes become "unavailable"."""
    env = os.environ if environ is None else environ
    snapshot = {
        k: v
        for k, v in env.items()
        if k in ENV_ALLOW_EXACT or k.startswith(ENV_ALLOW_PREFIXES)
    }
    governor = _read_first_line(
        "/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor"
    )
    freq_khz = _read_first_line("/sys/devices/system/cpu/cpu0/cpufreq/scaling_cur_freq")
    if governor or freq_khz:
        frequency_info = f"governor={governor or 'unavailable'} cur_freq_khz={freq_khz or 'unavailable'}"
    else:
        frequency_info = "unavailable"
    tool_versions = {"python": platform.python_version()}
    try:
        import numpy

        tool_versions["numpy"] = numpy.__version__
    except Exception:
        tool_versions["numpy"] = "unavailable"
    return MachineState(
        hostname=socket.gethostname() or "unavailable",
        os_release=platform.platform(),
        cpu_model=_cpu_model(),
        core_count=os.cpu_count() or 1,
        frequency_info=frequency_info,
        env_snapshot=snapshot,
        tool_versions=tool_versions,
        captured_at=time.time_ns(),
    )


def _escape_value(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape_value(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def serialize_machine_state(state: MachineState) -> str:
    """Self-describing text artifact: one `key: value` per line."""
    lines = [
        f"hostname: {_escape_value(state.hostname)}",
        f"os_release: {_escape_value(state.os_release)}",
        f"cpu_model: {_escape_value(state.cpu_model)}",
        f"core_count: {state.core_count}",
        f"frequency_info: {_escape_value(state.frequency_info)}",
    ]
    for k, v in state.env_snapshot.items():
        lines.append(f"env.{k}: {_escape_value(v)}")
    for k, v in state.tool_versions.items():
        lines.append(f"tool.{k}: {_escape_value(v)}")
    lines.append(f"captured_at: {state.captured_at}")
    return "\n".join(lines) + "\n"


def parse_machine_state(text: str) -> MachineState:
    """Inverse of serialize_machine_state."""
    plain: dict[str, str] = {}
    env: dict[str, str] = {}
    tools: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(": ")
        value = _unescape_value(value)
        if key.startswith("env."):
            env[key[4:]] = value
        elif key.startswith("tool."):
            tools[key[5:]] = value
        else:
            plain[key] = value
    return MachineState(
        hostname=plain["hostname"],
        os_release=plain.get("os_release", ""),
        cpu_model=plain.get("cpu_model", ""),
        core_count=int(plain.get("core_count", "1")),
        frequency_info=plain.get("frequency_info", ""),
        env_snapshot=env,
        tool_versions=tools,
        captured_at=int(plain["captured_at"]),
    )
