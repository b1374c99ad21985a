"""Shared domain types and the benchmark parameter-matrix expansion.

Everything in here is an immutable value type; the expansion is a pure
function so repeated pipeline runs on the same inputs are reproducible
and diffable.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Collection, Mapping, Optional, Sequence

if TYPE_CHECKING:
    from .collectors import MachineState

NAME_RE = re.compile(r"^[a-z0-9_-]+$")

# bandwidth kinds measured by the host calibration benchmarks
BANDWIDTH_KINDS = ("stream", "copy", "load", "triad")

RUN_STATUSES = ("completed", "failed", "timeout")


class InvalidSpec(ValueError):
    """A benchmark spec (or host profile) violates one of its invariants."""


@dataclass(frozen=True)
class HostProfile:
    """Per-node hardware description used for bounds and scheduling."""

    hostname: str
    cpu_model: str
    cores: int
    peak_flops_gflops: float
    bandwidths_gbps: Mapping[str, float]
    fixed_frequency_ghz: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.hostname:
            raise InvalidSpec("hostname must be non-empty")
        if self.cores < 1:
            raise InvalidSpec(f"cores must be >= 1, got {self.cores}")
        if not self.peak_flops_gflops > 0:
            raise InvalidSpec("peak_flops_gflops must be > 0")
        for kind, value in self.bandwidths_gbps.items():
            if not value > 0:
                raise InvalidSpec(f"bandwidth {kind!r} must be > 0, got {value}")
        if self.fixed_frequency_ghz is not None and not self.fixed_frequency_ghz > 0:
            raise InvalidSpec("fixed_frequency_ghz must be > 0 when set")
        object.__setattr__(self, "bandwidths_gbps", dict(self.bandwidths_gbps))

    def to_dict(self) -> dict:
        return {
            "hostname": self.hostname,
            "cpu_model": self.cpu_model,
            "cores": self.cores,
            "peak_flops_gflops": self.peak_flops_gflops,
            "bandwidths_gbps": dict(sorted(self.bandwidths_gbps.items())),
            "fixed_frequency_ghz": self.fixed_frequency_ghz,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "HostProfile":
        return cls(
            hostname=data["hostname"],
            cpu_model=data.get("cpu_model", ""),
            cores=int(data["cores"]),
            peak_flops_gflops=float(data["peak_flops_gflops"]),
            bandwidths_gbps={k: float(v) for k, v in data["bandwidths_gbps"].items()},
            fixed_frequency_ghz=(
                float(data["fixed_frequency_ghz"])
                if data.get("fixed_frequency_ghz") is not None
                else None
            ),
        )


@dataclass(frozen=True)
class BenchmarkSpec:
    """Declarative benchmark matrix: hosts x compilers x variants x repetitions."""

    name: str
    hosts: tuple[str, ...]
    compilers: tuple[str, ...]
    variants: Mapping[str, tuple]
    script_template: str
    time_limit_minutes: int
    repetitions: int = 1
    # explicit (host, compiler) pairs skipped during expansion
    exclusions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "hosts", tuple(self.hosts))
        object.__setattr__(self, "compilers", tuple(self.compilers))
        object.__setattr__(
            self, "variants", {k: tuple(v) for k, v in self.variants.items()}
        )
        object.__setattr__(
            self, "exclusions", tuple((h, c) for h, c in self.exclusions)
        )
        self.validate()

    def validate(self) -> None:
        if not NAME_RE.match(self.name):
            raise InvalidSpec(f"spec name {self.name!r} must match [a-z0-9_-]+")
        if not self.hosts:
            raise InvalidSpec("spec needs at least one host")
        if not self.compilers:
            raise InvalidSpec("spec needs at least one compiler")
        if self.time_limit_minutes < 1:
            raise InvalidSpec("time_limit_minutes must be >= 1")
        if self.repetitions < 1:
            raise InvalidSpec("repetitions must be >= 1")
        if not self.script_template:
            raise InvalidSpec("script_template must be non-empty")
        for key, values in self.variants.items():
            if not values:
                raise InvalidSpec(f"variant list {key!r} is empty")


@dataclass(frozen=True)
class JobInstance:
    """One concrete benchmark job produced by matrix expansion."""

    job_key: str
    spec_name: str
    host: str
    compiler: str
    variant_assignment: Mapping[str, str]
    repetition: int
    commit_id: str
    pipeline_timestamp: int  # UTC ns

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "variant_assignment", dict(self.variant_assignment)
        )


@dataclass(frozen=True)
class RunResult:
    """Outcome of one executed job, as assembled by the pipeline.

    A completed run must carry metrics: a benchmark that produced no
    parseable output did not do its job, whatever its exit code said.
    """

    job_key: str
    status: str  # completed | failed | timeout
    metrics: tuple = ()
    raw_outputs: tuple[tuple[str, bytes], ...] = ()
    machine_state: Optional["MachineState"] = None
    wall_seconds: float = 0.0

    def __post_init__(self) -> None:
        if self.status not in RUN_STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "completed" and not self.metrics:
            raise ValueError("a completed run must have metrics")
        if self.wall_seconds < 0:
            raise ValueError("wall_seconds must be >= 0")


def job_key(
    spec_name: str,
    host: str,
    compiler: str,
    variant_assignment: Mapping[str, str],
    repetition: int,
) -> str:
    """Stable identity hash for a job.

    Key-sorted canonical JSON fed to sha256, so equal inputs give equal
    keys across processes and any single-field change changes the key.
    """
    canonical = json.dumps(
        [
            spec_name,
            host,
            compiler,
            sorted((str(k), str(v)) for k, v in variant_assignment.items()),
            int(repetition),
        ],
        separators=(",", ":"),
        sort_keys=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def expand_matrix(
    spec: BenchmarkSpec,
    commit_id: str,
    timestamp: int,
    known_hosts: Optional[Collection[str]] = None,
) -> list[JobInstance]:
    """Expand a spec into its full Cartesian product of jobs.

    Output is sorted by (host, compiler, variant values in key-sorted
    order, repetition) so the job list is reproducible.  When
    ``known_hosts`` is given, hosts outside it raise InvalidSpec.
    """
    spec.validate()
    if known_hosts is not None:
        unknown = [h for h in spec.hosts if h not in known_hosts]
        if unknown:
            raise InvalidSpec(f"unknown hosts: {', '.join(unknown)}")

    excluded = set(spec.exclusions)
    keys = sorted(spec.variants)
    jobs: list[JobInstance] = []
    for host in spec.hosts:
        for compiler in spec.compilers:
            if (host, compiler) in excluded:
                continue
            for values in _assignments(keys, spec.variants):
                assignment = {k: str(v) for k, v in zip(keys, values)}
                for rep in range(spec.repetitions):
                    jobs.append(
                        JobInstance(
                            job_key=job_key(
                                spec.name, host, compiler, assignment, rep
                            ),
                            spec_name=spec.name,
                            host=host,
                            compiler=compiler,
                            variant_assignment=assignment,
                            repetition=rep,
                            commit_id=commit_id,
                            pipeline_timestamp=timestamp,
                        )
                    )
    jobs.sort(
        key=lambda j: (
            j.host,
            j.compiler,
            tuple(j.variant_assignment[k] for k in keys),
            j.repetition,
        )
    )
    return jobs


def _assignments(keys: Sequence[str], variants: Mapping[str, tuple]):
    """Cartesian product over the variant value lists, keys pre-sorted."""
    if not keys:
        yield ()
        return
    head, rest = keys[0], keys[1:]
    for value in variants[head]:
        for tail in _assignments(rest, variants):
            yield (value,) + tail
