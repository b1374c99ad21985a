"""Project configuration loading.

One TOML file per project carries the benchmark matrix definitions, the
host profiles, the shared base configuration and the named benchmark
scripts (grammar documented in docs/FORMATS.md).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import BenchmarkSpec, HostProfile, InvalidSpec


@dataclass(frozen=True)
class ProjectConfig:
    specs: tuple[BenchmarkSpec, ...]
    hosts: Mapping[str, HostProfile]
    scripts: Mapping[str, str]
    base_config: str


def load_project(path: Union[str, Path]) -> ProjectConfig:
    """Parse and validate a project spec file."""
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidSpec(f"{path}: {exc}") from exc
    return project_from_dict(data, origin=str(path))


def project_from_dict(data: Mapping, origin: str = "<config>") -> ProjectConfig:
    hosts: dict[str, HostProfile] = {}
    for entry in data.get("hosts", []):
        profile = HostProfile.from_dict(entry)
        hosts[profile.hostname] = profile

    scripts = {str(k): str(v) for k, v in data.get("scripts", {}).items()}
    base_config = str(data.get("base_config", ""))

    specs = []
    for entry in data.get("benchmarks", []):
        exclusions = tuple(
            (e["host"], e["compiler"]) for e in entry.get("exclusions", [])
        )
        spec = BenchmarkSpec(
            name=entry["name"],
            hosts=tuple(entry.get("hosts", ())),
            compilers=tuple(entry.get("compilers", ())),
            variants={k: tuple(v) for k, v in entry.get("variants", {}).items()},
            script_template=entry.get("script_template", ""),
            time_limit_minutes=int(entry.get("time_limit_minutes", 0)),
            repetitions=int(entry.get("repetitions", 1)),
            exclusions=exclusions,
        )
        if spec.script_template not in scripts:
            raise InvalidSpec(
                f"{origin}: benchmark {spec.name!r} references unknown script "
                f"{spec.script_template!r}"
            )
        specs.append(spec)
    if not specs:
        raise InvalidSpec(f"{origin}: no [[benchmarks]] defined")
    if not base_config.strip():
        raise InvalidSpec(f"{origin}: base_config is missing or empty")
    return ProjectConfig(
        specs=tuple(specs), hosts=hosts, scripts=scripts, base_config=base_config
    )
