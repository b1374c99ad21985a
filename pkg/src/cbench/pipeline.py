"""Pipeline orchestration: expand, assemble, submit, collect, ingest,
record, analyze, plot.

Individual job failures never abort a pipeline; they are recorded in the
run document and their logs are preserved."""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import analysis, plots
from .analysis import RegressionConfig, RooflinePoint
from .collectors import (
    EmptyInput,
    ExtractionRule,
    MetricPoint,
    capture_machine_state,
    merge_points,
    parse_app_output,
    parse_perf_counters,
    serialize_machine_state,
)
from .jobgen import ExecutorConfig, assemble_script, job_name_of, make_executor
from .model import BenchmarkSpec, JobInstance, RunResult, expand_matrix
from .specfile import ProjectConfig
from .tsdb import Query
from .workspace import Workspace

# metric lines emitted by benchmark scripts (frozen, see docs/FORMATS.md)
DEFAULT_RULES = (
    ExtractionRule(
        pattern=r"MLUPS per process:\s+(\d+\.?\d*)",
        field_name="mlups_per_process",
        unit="",
        measurement="mlups",
    ),
    ExtractionRule(
        pattern=r"bytes per lattice update:\s+(\d+)",
        field_name="bytes_per_update",
        unit="",
        measurement="mlups",
    ),
    ExtractionRule(
        pattern=r"time to solution:\s+(\d+\.?\d*) s",
        field_name="seconds",
        unit="",
        measurement="tts",
    ),
)

# (measurement, field, direction) watched by the per-run regression report
TRACKED_METRICS = (
    ("mlups", "mlups_per_process", "higher-is-better"),
    ("tts", "seconds", "lower-is-better"),
)

# tags that identify one job rather than one benchmark configuration;
# regression series group over everything else
NON_GROUPING_TAGS = frozenset({"job_key", "commit", "unit"})

DEFAULT_REGRESSION_CFG = RegressionConfig(window=2, threshold_fraction=0.10)


class NoJobs(ValueError):
    pass


@dataclass
class PipelineRun:
    run_id: str
    commit_id: str
    triggered_at: int  # UTC ns
    spec_names: tuple[str, ...]
    job_statuses: dict[str, str]
    collection_id: Optional[str]
    hosts: tuple[str, ...] = ()
    extra_tags: dict[str, str] = field(default_factory=dict)
    regressions: list[dict] = field(default_factory=list)
    plots: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "commit_id": self.commit_id,
            "triggered_at": self.triggered_at,
            "spec_names": list(self.spec_names),
            "job_statuses": dict(sorted(self.job_statuses.items())),
            "collection_id": self.collection_id,
            "hosts": sorted(self.hosts),
            "extra_tags": dict(sorted(self.extra_tags.items())),
            "regressions": self.regressions,
            "plots": self.plots,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineRun":
        return cls(
            run_id=data["run_id"],
            commit_id=data["commit_id"],
            triggered_at=int(data["triggered_at"]),
            spec_names=tuple(data.get("spec_names", ())),
            job_statuses=dict(data.get("job_statuses", {})),
            collection_id=data.get("collection_id"),
            hosts=tuple(data.get("hosts", ())),
            extra_tags=dict(data.get("extra_tags", {})),
            regressions=list(data.get("regressions", [])),
            plots=list(data.get("plots", [])),
        )


def run_pipeline(
    workspace: Workspace,
    project: ProjectConfig,
    commit_id: str,
    executor_cfg_kind: str = "local",
    max_concurrent: int = 2,
    extra_tags: Optional[Mapping[str, str]] = None,
    rules: Sequence[ExtractionRule] = DEFAULT_RULES,
    regression_cfg: RegressionConfig = DEFAULT_REGRESSION_CFG,
    timestamp: Optional[int] = None,
    sbatch_compat: bool = False,
) -> PipelineRun:
    """Execute (or emit) every job of every spec in the project."""
    triggered_at = time.time_ns() if timestamp is None else timestamp
    run_id = f"{triggered_at:x}-{uuid.uuid4().hex[:6]}"
    extra = {str(k): str(v) for k, v in (extra_tags or {}).items()}

    for profile in project.hosts.values():
        workspace.save_host(profile)
    known_hosts = set(workspace.hosts())

    jobs: list[tuple[BenchmarkSpec, JobInstance]] = []
    for spec in project.specs:
        for instance in expand_matrix(spec, commit_id, triggered_at, known_hosts):
            jobs.append((spec, instance))
    if not jobs:
        raise NoJobs("no benchmark jobs to run")

    executor = make_executor(
        ExecutorConfig(
            kind=executor_cfg_kind,
            workdir=workspace.jobs_dir(run_id),
            max_concurrent=max_concurrent,
        )
    )

    run = PipelineRun(
        run_id=run_id,
        commit_id=commit_id,
        triggered_at=triggered_at,
        spec_names=tuple(s.name for s in project.specs),
        job_statuses={},
        collection_id=None,
        hosts=tuple(sorted({instance.host for _, instance in jobs})),
        extra_tags=extra,
    )

    submitted = []
    for spec, instance in jobs:
        try:
            script = assemble_script(
                project.base_config,
                project.scripts[spec.script_template],
                instance,
                spec,
                sbatch_compat=sbatch_compat,
            )
            handle = executor.submit(script, instance)
        except Exception:
            # a job that cannot even be assembled or queued must not
            # take the rest of the pipeline down with it
            run.job_statuses[instance.job_key] = "failed"
            continue
        submitted.append((spec, instance, script, handle))

    if executor_cfg_kind == "directive-file":
        for spec, instance, script, handle in submitted:
            run.job_statuses[instance.job_key] = "emitted"
        executor.shutdown()
        _emit_roofline(workspace, run, project)
        workspace.save_run(run.to_dict())
        return run

    collection = workspace.records.create_collection(title=f"pipeline {run_id}")
    run.collection_id = collection.collection_id

    for spec, instance, script, handle in submitted:
        outcome = executor.wait(
            handle, timeout=spec.time_limit_minutes * 60.0 + 60.0
        )
        result = _collect_result(workspace, instance, outcome, rules, extra)
        run.job_statuses[instance.job_key] = result.status
        _record_job(
            workspace,
            collection.collection_id,
            instance,
            script,
            result,
            outcome,
            job_name_of(script),
        )
    executor.shutdown()

    _emit_roofline(workspace, run, project)
    run.regressions = regression_report(workspace, cfg=regression_cfg)
    workspace.save_run(run.to_dict())
    return run


def _collect_result(
    workspace: Workspace,
    instance: JobInstance,
    outcome,
    rules: Sequence[ExtractionRule],
    extra_tags: Mapping[str, str],
) -> RunResult:
    """Parse and ingest a finished job's outputs into a RunResult.

    A job that exited 0 without producing a single metric is downgraded
    to failed: RunResult's contract requires completed runs to carry
    metrics, and a silent benchmark is a broken benchmark.
    """
    ingested: list[MetricPoint] = []
    state = None
    if outcome.status == "completed":
        points = list(parse_app_output(outcome.log, rules, instance))
        try:
            points.extend(parse_perf_counters(outcome.log, instance))
        except EmptyInput:
            pass
        merged = merge_points(points)
        required = {"host", "job_key", "commit", "compiler"} | set(
            instance.variant_assignment
        )
        for point in merged:
            tagged = point.with_tags(
                commit=instance.commit_id, compiler=instance.compiler, **extra_tags
            )
            missing = required - set(tagged.tags)
            if missing:  # pipeline invariant: full tag set on every point
                raise RuntimeError(f"point missing tags {sorted(missing)}")
            workspace.tsdb.ingest(tagged)
            ingested.append(tagged)
        if ingested:
            state = capture_machine_state()
        else:
            return RunResult(
                job_key=instance.job_key,
                status="failed",
                raw_outputs=(("job.log", outcome.log),),
                wall_seconds=outcome.wall_seconds,
            )
    return RunResult(
        job_key=instance.job_key,
        status=outcome.status,
        metrics=tuple(ingested),
        raw_outputs=(("job.log", outcome.log),),
        machine_state=state,
        wall_seconds=outcome.wall_seconds,
    )


def _record_job(
    workspace: Workspace,
    collection_id: str,
    instance: JobInstance,
    script,
    result: RunResult,
    outcome,
    jobname: str,
) -> None:
    store = workspace.records
    metadata = {
        "job_key": instance.job_key,
        "spec": instance.spec_name,
        "host": instance.host,
        "compiler": instance.compiler,
        "commit": instance.commit_id,
        "repetition": str(instance.repetition),
        "status": result.status,
        "wall_seconds": f"{result.wall_seconds:.6f}",
    }
    if result.status != outcome.status:
        metadata["status_note"] = f"exit status {outcome.status}, no metrics parsed"
    for key, value in instance.variant_assignment.items():
        metadata[f"variant.{key}"] = value
    hub = store.create_record(
        title=f"job {instance.spec_name} {instance.job_key[:12]}",
        description=f"benchmark job on {instance.host} ({result.status})",
        metadata=metadata,
        artifacts=[("job_script.sh", script.text.encode("utf-8"))] if script else [],
    )
    store.add_to_collection(collection_id, hub.record_id)

    log_record = store.create_record(
        title=f"log {instance.job_key[:12]}",
        metadata={"job_key": instance.job_key},
        artifacts=[(f"{jobname.replace('/', '_')}.log", outcome.log)],
    )
    store.add_to_collection(collection_id, log_record.record_id)
    store.link_records(log_record.record_id, hub.record_id, "log-of")

    if result.machine_state is not None:
        state = result.machine_state
        state_record = store.create_record(
            title=f"machinestate {instance.job_key[:12]}",
            metadata={"job_key": instance.job_key, "hostname": state.hostname},
            artifacts=[
                ("machinestate.txt", serialize_machine_state(state).encode("utf-8"))
            ],
        )
        store.add_to_collection(collection_id, state_record.record_id)
        store.link_records(state_record.record_id, hub.record_id, "state-of")
        store.link_records(hub.record_id, state_record.record_id, "produced-on")


def roofline_data(workspace: Workspace, run_doc: Mapping) -> dict:
    """Roofline points, MLUPS bounds and attainment for one run.

    Counter-derived (intensity, FLOP rate) pairs become labeled points,
    one per region per job; MLUPS series are set against the
    bandwidth-derived ceilings of their host for every measured kind.
    """
    commit = run_doc["commit_id"]
    hosts = workspace.hosts()

    counters = workspace.tsdb.query(
        Query(
            measurement="perf_counters",
            tag_filters={"commit": commit},
            group_by=tuple(workspace.tsdb.tag_keys("perf_counters")),
        )
    )
    # fold the per-metric rows of each (job, region) into one entry
    by_job: dict[tuple, dict] = {}
    for group in counters:
        tags = dict(group.group)
        metric_name = tags.pop("metric", "")
        key = tuple(sorted(tags.items()))
        entry = by_job.setdefault(key, {"tags": tags, "metrics": {}})
        for ts, fields in group.points or ():
            value = fields.get("value")
            if isinstance(value, (int, float)):
                entry["metrics"][metric_name] = float(value)

    points = []
    seen_hosts = set()
    for entry in by_job.values():
        tags = entry["tags"]
        oi = entry["metrics"].get("Operational intensity")
        mflops = entry["metrics"].get("DP [MFLOP/s]")
        if oi is None or mflops is None:
            continue
        variant_bits = [
            v
            for k, v in sorted(tags.items())
            if k not in ("host", "job_key", "commit", "compiler", "region", "unit")
        ]
        label_parts = variant_bits or [tags.get("job_key", "")[:8]]
        if tags.get("region"):
            label_parts.append(tags["region"])
        points.append(
            {
                "label": "/".join(label_parts),
                "host": tags.get("host", ""),
                "operational_intensity": oi,
                "gflops": mflops / 1000.0,
                "tags": tags,
            }
        )
        if tags.get("host"):
            seen_hosts.add(tags["host"])

    mlups_entries = []
    mlups_groups = workspace.tsdb.query(
        Query(
            measurement="mlups",
            tag_filters={"commit": commit},
            group_by=tuple(workspace.tsdb.tag_keys("mlups")),
        )
    )
    for group in mlups_groups:
        tags = dict(group.group)
        host = hosts.get(tags.get("host", ""))
        rows = group.points or ()
        if not rows:
            continue
        _, fields = rows[-1]
        measured = fields.get("mlups_per_process")
        bytes_per_update = fields.get("bytes_per_update")
        if not isinstance(measured, (int, float)):
            continue
        entry = {
            "host": tags.get("host", ""),
            "tags": tags,
            "mlups": float(measured),
            "bytes_per_update": float(bytes_per_update)
            if isinstance(bytes_per_update, (int, float))
            else None,
            "bounds": {},
            "attainment": {},
        }
        if host is not None and entry["bytes_per_update"]:
            for kind in sorted(host.bandwidths_gbps):
                bound = analysis.mlups_bound(host, kind, entry["bytes_per_update"])
                entry["bounds"][kind] = bound
                entry["attainment"][kind] = analysis.relative_performance(
                    float(measured), bound
                )
            seen_hosts.add(host.hostname)
        mlups_entries.append(entry)

    run_hosts = sorted(seen_hosts | set(run_doc.get("hosts", ())))
    host_docs = []
    for name in run_hosts or sorted(hosts):
        profile = hosts.get(name)
        if profile is None:
            continue
        host_docs.append(
            {
                "hostname": profile.hostname,
                "peak_gflops": profile.peak_flops_gflops,
                "bandwidths_gbps": dict(sorted(profile.bandwidths_gbps.items())),
                "knees": {
                    kind: analysis.roofline_knee(profile, kind)
                    for kind in sorted(profile.bandwidths_gbps)
                },
            }
        )
    return {
        "run_id": run_doc["run_id"],
        "commit_id": commit,
        "hosts": host_docs,
        "points": points,
        "mlups": mlups_entries,
    }


def timeshare_data(workspace: Workspace, run_doc: Mapping) -> dict:
    """Normalized computation/synchronization/communication shares per group."""
    commit = run_doc["commit_id"]
    group_keys = tuple(
        k
        for k in workspace.tsdb.tag_keys("time_share")
        if k not in NON_GROUPING_TAGS
    )
    groups = workspace.tsdb.query(
        Query(
            measurement="time_share",
            tag_filters={"commit": commit},
            group_by=group_keys,
        )
    )
    out = []
    for group in groups:
        rows = group.points or ()
        if not rows:
            continue
        _, fields = rows[-1]
        durations = {
            k: float(v)
            for k, v in fields.items()
            if k in analysis.TIME_SHARE_CATEGORIES and isinstance(v, (int, float))
        }
        if not durations:
            continue
        shares = analysis.time_share(durations)
        out.append(
            {
                "tags": dict(group.group),
                "host": dict(group.group).get("host", ""),
                "seconds": durations,
                "fractions": {s.category: s.fraction for s in shares},
            }
        )
    return {"run_id": run_doc["run_id"], "commit_id": commit, "groups": out}


def regression_report(
    workspace: Workspace,
    cfg: RegressionConfig = DEFAULT_REGRESSION_CFG,
    metrics: Sequence[tuple[str, str, str]] = TRACKED_METRICS,
) -> list[dict]:
    """Regression verdicts for every configuration series of the tracked metrics."""
    report = []
    for measurement, field_name, direction in metrics:
        entries = regressions_for_metric(
            workspace, measurement, field_name, direction, cfg
        )
        report.extend(entries)
    return report


def regressions_for_metric(
    workspace: Workspace,
    measurement: str,
    field_name: str,
    direction: str,
    cfg: RegressionConfig = DEFAULT_REGRESSION_CFG,
) -> list[dict]:
    metric_cfg = RegressionConfig(
        window=cfg.window, threshold_fraction=cfg.threshold_fraction, direction=direction
    )
    group_keys = tuple(
        k for k in workspace.tsdb.tag_keys(measurement) if k not in NON_GROUPING_TAGS
    )
    groups = workspace.tsdb.query(
        Query(measurement=measurement, group_by=group_keys)
    )
    out = []
    for group in groups:
        series = [
            float(fields[field_name])
            for _, fields in group.points or ()
            if isinstance(fields.get(field_name), (int, float))
        ]
        entry = {
            "measurement": measurement,
            "field": field_name,
            "direction": direction,
            "tags": dict(group.group),
            "series_length": len(series),
        }
        if len(series) < metric_cfg.window + 1:
            entry["verdict"] = "insufficient-data"
        else:
            verdict = analysis.detect_regression(series, metric_cfg)
            entry["verdict"] = "regression" if verdict.regression else "ok"
            entry["magnitude"] = verdict.magnitude
            entry["baseline"] = verdict.baseline
            entry["latest"] = verdict.latest
        out.append(entry)
    return out


def _emit_roofline(workspace: Workspace, run: PipelineRun, project: ProjectConfig) -> None:
    data = roofline_data(workspace, run.to_dict())
    hosts = workspace.hosts()
    spec_hosts = sorted({h for spec in project.specs for h in spec.hosts})
    profiles = [hosts[h] for h in spec_hosts if h in hosts]
    if not profiles:
        profiles = [hosts[d["hostname"]] for d in data["hosts"] if d["hostname"] in hosts]
    points = [
        RooflinePoint(
            label=p["label"],
            operational_intensity=p["operational_intensity"],
            achieved_gflops=p["gflops"],
        )
        for p in data["points"]
    ]
    color_keys = [p["tags"].get("host", p["label"]) for p in data["points"]]
    out = workspace.plots_dir(run.run_id) / "roofline.html"
    plots.emit_roofline(
        profiles,
        points,
        out,
        title=f"Roofline for commit {run.commit_id[:12]}",
        color_keys=color_keys,
    )
    run.plots.append(str(out))

    timeshare = timeshare_data(workspace, run.to_dict())
    if timeshare["groups"]:
        shares = {
            (g["host"] or "/".join(sorted(g["tags"].values()))): g["fractions"]
            for g in timeshare["groups"]
        }
        ts_out = workspace.plots_dir(run.run_id) / "timeshare.html"
        plots.emit_timeshare(
            shares, ts_out, title=f"Time shares for commit {run.commit_id[:12]}"
        )
        run.plots.append(str(ts_out))
