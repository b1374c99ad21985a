"""Operator command line.

Exit codes: 0 ok, 1 failures present, 2 usage error (argparse default).
Every subcommand honors --data-dir / CB_DATA_DIR and supports --json for
machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import fixtures, hostbench, pipeline, plots
from .model import InvalidSpec
from .specfile import load_project
from .workspace import StoreUnavailable, Workspace, resolve_data_dir


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def cmd_run(args) -> int:
    workspace = Workspace(resolve_data_dir(args.data_dir))
    try:
        project = load_project(args.spec)
    except (InvalidSpec, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    extra_tags = {}
    for tag in args.tag or ():
        key, sep, value = tag.partition("=")
        if not sep or not key or not value:
            print(f"error: bad --tag {tag!r}, expected key=value", file=sys.stderr)
            return 2
        extra_tags[key] = value
    try:
        run = pipeline.run_pipeline(
            workspace,
            project,
            commit_id=args.commit,
            executor_cfg_kind=args.executor,
            max_concurrent=args.max_concurrent,
            extra_tags=extra_tags,
            sbatch_compat=args.sbatch_compat,
        )
    except (pipeline.NoJobs, InvalidSpec, StoreUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        workspace.close()
    failures = sorted(
        k for k, s in run.job_statuses.items() if s in ("failed", "timeout")
    )
    summary = {
        "run_id": run.run_id,
        "commit_id": run.commit_id,
        "job_statuses": run.job_statuses,
        "failures": failures,
        "plots": run.plots,
    }
    _emit(args, summary, run.run_id)
    if failures and not args.json:
        for job in failures:
            print(f"failed: {job} ({run.job_statuses[job]})", file=sys.stderr)
    return 1 if failures else 0


def cmd_serve(args) -> int:
    from .server import serve

    workspace = Workspace(resolve_data_dir(args.data_dir))
    serve(workspace, bind=args.bind)
    return 0


def cmd_bench_host(args) -> int:
    profile = hostbench.measure_host_profile(
        hostname=args.hostname, buffer_mb=args.buffer_mb
    )
    payload = profile.to_dict()
    if args.register:
        workspace = Workspace(resolve_data_dir(args.data_dir))
        workspace.save_host(profile)
    lines = [f"host profile for {profile.hostname}"]
    lines.append(f"  cpu: {profile.cpu_model}")
    lines.append(f"  cores: {profile.cores}")
    lines.append(f"  peak: {profile.peak_flops_gflops:.1f} GFLOP/s")
    for kind, value in sorted(profile.bandwidths_gbps.items()):
        lines.append(f"  {kind}: {value:.1f} GB/s")
    _emit(args, payload, "\n".join(lines))
    return 0


def _format_report(workspace: Workspace, doc: dict) -> tuple[dict, str]:
    from .tsdb import Query

    rows = []
    for measurement, field_name in (("mlups", "mlups_per_process"), ("tts", "seconds")):
        group_keys = tuple(
            k
            for k in workspace.tsdb.tag_keys(measurement)
            if k not in pipeline.NON_GROUPING_TAGS
        )
        groups = workspace.tsdb.query(
            Query(
                measurement=measurement,
                tag_filters={"commit": doc["commit_id"]},
                group_by=group_keys,
            )
        )
        for g in groups:
            for ts, fields in g.points or ():
                value = fields.get(field_name)
                if isinstance(value, (int, float)):
                    rows.append(
                        {
                            "metric": f"{measurement}.{field_name}",
                            "tags": dict(g.group),
                            "value": float(value),
                        }
                    )
    payload = {
        "run": doc,
        "metrics": rows,
    }
    lines = [
        f"run {doc['run_id']}",
        f"  commit: {doc['commit_id']}",
        f"  jobs: {len(doc.get('job_statuses', {}))}",
    ]
    by_status: dict[str, int] = {}
    for status in doc.get("job_statuses", {}).values():
        by_status[status] = by_status.get(status, 0) + 1
    lines.append(
        "  statuses: "
        + ", ".join(f"{k}={v}" for k, v in sorted(by_status.items()))
    )
    if rows:
        lines.append("  metrics:")
        for row in rows:
            tags = " ".join(
                f"{k}={v}" for k, v in sorted(row["tags"].items()) if v
            )
            lines.append(f"    {row['metric']:<24} {row['value']:<14.4f} {tags}")
    regressions = doc.get("regressions", [])
    flagged = [r for r in regressions if r.get("verdict") == "regression"]
    lines.append(f"  regressions flagged: {len(flagged)}")
    for r in flagged:
        tags = " ".join(f"{k}={v}" for k, v in sorted(r["tags"].items()) if v)
        lines.append(
            f"    {r['measurement']}.{r['field']} {tags}: "
            f"{r['magnitude'] * 100:.1f}% worse (baseline {r['baseline']:.4g})"
        )
    return payload, "\n".join(lines)


def cmd_report(args) -> int:
    workspace = Workspace(resolve_data_dir(args.data_dir))
    try:
        doc = workspace.load_run(args.run)
        if doc is None:
            print(f"error: unknown run {args.run}", file=sys.stderr)
            return 1
        payload, text = _format_report(workspace, doc)
        _emit(args, payload, text)
    finally:
        workspace.close()
    return 0


def cmd_plot(args) -> int:
    workspace = Workspace(resolve_data_dir(args.data_dir))
    try:
        doc = workspace.load_run(args.run)
        if doc is None:
            print(f"error: unknown run {args.run}", file=sys.stderr)
            return 1
        out_dir = Path(args.out) if args.out else workspace.plots_dir(args.run)
        data = pipeline.roofline_data(workspace, doc)
        hosts = workspace.hosts()
        profiles = [hosts[h["hostname"]] for h in data["hosts"] if h["hostname"] in hosts]
        points = [
            plots.RooflinePoint(
                label=p["label"],
                operational_intensity=p["operational_intensity"],
                achieved_gflops=p["gflops"],
            )
            for p in data["points"]
        ]
        emitted = []
        roofline_path = plots.emit_roofline(
            profiles,
            points,
            out_dir / "roofline.html",
            title=f"Roofline for commit {doc['commit_id'][:12]}",
            color_keys=[p["tags"].get("host", p["label"]) for p in data["points"]],
        )
        emitted.append(str(roofline_path))
        timeshare = pipeline.timeshare_data(workspace, doc)
        if timeshare["groups"]:
            shares = {g["host"] or "group": g["fractions"] for g in timeshare["groups"]}
            ts_path = plots.emit_timeshare(
                shares,
                out_dir / "timeshare.html",
                title=f"Time shares for commit {doc['commit_id'][:12]}",
            )
            emitted.append(str(ts_path))
        _emit(args, {"plots": emitted}, "\n".join(emitted))
    finally:
        workspace.close()
    return 0


def cmd_check(args) -> int:
    workspace = Workspace(resolve_data_dir(args.data_dir))
    try:
        findings = workspace.records.integrity_check()
    finally:
        workspace.close()
    if args.json:
        print(json.dumps({"findings": findings}, indent=2, sort_keys=True))
    elif findings:
        print(f"{len(findings)} integrity finding(s):")
        for finding in findings:
            detail = " ".join(f"{k}={v}" for k, v in sorted(finding.items()))
            print(f"  - {detail}")
    else:
        print("record store healthy")
    return 1 if findings else 0


def cmd_import_fixtures(args) -> int:
    workspace = Workspace(resolve_data_dir(args.data_dir))
    try:
        result = fixtures.import_fixtures(workspace)
    finally:
        workspace.close()
    if result.get("imported"):
        text = (
            f"imported {result['points']} points, runs: {', '.join(result['runs'])}"
        )
    else:
        text = result.get("reason", "nothing imported")
    _emit(args, result, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbench", description="continuous benchmarking toolkit"
    )
    parser.add_argument(
        "--data-dir",
        default=None,
        help="workspace directory (default: $CB_DATA_DIR or ./cb-data)",
    )
    parser.add_argument(
        "--json", action="store_true", help="machine-readable output"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a pipeline from a spec file")
    p.add_argument("--spec", required=True, help="project spec file (TOML)")
    p.add_argument("--commit", required=True, help="commit identity for tagging")
    p.add_argument(
        "--executor", choices=("local", "directive-file"), default="local"
    )
    p.add_argument("--max-concurrent", type=int, default=2)
    p.add_argument(
        "--tag",
        action="append",
        metavar="KEY=VALUE",
        help="extra tag on every ingested point (repeatable)",
    )
    p.add_argument(
        "--sbatch-compat",
        action="store_true",
        help="emit #SBATCH directives instead of #CBATCH",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the HTTP API and dashboard")
    p.add_argument("--bind", default=None, help="host:port (default $CB_BIND)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser(
        "bench-host", help="measure bandwidth and peak FLOPs of this host"
    )
    p.add_argument("--hostname", default=None)
    p.add_argument("--buffer-mb", type=int, default=128)
    p.add_argument(
        "--register", action="store_true", help="store the profile in the workspace"
    )
    p.set_defaults(func=cmd_bench_host)

    p = sub.add_parser("report", help="text summary of one run")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="emit roofline/timeshare HTML for a run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("check", help="record store integrity check")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("import-fixtures", help="load the golden fixture datasets")
    p.set_defaults(func=cmd_import_fixtures)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StoreUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
