"""Golden fixture datasets for dashboards, demos and the acceptance suite.

Two synthetic pipeline histories are generated from frozen constants:

* ``fixture-fe2ti``: time-to-solution per solver plus counter-derived
  roofline points for a solid-mechanics style solver study on ``icx36``.
* ``fixture-walberla``: uniform-grid MLUPS per collision operator set
  against the stream-bandwidth ceiling, plus free-surface time shares
  across four architectures.

Values follow published single-node findings: the iterative solver ends
around 40 s against roughly 60 s for the direct one, the uniform-grid
kernel reaches 80% of the stream-derived ceiling on the Ice Lake node,
and the free-surface shares sit in the 45-55 / 12-18 / 30-38 percent
bands for computation / synchronization / communication.
"""

from __future__ import annotations

from .collectors import MetricPoint
from .model import BenchmarkSpec, HostProfile, job_key
from .pipeline import PipelineRun
from .workspace import Workspace

FIXTURE_EPOCH_NS = 1_709_500_000_000_000_000
DAY_NS = 86_400 * 10**9

# stream bandwidth on the Ice Lake node; the remaining bandwidths and the
# other nodes are plausible calibration values, not published numbers
FIXTURE_HOSTS = (
    HostProfile(
        hostname="icx36",
        cpu_model="Dual Intel Xeon Ice Lake Platinum 8360Y",
        cores=72,
        peak_flops_gflops=4608.0,
        bandwidths_gbps={"stream": 237.0, "copy": 205.0, "load": 160.0, "triad": 225.0},
        fixed_frequency_ghz=2.0,
    ),
    HostProfile(
        hostname="skylakesp2",
        cpu_model="Dual Intel Xeon Skylake Gold 6148",
        cores=40,
        peak_flops_gflops=2560.0,
        bandwidths_gbps={"stream": 182.0, "copy": 151.0, "load": 118.0, "triad": 174.0},
        fixed_frequency_ghz=2.0,
    ),
    HostProfile(
        hostname="rome1",
        cpu_model="Single AMD EPYC 7452 Rome",
        cores=32,
        peak_flops_gflops=1024.0,
        bandwidths_gbps={"stream": 122.0, "copy": 104.0, "load": 86.0, "triad": 117.0},
        fixed_frequency_ghz=2.0,
    ),
    HostProfile(
        hostname="genoa2",
        cpu_model="Dual AMD EPYC 9354 Genoa",
        cores=64,
        peak_flops_gflops=2048.0,
        bandwidths_gbps={"stream": 460.0, "copy": 395.0, "load": 320.0, "triad": 438.0},
        fixed_frequency_ghz=2.0,
    ),
)

FE2TI_COMMITS = ("1f0a9c3e4d21", "4b2d7e19c0aa", "7c5f0a2b3d44", "a9e3d5481f02", "d21b8f60c7e5")

# seconds per commit, newest last; iterative solver ~40 s, direct ~60 s
FE2TI_TTS_SECONDS = {
    "ilu": (41.0, 40.8, 40.5, 40.6, 40.2),
    "pardiso": (61.2, 60.9, 61.0, 60.7, 60.5),
}

# counter rows for the latest commit: achieved FLOP rate and intensity
# per solver and region (solve phase plus whole run)
FE2TI_COUNTERS = {
    "ilu": {"solve": (25000.0, 0.45), "run": (21000.0, 0.41)},
    "pardiso": {"solve": (52000.0, 0.92), "run": (45000.0, 0.83)},
}

WALBERLA_COMMITS = ("0a1b2c3d4e5f", "5f4e3d2c1b0a", "9e8d7c6b5a40")

D3Q19_BYTES_PER_UPDATE = 304  # two populations x 19 directions x 8 bytes

# fraction of the stream-derived MLUPS ceiling per collision operator,
# newest commit last; srt ends at exactly 80% attainment
UNIFORMGRID_ATTAINMENT = {
    "srt": (0.790, 0.795, 0.800),
    "trt": (0.757, 0.760, 0.760),
    "mrt": (0.705, 0.700, 0.700),
    "cumulant": (0.641, 0.643, 0.640),
}

# (computation, synchronization, communication) seconds per node for the
# gravity-wave free-surface case; fractions land inside the reported bands
FSLBM_TIMESHARE_SECONDS = {
    "skylakesp2": (67.6, 18.2, 44.2),   # 52 / 14 / 34 %
    "icx36": (55.0, 16.5, 38.5),        # 50 / 15 / 35 %
    "rome1": (69.0, 24.0, 57.0),        # 46 / 16 / 38 %
    "genoa2": (52.25, 12.35, 30.4),     # 55 / 13 / 32 %
}

FE2TI_RUN_ID = "fixture-fe2ti"
WALBERLA_RUN_ID = "fixture-walberla"


def stream_mlups_bound() -> float:
    """Stream-bandwidth MLUPS ceiling on icx36 for the D3Q19 kernel."""
    return 237.0e9 / D3Q19_BYTES_PER_UPDATE / 1e6


def fe2ti_matrix_spec() -> BenchmarkSpec:
    """The solver-study matrix shape: well over 80 jobs per pipeline."""
    return BenchmarkSpec(
        name="fe2ti-solver-study",
        hosts=("skylakesp2", "icx36", "rome1"),
        compilers=("gcc", "intel"),
        variants={
            "solver": ("pardiso", "umfpack", "ilu-1e-8", "ilu-1e-4"),
            "parallelization": ("mpi", "openmp", "hybrid"),
            "case": ("fe2ti216", "fe2ti1728"),
        },
        script_template="fe2ti_bench",
        time_limit_minutes=120,
        repetitions=1,
        exclusions=(("rome1", "intel"),),
    )


def _fe2ti_points() -> list[MetricPoint]:
    points = []
    host, compiler, mode, case = "icx36", "gcc", "mpi", "fe2ti216"
    for solver, series in sorted(FE2TI_TTS_SECONDS.items()):
        assignment = {"solver": solver, "parallelization": mode, "case": case}
        key = job_key(case, host, compiler, assignment, 0)
        for i, seconds in enumerate(series):
            ts = FIXTURE_EPOCH_NS + i * DAY_NS
            points.append(
                MetricPoint(
                    measurement="tts",
                    tags={
                        "host": host,
                        "compiler": compiler,
                        "commit": FE2TI_COMMITS[i],
                        "job_key": key,
                        **assignment,
                    },
                    fields={"seconds": seconds},
                    timestamp=ts,
                )
            )
    latest_ts = FIXTURE_EPOCH_NS + (len(FE2TI_COMMITS) - 1) * DAY_NS
    for solver, regions in sorted(FE2TI_COUNTERS.items()):
        assignment = {"solver": solver, "parallelization": mode, "case": case}
        key = job_key(case, host, compiler, assignment, 0)
        for region, (mflops, intensity) in sorted(regions.items()):
            for metric, value in (
                ("DP [MFLOP/s]", mflops),
                ("Operational intensity", intensity),
                ("Memory bandwidth [MB/s]", mflops / intensity),
            ):
                points.append(
                    MetricPoint(
                        measurement="perf_counters",
                        tags={
                            "host": host,
                            "compiler": compiler,
                            "commit": FE2TI_COMMITS[-1],
                            "job_key": key,
                            "region": region,
                            "metric": metric,
                            **assignment,
                        },
                        fields={"value": value},
                        timestamp=latest_ts,
                    )
                )
    return points


def _walberla_points() -> list[MetricPoint]:
    points = []
    bound = stream_mlups_bound()
    host, compiler = "icx36", "gcc"
    for collision, fractions in sorted(UNIFORMGRID_ATTAINMENT.items()):
        assignment = {"collision": collision, "stencil": "d3q19"}
        key = job_key("uniformgrid-cpu", host, compiler, assignment, 0)
        for i, fraction in enumerate(fractions):
            ts = FIXTURE_EPOCH_NS + (2 + i) * DAY_NS
            points.append(
                MetricPoint(
                    measurement="mlups",
                    tags={
                        "host": host,
                        "compiler": compiler,
                        "commit": WALBERLA_COMMITS[i],
                        "job_key": key,
                        **assignment,
                    },
                    fields={
                        "mlups_per_process": fraction * bound,
                        "bytes_per_update": D3Q19_BYTES_PER_UPDATE,
                    },
                    timestamp=ts,
                )
            )
    latest_ts = FIXTURE_EPOCH_NS + (2 + len(WALBERLA_COMMITS) - 1) * DAY_NS
    for node, durations in sorted(FSLBM_TIMESHARE_SECONDS.items()):
        computation, synchronization, communication = durations
        assignment = {"benchmark": "gravity-wave-fslbm"}
        key = job_key("gravity-wave-fslbm", node, compiler, assignment, 0)
        points.append(
            MetricPoint(
                measurement="time_share",
                tags={
                    "host": node,
                    "compiler": compiler,
                    "commit": WALBERLA_COMMITS[-1],
                    "job_key": key,
                    **assignment,
                },
                fields={
                    "computation": computation,
                    "synchronization": synchronization,
                    "communication": communication,
                },
                timestamp=latest_ts,
            )
        )
    return points


def _fixture_run(
    workspace: Workspace,
    run_id: str,
    commit: str,
    triggered_at: int,
    spec_names: tuple[str, ...],
    points: list[MetricPoint],
    hosts: tuple[str, ...],
) -> PipelineRun:
    job_statuses = {}
    for p in points:
        job_statuses[p.tags["job_key"]] = "completed"
    collection = workspace.records.create_collection(title=f"pipeline {run_id}")
    # one stub record pair per job so the record graph is populated
    for jkey in sorted(job_statuses):
        hub = workspace.records.create_record(
            title=f"job {spec_names[0]} {jkey[:12]}",
            description="imported fixture job",
            metadata={"job_key": jkey, "commit": commit, "status": "completed"},
        )
        log = workspace.records.create_record(
            title=f"log {jkey[:12]}",
            metadata={"job_key": jkey},
            artifacts=[(f"{jkey[:12]}.log", f"fixture log for {jkey}\n".encode())],
        )
        workspace.records.add_to_collection(collection.collection_id, hub.record_id)
        workspace.records.add_to_collection(collection.collection_id, log.record_id)
        workspace.records.link_records(log.record_id, hub.record_id, "log-of")
    run = PipelineRun(
        run_id=run_id,
        commit_id=commit,
        triggered_at=triggered_at,
        spec_names=spec_names,
        job_statuses=job_statuses,
        collection_id=collection.collection_id,
        hosts=hosts,
    )
    workspace.save_run(run.to_dict())
    return run


def import_fixtures(workspace: Workspace) -> dict:
    """Load the golden datasets into a workspace; skips if already present."""
    if workspace.load_run(FE2TI_RUN_ID) is not None:
        return {"imported": False, "reason": "fixtures already imported"}
    for profile in FIXTURE_HOSTS:
        workspace.save_host(profile)
    fe2ti_points = _fe2ti_points()
    walberla_points = _walberla_points()
    for point in fe2ti_points + walberla_points:
        workspace.tsdb.ingest(point)
    _fixture_run(
        workspace,
        FE2TI_RUN_ID,
        FE2TI_COMMITS[-1],
        FIXTURE_EPOCH_NS + (len(FE2TI_COMMITS) - 1) * DAY_NS,
        ("fe2ti-solver-study",),
        fe2ti_points,
        hosts=("icx36",),
    )
    _fixture_run(
        workspace,
        WALBERLA_RUN_ID,
        WALBERLA_COMMITS[-1],
        FIXTURE_EPOCH_NS + (2 + len(WALBERLA_COMMITS) - 1) * DAY_NS,
        ("uniformgrid-cpu", "gravity-wave-fslbm"),
        walberla_points,
        hosts=("icx36", "skylakesp2", "rome1", "genoa2"),
    )
    return {
        "imported": True,
        "points": len(fe2ti_points) + len(walberla_points),
        "runs": [FE2TI_RUN_ID, WALBERLA_RUN_ID],
        "hosts": [h.hostname for h in FIXTURE_HOSTS],
    }
