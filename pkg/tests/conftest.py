import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cbench.model import BenchmarkSpec, HostProfile, JobInstance, job_key
from cbench.workspace import Workspace


@pytest.fixture
def workspace(tmp_path):
    ws = Workspace(tmp_path / "data")
    yield ws
    ws.close()


@pytest.fixture
def local_host():
    return HostProfile(
        hostname="localnode",
        cpu_model="sandbox cpu",
        cores=4,
        peak_flops_gflops=50.0,
        bandwidths_gbps={"stream": 20.0, "copy": 22.0, "load": 25.0, "triad": 19.0},
        fixed_frequency_ghz=2.0,
    )


def make_spec(**overrides) -> BenchmarkSpec:
    base = dict(
        name="demo",
        hosts=("localnode",),
        compilers=("gcc",),
        variants={"solver": ("ilu", "pardiso")},
        script_template="bench",
        time_limit_minutes=5,
        repetitions=1,
    )
    base.update(overrides)
    return BenchmarkSpec(**base)


def make_job(**overrides) -> JobInstance:
    base = dict(
        spec_name="demo",
        host="localnode",
        compiler="gcc",
        variant_assignment={"solver": "ilu"},
        repetition=0,
        commit_id="abc123",
        pipeline_timestamp=1_700_000_000_000_000_000,
    )
    base.update(overrides)
    key = job_key(
        base["spec_name"],
        base["host"],
        base["compiler"],
        base["variant_assignment"],
        base["repetition"],
    )
    return JobInstance(job_key=key, **base)
