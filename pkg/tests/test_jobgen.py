import os
import time

import pytest

from cbench.jobgen import (
    DirectiveFileExecutor,
    ExecutorConfig,
    LocalExecutor,
    QueueClosed,
    TemplateError,
    UnknownHandle,
    assemble_script,
    make_executor,
)
from conftest import make_job, make_spec

BASE = "# cluster environment\nexport OMP_NUM_THREADS=1\n"
BENCH = "echo benchmark running\n"


def test_assemble_layout_is_byte_exact():
    spec = make_spec(name="lbm-bench", time_limit_minutes=120)
    job = make_job(spec_name="lbm-bench", host="icx36")
    script = assemble_script(BASE, BENCH, job, spec)
    expected = (
        "#!/bin/sh\n"
        f"#CBATCH --nodelist=icx36\n"
        f"#CBATCH --job-name=lbm-bench/{job.job_key}\n"
        f"#CBATCH --time=120\n"
        "# cluster environment\nexport OMP_NUM_THREADS=1\n"
        "echo benchmark running\n"
    )
    assert script.text == expected
    assert script.env["CB_PARAM_solver"] == "ilu"


def test_assemble_idempotent():
    spec = make_spec()
    job = make_job()
    a = assemble_script(BASE, BENCH, job, spec)
    b = assemble_script(BASE, BENCH, job, spec)
    assert a.text == b.text
    assert a.text.encode() == b.text.encode()


def test_empty_variants_export_nothing():
    spec = make_spec(variants={})
    job = make_job(variant_assignment={})
    script = assemble_script(BASE, BENCH, job, spec)
    assert not [k for k in script.env if k.startswith("CB_PARAM_")]
    body = script.text.split("#CBATCH --time=5\n", 1)[1]
    assert body == BASE + BENCH


def test_sbatch_compat_prefix():
    script = assemble_script(BASE, BENCH, make_job(), make_spec(), sbatch_compat=True)
    assert "#SBATCH --nodelist=localnode" in script.text
    assert "#CBATCH" not in script.text


def test_placeholders_substituted():
    script = assemble_script(
        BASE, "run --host {{host}} --commit {{commit_id}}\n", make_job(), make_spec()
    )
    assert "run --host localnode --commit abc123" in script.text


def test_unterminated_placeholder_rejected():
    with pytest.raises(TemplateError):
        assemble_script(BASE, "echo {{host\n", make_job(), make_spec())
    with pytest.raises(TemplateError):
        assemble_script("cfg {{oops\n", BENCH, make_job(), make_spec())


def test_unknown_placeholder_rejected():
    with pytest.raises(TemplateError):
        assemble_script(BASE, "echo {{nope}}\n", make_job(), make_spec())


def _executor(tmp_path, max_concurrent=2):
    return LocalExecutor(
        ExecutorConfig(kind="local", workdir=tmp_path / "jobs", max_concurrent=max_concurrent)
    )


def _script(body, spec=None, job=None):
    return assemble_script(BASE, body, job or make_job(), spec or make_spec())


def test_local_echo_job_completes(tmp_path):
    ex = _executor(tmp_path)
    job = make_job()
    handle = ex.submit(_script("echo MLUPS per process: 12.5\n"), job)
    outcome = ex.wait(handle, timeout=30)
    ex.shutdown()
    assert outcome.status == "completed"
    assert b"MLUPS per process: 12.5" in outcome.log
    assert outcome.log_path.name.endswith(f".o{handle.job_id}.log")


def test_local_failing_job_preserves_log(tmp_path):
    ex = _executor(tmp_path)
    handle = ex.submit(_script("echo about to fail\nexit 3\n"), make_job())
    outcome = ex.wait(handle, timeout=30)
    ex.shutdown()
    assert outcome.status == "failed"
    assert outcome.exit_code == 3
    assert b"about to fail" in outcome.log


def test_wait_timeout_kills_process(tmp_path):
    ex = _executor(tmp_path)
    handle = ex.submit(
        _script("echo $$ > pid.txt\nwhile true; do sleep 0.1; done\n"), make_job()
    )
    t0 = time.perf_counter()
    outcome = ex.wait(handle, timeout=1.0)
    elapsed = time.perf_counter() - t0
    assert outcome.status == "timeout"
    assert elapsed < 10
    pid = int((tmp_path / "jobs" / "pid.txt").read_text().strip())
    for _ in range(50):  # killed process must leave the process table
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            break
        time.sleep(0.1)
    else:
        pytest.fail(f"job shell {pid} still running after timeout")
    ex.shutdown()


def test_fifo_with_max_concurrent_one(tmp_path):
    ex = _executor(tmp_path, max_concurrent=1)
    body = "date +%s.%N > {name}_start\nsleep 0.5\ndate +%s.%N > {name}_end\n"
    h1 = ex.submit(_script(body.format(name="first")), make_job())
    h2 = ex.submit(_script(body.format(name="second")), make_job(repetition=1))
    ex.wait(h1, timeout=30)
    ex.wait(h2, timeout=30)
    ex.shutdown()
    first_end = float((tmp_path / "jobs" / "first_end").read_text())
    second_start = float((tmp_path / "jobs" / "second_start").read_text())
    assert second_start >= first_end - 0.05  # generous margin for clock granularity
    assert ex.max_observed_running <= 1


def test_concurrency_gauge_bounded(tmp_path):
    ex = _executor(tmp_path, max_concurrent=2)
    handles = [
        ex.submit(_script("sleep 0.3\n"), make_job(repetition=i)) for i in range(6)
    ]
    for h in handles:
        assert ex.wait(h, timeout=30).status == "completed"
    assert 1 <= ex.max_observed_running <= 2
    ex.shutdown()


def test_handles_unique_and_unknown_rejected(tmp_path):
    ex = _executor(tmp_path)
    h1 = ex.submit(_script("true\n"), make_job())
    h2 = ex.submit(_script("true\n"), make_job(repetition=1))
    assert h1.job_id != h2.job_id
    ex.wait(h1, timeout=30)
    ex.wait(h2, timeout=30)
    with pytest.raises(UnknownHandle):
        ex.wait(type(h1)(job_id="9999", job_key="x", submitted_at=0), timeout=1)
    ex.shutdown()


def test_submit_after_shutdown_rejected(tmp_path):
    ex = _executor(tmp_path)
    ex.shutdown()
    with pytest.raises(QueueClosed):
        ex.submit(_script("true\n"), make_job())


def test_wait_resolves_to_same_outcome_twice(tmp_path):
    ex = _executor(tmp_path)
    handle = ex.submit(_script("true\n"), make_job())
    first = ex.wait(handle, timeout=30)
    second = ex.wait(handle, timeout=30)
    assert first is second
    ex.shutdown()


def test_directive_file_writes_but_never_runs(tmp_path):
    ex = make_executor(
        ExecutorConfig(kind="directive-file", workdir=tmp_path / "out", max_concurrent=1)
    )
    assert isinstance(ex, DirectiveFileExecutor)
    job = make_job(host="icx36")
    marker = tmp_path / "out" / "executed"
    handle = ex.submit(_script(f"touch {marker}\n", job=job), job)
    scripts = list((tmp_path / "out").glob("job_script_icx36_*.sh"))
    assert len(scripts) == 1
    text = scripts[0].read_text()
    assert "#CBATCH --nodelist=icx36" in text
    assert f"--job-name=demo/{job.job_key}" in text
    time.sleep(0.2)
    assert not marker.exists()
    with pytest.raises(UnknownHandle):
        ex.wait(handle)
