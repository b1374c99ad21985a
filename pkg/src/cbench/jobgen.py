"""Batch job assembly and submission.

Scripts are assembled byte-exactly from an interpreter line, a directive
block, a base configuration and the benchmark part.  Submission goes
through one of two executors: a local process executor with a bounded
FIFO queue for desk-scale runs, or a directive-file executor that only
writes scripts to disk for a real workload manager to pick up.
"""

from __future__ import annotations

import os
import re
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from queue import Queue
from typing import Mapping, Optional

from .model import BenchmarkSpec, JobInstance

INTERPRETER_LINE = "#!/bin/sh"
DIRECTIVE_PREFIX = "#CBATCH"
SBATCH_PREFIX = "#SBATCH"

EXECUTOR_KINDS = ("local", "directive-file")


class TemplateError(ValueError):
    pass


class SubmitFailed(RuntimeError):
    pass


class QueueClosed(RuntimeError):
    pass


class UnknownHandle(KeyError):
    pass


@dataclass(frozen=True)
class JobScript:
    text: str
    directives: tuple[tuple[str, str], ...]
    env: Mapping[str, str]

    def __post_init__(self) -> None:
        if not self.text.startswith(INTERPRETER_LINE):
            raise ValueError("script must begin with the interpreter line")
        for key, value in self.env.items():
            if "\n" in value:
                raise ValueError(f"env value for {key!r} contains a newline")
        object.__setattr__(self, "env", dict(self.env))
        object.__setattr__(self, "directives", tuple(self.directives))


@dataclass(frozen=True)
class SubmissionHandle:
    job_id: str
    job_key: str
    submitted_at: int  # UTC ns


@dataclass(frozen=True)
class ExecutorConfig:
    kind: str
    workdir: Path
    max_concurrent: int = 1

    def __post_init__(self) -> None:
        if self.kind not in EXECUTOR_KINDS:
            raise ValueError(f"unknown executor kind {self.kind!r}")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        object.__setattr__(self, "workdir", Path(self.workdir))


@dataclass
class JobOutcome:
    """Terminal state of one locally executed job."""

    status: str  # completed | failed | timeout
    log: bytes
    wall_seconds: float
    log_path: Optional[Path] = None
    exit_code: Optional[int] = None


_PLACEHOLDER_RE = re.compile(r"\{\{([^{}]*)\}\}")


def _substitute(part: str, context: Mapping[str, str], origin: str) -> str:
    """Expand {{name}} placeholders; unterminated or unknown ones fail."""
    idx = 0
    while True:
        idx = part.find("{{", idx)
        if idx < 0:
            break
        if part.find("}}", idx) < 0:
            raise TemplateError(f"unterminated placeholder in {origin}")
        idx += 2

    def repl(match: re.Match) -> str:
        name = match.group(1).strip()
        if name not in context:
            raise TemplateError(f"unknown placeholder {name!r} in {origin}")
        return context[name]

    return _PLACEHOLDER_RE.sub(repl, part)


def _chomp(part: str) -> str:
    """Exactly one trailing newline so concatenation is reproducible."""
    return part.rstrip("\n") + "\n"


def assemble_script(
    base_config: str,
    benchmark_script: str,
    instance: JobInstance,
    spec: BenchmarkSpec,
    sbatch_compat: bool = False,
) -> JobScript:
    """Interpreter line + directive block + base + benchmark, in that order.

    Variant values are exported via the script's environment map under
    the CB_PARAM_ prefix; the text itself is a pure function of the
    inputs (byte-identical on repeat calls).
    """
    if not base_config.strip():
        raise ValueError("base_config must be non-empty")
    if not benchmark_script.strip():
        raise ValueError("benchmark_script must be non-empty")
    context = {
        "host": instance.host,
        "compiler": instance.compiler,
        "job_key": instance.job_key,
        "spec_name": instance.spec_name,
        "commit_id": instance.commit_id,
        "repetition": str(instance.repetition),
        "time_limit_minutes": str(spec.time_limit_minutes),
    }
    base = _substitute(base_config, context, "base_config")
    bench = _substitute(benchmark_script, context, "benchmark_script")
    directives = (
        ("nodelist", instance.host),
        ("job-name", f"{spec.name}/{instance.job_key}"),
        ("time", str(spec.time_limit_minutes)),
    )
    prefix = SBATCH_PREFIX if sbatch_compat else DIRECTIVE_PREFIX
    directive_block = "".join(f"{prefix} --{key}={value}\n" for key, value in directives)
    text = INTERPRETER_LINE + "\n" + directive_block + _chomp(base) + _chomp(bench)
    env = {f"CB_PARAM_{k}": str(v) for k, v in instance.variant_assignment.items()}
    env["CB_JOB_KEY"] = instance.job_key
    env["CB_HOST"] = instance.host
    env["CB_COMPILER"] = instance.compiler
    env["CB_COMMIT"] = instance.commit_id
    return JobScript(text=text, directives=directives, env=env)


def job_name_of(script: JobScript) -> str:
    directives = dict(script.directives)
    return directives.get("job-name", "job")


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def time_limit_seconds(script: JobScript) -> Optional[float]:
    directives = dict(script.directives)
    try:
        return float(directives["time"]) * 60.0
    except (KeyError, ValueError):
        return None


@dataclass
class _JobState:
    handle: SubmissionHandle
    script_path: Path
    log_path: Path
    env: dict
    time_limit: Optional[float]
    done: threading.Event = field(default_factory=threading.Event)
    proc: Optional[subprocess.Popen] = None
    outcome: Optional[JobOutcome] = None
    kill_requested: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)

    def kill(self) -> None:
        with self.lock:
            self.kill_requested = True
            if self.proc is not None and self.proc.poll() is None:
                try:
                    os.killpg(self.proc.pid, signal.SIGKILL)
                except (ProcessLookupError, PermissionError):
                    pass


class LocalExecutor:
    """Runs job scripts as child processes, at most max_concurrent at once.

    Submissions queue FIFO; handles are resolved exactly once by the
    worker that ran them.  Thread-safe for concurrent submit/wait.
    """

    def __init__(self, cfg: ExecutorConfig):
        if cfg.kind != "local":
            raise ValueError("LocalExecutor requires kind='local'")
        self.cfg = cfg
        self.workdir = Path(cfg.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._queue: Queue = Queue()
        self._jobs: dict[str, _JobState] = {}
        self._next_id = 0
        self._closed = False
        self._running = 0
        self.max_observed_running = 0
        self._workers = [
            threading.Thread(target=self._worker, daemon=True, name=f"cb-exec-{i}")
            for i in range(cfg.max_concurrent)
        ]
        for w in self._workers:
            w.start()

    # -- submission

    def submit(self, script: JobScript, instance: JobInstance) -> SubmissionHandle:
        with self._lock:
            if self._closed:
                raise QueueClosed("executor has been shut down")
            self._next_id += 1
            job_id = str(self._next_id)
        jobname = _sanitize(job_name_of(script))
        script_path = self.workdir / f"job_script_{_sanitize(instance.host)}_{job_id}.sh"
        log_path = self.workdir / f"{jobname}.o{job_id}.log"
        try:
            script_path.write_text(script.text, encoding="utf-8")
            script_path.chmod(0o755)
        except OSError as exc:
            raise SubmitFailed(f"cannot write job script: {exc}") from exc
        state = _JobState(
            handle=SubmissionHandle(
                job_id=job_id, job_key=instance.job_key, submitted_at=time.time_ns()
            ),
            script_path=script_path,
            log_path=log_path,
            env={**os.environ, **script.env},
            time_limit=time_limit_seconds(script),
        )
        with self._lock:
            self._jobs[job_id] = state
        self._queue.put(job_id)
        return state.handle

    # -- workers

    def _worker(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            state = self._jobs[job_id]
            with self._lock:
                self._running += 1
                self.max_observed_running = max(self.max_observed_running, self._running)
            try:
                self._run_job(state)
            finally:
                with self._lock:
                    self._running -= 1
                state.done.set()
                self._queue.task_done()

    def _run_job(self, state: _JobState) -> None:
        started = time.perf_counter()
        try:
            log_fh = open(state.log_path, "wb")
        except OSError as exc:
            state.outcome = JobOutcome(
                status="failed", log=str(exc).encode(), wall_seconds=0.0
            )
            return
        with log_fh:
            with state.lock:
                if state.kill_requested:
                    state.outcome = JobOutcome(
                        status="timeout", log=b"", wall_seconds=0.0,
                        log_path=state.log_path,
                    )
                    return
                try:
                    state.proc = subprocess.Popen(
                        ["/bin/sh", str(state.script_path)],
                        stdout=log_fh,
                        stderr=subprocess.STDOUT,
                        env=state.env,
                        cwd=str(self.workdir),
                        start_new_session=True,  # wholesale group kill on timeout
                    )
                except OSError as exc:
                    state.outcome = JobOutcome(
                        status="failed", log=str(exc).encode(), wall_seconds=0.0
                    )
                    return
            timed_out = False
            try:
                state.proc.wait(timeout=state.time_limit)
            except subprocess.TimeoutExpired:
                timed_out = True
                state.kill()
                state.proc.wait()
        wall = time.perf_counter() - started
        log = state.log_path.read_bytes() if state.log_path.exists() else b""
        if timed_out or state.kill_requested:
            status = "timeout"
        elif state.proc.returncode == 0:
            status = "completed"
        else:
            status = "failed"
        state.outcome = JobOutcome(
            status=status,
            log=log,
            wall_seconds=wall,
            log_path=state.log_path,
            exit_code=state.proc.returncode,
        )

    # -- resolution

    def wait(self, handle: SubmissionHandle, timeout: Optional[float] = None) -> JobOutcome:
        """Block until the job terminates or the timeout kills it."""
        state = self._jobs.get(handle.job_id)
        if state is None or state.handle != handle:
            raise UnknownHandle(handle.job_id)
        if not state.done.wait(timeout):
            state.kill()
            state.done.wait()
        assert state.outcome is not None
        return state.outcome

    def shutdown(self, wait: bool = True) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        if wait:
            self._queue.join()
        for _ in self._workers:
            self._queue.put(None)
        for w in self._workers:
            w.join(timeout=10)


class DirectiveFileExecutor:
    """Writes scripts to disk for an external workload manager; never runs them."""

    def __init__(self, cfg: ExecutorConfig):
        if cfg.kind != "directive-file":
            raise ValueError("DirectiveFileExecutor requires kind='directive-file'")
        self.cfg = cfg
        self.workdir = Path(cfg.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._next_id = 0
        self._closed = False

    def submit(self, script: JobScript, instance: JobInstance) -> SubmissionHandle:
        with self._lock:
            if self._closed:
                raise QueueClosed("executor has been shut down")
            self._next_id += 1
            job_id = str(self._next_id)
        path = self.workdir / f"job_script_{_sanitize(instance.host)}_{job_id}.sh"
        try:
            path.write_text(script.text, encoding="utf-8")
            path.chmod(0o755)
            if script.env:
                env_path = path.with_suffix(".env")
                env_path.write_text(
                    "".join(f"{k}={v}\n" for k, v in sorted(script.env.items())),
                    encoding="utf-8",
                )
        except OSError as exc:
            raise SubmitFailed(f"cannot write job script: {exc}") from exc
        return SubmissionHandle(
            job_id=job_id, job_key=instance.job_key, submitted_at=time.time_ns()
        )

    def wait(self, handle: SubmissionHandle, timeout: Optional[float] = None) -> JobOutcome:
        raise UnknownHandle(
            f"job {handle.job_id} was emitted as a directive file, not executed"
        )

    def shutdown(self, wait: bool = True) -> None:
        with self._lock:
            self._closed = True


def make_executor(cfg: ExecutorConfig):
    if cfg.kind == "local":
        return LocalExecutor(cfg)
    return DirectiveFileExecutor(cfg)
