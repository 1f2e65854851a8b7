"""Job launching, staging, monitoring, and cancellation.

A launched job walks Queued -> Staging -> Running -> (Retrieving) -> a
terminal status, with Cancelled reachable from any non-terminal point.  Every
observable step is a JobEvent with a gap-free per-job sequence number; events
are buffered in memory and mirrored to ``<project>/<job_id>/events.log`` as
line-delimited JSON so the stream is replayable after completion.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .connectors import Connector, FaultSpec, make_connector
from .errors import (
    MissingInput,
    SpawnFailure,
    TransportFailure,
    UnknownJob,
)
from .model import utc_now
from .persistence import WorkspaceRef

DEFAULT_RETRIEVE_THRESHOLD = 10 * 1024 * 1024  # "small enough" default: 10 MiB

KILL_GRACE_SECONDS = 2.0


class JobStatus(str, Enum):
    QUEUED = "Queued"
    STAGING = "Staging"
    RUNNING = "Running"
    RETRIEVING = "Retrieving"
    FINISHED = "Finished"
    FAILED = "Failed"
    CANCELLED = "Cancelled"


_STATUS_RANK = {
    JobStatus.QUEUED: 0,
    JobStatus.STAGING: 1,
    JobStatus.RUNNING: 2,
    JobStatus.RETRIEVING: 3,
    JobStatus.FINISHED: 4,
    JobStatus.FAILED: 4,
    JobStatus.CANCELLED: 4,
}

TERMINAL = {JobStatus.FINISHED, JobStatus.FAILED, JobStatus.CANCELLED}


@dataclass
class JobProfile:
    """Everything needed to execute one job."""

    executable: str
    args: list[str] = field(default_factory=list)
    input_files: list[str] = field(default_factory=list)
    connector_id: str = "local"
    working_project: str = ""
    retrieve_threshold_bytes: int = DEFAULT_RETRIEVE_THRESHOLD
    # workspace-relative paths referenced by file-kind form entries; those in
    # the working project directory are auto-staged even if not listed
    file_entries: list[str] = field(default_factory=list)
    faults: FaultSpec | None = None


@dataclass
class JobHandle:
    job_id: str
    status: JobStatus = JobStatus.QUEUED
    exit_code: int | None = None
    started_at: str | None = None
    ended_at: str | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "status": self.status.value,
            "exit_code": self.exit_code,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
        }


@dataclass
class JobEvent:
    job_id: str
    seq: int
    kind: str  # status | stdout | stderr | file_staged | file_retrieved
    payload: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "seq": self.seq,
            "kind": self.kind,
            "payload": self.payload,
            "timestamp": self.timestamp,
        }


class EventLog:
    """Single-writer, many-reader event buffer with on-disk mirror."""

    def __init__(self, job_id: str, path: Path):
        self.job_id = job_id
        self.path = path
        self._events: list[JobEvent] = []
        self._cond = threading.Condition()
        self._closed = False

    def append(self, kind: str, payload: str) -> JobEvent:
        with self._cond:
            if self._closed:
                raise RuntimeError("event log closed (terminal event emitted)")
            ev = JobEvent(self.job_id, len(self._events), kind, payload, utc_now())
            self._events.append(ev)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8", newline="\n") as f:
                f.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
            self._cond.notify_all()
            return ev

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed

    def snapshot(self, from_seq: int = 0) -> list[JobEvent]:
        with self._cond:
            return self._events[from_seq:]

    def stream(self, from_seq: int = 0, follow: bool = True):
        """Yield events in seq order; with follow, block until the log closes."""
        seq = from_seq
        while True:
            with self._cond:
                if follow:
                    while len(self._events) <= seq and not self._closed:
                        self._cond.wait(timeout=0.5)
                batch = self._events[seq:]
                closed = self._closed
            yield from batch
            seq += len(batch)
            if not follow:
                return
            if closed and not batch:
                return


class _Job:
    def __init__(self, profile: JobProfile, connector: Connector, handle: JobHandle,
                 log: EventLog, mirror_dir: Path):
        self.profile = profile
        self.connector = connector
        self.handle = handle
        self.log = log
        self.mirror_dir = mirror_dir
        self.proc = None
        self.cancel_requested = threading.Event()
        self.done = threading.Event()
        self.manifest: list[tuple[str, str]] = []
        self.retrieved: list[str] = []
        self.skipped: list[tuple[str, int]] = []
        self.lock = threading.Lock()


class JobManager:
    """Launches and tracks jobs for one workspace."""

    def __init__(self, ws: WorkspaceRef):
        self.ws = ws
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def _new_job_id(self) -> str:
        # globally unique so re-runs never collide with old job directories
        with self._lock:
            self._counter += 1
            return f"job-{self._counter:03d}-{uuid.uuid4().hex[:6]}"

    def _get(self, job_id: str) -> _Job:
        with self._lock:
            try:
                return self._jobs[job_id]
            except KeyError:
                raise UnknownJob(f"unknown job: {job_id}") from None

    # -- lifecycle ---------------------------------------------------------

    def launch(self, profile: JobProfile) -> JobHandle:
        connector = make_connector(profile.connector_id, self.ws.root, profile.faults)
        job_id = self._new_job_id()
        mirror_dir = self.ws.resolve(f"{profile.working_project}/{job_id}")
        mirror_dir.mkdir(parents=True, exist_ok=True)
        handle = JobHandle(job_id=job_id, started_at=utc_now())
        log = EventLog(job_id, mirror_dir / "events.log")
        job = _Job(profile, connector, handle, log, mirror_dir)
        with self._lock:
            self._jobs[job_id] = job
        log.append("status", JobStatus.QUEUED.value)
        worker = threading.Thread(target=self._run, args=(job,), daemon=True)
        worker.start()
        return replace(handle)

    def poll(self, job_id: str) -> JobHandle:
        job = self._get(job_id)
        with job.lock:
            return replace(job.handle)

    def wait(self, job_id: str, timeout: float | None = None) -> JobHandle:
        job = self._get(job_id)
        job.done.wait(timeout)
        return self.poll(job_id)

    def stream_events(self, job_id: str, from_seq: int = 0, follow: bool = True):
        if from_seq < 0:
            raise ValueError("from_seq must be >= 0")
        return self._get(job_id).log.stream(from_seq, follow=follow)

    def events(self, job_id: str, from_seq: int = 0) -> list[JobEvent]:
        return self._get(job_id).log.snapshot(from_seq)

    def kill(self, job_id: str) -> JobHandle:
        """Polite terminate, hard kill after the grace period; idempotent."""
        job = self._get(job_id)
        with job.lock:
            if job.handle.status in TERMINAL:
                return replace(job.handle)
            job.cancel_requested.set()
            proc = job.proc
        if proc is not None and proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=KILL_GRACE_SECONDS)
            except Exception:
                proc.kill()
        job.done.wait(timeout=KILL_GRACE_SECONDS + 3)
        return self.poll(job_id)

    # -- internals ---------------------------------------------------------

    def _set_status(self, job: _Job, status: JobStatus):
        with job.lock:
            current = job.handle.status
            if current in TERMINAL:
                return
            if status is not JobStatus.CANCELLED:
                assert _STATUS_RANK[status] >= _STATUS_RANK[current], (
                    f"status regression {current} -> {status}"
                )
            job.handle.status = status
            if status in TERMINAL:
                job.handle.ended_at = utc_now()
        job.log.append("status", status.value)
        if status in TERMINAL:
            job.log.close()
            job.done.set()

    def stage_inputs(self, job: _Job) -> list[tuple[str, str]]:
        """Copy listed inputs plus auto-detected project file entries.

        Returns the staging manifest of (source rel path, staged name).
        """
        profile = job.profile
        to_stage: list[str] = []
        seen = set()
        for rel in profile.input_files:
            if rel not in seen:
                seen.add(rel)
                to_stage.append(rel)
        project_prefix = profile.working_project.rstrip("/")
        for rel in profile.file_entries:
            # auto-stage only files sitting in the item's own project directory
            if rel in seen:
                continue
            parent = str(Path(rel).parent)
            if parent == project_prefix and self.ws.resolve(rel).is_file():
                seen.add(rel)
                to_stage.append(rel)

        manifest: list[tuple[str, str]] = []
        for rel in to_stage:
            src = self.ws.resolve(rel)
            if not src.is_file():
                raise MissingInput(f"input file missing: {rel}")
            name = Path(rel).name
            job.connector.upload(src, job.handle.job_id, name)
            manifest.append((rel, name))
            job.log.append("file_staged", name)
        return manifest

    def retrieve_outputs(self, job: _Job, threshold: int):
        """Copy back new files iff their total size is within the threshold."""
        staged_names = {name for _, name in job.manifest}
        outputs = [
            (name, size)
            for name, size in job.connector.stat(job.handle.job_id)
            if name not in staged_names
        ]
        total = sum(size for _, size in outputs)
        if not outputs:
            return
        if total <= threshold:
            for name, _ in outputs:
                dest = job.mirror_dir / name
                job.connector.download(job.handle.job_id, name, dest)
                job.retrieved.append(name)
                job.log.append("file_retrieved", name)
        else:
            job.skipped = outputs
            job.log.append(
                "file_retrieved",
                f"skipped: {len(outputs)} file(s), {total} bytes > "
                f"threshold {threshold}",
            )

    def _resolve_executable(self, profile: JobProfile) -> str:
        try:
            candidate = self.ws.resolve(profile.executable)
            if candidate.is_file():
                return str(candidate)
        except Exception:
            pass
        return profile.executable

    def _run(self, job: _Job):
        profile = job.profile
        try:
            job.connector.mkdir(job.handle.job_id)
            if job.cancel_requested.is_set():
                self._set_status(job, JobStatus.CANCELLED)
                return
            self._set_status(job, JobStatus.STAGING)
            job.manifest = self.stage_inputs(job)
            if job.cancel_requested.is_set():
                self._set_status(job, JobStatus.CANCELLED)
                return

            self._set_status(job, JobStatus.RUNNING)
            argv = [self._resolve_executable(profile)] + list(profile.args)
            proc = job.connector.spawn(argv, job.handle.job_id)
            with job.lock:
                job.proc = proc
            if job.cancel_requested.is_set() and proc.poll() is None:
                proc.terminate()

            readers = []
            for stream, kind in ((proc.stdout, "stdout"), (proc.stderr, "stderr")):
                t = threading.Thread(
                    target=self._pump, args=(job, stream, kind), daemon=True
                )
                t.start()
                readers.append(t)
            rc = proc.wait()
            for t in readers:
                t.join(timeout=5)

            if job.cancel_requested.is_set():
                self._set_status(job, JobStatus.CANCELLED)
                return

            self._set_status(job, JobStatus.RETRIEVING)
            self.retrieve_outputs(job, profile.retrieve_threshold_bytes)
            if job.cancel_requested.is_set():
                self._set_status(job, JobStatus.CANCELLED)
                return

            with job.lock:
                job.handle.exit_code = rc
            self._set_status(
                job, JobStatus.FINISHED if rc == 0 else JobStatus.FAILED
            )
        except (MissingInput, TransportFailure, SpawnFailure) as exc:
            job.log.append("stderr", f"{type(exc).__name__}: {exc}")
            if job.cancel_requested.is_set():
                self._set_status(job, JobStatus.CANCELLED)
            else:
                with job.lock:
                    if job.handle.exit_code is None:
                        job.handle.exit_code = -1
                self._set_status(job, JobStatus.FAILED)
        except Exception as exc:  # engine bug: surface it, never hang the job
            job.log.append("stderr", f"internal error: {exc}")
            with job.lock:
                if job.handle.exit_code is None:
                    job.handle.exit_code = -1
            self._set_status(job, JobStatus.FAILED)

    def _pump(self, job: _Job, stream, kind: str):
        mirror = job.mirror_dir / f"{kind}.txt"
        with mirror.open("w", encoding="utf-8", newline="\n") as out:
            for line in stream:
                text = line.rstrip("\n")
                out.write(text + "\n")
                out.flush()
                try:
                    job.log.append(kind, text)
                except RuntimeError:
                    break  # log already closed by cancellation
