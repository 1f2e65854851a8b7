"""Transport connectors for job execution.

The interface is SSH-shaped (exec, upload, download, mkdir, stat, kill) but
only two implementations ship: a local one and a simulated remote one.  Both
expose identical semantics; the simulated remote stages files into a separate
root (``<workspace>/.remote/<job_id>``) to emulate a foreign filesystem and
can inject transfer latency and failures for fault testing.
"""

from __future__ import annotations

import random
import shutil
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import SpawnFailure, TransportFailure, UnknownConnector

CAPABILITIES = ("exec", "upload", "download", "mkdir", "stat", "kill")


@dataclass
class FaultSpec:
    """Deterministic fault injection for the simulated remote transport."""

    latency_ms: int = 0
    failure_probability: float = 0.0
    seed: int = 0


class Connector:
    id: str = ""
    capabilities = CAPABILITIES

    def __init__(self, exec_root: Path):
        self._root = Path(exec_root)

    def job_dir(self, job_id: str) -> Path:
        return self._root / job_id

    def mkdir(self, job_id: str) -> Path:
        d = self.job_dir(job_id)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _transfer(self, src: Path, dst: Path):
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(src, dst)

    def upload(self, local: Path, job_id: str, name: str) -> Path:
        dst = self.job_dir(job_id) / name
        self._transfer(Path(local), dst)
        return dst

    def download(self, job_id: str, name: str, local: Path) -> Path:
        self._transfer(self.job_dir(job_id) / name, Path(local))
        return Path(local)

    def stat(self, job_id: str) -> list[tuple[str, int]]:
        """(relative name, size) for every regular file in the job dir."""
        base = self.job_dir(job_id)
        out = []
        if base.is_dir():
            for p in sorted(base.rglob("*")):
                if p.is_file():
                    out.append((str(p.relative_to(base)), p.stat().st_size))
        return out

    def spawn(self, argv: list[str], job_id: str) -> subprocess.Popen:
        try:
            return subprocess.Popen(
                argv,
                cwd=self.job_dir(job_id),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except (OSError, ValueError) as exc:
            raise SpawnFailure(f"cannot spawn {argv[0]!r}: {exc}") from exc


class LocalConnector(Connector):
    id = "local"


class SimRemoteConnector(Connector):
    id = "sim-remote"

    def __init__(self, exec_root: Path, faults: FaultSpec | None = None):
        super().__init__(exec_root)
        self.faults = faults or FaultSpec()
        self._rng = random.Random(self.faults.seed)

    def _transfer(self, src: Path, dst: Path):
        if self.faults.latency_ms:
            time.sleep(self.faults.latency_ms / 1000.0)
        if self.faults.failure_probability and (
            self._rng.random() < self.faults.failure_probability
        ):
            raise TransportFailure(f"injected transfer failure: {src.name}")
        super()._transfer(src, dst)


def make_connector(
    connector_id: str, workspace_root: Path, faults: FaultSpec | None = None
) -> Connector:
    if connector_id == "local":
        return LocalConnector(workspace_root / ".local")
    if connector_id == "sim-remote":
        return SimRemoteConnector(workspace_root / ".remote", faults)
    raise UnknownConnector(f"unknown connector: {connector_id}")
