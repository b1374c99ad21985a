"""Data-directory layout shared by the pipeline, CLI and HTTP server.

One directory holds everything a deployment needs: the metric store, the
record store, host profiles, pipeline run documents, emitted plots and
per-run job workdirs.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional, Union

from .model import HostProfile
from .records import RecordStore
from .tsdb import MetricStore

DATA_DIR_ENV = "CB_DATA_DIR"
DEFAULT_DATA_DIR = "./cb-data"


class StoreUnavailable(RuntimeError):
    pass


def resolve_data_dir(value: Optional[str] = None) -> Path:
    return Path(value or os.environ.get(DATA_DIR_ENV) or DEFAULT_DATA_DIR)


class Workspace:
    def __init__(self, data_dir: Union[str, Path]):
        self.data_dir = Path(data_dir)
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            for sub in ("runs", "hosts", "plots", "jobs"):
                (self.data_dir / sub).mkdir(exist_ok=True)
        except OSError as exc:
            raise StoreUnavailable(f"cannot open data dir {self.data_dir}: {exc}") from exc
        self._tsdb: Optional[MetricStore] = None
        self._records: Optional[RecordStore] = None

    # -- stores

    @property
    def tsdb(self) -> MetricStore:
        if self._tsdb is None:
            try:
                self._tsdb = MetricStore(self.data_dir / "tsdb")
            except OSError as exc:
                raise StoreUnavailable(str(exc)) from exc
        return self._tsdb

    @property
    def records(self) -> RecordStore:
        if self._records is None:
            try:
                self._records = RecordStore(self.data_dir / "records")
            except OSError as exc:
                raise StoreUnavailable(str(exc)) from exc
        return self._records

    def close(self) -> None:
        if self._tsdb is not None:
            self._tsdb.close()
            self._tsdb = None
        self._records = None

    # -- host profiles

    def save_host(self, profile: HostProfile) -> None:
        path = self.data_dir / "hosts" / f"{profile.hostname}.json"
        path.write_text(
            json.dumps(profile.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def hosts(self) -> dict[str, HostProfile]:
        out = {}
        for path in sorted((self.data_dir / "hosts").glob("*.json")):
            profile = HostProfile.from_dict(json.loads(path.read_text(encoding="utf-8")))
            out[profile.hostname] = profile
        return out

    def host(self, hostname: str) -> Optional[HostProfile]:
        return self.hosts().get(hostname)

    # -- pipeline runs

    def run_path(self, run_id: str) -> Path:
        return self.data_dir / "runs" / f"{run_id}.json"

    def save_run(self, run_doc: dict) -> None:
        path = self.run_path(run_doc["run_id"])
        tmp = path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(run_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        tmp.replace(path)

    def load_run(self, run_id: str) -> Optional[dict]:
        path = self.run_path(run_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def run_ids(self) -> list[str]:
        runs = []
        for path in (self.data_dir / "runs").glob("*.json"):
            runs.append(json.loads(path.read_text(encoding="utf-8")))
        runs.sort(key=lambda r: (r.get("triggered_at", 0), r.get("run_id", "")))
        return [r["run_id"] for r in runs]

    # -- derived directories

    def plots_dir(self, run_id: str) -> Path:
        path = self.data_dir / "plots" / run_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def jobs_dir(self, run_id: str) -> Path:
        path = self.data_dir / "jobs" / run_id
        path.mkdir(parents=True, exist_ok=True)
        return path
