"""Append-only JSONL persistence under a run directory.

Layout: `trajectories.jsonl`, `findings.jsonl`, `manifests.jsonl`,
`datasets/<id>/...`. One JSON object per line; a record becomes visible
to readers only once its full line is on disk. Concurrent appenders are
coordinated with a file lock per family so ids stay monotone.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterator, Optional

from filelock import FileLock

from .model import MistakeFinding, RoundManifest, Trajectory, ValidationError

_FAMILIES = {
    Trajectory: ("trajectories", "traj"),
    MistakeFinding: ("findings", "find"),
    RoundManifest: ("manifests", "round"),
}


class StorageError(RuntimeError):
    """Transient storage failure; distinct from ValidationError."""


class RunStore:
    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "datasets").mkdir(exist_ok=True)
        self._local_lock = threading.Lock()

    def _paths(self, family: str) -> tuple[Path, Path, Path]:
        jsonl = self.run_dir / f"{family}.jsonl"
        counter = self.run_dir / f".{family}.counter"
        lock = self.run_dir / f".{family}.lock"
        return jsonl, counter, lock

    def append(self, record: Trajectory | MistakeFinding | RoundManifest) -> str:
        record.validate()  # raises ValidationError naming the field
        family, prefix = _FAMILIES[type(record)]
        jsonl, counter, lock = self._paths(family)
        with self._local_lock, FileLock(str(lock)):
            try:
                n = int(counter.read_text()) if counter.exists() else 0
            except ValueError:
                raise StorageError(f"corrupt counter for {family}")
            n += 1
            stored_id = f"{prefix}-{n:06d}"
            payload = record.to_json()
            payload["stored_id"] = stored_id
            line = json.dumps(payload, sort_keys=True) + "\n"
            try:
                with open(jsonl, "a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
                    os.fsync(f.fileno())
                counter.write_text(str(n))
            except OSError as e:
                raise StorageError(str(e)) from e
        return stored_id

    def _read_all(self, family: str) -> Iterator[dict]:
        jsonl, _, _ = self._paths(family)
        if not jsonl.exists():
            return
        with open(jsonl, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def trajectories(self) -> list[Trajectory]:
        return [Trajectory.from_json(d) for d in self._read_all("trajectories")]

    def findings(self) -> list[MistakeFinding]:
        return [MistakeFinding.from_json(d) for d in self._read_all("findings")]

    def manifests(self) -> list[RoundManifest]:
        return [RoundManifest.from_json(d) for d in self._read_all("manifests")]

    def get_trajectory(self, trajectory_id: str) -> Optional[Trajectory]:
        for t in self.trajectories():
            if t.trajectory_id == trajectory_id:
                return t
        return None

    def dataset_dir(self, dataset_id: str) -> Path:
        d = self.run_dir / "datasets" / dataset_id
        d.mkdir(parents=True, exist_ok=True)
        return d
