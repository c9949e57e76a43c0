"""Session records and crash-safe persistence.

One directory per session: a ``session.json`` state record plus artifact
files.  Records are written atomically (temp file + rename) and carry a
revision counter so concurrent writers cannot double-apply a transition.
A per-session lease combines an in-process lock with a file lock.
"""

from __future__ import annotations

import hashlib
import json
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from filelock import FileLock

from .analysis import PromptAnalysis
from .errors import SessionNotFound, StorageFailure
from .layout import SceneLayout
from .policy import Phase, SessionState, ToolPlan

RECORD_NAME = "session.json"


@dataclass
class ArtifactRecord:
    """Provenance of one stored file: which step produced it."""

    name: str
    file: str
    step: str
    sha256: str

    def to_dict(self) -> dict:
        return {"name": self.name, "file": self.file, "step": self.step, "sha256": self.sha256}

    @classmethod
    def from_dict(cls, data: dict) -> "ArtifactRecord":
        return cls(data["name"], data["file"], data["step"], data["sha256"])


@dataclass
class PipelineSession:
    id: str
    prompt: str
    mode: str
    seed: int
    analysis: PromptAnalysis | None = None
    layout: SceneLayout | None = None
    llm_layout: SceneLayout | None = None
    plan: ToolPlan | None = None
    state: SessionState = field(default_factory=SessionState)
    artifacts: dict[str, ArtifactRecord] = field(default_factory=dict)
    composed_name: str | None = None
    pending_edit: list[int] = field(default_factory=list)
    decomposition_path: str = ""
    revision: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "mode": self.mode,
            "seed": self.seed,
            "analysis": self.analysis.to_dict() if self.analysis else None,
            "layout": self.layout.to_dict() if self.layout else None,
            "llm_layout": self.llm_layout.to_dict() if self.llm_layout else None,
            "plan": self.plan.to_dict() if self.plan else None,
            "state": self.state.to_dict(),
            "artifacts": {name: rec.to_dict() for name, rec in self.artifacts.items()},
            "composed_name": self.composed_name,
            "pending_edit": list(self.pending_edit),
            "decomposition_path": self.decomposition_path,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineSession":
        return cls(
            id=data["id"],
            prompt=data["prompt"],
            mode=data.get("mode", "auto"),
            seed=data.get("seed", 0),
            analysis=PromptAnalysis.from_dict(data["analysis"]) if data.get("analysis") else None,
            layout=SceneLayout.from_dict(data["layout"]) if data.get("layout") else None,
            llm_layout=SceneLayout.from_dict(data["llm_layout"]) if data.get("llm_layout") else None,
            plan=ToolPlan.from_dict(data["plan"]) if data.get("plan") else None,
            state=SessionState.from_dict(data.get("state", {})),
            artifacts={
                name: ArtifactRecord.from_dict(rec)
                for name, rec in (data.get("artifacts") or {}).items()
            },
            composed_name=data.get("composed_name"),
            pending_edit=list(data.get("pending_edit", [])),
            decomposition_path=data.get("decomposition_path", ""),
            revision=data.get("revision", 0),
        )


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class SessionStore:
    """Directory-per-session persistence with exclusive per-session leases."""

    _process_locks: dict[str, threading.RLock] = {}
    _registry_lock = threading.Lock()

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # --- leases ---------------------------------------------------------

    def _process_lock(self, session_id: str) -> threading.RLock:
        key = f"{self.root.resolve()}::{session_id}"
        with self._registry_lock:
            if key not in self._process_locks:
                self._process_locks[key] = threading.RLock()
            return self._process_locks[key]

    @contextmanager
    def lease(self, session_id: str):
        """Exclusive lease: in-process lock plus cross-process file lock."""
        lock = self._process_lock(session_id)
        with lock:
            file_lock = FileLock(str(self._session_dir(session_id) / ".lock"))
            with file_lock:
                yield

    # --- records ---------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def exists(self, session_id: str) -> bool:
        return (self._session_dir(session_id) / RECORD_NAME).exists()

    def create(self, session: PipelineSession) -> None:
        directory = self._session_dir(session.id)
        if (directory / RECORD_NAME).exists():
            raise StorageFailure(f"session {session.id} already exists")
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        self.save(session)

    def save(self, session: PipelineSession, expected_revision: int | None = None) -> None:
        """Atomic write-rename; optionally assert the revision being replaced."""
        directory = self._session_dir(session.id)
        record = directory / RECORD_NAME
        if expected_revision is not None and record.exists():
            current = json.loads(record.read_text(encoding="utf-8")).get("revision", 0)
            if current != expected_revision:
                raise StorageFailure(
                    f"revision conflict on {session.id}: expected {expected_revision}, found {current}"
                )
        session.revision += 1
        tmp = record.with_suffix(".json.tmp")
        try:
            tmp.write_text(json.dumps(session.to_dict(), sort_keys=True), encoding="utf-8")
            tmp.replace(record)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def load(self, session_id: str) -> PipelineSession:
        record = self._session_dir(session_id) / RECORD_NAME
        if not record.exists():
            raise SessionNotFound(session_id)
        try:
            return PipelineSession.from_dict(json.loads(record.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageFailure(f"cannot read session {session_id}: {exc}") from exc

    def list_ids(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(
            p.name for p in self.root.iterdir() if (p / RECORD_NAME).exists()
        )

    # --- artifacts ---------------------------------------------------------

    def write_artifact(
        self, session: PipelineSession, name: str, data: bytes, step: str, suffix: str
    ) -> ArtifactRecord:
        filename = f"{name}{suffix}"
        path = self._session_dir(session.id) / filename
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        record = ArtifactRecord(name=name, file=filename, step=step, sha256=sha256_hex(data))
        session.artifacts[name] = record
        session.state.artifacts[name] = filename
        return record

    def artifact_path(self, session_id: str, name: str) -> Path:
        session = self.load(session_id)
        if name not in session.artifacts:
            raise SessionNotFound(f"artifact {name!r} of session {session_id}")
        return self._session_dir(session_id) / session.artifacts[name].file

    def read_artifact(self, session_id: str, name: str) -> bytes:
        return self.artifact_path(session_id, name).read_bytes()
