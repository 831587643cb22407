"""Document-oriented embedded store for profiles, tasks, runs and ratings.

A directory of canonical-JSON documents plus an index file. Writes go
through a single lock and land atomically (temp file + rename); finalized
run records are append-only and never mutated or deleted.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import zipfile
from pathlib import Path
from typing import Optional

from .errors import NotFoundError, StorageError
from .model import LearnerProfile, StarterTask, TeacherRating, canonical_json
from .pipeline import RunRecord


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        for sub in ("runs", "profiles", "tasks", "ratings"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        if not self._index_path.exists():
            self._write_index({"runs": {}, "ratings": {}})

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _read_index(self) -> dict:
        return json.loads(self._index_path.read_text(encoding="utf-8"))

    def _write_index(self, index: dict) -> None:
        self._atomic_write(self._index_path, canonical_json(index))

    def _atomic_write(self, path: Path, text: str) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"failed writing {path}: {exc}") from exc

    # --- profiles / tasks -------------------------------------------------

    def save_profile(self, profile: LearnerProfile) -> str:
        with self._lock:
            self._atomic_write(
                self.root / "profiles" / f"{profile.id}.json", canonical_json(profile)
            )
        return profile.id

    def get_profile(self, profile_id: str) -> LearnerProfile:
        path = self.root / "profiles" / f"{profile_id}.json"
        if not path.exists():
            raise NotFoundError(f"profile {profile_id} not found")
        return LearnerProfile.model_validate_json(path.read_text(encoding="utf-8"))

    def list_profiles(self) -> list[LearnerProfile]:
        return [
            LearnerProfile.model_validate_json(p.read_text(encoding="utf-8"))
            for p in sorted((self.root / "profiles").glob("*.json"))
        ]

    def save_task(self, task: StarterTask) -> str:
        with self._lock:
            self._atomic_write(self.root / "tasks" / f"{task.id}.json", canonical_json(task))
        return task.id

    def get_task(self, task_id: str) -> StarterTask:
        path = self.root / "tasks" / f"{task_id}.json"
        if not path.exists():
            raise NotFoundError(f"task {task_id} not found")
        return StarterTask.model_validate_json(path.read_text(encoding="utf-8"))

    def list_tasks(self) -> list[StarterTask]:
        return [
            StarterTask.model_validate_json(p.read_text(encoding="utf-8"))
            for p in sorted((self.root / "tasks").glob("*.json"))
        ]

    # --- runs ----------------------------------------------------------------

    def save_run(self, record: RunRecord) -> str:
        path = self.root / "runs" / f"{record.run_id}.json"
        with self._lock:
            if path.exists():
                raise StorageError(f"run {record.run_id} already finalized (store is append-only)")
            self._atomic_write(path, canonical_json(record))
            index = self._read_index()
            index["runs"][record.run_id] = {
                "profileId": record.profile.id,
                "taskId": record.task.id,
                "status": record.status,
                "createdAt": record.created_at,
            }
            self._write_index(index)
        return record.run_id

    def get_run(self, run_id: str) -> RunRecord:
        path = self.root / "runs" / f"{run_id}.json"
        if not path.exists():
            raise NotFoundError(f"run {run_id} not found")
        return RunRecord.model_validate_json(path.read_text(encoding="utf-8"))

    def list_runs(
        self,
        profile_id: Optional[str] = None,
        task_id: Optional[str] = None,
        status: Optional[str] = None,
        since: Optional[str] = None,
        until: Optional[str] = None,
    ) -> list[RunRecord]:
        index = self._read_index()
        hits = []
        for run_id, meta in sorted(index["runs"].items()):
            if profile_id and meta["profileId"] != profile_id:
                continue
            if task_id and meta["taskId"] != task_id:
                continue
            if status and meta["status"] != status:
                continue
            if since and meta["createdAt"] < since:
                continue
            if until and meta["createdAt"] > until:
                continue
            hits.append(run_id)
        return [self.get_run(run_id) for run_id in hits]

    # --- ratings ---------------------------------------------------------------

    def save_teacher_rating(self, rating: TeacherRating) -> str:
        self.resolve_worksheet(rating.worksheet_ref)
        with self._lock:
            index = self._read_index()
            rating_id = f"rating-{len(index['ratings']) + 1:06d}"
            self._atomic_write(
                self.root / "ratings" / f"{rating_id}.json", canonical_json(rating)
            )
            index["ratings"][rating_id] = {"worksheetRef": rating.worksheet_ref}
            self._write_index(index)
        return rating_id

    def list_ratings(self, worksheet_ref: str) -> list[TeacherRating]:
        index = self._read_index()
        out = []
        for rating_id, meta in sorted(index["ratings"].items()):
            if meta["worksheetRef"] != worksheet_ref:
                continue
            path = self.root / "ratings" / f"{rating_id}.json"
            out.append(TeacherRating.model_validate_json(path.read_text(encoding="utf-8")))
        return out

    def resolve_worksheet(self, worksheet_ref: str):
        """Worksheets are addressed by the run that produced them."""
        record = self.get_run(worksheet_ref)
        if record.worksheet is None:
            raise NotFoundError(f"run {worksheet_ref} has no worksheet")
        return record.worksheet

    # --- export ------------------------------------------------------------------

    def export_run(self, run_id: str, zip_path: str | Path) -> Path:
        """Bundle one run as a zip: prompts, raw outputs, worksheet, evaluation."""
        record = self.get_run(run_id)
        zip_path = Path(zip_path)
        with zipfile.ZipFile(zip_path, "w", zipfile.ZIP_DEFLATED) as bundle:
            prompts = {
                stage.role: [m.model_dump(by_alias=True) for m in stage.request_messages]
                for stage in record.stages
            }
            raw = {stage.role: stage.responses for stage in record.stages}
            bundle.writestr("prompts.json", canonical_json(prompts))
            bundle.writestr("raw_outputs.json", canonical_json(raw))
            if record.worksheet is not None:
                bundle.writestr("worksheet.md", record.worksheet.markdown)
            if record.evaluation is not None:
                bundle.writestr("evaluation.json", canonical_json(record.evaluation))
            bundle.writestr("run.json", canonical_json(record))
        return zip_path
