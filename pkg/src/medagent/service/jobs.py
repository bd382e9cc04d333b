"""Background training jobs over a bounded worker pool.

Job status moves strictly forward (queued -> running -> succeeded|failed)
and terminal payloads are computed once, so repeated fetches return
byte-identical results.
"""

from __future__ import annotations

import secrets
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..dataset import Dataset
from ..demo import artifact_from_report
from ..errors import AgentError
from ..gridsearch import GridProgress, GridSpec, run_grid_search
from ..metrics import plot_series
from ..vault import serialize


class JobError(AgentError):
    code = "job_error"


class UnknownJob(JobError):
    code = "unknown_job"

    def __init__(self, job_id: str):
        super().__init__(f"no training job {job_id!r}")


class JobNotFinished(JobError):
    code = "job_not_finished"

    def __init__(self, job_id: str, status: str):
        super().__init__(f"job {job_id} has not succeeded (status: {status})")


_STATUS_ORDER = {"queued": 0, "running": 1, "succeeded": 2, "failed": 2}


@dataclass
class TrainingJob:
    job_id: str
    session_id: str
    status: str = "queued"
    progress: GridProgress = field(default_factory=GridProgress)
    result: dict | None = None        # immutable success payload
    model_bytes: bytes | None = None
    svg: str | None = None
    error: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def advance(self, status: str) -> None:
        with self.lock:
            if self.status in ("succeeded", "failed"):
                raise JobError(f"job is terminal ({self.status}); cannot move to {status}")
            if _STATUS_ORDER[status] <= _STATUS_ORDER[self.status]:
                raise JobError(f"status cannot regress {self.status} -> {status}")
            self.status = status

    def snapshot(self) -> dict:
        with self.lock:
            snap: dict = {"job_id": self.job_id, "status": self.status}
            if self.status == "running":
                done, total = self.progress.snapshot()
                snap["progress"] = {"settings_done": done, "settings_total": total}
            elif self.status == "succeeded":
                snap.update(self.result)
            elif self.status == "failed":
                snap["error"] = self.error
            return snap


class JobManager:
    """Owns the worker pool and the job table."""

    def __init__(self, slots: int = 4, grid_workers: int = 1, grid_cap: int = 4096):
        self._pool = ThreadPoolExecutor(max_workers=max(1, slots))
        self._grid_workers = grid_workers
        self._grid_cap = grid_cap
        self._jobs: dict[str, TrainingJob] = {}
        self._lock = threading.Lock()

    def submit(self, session_id: str, dataset: Dataset, grid: GridSpec,
               seed: int, label_column: str) -> TrainingJob:
        job = TrainingJob(job_id=secrets.token_hex(8), session_id=session_id)
        with self._lock:
            self._jobs[job.job_id] = job
        self._pool.submit(self._run, job, dataset, grid, seed, label_column)
        return job

    def _run(self, job: TrainingJob, dataset: Dataset, grid: GridSpec,
             seed: int, label_column: str) -> None:
        job.advance("running")
        try:
            report = run_grid_search(dataset, grid, seed,
                                     workers=self._grid_workers,
                                     cap=self._grid_cap,
                                     progress=job.progress)
            provenance = (f"user dataset ({len(dataset.rows)} rows, label "
                          f"{label_column!r}), grid-search seed {seed}, "
                          f"validation AUC {report.validation_auc:.4f}")
            artifact = artifact_from_report(report, provenance)
            model_bytes = serialize(artifact)
            svg = plot_series(report.validation_roc)
            with job.lock:
                job.model_bytes = model_bytes
                job.svg = svg
                job.result = {
                    "validation_auc": report.validation_auc,
                    "best_setting": report.best_setting.to_dict(),
                    "best_cv_auc": report.best_cv_auc,
                    "per_setting_cv_auc": [[i, a] for i, a in report.per_setting_results],
                    "roc_svg": svg,
                    "model_download": f"/api/jobs/{job.job_id}/model",
                    "roc_download": f"/api/jobs/{job.job_id}/roc.svg",
                    "provenance": provenance,
                }
            job.advance("succeeded")
        except AgentError as e:
            payload = e.payload()
            if hasattr(e, "setting_index"):
                payload["setting_index"] = e.setting_index
            with job.lock:
                job.error = payload
            job.advance("failed")
        except Exception as e:  # noqa: BLE001 - job must not hang in running
            with job.lock:
                job.error = {"code": "internal_error", "message": str(e)}
            job.advance("failed")

    def get(self, job_id: str) -> TrainingJob:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownJob(job_id)
            return self._jobs[job_id]

    def model_bytes(self, job_id: str) -> bytes:
        job = self.get(job_id)
        with job.lock:
            if job.status != "succeeded":
                raise JobNotFinished(job_id, job.status)
            return job.model_bytes

    def roc_svg(self, job_id: str) -> str:
        job = self.get(job_id)
        with job.lock:
            if job.status != "succeeded":
                raise JobNotFinished(job_id, job.status)
            return job.svg

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)
