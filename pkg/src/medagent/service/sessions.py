"""In-memory dialogue sessions and their two state machines.

Prediction flow:  choose_horizon -> ask_predictor(i) -> [prediction shown]
-> survey -> done.  The prediction itself is returned in the transition
response; the stored state moves straight to survey because no user input
belongs to the display step itself.

Training flow:  await_upload -> review_dataset -> configure_grid ->
running -> show_results -> done.  running advances to show_results lazily
once the job is terminal.

Sessions expire after a configurable idle period and every transition is
serialized per session.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..dataset import Dataset, default_label_column, parse_csv
from ..errors import AgentError
from ..gridsearch import GridSpec, default_grid, enumerate_settings
from ..vault import InvalidValue, ModelArtifact, ModelRegistry
from .jobs import JobManager, TrainingJob

FLOWS = ("prediction", "training")

PREDICTION_STATES = ("choose_horizon", "ask_predictor", "survey", "done")
TRAINING_STATES = ("await_upload", "review_dataset", "configure_grid",
                   "running", "show_results", "done")

_DISCLAIMER_SUFFIX = ("This demonstration model was not fit to clinical data; "
                      "do not use its output for medical decisions.")


class SessionError(AgentError):
    code = "session_error"


class UnknownSession(SessionError):
    code = "unknown_session"

    def __init__(self, session_id: str):
        super().__init__(f"no active session {session_id!r} (it may have expired)")


class InvalidFlow(SessionError):
    code = "invalid_flow"

    def __init__(self, flow):
        super().__init__(f"flow must be one of {FLOWS}, got {flow!r}")


class WrongState(SessionError):
    code = "wrong_state"

    def __init__(self, current: str, operation: str):
        self.current = current
        super().__init__(f"operation {operation!r} is not allowed in state {current!r}")


class RatingOutOfRange(SessionError):
    code = "rating_out_of_range"

    def __init__(self, rating):
        super().__init__(f"rating must be an integer from 1 to 5, got {rating!r}")


@dataclass
class DialogueSession:
    session_id: str
    flow: str
    state: str
    created_at: float
    last_active: float
    horizon: int | None = None
    artifact: ModelArtifact | None = None
    predictor_index: int = 0
    answers: dict = field(default_factory=dict)
    uploaded: Dataset | None = None
    label_column: str | None = None
    grid: GridSpec | None = None
    job: TrainingJob | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Session table plus every state-machine transition."""

    def __init__(self, registry: ModelRegistry, jobs: JobManager,
                 survey_log: str | Path, ttl_seconds: int = 1800,
                 grid_cap: int = 4096, training_seed: int = 0,
                 upload_limit: int = 512000, clock=time.monotonic):
        self.registry = registry
        self.jobs = jobs
        self.survey_log = Path(survey_log)
        self.ttl = ttl_seconds
        self.grid_cap = grid_cap
        self.training_seed = training_seed
        self.upload_limit = upload_limit
        self._clock = clock
        self._sessions: dict[str, DialogueSession] = {}
        self._lock = threading.Lock()
        self._log_lock = threading.Lock()

    # -- lifecycle ---------------------------------------------------------

    def create(self, flow: str) -> DialogueSession:
        if flow not in FLOWS:
            raise InvalidFlow(flow)
        now = self._clock()
        state = "choose_horizon" if flow == "prediction" else "await_upload"
        session = DialogueSession(session_id=secrets.token_hex(16), flow=flow,
                                  state=state, created_at=now, last_active=now)
        with self._lock:
            self._purge(now)
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> DialogueSession:
        now = self._clock()
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None and now - session.last_active > self.ttl:
                del self._sessions[session_id]
                session = None
            if session is None:
                raise UnknownSession(session_id)
            session.last_active = now
        self._refresh_job_state(session)
        return session

    def _purge(self, now: float) -> None:
        dead = [sid for sid, s in self._sessions.items()
                if now - s.last_active > self.ttl]
        for sid in dead:
            del self._sessions[sid]

    def _refresh_job_state(self, session: DialogueSession) -> None:
        # running -> show_results once the job has finished either way
        with session.lock:
            if session.state == "running" and session.job is not None:
                if session.job.snapshot()["status"] in ("succeeded", "failed"):
                    session.state = "show_results"

    # -- prompts -----------------------------------------------------------

    def prompt_for(self, session: DialogueSession) -> dict:
        s = session
        if s.state == "choose_horizon":
            return {"kind": "choices", "name": "horizon",
                    "text": "Which prediction horizon, in years?",
                    "options": [str(h) for h in self.registry.horizons()]}
        if s.state == "ask_predictor":
            p = s.artifact.catalog.predictors[s.predictor_index]
            return {"kind": "choices", "name": p.name, "text": p.question,
                    "options": list(p.values),
                    "index": s.predictor_index,
                    "total": len(s.artifact.catalog.predictors)}
        if s.state == "survey":
            return _survey_prompt()
        if s.state == "await_upload":
            return {"kind": "upload",
                    "text": ("Upload a CSV dataset (header row, categorical "
                             "columns, binary label)."),
                    "limit_bytes": self.upload_limit}
        if s.state == "review_dataset":
            return {"kind": "confirm",
                    "text": "Proceed to training configuration with this dataset?",
                    "options": ["confirm"]}
        if s.state == "configure_grid":
            return {"kind": "grid_form",
                    "text": ("Choose hyperparameter candidate values, or keep "
                             "the defaults."),
                    "defaults": default_grid().to_dict(),
                    "cap": self.grid_cap}
        if s.state == "running":
            return {"kind": "progress", "text": "Training in progress.",
                    "job_id": s.job.job_id}
        if s.state == "show_results":
            snap = s.job.snapshot()
            return {"kind": "results", "text": "Training finished.",
                    "job_id": s.job.job_id, "job": snap,
                    "survey": _survey_prompt()}
        return {"kind": "text", "text": "This conversation is complete. "
                                        "Start a new session to run another flow."}

    # -- prediction flow ---------------------------------------------------

    def answer(self, session: DialogueSession, value) -> dict:
        with session.lock:
            if session.state == "choose_horizon":
                return self._answer_horizon(session, value)
            if session.state == "ask_predictor":
                return self._answer_predictor(session, value)
            raise WrongState(session.state, "answer")

    def _answer_horizon(self, session: DialogueSession, value) -> dict:
        allowed = [str(h) for h in self.registry.horizons()]
        if str(value) not in allowed:
            raise InvalidValue("horizon", value, allowed)
        horizon = int(value)
        session.horizon = horizon
        session.artifact = self.registry.lookup(horizon)
        session.state = "ask_predictor"
        session.predictor_index = 0
        session.answers = {}
        return {"session_id": session.session_id, "state": session.state,
                "prompt": self.prompt_for(session)}

    def _answer_predictor(self, session: DialogueSession, value) -> dict:
        catalog = session.artifact.catalog
        predictor = catalog.predictors[session.predictor_index]
        if not isinstance(value, str) or value not in predictor.values:
            raise InvalidValue(predictor.name, value, predictor.values)
        session.answers[predictor.name] = value
        session.predictor_index += 1
        if session.predictor_index < len(catalog.predictors):
            return {"session_id": session.session_id, "state": session.state,
                    "prompt": self.prompt_for(session)}
        probability = session.artifact.predict(session.answers)
        session.state = "survey"
        return {"session_id": session.session_id, "state": session.state,
                "prediction": {
                    "kind": "prediction",
                    "horizon": session.horizon,
                    "probability": f"{probability:.4f}",
                    "disclaimer": f"{session.artifact.provenance}. "
                                  f"{_DISCLAIMER_SUFFIX}",
                },
                "prompt": self.prompt_for(session)}

    # -- training flow -----------------------------------------------------

    def upload_dataset(self, session: DialogueSession, data: bytes,
                       label_column: str | None) -> dict:
        with session.lock:
            if session.state != "await_upload":
                raise WrongState(session.state, "upload_dataset")
            if label_column is None:
                label_column = default_label_column(data)
            dataset = parse_csv(data, label_column)
            session.uploaded = dataset
            session.label_column = label_column
            session.state = "review_dataset"
            return {"session_id": session.session_id, "state": session.state,
                    "summary": _dataset_summary(dataset),
                    "prompt": self.prompt_for(session)}

    def confirm_dataset(self, session: DialogueSession) -> dict:
        with session.lock:
            if session.state != "review_dataset":
                raise WrongState(session.state, "confirm")
            session.state = "configure_grid"
            return {"session_id": session.session_id, "state": session.state,
                    "prompt": self.prompt_for(session)}

    def configure_and_start(self, session: DialogueSession, grid_doc,
                            seed: int | None = None) -> dict:
        with session.lock:
            if session.state != "configure_grid":
                raise WrongState(session.state, "train")
            if grid_doc == "defaults" or grid_doc is None:
                grid = default_grid()
            else:
                grid = GridSpec.from_dict(grid_doc, base=default_grid())
            enumerate_settings(grid, self.grid_cap)  # reject oversize before queueing
            session.grid = grid
            session.job = self.jobs.submit(
                session.session_id, session.uploaded, grid,
                self.training_seed if seed is None else seed,
                session.label_column)
            session.state = "running"
            return {"session_id": session.session_id, "state": session.state,
                    "job_id": session.job.job_id,
                    "settings_total": grid.count,
                    "prompt": self.prompt_for(session)}

    # -- survey ------------------------------------------------------------

    def submit_survey(self, session: DialogueSession, rating, comment) -> dict:
        with session.lock:
            if session.state not in ("survey", "show_results"):
                raise WrongState(session.state, "survey")
            if not isinstance(rating, int) or isinstance(rating, bool) \
                    or not 1 <= rating <= 5:
                raise RatingOutOfRange(rating)
            if comment is not None and not isinstance(comment, str):
                raise SessionError("comment must be a string")
            entry = {
                "time": datetime.now(timezone.utc).isoformat(),
                "session_id": session.session_id,
                "flow": session.flow,
                "rating": rating,
                "comment": comment,
            }
            with self._log_lock:
                self.survey_log.parent.mkdir(parents=True, exist_ok=True)
                with self.survey_log.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            session.state = "done"
            return {"session_id": session.session_id, "state": "done",
                    "message": "Thank you for the feedback.",
                    "prompt": self.prompt_for(session)}


def _survey_prompt() -> dict:
    return {"kind": "survey",
            "text": "How was your experience? Pick a rating (5 is best); "
                    "an optional comment is welcome.",
            "options": ["1", "2", "3", "4", "5"]}


def _dataset_summary(d: Dataset) -> dict:
    labels = [row[[c.name for c in d.columns].index(d.label_column)]
              for row in d.rows]
    balance = {v: labels.count(v) for v in d.label_values}
    return {
        "rows": len(d.rows),
        "label_column": d.label_column,
        "columns": [{"name": c.name, "role": c.role,
                     "categories": len(c.categories)}
                    for c in d.columns],
        "class_balance": balance,
        "preview": {
            "header": [c.name for c in d.columns],
            "rows": [list(r) for r in d.rows[:5]],
        },
    }
