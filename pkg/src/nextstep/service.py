"""HTTP API for interactive next-step exploration and batch evaluation.

Endpoints (all JSON, under /api/v1):

    GET  /api/v1/health
    GET  /api/v1/stats
    GET  /api/v1/concepts?domain={diploma|job}
    POST /api/v1/options        {current_step, branch, goal?, page?}
    POST /api/v1/evaluate       {target_kind, method, params?, jobs?} -> 202 + id
    GET  /api/v1/evaluate/{id}

Errors are always {"error": {"code": str, "message": str}}.

The options flow mirrors the interactive questionnaire: given the user's
current step and the branch they picked (further studies or a job), return
the most commonly chosen next concepts six at a time; "more resume" is just
the next page. A goal concept, when given, is folded into the context
through the intent-conditioned counts, re-ordering the list.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .core import ConceptId, StepKind, Taxonomy, Trajectory, canonical_taxonomies
from .evaluator import InvalidParamsError, ScoreParams, evaluate
from .ingest import corpus_stats
from .predictor import FrequencyModel, Method, rank, train

PACK_SIZE = 6

BRANCH_FURTHER_STUDIES = "further_studies"
BRANCH_JOB = "job"
_BRANCH_KIND = {
    BRANCH_FURTHER_STUDIES: StepKind.DIPLOMA,
    BRANCH_JOB: StepKind.JOB,
}


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def _bad_request(message: str, code: str = "bad_request") -> ServiceError:
    return ServiceError(400, code, message)


def _not_trained() -> ServiceError:
    return ServiceError(409, "not_trained", "no corpus loaded; start with --corpus")


@dataclass(frozen=True)
class _Snapshot:
    """One immutable trained view. Reload swaps the whole snapshot at once."""

    corpus: tuple
    taxonomies: Mapping[StepKind, Taxonomy]
    # Conditioned on the current step (what the user just did) and on a
    # stated goal (what the user wants next), per target kind.
    by_current: Mapping[StepKind, FrequencyModel]
    by_goal: Mapping[StepKind, FrequencyModel]


def _build_snapshot(
    corpus: Sequence[Trajectory], taxonomies: Mapping[StepKind, Taxonomy]
) -> _Snapshot:
    kinds = (StepKind.DIPLOMA, StepKind.JOB)
    return _Snapshot(
        corpus=tuple(corpus),
        taxonomies=dict(taxonomies),
        by_current={k: train(corpus, k, Method.PREVIOUS_STEP) for k in kinds},
        by_goal={k: train(corpus, k, Method.NEXT_STEP_INTENT) for k in kinds},
    )


@dataclass
class _Job:
    job_id: str
    status: str = "queued"  # queued | running | done | failed
    report: Optional[dict] = None
    error: Optional[str] = None


class ServiceState:
    """Shared mutable state: the current snapshot and the evaluation jobs."""

    def __init__(
        self,
        corpus: Optional[Sequence[Trajectory]] = None,
        taxonomies: Optional[Mapping[StepKind, Taxonomy]] = None,
    ):
        self.taxonomies = dict(taxonomies) if taxonomies else canonical_taxonomies()
        self._snapshot: Optional[_Snapshot] = None
        self._jobs: Dict[str, _Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=2)
        if corpus is not None:
            self.load_corpus(corpus)

    def load_corpus(self, corpus: Sequence[Trajectory]) -> None:
        # Built off to the side, then published with one assignment, so
        # readers only ever see a complete snapshot.
        snapshot = _build_snapshot(corpus, self.taxonomies)
        self._snapshot = snapshot

    def snapshot(self) -> _Snapshot:
        snapshot = self._snapshot
        if snapshot is None:
            raise _not_trained()
        return snapshot

    def submit_evaluation(
        self,
        target_kind: StepKind,
        method: Method,
        params: ScoreParams,
        jobs: int,
    ) -> _Job:
        snapshot = self.snapshot()
        job = _Job(job_id=uuid.uuid4().hex)
        with self._lock:
            self._jobs[job.job_id] = job

        def run() -> None:
            with self._lock:
                job.status = "running"
            try:
                report = evaluate(
                    snapshot.corpus,
                    target_kind,
                    method,
                    params,
                    taxonomy=snapshot.taxonomies[target_kind],
                    jobs=jobs,
                )
                with self._lock:
                    job.report = report.to_dict()
                    job.status = "done"
            except Exception as exc:
                with self._lock:
                    job.error = str(exc)
                    job.status = "failed"

        self._pool.submit(run)
        return job

    def job(self, job_id: str) -> Optional[_Job]:
        with self._lock:
            return self._jobs.get(job_id)


# --- request parsing ----------------------------------------------------------


def _require(payload: Mapping, key: str):
    if key not in payload or payload[key] is None:
        raise _bad_request(f"missing required field {key!r}")
    return payload[key]


def _parse_kind(value, what: str) -> StepKind:
    if not isinstance(value, str):
        raise _bad_request(f"{what} must be a string", "bad_domain")
    try:
        return StepKind.parse(value)
    except ValueError as exc:
        raise _bad_request(str(exc), "bad_domain") from None


def _parse_concept(data, taxonomies: Mapping[StepKind, Taxonomy]) -> ConceptId:
    """Accept {"domain", "index"} or {"domain", "label"}."""
    if not isinstance(data, Mapping):
        raise _bad_request("concept must be an object", "bad_concept")
    domain = _parse_kind(_require(data, "domain"), "concept domain")
    taxonomy = taxonomies[domain]
    if "index" in data and data["index"] is not None:
        try:
            index = int(data["index"])
        except (TypeError, ValueError):
            raise _bad_request("concept index must be an integer", "bad_concept") from None
        if not taxonomy.has_index(index):
            raise _bad_request(
                f"no {domain.value} concept with index {index}", "bad_concept"
            )
        return taxonomy.by_index(index)
    if "label" in data and data["label"] is not None:
        wanted = str(data["label"]).strip().lower()
        for concept in taxonomy.concepts:
            if concept.label.lower() == wanted:
                return concept
        raise _bad_request(
            f"no {domain.value} concept labeled {data['label']!r}", "bad_concept"
        )
    raise _bad_request("concept needs an index or a label", "bad_concept")


def _parse_current_step(
    data, taxonomies: Mapping[StepKind, Taxonomy]
) -> Tuple[StepKind, List[ConceptId], str]:
    if not isinstance(data, Mapping):
        raise _bad_request("current_step must be an object", "bad_step")
    kind = _parse_kind(_require(data, "kind"), "current_step.kind")
    raw_concepts = _require(data, "concepts")
    if not isinstance(raw_concepts, list) or not raw_concepts:
        raise _bad_request("current_step.concepts must be a non-empty list", "bad_step")
    taxonomy = taxonomies[kind]
    concepts = []
    for item in raw_concepts:
        if isinstance(item, int):
            if not taxonomy.has_index(item):
                raise _bad_request(
                    f"no {kind.value} concept with index {item}", "bad_concept"
                )
            concepts.append(taxonomy.by_index(item))
        else:
            concept = _parse_concept(item, taxonomies)
            if concept.domain is not kind:
                raise _bad_request(
                    "current_step concepts must match its kind", "bad_step"
                )
            concepts.append(concept)
    title = data.get("title") or ""
    return kind, concepts, str(title)


# --- options ranking ----------------------------------------------------------


def _goal_ranked(
    snapshot: _Snapshot,
    target_kind: StepKind,
    context: Sequence[ConceptId],
    goal: ConceptId,
) -> List[Tuple[ConceptId, int]]:
    """Counts conditioned on the current step plus a goal concept.

    The current step's concepts pull from the previous-step counts, the
    goal from the intent counts; both models share one marginal (every
    target step is counted once in each), so the tie rules stay coherent.
    """
    current = snapshot.by_current[target_kind]
    intent = snapshot.by_goal[target_kind]
    taxonomy = snapshot.taxonomies[target_kind]
    scored = []
    any_positive = False
    for concept in taxonomy.concepts:
        count = intent.joint.get((concept.index, goal.domain, goal.index), 0)
        for c in context:
            count += current.joint.get((concept.index, c.domain, c.index), 0)
        if count:
            any_positive = True
        scored.append((concept, count, current.marginal.get(concept.index, 0)))
    if not any_positive:
        prediction = rank(current, None, taxonomy)
        return [(h.concept, h.count) for h in prediction.hypotheses]
    scored.sort(key=lambda item: (-item[1], -item[2], item[0].index))
    return [(concept, count) for concept, count, _ in scored]


def _branch_shares(
    corpus: Sequence[Trajectory], kind: StepKind, concepts: Sequence[ConceptId]
) -> List[dict]:
    """Successor-kind shares over corpus steps matching the current step.

    A step matches when it has the same kind and shares at least one
    concept; when nothing matches, every step with a successor counts.
    """
    wanted = {(c.domain, c.index) for c in concepts}

    def tally(match_all: bool) -> Dict[StepKind, int]:
        counts = {StepKind.DIPLOMA: 0, StepKind.JOB: 0}
        for trajectory in corpus:
            steps = trajectory.steps
            for i in range(len(steps) - 1):
                step = steps[i]
                if not match_all:
                    if step.kind is not kind:
                        continue
                    if not wanted & {(c.domain, c.index) for c in step.concepts}:
                        continue
                counts[steps[i + 1].kind] += 1
        return counts

    counts = tally(match_all=False)
    total = counts[StepKind.DIPLOMA] + counts[StepKind.JOB]
    if total == 0:
        counts = tally(match_all=True)
        total = counts[StepKind.DIPLOMA] + counts[StepKind.JOB]
    out = []
    for branch, branch_kind in (
        (BRANCH_FURTHER_STUDIES, StepKind.DIPLOMA),
        (BRANCH_JOB, StepKind.JOB),
    ):
        n = counts[branch_kind]
        out.append(
            {
                "branch": branch,
                "target_kind": branch_kind.value,
                "count": n,
                "share": n / total if total else 0.0,
            }
        )
    return out


def _concept_dict(concept: ConceptId) -> dict:
    return {
        "domain": concept.domain.value,
        "index": concept.index,
        "label": concept.label,
    }


# --- app ----------------------------------------------------------------------


def create_app(
    corpus: Optional[Sequence[Trajectory]] = None,
    taxonomies: Optional[Mapping[StepKind, Taxonomy]] = None,
) -> FastAPI:
    state = ServiceState(corpus=corpus, taxonomies=taxonomies)
    app = FastAPI(title="nextstep", docs_url=None, redoc_url=None)
    app.state.store = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "bad_request", "message": "malformed request body"}},
        )

    @app.get("/api/v1/health")
    async def health():
        return {"status": "ok", "corpus_loaded": state._snapshot is not None}

    @app.get("/api/v1/stats")
    async def stats():
        snapshot = state.snapshot()
        return corpus_stats(snapshot.corpus).to_dict()

    @app.get("/api/v1/concepts")
    async def concepts(domain: Optional[str] = None):
        if domain is None:
            raise _bad_request("domain query parameter is required", "bad_domain")
        kind = _parse_kind(domain, "domain")
        taxonomy = state.taxonomies[kind]
        return {
            "domain": kind.value,
            "concepts": [_concept_dict(c) for c in taxonomy.concepts],
        }

    @app.post("/api/v1/options")
    async def options(payload: dict = Body(...)):
        snapshot = state.snapshot()
        branch = _require(payload, "branch")
        if branch not in _BRANCH_KIND:
            raise _bad_request(
                f"branch must be {BRANCH_FURTHER_STUDIES!r} or {BRANCH_JOB!r}",
                "bad_branch",
            )
        target_kind = _BRANCH_KIND[branch]
        kind, context, title = _parse_current_step(
            _require(payload, "current_step"), snapshot.taxonomies
        )
        page = payload.get("page", 0)
        if not isinstance(page, int) or isinstance(page, bool) or page < 0:
            raise _bad_request("page must be a non-negative integer", "bad_page")

        goal = payload.get("goal")
        if goal is not None:
            goal_concept = _parse_concept(goal, snapshot.taxonomies)
            ranked = _goal_ranked(snapshot, target_kind, context, goal_concept)
        else:
            prediction = rank(
                snapshot.by_current[target_kind],
                context,
                snapshot.taxonomies[target_kind],
                method=Method.PREVIOUS_STEP,
            )
            ranked = [(h.concept, h.count) for h in prediction.hypotheses]

        start = page * PACK_SIZE
        pack = ranked[start : start + PACK_SIZE]
        return {
            "context_step": {
                "kind": kind.value,
                "title": title,
                "concepts": [_concept_dict(c) for c in context],
            },
            "branches": _branch_shares(snapshot.corpus, kind, context),
            "top_concepts": [
                {**_concept_dict(concept), "count": count} for concept, count in pack
            ],
            "more_available": start + PACK_SIZE < len(ranked),
            "page": page,
        }

    @app.post("/api/v1/evaluate")
    async def submit_evaluate(payload: dict = Body(...)):
        state.snapshot()  # 409 before accepting the job
        try:
            target_kind = StepKind.parse(str(_require(payload, "target_kind")))
            method = Method.parse(str(_require(payload, "method")))
        except ValueError as exc:
            raise _bad_request(str(exc)) from None
        params_data = payload.get("params") or {}
        if not isinstance(params_data, Mapping):
            raise _bad_request("params must be an object")
        allowed = {"alpha", "pack_size", "pack_penalty", "rank_mode"}
        unknown = set(params_data) - allowed
        if unknown:
            raise _bad_request(f"unknown params: {sorted(unknown)}")
        try:
            params = ScoreParams(**params_data)
        except (InvalidParamsError, TypeError) as exc:
            raise _bad_request(str(exc)) from None
        jobs = payload.get("jobs", 1)
        if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 1:
            raise _bad_request("jobs must be a positive integer")
        job = state.submit_evaluation(target_kind, method, params, jobs)
        return JSONResponse(
            status_code=202, content={"job_id": job.job_id, "status": job.status}
        )

    @app.get("/api/v1/evaluate/{job_id}")
    async def poll_evaluate(job_id: str):
        job = state.job(job_id)
        if job is None:
            raise ServiceError(404, "unknown_job", f"no evaluation job {job_id!r}")
        body = {"job_id": job.job_id, "status": job.status}
        if job.status == "done":
            body["report"] = job.report
        if job.status == "failed":
            body["error_message"] = job.error
        return body

    return app
