"""HTTP service and its engine: ingestion, adjudication, auditor decisions.

``ServiceCore`` owns the stores and pipeline and is used directly by the CLI
subcommands; ``create_app`` wraps it in a FastAPI app. All writes go through
per-store append logs (see storage), so a restart replays every committed
record. Errors surface as problem-detail objects {code, message, field}.

Ground-truth labels are accepted on ingest (synthetic corpora carry them)
but are stripped from every response.
"""

from __future__ import annotations

import os
import threading
import time
from pathlib import Path

from fastapi import Body, Depends, FastAPI, Header, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .detector import ReviewFraudDetector, make_llm_endpoint
from .encoders import ENV_URLS, EncoderGateway
from .errors import (
    AdjudicationUnavailableError,
    EncoderUnavailableError,
    ValidationError,
)
from .records import AuditorDecision, Review, validate_for_ingest
from .storage import BehaviorStore, ReviewStore, append_jsonl, read_jsonl
from .records import BehaviorRecord

DEFAULT_ADJUDICATION_SLOTS = 4


class ServiceCore:
    """Engine behind the HTTP API and the CLI subcommands."""

    def __init__(self, data_dir: str | Path, detector_params: dict | None = None,
                 encoders: str = "mock", adjudicator: str = "mock",
                 now_fn=None, adjudication_slots: int = DEFAULT_ADJUDICATION_SLOTS):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._now_fn = now_fn or (lambda: int(time.time()))
        params = dict(detector_params or {})
        gateway = params.pop("gateway", None) or EncoderGateway.from_env(
            encoders, dense_dim=params.get("dense_dim", 256))
        llm_endpoint = params.pop("llm_endpoint", None)
        if adjudicator == "remote" and llm_endpoint is None:
            url = os.environ.get(ENV_URLS["llm"])
            if not url:
                raise ValidationError(
                    f"{ENV_URLS['llm']} must be set for --adjudicator=remote",
                    ENV_URLS["llm"])
            llm_endpoint = make_llm_endpoint(url)
        self.detector = ReviewFraudDetector(
            adjudicator=adjudicator, gateway=gateway,
            llm_endpoint=llm_endpoint, **params)
        self.detector.fit(
            None,
            review_store=ReviewStore(self.data_dir / "reviews.log"),
            behavior_store=BehaviorStore(self.data_dir / "behaviors.log"),
            index_storage_dir=self.data_dir / "index")
        self._cases: dict[str, dict] = {}
        self._case_counts: dict[str, int] = {}
        self._decisions: dict[str, list[AuditorDecision]] = {}
        self._pending_embeddings: set[str] = set(self.detector.unembedded_)
        self._write_lock = threading.Lock()
        self._slots = threading.Semaphore(adjudication_slots)
        for entry in read_jsonl(self.data_dir / "cases.log"):
            case = entry["case"]
            self._cases[case["case_id"]] = case
            rid = case["review"]["review_id"]
            self._case_counts[rid] = self._case_counts.get(rid, 0) + 1
        for entry in read_jsonl(self.data_dir / "decisions.log"):
            decision = AuditorDecision.from_dict(entry)
            self._decisions.setdefault(decision.adjudication_id, []).append(decision)

    def now(self) -> int:
        return int(self._now_fn())

    # -- ingestion -----------------------------------------------------------

    def ingest_review(self, review: Review) -> tuple[bool, str]:
        """Persist and embed one review; returns (created, review_id).

        Idempotent on identical re-posts. If the encoder is unavailable the
        review stays persisted, the embedding is queued, and the error
        propagates.
        """
        validate_for_ingest(review, self.now())
        existing = self.detector.review_store_.get(review.review_id)
        created = existing is None
        if created:
            self.detector.review_store_.add(review)
        elif existing != review:
            raise ValidationError(
                f"review_id {review.review_id!r} already exists with "
                "different content", field="review_id")
        try:
            self.ensure_embedded(review.review_id)
            self.retry_pending()
        except EncoderUnavailableError:
            self._pending_embeddings.add(review.review_id)
            raise
        return created, review.review_id

    def ingest_behavior(self, record: BehaviorRecord) -> None:
        self.detector.behavior_store_.add(record)

    def ensure_embedded(self, review_id: str) -> None:
        if review_id in self.detector.index_:
            return
        review = self.detector.review_store_.get(review_id)
        record = self.detector.embed_review(review, indexed_at=self.now())
        self.detector.index_.upsert(record)
        self._pending_embeddings.discard(review_id)

    def retry_pending(self) -> None:
        for review_id in sorted(self._pending_embeddings):
            try:
                self.ensure_embedded(review_id)
            except EncoderUnavailableError:
                return  # still down; the queue keeps the rest

    def evict_window(self, now: int | None = None) -> int:
        return self.detector.index_.evict_older_than(
            self.now() if now is None else now)

    # -- adjudication ----------------------------------------------------------

    def adjudicate(self, review_id: str) -> dict:
        if review_id not in self.detector.review_store_:
            raise KeyError(review_id)
        self.ensure_embedded(review_id)
        with self._slots:
            result = self.detector.adjudicate(review_id, now=self.now())
        with self._write_lock:
            seq = self._case_counts.get(review_id, 0) + 1
            self._case_counts[review_id] = seq
            case_id = f"{review_id}:{seq}"
            review = self.detector.review_store_.get(review_id)
            case = {
                "adjudication": result.adjudication.to_dict(),
                "case_id": case_id,
                "created_at": self.now(),
                "graph": result.graph.to_export_dict(),
                "review": review.to_dict(include_label=False),
                "timings": {k: round(v, 6) for k, v in result.timings.items()},
            }
            append_jsonl(self.data_dir / "cases.log", {"case": case})
            self._cases[case_id] = case
        return self.get_case(case_id)

    def get_case(self, case_id: str) -> dict | None:
        case = self._cases.get(case_id)
        if case is None:
            return None
        history = [d.to_dict() for d in self._decisions.get(case_id, ())]
        out = dict(case)
        out["decision"] = history[-1] if history else None
        out["decision_history"] = history
        return out

    def get_graph(self, case_id: str) -> dict | None:
        case = self._cases.get(case_id)
        return case["graph"] if case is not None else None

    # -- auditor decisions -------------------------------------------------------

    def record_decision(self, case_id: str, decision: str, auditor_id: str,
                        note: str | None = None) -> AuditorDecision:
        if case_id not in self._cases:
            raise KeyError(case_id)
        record = AuditorDecision(adjudication_id=case_id, decision=decision,
                                 auditor_id=auditor_id, note=note,
                                 decided_at=self.now())
        with self._write_lock:
            append_jsonl(self.data_dir / "decisions.log", record.to_dict())
            self._decisions.setdefault(case_id, []).append(record)
        return record

    def adoption_metrics(self) -> dict:
        adopted = rejected = 0
        for history in self._decisions.values():
            latest = history[-1].decision
            if latest == "adopted":
                adopted += 1
            else:
                rejected += 1
        decided = adopted + rejected
        rate = adopted / decided if decided else None
        return {"adopted": adopted, "adoption_rate": rate, "decided": decided,
                "rejected": rejected}

    def stats(self) -> dict:
        return {
            "cases": len(self._cases),
            "indexed": len(self.detector.index_),
            "pending_embeddings": len(self._pending_embeddings),
            "reviews": len(self.detector.review_store_),
        }


def _problem(status: int, code: str, message: str,
             field: str | None = None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message,
                                 "field": field})


def create_app(core: ServiceCore, token: str | None = None,
               console_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="jarvis", version="0.1.0")

    async def require_token(authorization: str | None = Header(default=None)):
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid bearer token")

    guarded = [Depends(require_token)]

    @app.exception_handler(ValidationError)
    async def _validation_handler(_request, exc: ValidationError):
        already_exists = exc.field == "review_id" and "already exists" in str(exc)
        return _problem(409 if already_exists else 400, "validation",
                        str(exc), exc.field)

    @app.exception_handler(EncoderUnavailableError)
    async def _encoder_handler(_request, exc):
        return _problem(503, "encoder-unavailable", str(exc))

    @app.exception_handler(AdjudicationUnavailableError)
    async def _adjudicator_handler(_request, exc):
        return _problem(503, "adjudication-unavailable", str(exc))

    @app.post("/reviews", dependencies=guarded)
    def ingest_review(payload: dict = Body(...)):
        review = Review.from_dict(payload)
        created, review_id = core.ingest_review(review)
        return JSONResponse(status_code=201 if created else 200,
                            content={"review_id": review_id})

    @app.post("/behaviors", dependencies=guarded)
    def ingest_behavior(payload: dict = Body(...)):
        core.ingest_behavior(BehaviorRecord.from_dict(payload))
        return JSONResponse(status_code=201, content={"status": "ok"})

    @app.post("/adjudications", dependencies=guarded)
    def adjudicate(payload: dict = Body(...)):
        review_id = payload.get("review_id")
        if not review_id:
            return _problem(400, "validation", "review_id is required",
                            "review_id")
        try:
            case = core.adjudicate(review_id)
        except KeyError:
            return _problem(404, "not-found", f"unknown review {review_id!r}",
                            "review_id")
        return JSONResponse(status_code=201, content=case)

    @app.get("/cases/{case_id}", dependencies=guarded)
    def get_case(case_id: str):
        case = core.get_case(case_id)
        if case is None:
            return _problem(404, "not-found", f"unknown case {case_id!r}")
        return case

    @app.get("/cases/{case_id}/graph", dependencies=guarded)
    def get_case_graph(case_id: str):
        graph = core.get_graph(case_id)
        if graph is None:
            return _problem(404, "not-found", f"unknown case {case_id!r}")
        return graph

    @app.post("/cases/{case_id}/decision", dependencies=guarded)
    def record_decision(case_id: str, payload: dict = Body(...)):
        try:
            record = core.record_decision(
                case_id,
                decision=payload.get("decision", ""),
                auditor_id=payload.get("auditor_id", ""),
                note=payload.get("note"))
        except KeyError:
            return _problem(404, "not-found", f"unknown case {case_id!r}")
        history = core.get_case(case_id)["decision_history"]
        return {"decision": record.to_dict(), "history_length": len(history)}

    @app.get("/metrics/adoption", dependencies=guarded)
    def adoption():
        return core.adoption_metrics()

    @app.get("/healthz")
    def health():
        return {"status": "ok", **core.stats()}

    if console_dir and Path(console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=str(console_dir),
                                          html=True), name="console")

    return app
