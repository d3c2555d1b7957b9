"""Core domain records: reviews, entities, behaviors, embeddings, adjudications.

All types are immutable values, safe to share between concurrent tasks.
Timestamps are integer Unix seconds (UTC) so time-window arithmetic is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ENTITY_TYPES = frozenset({"user", "device", "ip", "item"})
RELATIONS = frozenset({"posted", "logged_in_from", "connected_via", "attached_to"})
VERDICTS = frozenset({"fraudulent", "genuine", "inconclusive"})
RISK_LEVELS = frozenset({"low", "medium", "high"})
SOURCES = frozenset({"model", "mock", "human_override"})
LABELS = frozenset({"genuine", "deceptive"})
DECISIONS = frozenset({"adopted", "rejected"})

#: ingestion accepts timestamps up to this far past the ingestion clock
CLOCK_SKEW_SECONDS = 24 * 3600


def _require(condition: bool, message: str, field_name: str) -> None:
    if not condition:
        raise ValidationError(message, field=field_name)


def _check_timestamp(value, field_name: str) -> None:
    _require(isinstance(value, int) and not isinstance(value, bool),
             f"{field_name} must be integer Unix seconds", field_name)


@dataclass(frozen=True, order=True)
class EntityRef:
    """Identity of a non-review node: (entity_type, entity_id)."""

    entity_type: str
    entity_id: str

    def __post_init__(self):
        _require(self.entity_type in ENTITY_TYPES,
                 f"entity_type must be one of {sorted(ENTITY_TYPES)}", "entity_type")
        _require(bool(self.entity_id), "entity_id must be non-empty", "entity_id")

    @property
    def node_key(self) -> str:
        return f"{self.entity_type}:{self.entity_id}"

    def to_dict(self) -> dict:
        return {"entity_id": self.entity_id, "entity_type": self.entity_type}

    @classmethod
    def from_dict(cls, d: dict) -> "EntityRef":
        return cls(entity_type=d["entity_type"], entity_id=d["entity_id"])


@dataclass(frozen=True)
class Review:
    """One user-visible review; the unit of adjudication.

    ``label`` is a ground-truth tag carried only by synthetic/eval data; it is
    stripped before anything reaches the reasoner or leaves the service.
    """

    review_id: str
    item_id: str
    user_id: str
    text: str
    image_refs: tuple[str, ...] = ()
    created_at: int = 0
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "image_refs", tuple(self.image_refs))
        _require(bool(self.review_id), "review_id must be non-empty", "review_id")
        _require(bool(self.item_id), "item_id must be non-empty", "item_id")
        _require(bool(self.user_id), "user_id must be non-empty", "user_id")
        _check_timestamp(self.created_at, "created_at")
        _require(all(r for r in self.image_refs),
                 "image_refs entries must be non-empty", "image_refs")
        if not self.text:
            _require(bool(self.image_refs),
                     "text may be empty only if image_refs is non-empty", "text")
        if self.label is not None:
            _require(self.label in LABELS,
                     f"label must be one of {sorted(LABELS)}", "label")

    def to_dict(self, include_label: bool = True) -> dict:
        d = {
            "created_at": self.created_at,
            "image_refs": list(self.image_refs),
            "item_id": self.item_id,
            "review_id": self.review_id,
            "text": self.text,
            "user_id": self.user_id,
        }
        if include_label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Review":
        return cls(
            review_id=d["review_id"],
            item_id=d["item_id"],
            user_id=d["user_id"],
            text=d["text"],
            image_refs=tuple(d.get("image_refs", ())),
            created_at=d["created_at"],
            label=d.get("label"),
        )


def validate_for_ingest(review: Review, now: int,
                        skew: int = CLOCK_SKEW_SECONDS) -> None:
    """Reject reviews stamped beyond the ingestion clock plus skew allowance."""
    if review.created_at > now + skew:
        raise ValidationError(
            f"created_at {review.created_at} is in the future relative to "
            f"ingestion clock {now} (+{skew}s skew allowance)",
            field="created_at")


def _endpoint_to_jsonable(value):
    return value.to_dict() if isinstance(value, EntityRef) else value


def _endpoint_from_jsonable(value):
    return EntityRef.from_dict(value) if isinstance(value, dict) else value


@dataclass(frozen=True)
class BehaviorRecord:
    """One behavioral relation between entities and/or reviews.

    Review endpoints are plain review-id strings (a review is not an entity
    type, but ``posted`` and ``attached_to`` need one review endpoint).
    The relation/type combinations are checked by :func:`validate_behavior`,
    not at construction, so invalid records can be inspected and rejected.
    """

    subject: "EntityRef | str"
    relation: str
    obj: "EntityRef | str"
    observed_at: int = 0

    def __post_init__(self):
        _require(self.relation in RELATIONS,
                 f"relation must be one of {sorted(RELATIONS)}", "relation")
        for name, end in (("subject", self.subject), ("object", self.obj)):
            _require(isinstance(end, (EntityRef, str)) and bool(end),
                     f"{name} must be an EntityRef or a review id", name)
        _check_timestamp(self.observed_at, "observed_at")

    def to_dict(self) -> dict:
        return {
            "object": _endpoint_to_jsonable(self.obj),
            "observed_at": self.observed_at,
            "relation": self.relation,
            "subject": _endpoint_to_jsonable(self.subject),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BehaviorRecord":
        return cls(
            subject=_endpoint_from_jsonable(d["subject"]),
            relation=d["relation"],
            obj=_endpoint_from_jsonable(d["object"]),
            observed_at=d["observed_at"],
        )


_BEHAVIOR_RULES = {
    # relation: (subject requirement, object requirement)
    "posted": ("user", "review"),
    "logged_in_from": ("user", "device"),
    "connected_via": ("user", "ip"),
    "attached_to": ("review", "item"),
}


def _endpoint_kind(end) -> str:
    return end.entity_type if isinstance(end, EntityRef) else "review"


def validate_behavior(record: BehaviorRecord) -> None:
    """Check the relation/type constraints; raises ValidationError naming them."""
    want_subject, want_object = _BEHAVIOR_RULES[record.relation]
    if _endpoint_kind(record.subject) != want_subject:
        raise ValidationError(
            f"{record.relation} requires {want_subject} subject", field="subject")
    if _endpoint_kind(record.obj) != want_object:
        raise ValidationError(
            f"{record.relation} requires {want_object} object", field="object")


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """Dense vector + sparse term weights + augmented text for one review."""

    review_id: str
    dense: np.ndarray
    sparse: dict[str, float]
    augmented_text: str
    indexed_at: int = 0

    def __post_init__(self):
        arr = np.asarray(self.dense, dtype=np.float64)
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "dense", arr)
        object.__setattr__(self, "sparse", dict(self.sparse))
        _require(bool(self.review_id), "review_id must be non-empty", "review_id")
        _require(arr.ndim == 1 and arr.size > 0,
                 "dense must be a non-empty vector", "dense")
        norm = float(np.linalg.norm(arr))
        _require(abs(norm - 1.0) <= 1e-6,
                 f"dense must have unit L2 norm (got {norm!r})", "dense")
        for term, weight in self.sparse.items():
            _require(isinstance(term, str) and term != "",
                     "sparse terms must be non-empty strings", "sparse")
            _require(math.isfinite(weight) and weight >= 0.0,
                     f"sparse weight for {term!r} must be finite and >= 0", "sparse")
        _check_timestamp(self.indexed_at, "indexed_at")

    def to_dict(self) -> dict:
        return {
            "augmented_text": self.augmented_text,
            "dense": [float(x) for x in self.dense],
            "indexed_at": self.indexed_at,
            "review_id": self.review_id,
            "sparse": {t: float(w) for t, w in self.sparse.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingRecord":
        return cls(
            review_id=d["review_id"],
            dense=np.asarray(d["dense"], dtype=np.float64),
            sparse=dict(d["sparse"]),
            augmented_text=d["augmented_text"],
            indexed_at=d["indexed_at"],
        )


@dataclass(frozen=True)
class Adjudication:
    """Structured output of the reasoner: verdict, risk, evidence chains."""

    review_id: str
    verdict: str
    risk_level: str
    evidence_chains: tuple[str, ...] = ()
    source: str = "mock"
    created_at: int = 0

    def __post_init__(self):
        object.__setattr__(self, "evidence_chains", tuple(self.evidence_chains))
        _require(bool(self.review_id), "review_id must be non-empty", "review_id")
        _require(self.verdict in VERDICTS,
                 f"verdict must be one of {sorted(VERDICTS)}", "verdict")
        _require(self.risk_level in RISK_LEVELS,
                 f"risk_level must be one of {sorted(RISK_LEVELS)}", "risk_level")
        _require(self.source in SOURCES,
                 f"source must be one of {sorted(SOURCES)}", "source")
        _check_timestamp(self.created_at, "created_at")
        if self.verdict == "fraudulent":
            _require(self.risk_level in ("medium", "high"),
                     "fraudulent verdict requires medium or high risk_level",
                     "risk_level")
            _require(bool(self.evidence_chains),
                     "fraudulent verdict requires non-empty evidence_chains",
                     "evidence_chains")

    def to_dict(self) -> dict:
        return {
            "created_at": self.created_at,
            "evidence_chains": list(self.evidence_chains),
            "review_id": self.review_id,
            "risk_level": self.risk_level,
            "source": self.source,
            "verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Adjudication":
        return cls(
            review_id=d["review_id"],
            verdict=d["verdict"],
            risk_level=d["risk_level"],
            evidence_chains=tuple(d["evidence_chains"]),
            source=d["source"],
            created_at=d["created_at"],
        )


@dataclass(frozen=True)
class AuditorDecision:
    """A human auditor's adopt/reject call on one adjudication."""

    adjudication_id: str
    decision: str
    auditor_id: str
    note: str | None = None
    decided_at: int = 0

    def __post_init__(self):
        _require(bool(self.adjudication_id),
                 "adjudication_id must be non-empty", "adjudication_id")
        _require(self.decision in DECISIONS,
                 f"decision must be one of {sorted(DECISIONS)}", "decision")
        _require(bool(self.auditor_id), "auditor_id must be non-empty", "auditor_id")
        _check_timestamp(self.decided_at, "decided_at")

    def to_dict(self) -> dict:
        return {
            "adjudication_id": self.adjudication_id,
            "auditor_id": self.auditor_id,
            "decided_at": self.decided_at,
            "decision": self.decision,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditorDecision":
        return cls(
            adjudication_id=d["adjudication_id"],
            decision=d["decision"],
            auditor_id=d["auditor_id"],
            note=d.get("note"),
            decided_at=d["decided_at"],
        )
