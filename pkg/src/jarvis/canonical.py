"""Canonical text serialization: sorted keys, no insignificant whitespace.

Every persisted or wire-transferred record uses this form, so hashes and
dedup are stable and byte-identical across runs and processes. The format
is documented field-by-field in docs/canonical_format.md.
"""

from __future__ import annotations

import json

from .errors import ValidationError
from .records import (
    Adjudication,
    AuditorDecision,
    BehaviorRecord,
    EmbeddingRecord,
    Review,
)


def dumps(value) -> bytes:
    """Encode a jsonable value in canonical form (UTF-8 bytes)."""
    try:
        text = json.dumps(value, sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False, allow_nan=False)
    except ValueError as exc:
        raise ValidationError(f"value is not canonically serializable: {exc}") from exc
    return text.encode("utf-8")


def loads(data: bytes | str):
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def serialize_review(review: Review) -> bytes:
    return dumps(review.to_dict())


def deserialize_review(data: bytes | str) -> Review:
    return Review.from_dict(loads(data))


def serialize_behavior(record: BehaviorRecord) -> bytes:
    return dumps(record.to_dict())


def deserialize_behavior(data: bytes | str) -> BehaviorRecord:
    return BehaviorRecord.from_dict(loads(data))


def serialize_embedding(record: EmbeddingRecord) -> bytes:
    return dumps(record.to_dict())


def deserialize_embedding(data: bytes | str) -> EmbeddingRecord:
    return EmbeddingRecord.from_dict(loads(data))


def serialize_adjudication(adjudication: Adjudication) -> bytes:
    return dumps(adjudication.to_dict())


def deserialize_adjudication(data: bytes | str) -> Adjudication:
    return Adjudication.from_dict(loads(data))


def serialize_decision(decision: AuditorDecision) -> bytes:
    return dumps(decision.to_dict())


def deserialize_decision(data: bytes | str) -> AuditorDecision:
    return AuditorDecision.from_dict(loads(data))
