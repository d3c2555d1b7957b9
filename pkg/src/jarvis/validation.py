"""Input validation helpers shared by the estimator, harness, and service."""

from __future__ import annotations

from .errors import ValidationError
from .records import BehaviorRecord, Review


def as_review_list(values) -> list[Review]:
    out = []
    for i, value in enumerate(values):
        if not isinstance(value, Review):
            raise ValidationError(f"element {i} is not a Review", "reviews")
        out.append(value)
    return out


def as_behavior_list(values) -> list[BehaviorRecord]:
    out = []
    for i, value in enumerate(values):
        if not isinstance(value, BehaviorRecord):
            raise ValidationError(f"element {i} is not a BehaviorRecord",
                                  "behaviors")
        out.append(value)
    return out


def check_label_map(labels) -> dict[str, str]:
    if not isinstance(labels, dict):
        raise ValidationError("labels must map review_id -> label", "labels")
    for rid, label in labels.items():
        if label not in ("genuine", "deceptive"):
            raise ValidationError(
                f"label for {rid!r} must be genuine or deceptive", "labels")
    return labels
