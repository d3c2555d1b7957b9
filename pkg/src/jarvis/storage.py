"""In-memory stores with optional append-only log persistence.

Each store keeps a write-ahead append log of canonical-serialized records;
on open, the log is replayed. Appends flush and fsync before returning, so
committed writes survive a crash/restart.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from . import canonical
from .errors import ValidationError
from .records import (
    BehaviorRecord,
    EntityRef,
    Review,
    validate_behavior,
)


def append_jsonl(path: Path, value: dict) -> None:
    with open(path, "ab") as fh:
        fh.write(canonical.dumps(value) + b"\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_jsonl(path: Path):
    if not path.exists():
        return
    with open(path, "rb") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield canonical.loads(line)


class ReviewStore:
    """Reviews keyed by review_id; ids are unique within a corpus."""

    def __init__(self, log_path: str | Path | None = None):
        self._reviews: dict[str, Review] = {}
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path:
            for d in read_jsonl(self._log_path):
                self._add(Review.from_dict(d))

    def _add(self, review: Review) -> None:
        self._reviews[review.review_id] = review

    def add(self, review: Review) -> None:
        with self._lock:
            existing = self._reviews.get(review.review_id)
            if existing is not None and existing != review:
                raise ValidationError(
                    f"review_id {review.review_id!r} already exists with "
                    "different content", field="review_id")
            is_new = existing is None
            self._add(review)
            if is_new and self._log_path:
                append_jsonl(self._log_path, review.to_dict())

    def get(self, review_id: str) -> Review | None:
        return self._reviews.get(review_id)

    def __contains__(self, review_id: str) -> bool:
        return review_id in self._reviews

    def __len__(self) -> int:
        return len(self._reviews)

    def all(self) -> list[Review]:
        return [self._reviews[rid] for rid in sorted(self._reviews)]


class BehaviorStore:
    """Behavior records indexed for one-hop traversal in both directions."""

    def __init__(self, log_path: str | Path | None = None):
        self._records: list[BehaviorRecord] = []
        self._users_of_review: dict[str, set[EntityRef]] = {}
        self._reviews_of_user: dict[EntityRef, set[str]] = {}
        self._items_of_review: dict[str, set[EntityRef]] = {}
        self._reviews_of_item: dict[EntityRef, set[str]] = {}
        self._devices_of_user: dict[EntityRef, set[EntityRef]] = {}
        self._users_of_device: dict[EntityRef, set[EntityRef]] = {}
        self._ips_of_user: dict[EntityRef, set[EntityRef]] = {}
        self._users_of_ip: dict[EntityRef, set[EntityRef]] = {}
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path:
            for d in read_jsonl(self._log_path):
                self._index(BehaviorRecord.from_dict(d))

    def add(self, record: BehaviorRecord) -> None:
        validate_behavior(record)
        with self._lock:
            self._index(record)
            if self._log_path:
                append_jsonl(self._log_path, record.to_dict())

    def add_all(self, records) -> None:
        for record in records:
            self.add(record)

    def _index(self, record: BehaviorRecord) -> None:
        self._records.append(record)
        if record.relation == "posted":
            self._users_of_review.setdefault(record.obj, set()).add(record.subject)
            self._reviews_of_user.setdefault(record.subject, set()).add(record.obj)
        elif record.relation == "attached_to":
            self._items_of_review.setdefault(record.subject, set()).add(record.obj)
            self._reviews_of_item.setdefault(record.obj, set()).add(record.subject)
        elif record.relation == "logged_in_from":
            self._devices_of_user.setdefault(record.subject, set()).add(record.obj)
            self._users_of_device.setdefault(record.obj, set()).add(record.subject)
        elif record.relation == "connected_via":
            self._ips_of_user.setdefault(record.subject, set()).add(record.obj)
            self._users_of_ip.setdefault(record.obj, set()).add(record.subject)

    def __len__(self) -> int:
        return len(self._records)

    def all(self) -> list[BehaviorRecord]:
        return list(self._records)

    def users_who_posted(self, review_id: str) -> list[EntityRef]:
        return sorted(self._users_of_review.get(review_id, ()))

    def items_of_review(self, review_id: str) -> list[EntityRef]:
        return sorted(self._items_of_review.get(review_id, ()))

    def devices_of_user(self, user: EntityRef) -> list[EntityRef]:
        return sorted(self._devices_of_user.get(user, ()))

    def ips_of_user(self, user: EntityRef) -> list[EntityRef]:
        return sorted(self._ips_of_user.get(user, ()))

    def entities_of_review(self, review_id: str) -> list[EntityRef]:
        """Entities one behavior step from a review: author, item, and the
        author's devices and IPs."""
        out: set[EntityRef] = set()
        authors = self._users_of_review.get(review_id, ())
        out.update(authors)
        out.update(self._items_of_review.get(review_id, ()))
        for user in authors:
            out.update(self._devices_of_user.get(user, ()))
            out.update(self._ips_of_user.get(user, ()))
        return sorted(out)

    def reviews_of_entity(self, entity: EntityRef) -> list[str]:
        """Reviews associated with an entity (via the author for device/ip)."""
        if entity.entity_type == "user":
            ids = self._reviews_of_user.get(entity, set())
        elif entity.entity_type == "item":
            ids = self._reviews_of_item.get(entity, set())
        elif entity.entity_type == "device":
            ids = set()
            for user in self._users_of_device.get(entity, ()):
                ids |= self._reviews_of_user.get(user, set())
        else:  # ip
            ids = set()
            for user in self._users_of_ip.get(entity, ()):
                ids |= self._reviews_of_user.get(user, set())
        return sorted(ids)

    def review_links_to(self, review_id: str, entity: EntityRef) -> bool:
        return review_id in set(self.reviews_of_entity(entity))
