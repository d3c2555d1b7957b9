"""Sliding-window store of embedding records with hybrid top-k queries.

Scoring mixes a clamped dense cosine with a normalized sparse dot product:
``s = lambda * dense + (1 - lambda) * sparse``. Retrieval is an exact full
scan (vectorized), not approximate ANN: desk-scale corpora make exactness
affordable and keep the brute-force oracle property testable. An ANN
backend is a documented extension point.

Float-exactness contract: the vectorized query path and the scalar
``hybrid_score`` produce bit-identical scores. Dense similarities use
``np.einsum`` (row-stable, unlike BLAS gemv); sparse dot products
accumulate per query term in sorted term order in both paths.
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import canonical
from .errors import ValidationError
from .records import EmbeddingRecord

_GROW_FACTOR = 2
_MIN_CAPACITY = 64


@dataclass(frozen=True)
class IndexConfig:
    lambda_: float = 0.5
    k: int = 25
    window_days: int = 30
    rr_edge_threshold: float = 0.3
    dense_dim: int = 256

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValidationError("lambda must be in [0,1]", "lambda")
        if self.k < 1:
            raise ValidationError("k must be >= 1", "k")
        if self.window_days < 1:
            raise ValidationError("window_days must be >= 1", "window_days")
        if not 0.0 <= self.rr_edge_threshold <= 1.0:
            raise ValidationError("rr_edge_threshold must be in [0,1]",
                                  "rr_edge_threshold")
        if self.dense_dim < 1:
            raise ValidationError("dense_dim must be >= 1", "dense_dim")

    @property
    def window_seconds(self) -> int:
        return self.window_days * 86400


@dataclass(frozen=True)
class ScoredCandidate:
    review_id: str
    score: float
    dense_component: float
    sparse_component: float

    def __post_init__(self):
        for name in ("score", "dense_component", "sparse_component"):
            value = getattr(self, name)
            if not (math.isfinite(value) and -1e-9 <= value <= 1.0 + 1e-9):
                raise ValidationError(f"{name} must be in [0,1]", name)

    def to_dict(self) -> dict:
        return {
            "dense_component": self.dense_component,
            "review_id": self.review_id,
            "score": self.score,
            "sparse_component": self.sparse_component,
        }


def sparse_norm(weights: dict[str, float]) -> float:
    """L2 norm accumulated in sorted term order (pins the float result)."""
    acc = 0.0
    for term in sorted(weights):
        w = weights[term]
        acc += w * w
    return math.sqrt(acc)


def lexical_score(query: dict[str, float], doc: dict[str, float]) -> float:
    """Normalized sparse dot product; 0.0 when either map is empty."""
    if not query or not doc:
        return 0.0
    denom = sparse_norm(query) * sparse_norm(doc)
    if denom == 0.0:
        return 0.0
    acc = 0.0
    for term in sorted(query):
        if term in doc:
            acc += query[term] * doc[term]
    return min(max(acc / denom, 0.0), 1.0)


def dense_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Raw cosine for unit vectors; einsum keeps it bit-stable vs the scan."""
    return float(np.einsum("j,j->", a, b))


def hybrid_score(query: EmbeddingRecord, doc: EmbeddingRecord,
                 lambda_: float) -> ScoredCandidate:
    """Score one pair: clamped dense cosine mixed with the lexical score."""
    if query.dense.shape != doc.dense.shape:
        raise ValidationError(
            f"dense dimension mismatch: {query.dense.shape} vs {doc.dense.shape}",
            "dense")
    dense = min(max(dense_similarity(doc.dense, query.dense), 0.0), 1.0)
    sparse = lexical_score(query.sparse, doc.sparse)
    score = lambda_ * dense + (1.0 - lambda_) * sparse
    return ScoredCandidate(review_id=doc.review_id, score=score,
                           dense_component=dense, sparse_component=sparse)


class HybridIndex:
    """Exact hybrid-similarity index over a sliding time window.

    Concurrency: many readers or one writer; a single lock serializes
    mutations so queries never observe partially applied upserts.

    Persistence (optional ``storage_dir``): an append-only log of upsert and
    evict operations plus a periodically compacted snapshot, both in the
    canonical serialization. On open, the snapshot is loaded and the log tail
    replayed.
    """

    def __init__(self, config: IndexConfig | None = None,
                 storage_dir: str | Path | None = None,
                 snapshot_every: int = 1000):
        self.config = config or IndexConfig()
        self._lock = threading.RLock()
        self._capacity = _MIN_CAPACITY
        self._size = 0
        self._matrix = np.zeros((self._capacity, self.config.dense_dim))
        self._alive = np.zeros(self._capacity, dtype=bool)
        self._indexed_at = np.zeros(self._capacity, dtype=np.int64)
        self._sparse_norms = np.zeros(self._capacity)
        self._records: list[EmbeddingRecord | None] = [None] * self._capacity
        self._row_of: dict[str, int] = {}
        self._postings: dict[str, tuple[list[int], list[float]]] = {}
        self._postings_arrays: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._dead = 0
        self._snapshot_every = snapshot_every
        self._ops_since_snapshot = 0
        self._storage_dir = Path(storage_dir) if storage_dir else None
        if self._storage_dir:
            self._storage_dir.mkdir(parents=True, exist_ok=True)
            self._replay()

    # -- public API ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._row_of)

    def __contains__(self, review_id: str) -> bool:
        return review_id in self._row_of

    def get(self, review_id: str) -> EmbeddingRecord | None:
        row = self._row_of.get(review_id)
        return self._records[row] if row is not None else None

    def records(self) -> list[EmbeddingRecord]:
        """Live records, ordered by review_id."""
        return [self._records[self._row_of[rid]] for rid in sorted(self._row_of)]

    def upsert(self, record: EmbeddingRecord) -> None:
        if record.dense.shape != (self.config.dense_dim,):
            raise ValidationError(
                f"dense dimension {record.dense.shape[0]} does not match "
                f"index dimension {self.config.dense_dim}", "dense")
        with self._lock:
            self._apply_upsert(record)
            self._log({"op": "upsert", "record": record.to_dict()})

    def evict_older_than(self, now: int) -> int:
        """Drop records with indexed_at strictly older than the window."""
        cutoff = now - self.config.window_seconds
        with self._lock:
            evicted = 0
            for rid, row in list(self._row_of.items()):
                if self._indexed_at[row] < cutoff:
                    self._kill_row(rid, row)
                    evicted += 1
            if evicted:
                self._maybe_compact()
            self._log({"op": "evict", "now": now})
            return evicted

    def query_topk(self, query: EmbeddingRecord, k: int | None = None,
                   lambda_: float | None = None,
                   exclude: frozenset[str] | set[str] = frozenset()
                   ) -> list[ScoredCandidate]:
        """Top-k by hybrid score, ties broken by ascending review_id."""
        if query.dense.shape != (self.config.dense_dim,):
            raise ValidationError("query dense dimension mismatch", "dense")
        k = self.config.k if k is None else k
        lambda_ = self.config.lambda_ if lambda_ is None else lambda_
        with self._lock:
            size = self._size
            if not self._row_of:
                return []
            dense = np.clip(
                np.einsum("ij,j->i", self._matrix[:size], query.dense), 0.0, 1.0)
            sparse = self._sparse_scores(query, size)
            scores = lambda_ * dense + (1.0 - lambda_) * sparse
            mask = self._alive[:size].copy()
            if exclude:
                for rid in exclude:
                    row = self._row_of.get(rid)
                    if row is not None:
                        mask[row] = False
            live_rows = np.nonzero(mask)[0]
            if live_rows.size == 0:
                return []
            picked = _select_topk(scores, live_rows, k)
            out = []
            for row in picked:
                rec = self._records[row]
                out.append(ScoredCandidate(
                    review_id=rec.review_id,
                    score=float(scores[row]),
                    dense_component=float(dense[row]),
                    sparse_component=float(sparse[row])))
            out.sort(key=lambda c: (-c.score, c.review_id))
            return out[:k]

    # -- persistence --------------------------------------------------------

    def save_snapshot(self) -> None:
        if not self._storage_dir:
            return
        with self._lock:
            payload = {
                "dense_dim": self.config.dense_dim,
                "records": [r.to_dict() for r in self.records()],
            }
            tmp = self._storage_dir / "embeddings.snapshot.tmp"
            final = self._storage_dir / "embeddings.snapshot"
            tmp.write_bytes(canonical.dumps(payload))
            tmp.replace(final)
            (self._storage_dir / "embeddings.log").write_bytes(b"")
            self._ops_since_snapshot = 0

    def _log(self, op: dict) -> None:
        if not self._storage_dir:
            return
        with open(self._storage_dir / "embeddings.log", "ab") as fh:
            fh.write(canonical.dumps(op) + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._ops_since_snapshot += 1
        if self._ops_since_snapshot >= self._snapshot_every:
            self.save_snapshot()

    def _replay(self) -> None:
        snapshot = self._storage_dir / "embeddings.snapshot"
        if snapshot.exists():
            payload = canonical.loads(snapshot.read_bytes())
            for rec in payload["records"]:
                self._apply_upsert(EmbeddingRecord.from_dict(rec))
        log = self._storage_dir / "embeddings.log"
        if log.exists():
            with open(log, "rb") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    op = canonical.loads(line)
                    if op["op"] == "upsert":
                        self._apply_upsert(EmbeddingRecord.from_dict(op["record"]))
                    elif op["op"] == "evict":
                        cutoff = op["now"] - self.config.window_seconds
                        for rid, row in list(self._row_of.items()):
                            if self._indexed_at[row] < cutoff:
                                self._kill_row(rid, row)

    # -- internals ----------------------------------------------------------

    def _sparse_scores(self, query: EmbeddingRecord, size: int) -> np.ndarray:
        acc = np.zeros(size)
        q_norm = sparse_norm(query.sparse)
        if q_norm > 0.0:
            # sorted term order matches the scalar path bit-for-bit; rows are
            # unique within one posting list, so fancy-index += is safe
            for term in sorted(query.sparse):
                posting = self._posting_arrays(term)
                if posting is None:
                    continue
                rows, weights = posting
                acc[rows] += query.sparse[term] * weights
        denom = q_norm * self._sparse_norms[:size]
        scores = np.divide(acc, denom, out=np.zeros(size), where=denom > 0.0)
        return np.clip(scores, 0.0, 1.0)

    def _posting_arrays(self, term: str):
        cached = self._postings_arrays.get(term)
        if cached is not None:
            return cached
        raw = self._postings.get(term)
        if raw is None:
            return None
        arrays = (np.asarray(raw[0], dtype=np.intp), np.asarray(raw[1]))
        self._postings_arrays[term] = arrays
        return arrays

    def _apply_upsert(self, record: EmbeddingRecord) -> None:
        old_row = self._row_of.get(record.review_id)
        if old_row is not None:
            self._kill_row(record.review_id, old_row)
        if self._size == self._capacity:
            self._grow()
        row = self._size
        self._size += 1
        self._matrix[row] = record.dense
        self._alive[row] = True
        self._indexed_at[row] = record.indexed_at
        self._sparse_norms[row] = sparse_norm(record.sparse)
        self._records[row] = record
        self._row_of[record.review_id] = row
        for term, weight in record.sparse.items():
            rows, weights = self._postings.setdefault(term, ([], []))
            rows.append(row)
            weights.append(weight)
            self._postings_arrays.pop(term, None)
        if old_row is not None:
            self._maybe_compact()

    def _kill_row(self, review_id: str, row: int) -> None:
        self._alive[row] = False
        self._records[row] = None
        del self._row_of[review_id]
        self._dead += 1

    def _grow(self) -> None:
        new_capacity = max(self._capacity * _GROW_FACTOR, _MIN_CAPACITY)
        matrix = np.zeros((new_capacity, self.config.dense_dim))
        matrix[:self._size] = self._matrix[:self._size]
        self._matrix = matrix
        self._alive = np.concatenate(
            [self._alive, np.zeros(new_capacity - self._capacity, dtype=bool)])
        self._indexed_at = np.concatenate(
            [self._indexed_at,
             np.zeros(new_capacity - self._capacity, dtype=np.int64)])
        self._sparse_norms = np.concatenate(
            [self._sparse_norms, np.zeros(new_capacity - self._capacity)])
        self._records.extend([None] * (new_capacity - self._capacity))
        self._capacity = new_capacity

    def _maybe_compact(self) -> None:
        if self._dead > max(len(self._row_of), _MIN_CAPACITY):
            self.compact()

    def compact(self) -> None:
        """Rebuild dropping dead rows; per-row scores are unaffected."""
        live = self.records()
        self._capacity = max(_MIN_CAPACITY, len(live))
        self._size = 0
        self._dead = 0
        self._matrix = np.zeros((self._capacity, self.config.dense_dim))
        self._alive = np.zeros(self._capacity, dtype=bool)
        self._indexed_at = np.zeros(self._capacity, dtype=np.int64)
        self._sparse_norms = np.zeros(self._capacity)
        self._records = [None] * self._capacity
        self._row_of = {}
        self._postings = {}
        self._postings_arrays = {}
        for rec in live:
            self._apply_upsert(rec)


def _select_topk(scores: np.ndarray, live_rows: np.ndarray, k: int) -> np.ndarray:
    """Rows holding the k best scores (ties included; caller re-sorts)."""
    if k <= 0:
        return live_rows[:0]
    live_scores = scores[live_rows]
    n = live_rows.size
    if n <= k:
        return live_rows
    kth = np.partition(live_scores, n - k)[n - k]
    return live_rows[live_scores >= kth]
