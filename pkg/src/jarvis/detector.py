"""sklearn-style detector facade over the full adjudication pipeline.

``fit`` ingests a corpus (reviews embedded and indexed, behaviors indexed);
``predict`` adjudicates reviews and maps verdicts onto deceptive/genuine
labels; ``adjudicate`` exposes the full case (graph, paths, prompt,
adjudication, timings). Parameters follow the sklearn contract, so
``get_params``/``set_params``/``clone`` drive ablation sweeps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .encoders import (
    IMAGE_DELIMITER,
    EncoderEndpointConfig,
    EncoderGateway,
)
from .errors import EncoderUnavailableError, ValidationError
from .graph import EvidenceGraph, GraphConfig, build_evidence_graph
from .index import HybridIndex, IndexConfig
from .reasoner import (
    EvidencePath,
    PromptBundle,
    adjudicate_llm,
    adjudicate_mock,
    assemble_prompt,
    retrieve_evidence_with_truncation,
)
from .records import Adjudication, EmbeddingRecord, Review
from .storage import BehaviorStore, ReviewStore
from .synth import Corpus
from .validation import as_behavior_list, as_review_list


@dataclass(frozen=True)
class CaseResult:
    """Everything one adjudication produced, stage timings included."""

    review_id: str
    graph: EvidenceGraph
    paths: tuple[EvidencePath, ...]
    paths_truncated: bool
    bundle: PromptBundle
    adjudication: Adjudication
    timings: dict[str, float]


class ReviewFraudDetector(BaseEstimator):
    """Hybrid-retrieval + evidence-graph review fraud detector.

    The ``disable_*`` switches implement ablations: ``disable_dense`` /
    ``disable_sparse`` pin the retrieval mix to one side, ``disable_image``
    drops image descriptions from augmentation and embedding,
    ``disable_review_nodes`` seeds graphs with the meta review alone, and
    ``disable_entity_nodes`` skips entity/review expansion.
    """

    def __init__(self, lambda_=0.5, top_k=25, window_days=30,
                 rr_edge_threshold=0.3, dense_dim=256,
                 delta_t_seconds=259200, max_reviews_per_entity=50,
                 max_paths=40, disable_dense=False, disable_sparse=False,
                 disable_image=False, disable_review_nodes=False,
                 disable_entity_nodes=False, adjudicator="mock",
                 llm_endpoint=None, gateway=None):
        self.lambda_ = lambda_
        self.top_k = top_k
        self.window_days = window_days
        self.rr_edge_threshold = rr_edge_threshold
        self.dense_dim = dense_dim
        self.delta_t_seconds = delta_t_seconds
        self.max_reviews_per_entity = max_reviews_per_entity
        self.max_paths = max_paths
        self.disable_dense = disable_dense
        self.disable_sparse = disable_sparse
        self.disable_image = disable_image
        self.disable_review_nodes = disable_review_nodes
        self.disable_entity_nodes = disable_entity_nodes
        self.adjudicator = adjudicator
        self.llm_endpoint = llm_endpoint
        self.gateway = gateway

    # -- configuration --------------------------------------------------------

    def effective_lambda(self) -> float:
        if self.disable_dense and self.disable_sparse:
            raise ValidationError(
                "disable_dense and disable_sparse cannot both be set",
                "disable_dense")
        if self.disable_dense:
            return 0.0
        if self.disable_sparse:
            return 1.0
        return self.lambda_

    def index_config(self) -> IndexConfig:
        return IndexConfig(lambda_=self.effective_lambda(), k=self.top_k,
                           window_days=self.window_days,
                           rr_edge_threshold=self.rr_edge_threshold,
                           dense_dim=self.dense_dim)

    def graph_config(self) -> GraphConfig:
        return GraphConfig(delta_t_seconds=self.delta_t_seconds,
                           max_reviews_per_entity=self.max_reviews_per_entity,
                           rr_edge_threshold=self.rr_edge_threshold)

    # -- fitting ---------------------------------------------------------------

    def fit(self, X, y=None, behaviors=None, review_store=None,
            behavior_store=None, index_storage_dir=None):
        """Ingest a corpus: X is a Corpus or a sequence of Review.

        Pre-built stores may be supplied (the service passes log-backed ones);
        reviews already present in them are embedded if the index lacks them.
        """
        self.gateway_ = self.gateway or EncoderGateway.mock(dense_dim=self.dense_dim)
        self.index_ = HybridIndex(self.index_config(),
                                  storage_dir=index_storage_dir)
        # explicit None checks: an empty store is falsy
        self.review_store_ = ReviewStore() if review_store is None else review_store
        self.behavior_store_ = (BehaviorStore() if behavior_store is None
                                else behavior_store)
        # reconcile pre-seeded stores with the index (e.g. a crash landed
        # between persisting a review and logging its embedding); an encoder
        # outage here queues rather than failing the whole fit
        self.unembedded_ = []
        for review in self.review_store_.all():
            if review.review_id not in self.index_:
                try:
                    self.index_.upsert(self.embed_review(review))
                except EncoderUnavailableError:
                    self.unembedded_.append(review.review_id)
        return self.partial_fit(X, behaviors=behaviors)

    def partial_fit(self, X, behaviors=None):
        if not hasattr(self, "index_"):
            return self.fit(X, behaviors=behaviors)
        reviews, extracted = _unpack_corpus(X)
        for review in as_review_list(reviews):
            self.ingest(review)
        for record in as_behavior_list(extracted if behaviors is None
                                       else behaviors):
            self.behavior_store_.add(record)
        return self

    def ingest(self, review: Review, indexed_at: int | None = None) -> EmbeddingRecord:
        """Store one review and upsert its embedding; returns the record."""
        self.review_store_.add(review)
        record = self.embed_review(review, indexed_at=indexed_at)
        self.index_.upsert(record)
        return record

    def embed_review(self, review: Review,
                     indexed_at: int | None = None) -> EmbeddingRecord:
        refs = () if self.disable_image else review.image_refs
        descriptions = [self.gateway_.describe_image(r) for r in refs]
        augmented = IMAGE_DELIMITER.join([review.text, *descriptions])
        if augmented:
            dense = self.gateway_.embed_dense(review.text, refs)
            sparse = self.gateway_.embed_sparse(augmented)
        else:
            # image-only review with images ablated away: nothing to encode
            dense = np.zeros(self.dense_dim)
            dense[0] = 1.0
            sparse = {}
        return EmbeddingRecord(
            review_id=review.review_id, dense=dense, sparse=sparse,
            augmented_text=augmented,
            indexed_at=review.created_at if indexed_at is None else indexed_at)

    # -- prediction --------------------------------------------------------------

    def _check_fitted(self) -> None:
        if not hasattr(self, "index_"):
            raise NotFittedError(
                "this ReviewFraudDetector is not fitted yet; call fit first")

    def adjudicate(self, review_id: str, now: int = 0) -> CaseResult:
        """Run the full pipeline for one ingested review."""
        self._check_fitted()
        review = self.review_store_.get(review_id)
        if review is None:
            raise ValidationError(f"unknown review {review_id!r}", "review_id")
        timings: dict[str, float] = {}

        t0 = time.perf_counter()
        graph = build_evidence_graph(
            review, self.index_, self.behavior_store_, self.review_store_,
            self.graph_config(), k=self.top_k, lambda_=self.effective_lambda(),
            include_candidates=not self.disable_review_nodes,
            include_entities=not self.disable_entity_nodes)
        timings["graph"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        ranked, truncated = retrieve_evidence_with_truncation(
            graph, max_paths=self.max_paths)
        paths = tuple(ranked)
        timings["paths"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        refs = () if self.disable_image else review.image_refs
        descriptions = [self.gateway_.describe_image(r) for r in refs]
        bundle = assemble_prompt(graph, list(paths), review,
                                 review_store=self.review_store_,
                                 meta_image_descriptions=descriptions,
                                 paths_truncated=truncated)
        timings["prompt"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if self.adjudicator == "mock":
            adjudication = adjudicate_mock(graph, list(paths), now=now)
        else:
            if self.llm_endpoint is None:
                raise ValidationError(
                    "adjudicator=remote requires llm_endpoint", "llm_endpoint")
            adjudication = adjudicate_llm(bundle, self.llm_endpoint, now=now)
        timings["adjudicate"] = time.perf_counter() - t0

        return CaseResult(review_id=review_id, graph=graph, paths=paths,
                          paths_truncated=truncated, bundle=bundle,
                          adjudication=adjudication, timings=timings)

    def predict(self, X) -> np.ndarray:
        """Deceptive/genuine labels for ingested reviews (ids or Review objects)."""
        self._check_fitted()
        ids = [x.review_id if isinstance(x, Review) else x for x in X]
        labels = []
        for rid in ids:
            verdict = self.adjudicate(rid).adjudication.verdict
            labels.append("deceptive" if verdict == "fraudulent" else "genuine")
        return np.asarray(labels, dtype=object)

    def adjudications(self, X) -> list[Adjudication]:
        self._check_fitted()
        ids = [x.review_id if isinstance(x, Review) else x for x in X]
        return [self.adjudicate(rid).adjudication for rid in ids]


def _unpack_corpus(X):
    if X is None:
        return [], []
    if isinstance(X, Corpus):
        return X.reviews, X.behaviors
    return X, []


def make_llm_endpoint(base_url: str, timeout_ms: int = 30000,
                      max_retries: int = 2) -> EncoderEndpointConfig:
    return EncoderEndpointConfig(kind="llm", mode="remote", base_url=base_url,
                                 timeout_ms=timeout_ms, max_retries=max_retries)
