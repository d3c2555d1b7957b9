"""The sklearn-style detector facade: params, fitting, prediction."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from jarvis.detector import ReviewFraudDetector
from jarvis.errors import ValidationError
from jarvis.records import Review
from tests.conftest import small_campaign_corpus


@pytest.fixture(scope="module")
def corpus():
    return small_campaign_corpus(seed=41, n_genuine=80, n_colluders=6)


@pytest.fixture(scope="module")
def fitted(corpus):
    # top_k scaled to the tiny fixture corpus (25 of 86 would scoop the
    # colluders into every genuine review's graph)
    return ReviewFraudDetector(rr_edge_threshold=0.5, top_k=10).fit(corpus)


class TestEstimatorContract:
    def test_get_set_params_round_trip(self):
        detector = ReviewFraudDetector(lambda_=0.7, top_k=10)
        params = detector.get_params()
        assert params["lambda_"] == 0.7 and params["top_k"] == 10
        detector.set_params(lambda_=0.2)
        assert detector.lambda_ == 0.2

    def test_clone_preserves_params(self):
        detector = ReviewFraudDetector(disable_image=True, max_paths=7)
        copy = clone(detector)
        assert copy.disable_image and copy.max_paths == 7

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            ReviewFraudDetector().predict(["r1"])

    def test_both_retrieval_sides_disabled_rejected(self):
        detector = ReviewFraudDetector(disable_dense=True, disable_sparse=True)
        with pytest.raises(ValidationError):
            detector.effective_lambda()

    def test_effective_lambda(self):
        assert ReviewFraudDetector(disable_dense=True).effective_lambda() == 0.0
        assert ReviewFraudDetector(disable_sparse=True).effective_lambda() == 1.0
        assert ReviewFraudDetector(lambda_=0.3).effective_lambda() == 0.3


class TestFitPredict:
    def test_fit_ingests_corpus(self, corpus, fitted):
        assert len(fitted.index_) == len(corpus.reviews)
        assert len(fitted.review_store_) == len(corpus.reviews)

    def test_predict_labels(self, corpus, fitted):
        ids = ["r-c0-000", "r-gen-00000"]
        labels = fitted.predict(ids)
        assert isinstance(labels, np.ndarray)
        assert set(labels) <= {"deceptive", "genuine"}
        assert labels[0] == "deceptive"

    def test_predict_accepts_review_objects(self, corpus, fitted):
        labels = fitted.predict(corpus.reviews[:3])
        assert len(labels) == 3

    def test_unknown_review_rejected(self, fitted):
        with pytest.raises(ValidationError):
            fitted.adjudicate("nope")

    def test_case_result_carries_stage_timings(self, fitted):
        case = fitted.adjudicate("r-c0-001")
        assert set(case.timings) == {"graph", "paths", "prompt", "adjudicate"}
        assert all(t >= 0 for t in case.timings.values())

    def test_partial_fit_appends(self, corpus):
        detector = ReviewFraudDetector().fit(corpus.reviews[:5],
                                             behaviors=corpus.behaviors[:20])
        detector.partial_fit(corpus.reviews[5:8])
        assert len(detector.index_) == 8

    def test_disable_image_changes_embeddings(self, corpus):
        review = next(r for r in corpus.reviews if r.image_refs)
        with_images = ReviewFraudDetector().fit([review])
        without = ReviewFraudDetector(disable_image=True).fit([review])
        a = with_images.index_.get(review.review_id)
        b = without.index_.get(review.review_id)
        assert not np.array_equal(a.dense, b.dense)
        assert b.augmented_text == review.text

    def test_disable_review_nodes_seeds_meta_only(self, corpus):
        detector = ReviewFraudDetector(disable_review_nodes=True,
                                       rr_edge_threshold=0.5,
                                       top_k=10).fit(corpus)
        case = detector.adjudicate("r-c0-000")
        roles = set(case.graph.review_roles.values())
        assert "retrieved" not in roles
        assert case.graph.review_roles["r-c0-000"] == "meta"
        # expansion still runs: colluders re-enter via the shared device
        assert "expanded" in roles

    def test_disable_entity_nodes_keeps_reviews_only(self, corpus):
        detector = ReviewFraudDetector(disable_entity_nodes=True).fit(corpus)
        case = detector.adjudicate("r-c0-000")
        assert not case.graph.entity_nodes
        assert set(case.graph.review_roles.values()) <= {"meta", "retrieved"}

    def test_campaign_member_fraudulent_genuine_background_clean(self, fitted):
        assert fitted.adjudicate("r-c0-002").adjudication.verdict == "fraudulent"
        genuine = [f"r-gen-{i:05d}" for i in range(10)]
        verdicts = {fitted.adjudicate(r).adjudication.verdict for r in genuine}
        assert verdicts == {"genuine"}

    def test_prompt_invariant_under_label_stripping(self, corpus, fitted):
        # the real leakage check: ground-truth labels must not influence
        # one byte of the rendered prompt
        stripped = [Review.from_dict(r.to_dict(include_label=False))
                    for r in corpus.reviews]
        blind = ReviewFraudDetector(rr_edge_threshold=0.5, top_k=10).fit(
            stripped, behaviors=corpus.behaviors)
        with_labels = fitted.adjudicate("r-c0-000").bundle.rendered_text
        without = blind.adjudicate("r-c0-000").bundle.rendered_text
        assert with_labels == without
        assert '"label"' not in with_labels

    def test_adjudication_deterministic(self, corpus):
        d1 = ReviewFraudDetector(rr_edge_threshold=0.5, top_k=10).fit(corpus)
        d2 = ReviewFraudDetector(rr_edge_threshold=0.5, top_k=10).fit(corpus)
        c1 = d1.adjudicate("r-c0-003")
        c2 = d2.adjudicate("r-c0-003")
        assert c1.adjudication.to_dict() == c2.adjudication.to_dict()
        assert c1.graph.to_canonical_bytes() == c2.graph.to_canonical_bytes()


class TestIngestValidation:
    def test_fit_rejects_non_reviews(self):
        with pytest.raises(ValidationError):
            ReviewFraudDetector().fit(["not a review"])

    def test_duplicate_id_with_different_content_rejected(self):
        detector = ReviewFraudDetector().fit([])
        detector.ingest(Review(review_id="r1", item_id="i", user_id="u",
                               text="one", created_at=0))
        with pytest.raises(ValidationError):
            detector.ingest(Review(review_id="r1", item_id="i", user_id="u",
                                   text="two", created_at=0))
