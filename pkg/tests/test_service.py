"""HTTP service: ingestion, adjudication, decisions, persistence, errors."""

import pytest
from fastapi.testclient import TestClient

from jarvis.encoders import EncoderEndpointConfig, EncoderGateway
from jarvis.service import ServiceCore, create_app
from tests.conftest import small_campaign_corpus

NOW = 1_700_000_000 + 40 * 86400  # after every fixture timestamp


def review_payload(rid="r-api-1", text="pleasant surprise overall", **kw):
    payload = {"review_id": rid, "item_id": "i1", "user_id": f"u-{rid}",
               "text": text, "image_refs": [], "created_at": NOW - 3600,
               "label": None}
    payload.update(kw)
    return payload


@pytest.fixture
def core(tmp_path):
    return ServiceCore(tmp_path / "data", now_fn=lambda: NOW,
                       detector_params={"top_k": 10,
                                        "rr_edge_threshold": 0.5})


@pytest.fixture
def client(core):
    return TestClient(create_app(core))


def ingest_corpus(client, corpus):
    for record in corpus.behaviors:
        assert client.post("/behaviors", json=record.to_dict()).status_code == 201
    for review in corpus.reviews:
        reply = client.post("/reviews",
                            json=review.to_dict(include_label=False))
        assert reply.status_code == 201, reply.text


class TestIngest:
    def test_created_then_idempotent(self, client):
        first = client.post("/reviews", json=review_payload())
        assert first.status_code == 201
        again = client.post("/reviews", json=review_payload())
        assert again.status_code == 200
        assert again.json()["review_id"] == first.json()["review_id"]

    def test_conflicting_content_rejected(self, client):
        client.post("/reviews", json=review_payload())
        conflict = client.post("/reviews",
                               json=review_payload(text="different text"))
        assert conflict.status_code == 409
        assert conflict.json()["code"] == "validation"

    def test_future_timestamp_rejected(self, client):
        reply = client.post("/reviews", json=review_payload(
            created_at=NOW + 2 * 86400))
        assert reply.status_code == 400
        body = reply.json()
        assert body["code"] == "validation" and body["field"] == "created_at"

    def test_invalid_payload_is_problem_detail(self, client):
        reply = client.post("/reviews", json=review_payload(text="",
                                                            image_refs=[]))
        assert reply.status_code == 400
        assert set(reply.json()) == {"code", "message", "field"}

    def test_bulk_ingest_count(self, core, client):
        for i in range(1000):
            payload = review_payload(rid=f"r-bulk-{i:04d}",
                                     text=f"bulk review number {i}")
            assert client.post("/reviews", json=payload).status_code == 201
        assert len(core.detector.index_) == 1000

    def test_encoder_outage_persists_review_and_returns_503(self, tmp_path):
        dead = EncoderEndpointConfig(kind="dense", mode="remote",
                                     base_url="http://127.0.0.1:9",
                                     timeout_ms=100, max_retries=0)
        gateway = EncoderGateway(dense=dead)
        core = ServiceCore(tmp_path / "outage", now_fn=lambda: NOW,
                           detector_params={"gateway": gateway})
        client = TestClient(create_app(core))
        reply = client.post("/reviews", json=review_payload())
        assert reply.status_code == 503
        assert reply.json()["code"] == "encoder-unavailable"
        assert "r-api-1" in core.detector.review_store_
        assert core.stats()["pending_embeddings"] == 1
        # encoder recovers (swap in the mock): next ingest drains the queue
        core.detector.gateway_ = EncoderGateway.mock()
        assert client.post(
            "/reviews", json=review_payload(rid="r-api-2")).status_code == 201
        assert core.stats()["pending_embeddings"] == 0
        assert "r-api-1" in core.detector.index_

    def test_restart_with_encoder_down_queues_instead_of_crashing(self, tmp_path):
        data_dir = tmp_path / "outage-restart"
        healthy = ServiceCore(data_dir, now_fn=lambda: NOW)
        healthy.ingest_review(
            __import__("jarvis").Review.from_dict(review_payload()))
        # simulate a crash that lost the embedding log but kept the review log
        (data_dir / "index" / "embeddings.log").write_bytes(b"")
        dead = EncoderEndpointConfig(kind="dense", mode="remote",
                                     base_url="http://127.0.0.1:9",
                                     timeout_ms=100, max_retries=0)
        core = ServiceCore(data_dir, now_fn=lambda: NOW,
                           detector_params={"gateway": EncoderGateway(dense=dead)})
        assert core.stats()["pending_embeddings"] == 1
        assert "r-api-1" in core.detector.review_store_


class TestAdjudication:
    def test_isolated_review_genuine_low(self, client):
        client.post("/reviews", json=review_payload())
        reply = client.post("/adjudications", json={"review_id": "r-api-1"})
        assert reply.status_code == 201
        case = reply.json()
        assert case["adjudication"]["verdict"] == "genuine"
        assert case["adjudication"]["risk_level"] == "low"
        assert len(case["graph"]["nodes"]) == 1
        assert case["case_id"] == "r-api-1:1"

    def test_campaign_review_fraudulent(self, client):
        corpus = small_campaign_corpus(seed=51, n_genuine=40)
        ingest_corpus(client, corpus)
        reply = client.post("/adjudications", json={"review_id": "r-c0-000"})
        assert reply.status_code == 201
        assert reply.json()["adjudication"]["verdict"] == "fraudulent"

    def test_unknown_review_404(self, client):
        reply = client.post("/adjudications", json={"review_id": "ghost"})
        assert reply.status_code == 404
        assert reply.json()["code"] == "not-found"

    def test_case_and_graph_retrievable(self, client):
        client.post("/reviews", json=review_payload())
        case = client.post("/adjudications",
                           json={"review_id": "r-api-1"}).json()
        fetched = client.get(f"/cases/{case['case_id']}")
        assert fetched.status_code == 200
        assert fetched.json()["review"]["review_id"] == "r-api-1"
        graph = client.get(f"/cases/{case['case_id']}/graph")
        assert graph.status_code == 200
        body = graph.json()
        assert len(body["nodes"]) == len(case["graph"]["nodes"])
        assert len(body["edges"]) == len(case["graph"]["edges"])

    def test_missing_case_404(self, client):
        assert client.get("/cases/nope").status_code == 404
        assert client.get("/cases/nope/graph").status_code == 404

    def test_no_response_ever_contains_labels(self, client):
        corpus = small_campaign_corpus(seed=52, n_genuine=10)
        for record in corpus.behaviors:
            client.post("/behaviors", json=record.to_dict())
        for review in corpus.reviews:  # even when the client sends labels
            payload = review.to_dict(include_label=True)
            client.post("/reviews", json=payload)
        case = client.post("/adjudications",
                           json={"review_id": "r-c0-000"}).json()
        assert "label" not in case["review"]
        fetched = client.get(f"/cases/{case['case_id']}").json()
        assert "label" not in fetched["review"]


class TestDecisions:
    def _case(self, client, rid="r-api-1"):
        client.post("/reviews", json=review_payload(rid=rid, text=f"t {rid}"))
        return client.post("/adjudications", json={"review_id": rid}).json()

    def test_adoption_rate(self, client):
        for i, decision in enumerate(["adopted", "adopted", "adopted",
                                      "rejected"]):
            case = self._case(client, rid=f"r-dec-{i}")
            reply = client.post(f"/cases/{case['case_id']}/decision",
                                json={"decision": decision,
                                      "auditor_id": "aud-1"})
            assert reply.status_code == 200
        metrics = client.get("/metrics/adoption").json()
        assert metrics == {"adopted": 3, "adoption_rate": 0.75, "decided": 4,
                           "rejected": 1}

    def test_zero_decisions_is_undefined_not_zero(self, client):
        metrics = client.get("/metrics/adoption").json()
        assert metrics["adoption_rate"] is None
        assert metrics["decided"] == 0

    def test_redecision_latest_wins_history_retained(self, client):
        case = self._case(client)
        url = f"/cases/{case['case_id']}/decision"
        client.post(url, json={"decision": "rejected", "auditor_id": "a"})
        reply = client.post(url, json={"decision": "adopted",
                                       "auditor_id": "a"})
        assert reply.json()["history_length"] == 2
        fetched = client.get(f"/cases/{case['case_id']}").json()
        assert fetched["decision"]["decision"] == "adopted"
        assert len(fetched["decision_history"]) == 2
        metrics = client.get("/metrics/adoption").json()
        assert metrics == {"adopted": 1, "adoption_rate": 1.0, "decided": 1,
                           "rejected": 0}

    def test_invalid_decision_enum_400(self, client):
        case = self._case(client)
        reply = client.post(f"/cases/{case['case_id']}/decision",
                            json={"decision": "maybe", "auditor_id": "a"})
        assert reply.status_code == 400

    def test_unknown_case_404(self, client):
        reply = client.post("/cases/ghost/decision",
                            json={"decision": "adopted", "auditor_id": "a"})
        assert reply.status_code == 404


class TestPersistence:
    def test_restart_preserves_everything(self, tmp_path):
        data_dir = tmp_path / "data"
        core = ServiceCore(data_dir, now_fn=lambda: NOW,
                           detector_params={"top_k": 5})
        client = TestClient(create_app(core))
        corpus = small_campaign_corpus(seed=53, n_genuine=15)
        ingest_corpus(client, corpus)
        case = client.post("/adjudications",
                           json={"review_id": "r-c0-001"}).json()
        client.post(f"/cases/{case['case_id']}/decision",
                    json={"decision": "adopted", "auditor_id": "aud"})

        reopened = ServiceCore(data_dir, now_fn=lambda: NOW,
                               detector_params={"top_k": 5})
        client2 = TestClient(create_app(reopened))
        fetched = client2.get(f"/cases/{case['case_id']}")
        assert fetched.status_code == 200
        body = fetched.json()
        assert body["adjudication"] == case["adjudication"]
        assert body["graph"] == case["graph"]
        assert body["decision"]["decision"] == "adopted"
        assert len(reopened.detector.index_) == len(corpus.reviews)
        assert len(reopened.detector.review_store_) == len(corpus.reviews)
        assert client2.get("/metrics/adoption").json()["adopted"] == 1
        # the replayed stores can serve fresh adjudications
        fresh = client2.post("/adjudications", json={"review_id": "r-c0-002"})
        assert fresh.status_code == 201
        assert fresh.json()["case_id"] == "r-c0-002:1"

    def test_mock_mode_deterministic_modulo_timestamps(self, tmp_path):
        cases = []
        for name in ("a", "b"):
            core = ServiceCore(tmp_path / name, now_fn=lambda: NOW,
                               detector_params={"top_k": 5})
            client = TestClient(create_app(core))
            corpus = small_campaign_corpus(seed=54, n_genuine=12)
            ingest_corpus(client, corpus)
            case = client.post("/adjudications",
                               json={"review_id": "r-c0-002"}).json()
            case.pop("timings")
            case["adjudication"].pop("created_at")
            case.pop("created_at")
            cases.append(case)
        assert cases[0] == cases[1]


class TestAuth:
    def test_bearer_token_enforced_when_configured(self, core):
        client = TestClient(create_app(core, token="sekrit"))
        assert client.post("/reviews",
                           json=review_payload()).status_code == 401
        ok = client.post("/reviews", json=review_payload(),
                         headers={"Authorization": "Bearer sekrit"})
        assert ok.status_code == 201
        assert client.get("/healthz").status_code == 200  # health stays open


def test_health_reports_stats(client):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"
    assert {"reviews", "indexed", "cases", "pending_embeddings"} <= set(body)
