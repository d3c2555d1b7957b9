"""Shared fixtures: deterministic corpora, fixture templates, local endpoints."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from jarvis import CampaignSpec, CorpusSpec, generate_corpus

PROMO_TEMPLATES = [
    "absolutely incredible bargain this gadget changed my mornings forever "
    "the battery outlasts every rival and the shimmering display dazzles "
    "buy it instantly friends",
    "unbeatable deal on this premium blender silky smoothies in seconds "
    "whisper quiet motor and gorgeous chrome finish grab yours before "
    "stock vanishes",
    "this masterpiece transformed our kitchen routines entirely flawless "
    "craftsmanship shiny buttons delightful hum everyone compliments it "
    "daily order two immediately",
    "phenomenal purchase the stitching sparkles the fabric breathes luxury "
    "and the zipper glides like silk recommend wholeheartedly to every "
    "shopper alive",
    "spectacular headphones thunderous bass crystalline treble and plush "
    "earcups that hug like clouds music lovers must snag this marvel today",
    "revolutionary vacuum glides effortlessly swallowing crumbs pet hair "
    "and dust bunnies alike our floors gleam like marble showrooms now",
    "dazzling smartwatch tracks every heartbeat counts every stride and "
    "the luminous bezel draws compliments from strangers constantly worth "
    "every penny",
    "exquisite cookware set heats evenly releases omelets like magic and "
    "the copper handles shine brilliantly a culinary dream fulfilled",
    "magnificent lamp bathes the study in golden warmth the dimmer whispers "
    "smoothly and assembly took mere moments pure radiant joy",
    "sensational backpack swallows laptops books and gym gear while the "
    "padded straps caress shoulders commuting feels like floating now",
]


def small_campaign_corpus(seed: int = 7, n_genuine: int = 60,
                          n_colluders: int = 5, reuse_image: bool = True):
    """One planted campaign (shared device+ip) over genuine background."""
    spec = CorpusSpec(
        rng_seed=seed, n_genuine=n_genuine, time_horizon_days=30,
        campaigns=(CampaignSpec(
            n_colluders=n_colluders, template_text=PROMO_TEMPLATES[0],
            target_item="promo-item", shared_entities=("device", "ip"),
            paraphrase_rate=0.1, rare_char_substitution_rate=0.1,
            time_spread_seconds=24 * 3600, reuse_image=reuse_image),))
    return generate_corpus(spec)


@pytest.fixture(scope="session")
def campaign_corpus():
    return small_campaign_corpus()


class _JsonHandler(BaseHTTPRequestHandler):
    """Responds from the server's ``responder(path, payload)`` callable."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        status, reply = self.server.responder(self.path, payload)
        body = json.dumps(reply).encode("utf-8")
        try:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        except BrokenPipeError:
            pass  # client gave up (timeout tests)

    def log_message(self, *args):
        pass


class LocalEndpoint:
    """Tiny in-process HTTP endpoint for remote-mode tests."""

    def __init__(self, responder):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _JsonHandler)
        self.server.responder = responder
        self.thread = threading.Thread(target=self.server.serve_forever,
                                       daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def local_endpoint():
    endpoints = []

    def factory(responder) -> LocalEndpoint:
        endpoint = LocalEndpoint(responder)
        endpoints.append(endpoint)
        return endpoint

    yield factory
    for endpoint in endpoints:
        endpoint.close()
