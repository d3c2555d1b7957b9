"""Uniform access to dense embedding, image description, and sparse encoding.

Two modes per capability: ``remote`` (JSON-over-HTTP, see
docs/wire_protocols.md) and ``mock`` (deterministic pure functions of the
inputs, byte-identical across processes). The mocks make lexical overlap
correlate with similarity so the whole pipeline is testable offline:

- dense: character 3-grams of text plus image descriptions, hashed into
  ``dense_dim`` buckets via CRC-32, counts L2-normalized;
- sparse: lowercase word tokens minus a small stopword list, weighted
  ``1 + ln(term frequency)``;
- describe: a stable pseudo-description seeded by the image ref.
"""

from __future__ import annotations

import hashlib
import math
import os
import re
import threading
import time
import zlib
from collections import Counter
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import EncoderUnavailableError, MissingImageError, ValidationError
from .records import Review

DEFAULT_DENSE_DIM = 256

#: joins review text with each generated image description
IMAGE_DELIMITER = "\n[IMAGE] "

ENV_URLS = {
    "dense": "JARVIS_DENSE_URL",
    "describe": "JARVIS_DESCRIBE_URL",
    "sparse": "JARVIS_SPARSE_URL",
    "llm": "JARVIS_LLM_URL",
}

STOPWORDS = frozenset("""
a an and are as at be but by for from has have i if in is it its my not of on
or so that the this to very was we were will with you your
""".split())

_WORD_RE = re.compile(r"\w+", re.UNICODE)

_BACKOFF_INITIAL_SECONDS = 0.1
_BACKOFF_FACTOR = 2.0


def tokenize(text: str) -> list[str]:
    """Whitespace+punctuation tokenization with lowercase fold."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class EncoderEndpointConfig:
    """Where and how to reach one model capability."""

    kind: str
    mode: str = "mock"
    base_url: str | None = None
    timeout_ms: int = 5000
    max_retries: int = 2

    def __post_init__(self):
        if self.kind not in ("dense", "describe", "sparse", "llm"):
            raise ValidationError("kind must be dense|describe|sparse|llm", "kind")
        if self.mode not in ("remote", "mock"):
            raise ValidationError("mode must be remote or mock", "mode")
        if self.timeout_ms < 1:
            raise ValidationError("timeout_ms must be >= 1", "timeout_ms")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0", "max_retries")
        if self.mode == "mock" and self.base_url:
            raise ValidationError("mode=mock requires no base_url", "base_url")
        if self.mode == "remote" and not self.base_url:
            raise ValidationError("mode=remote requires base_url", "base_url")


def _char_ngrams(text: str, n: int = 3) -> list[str]:
    # inputs shorter than n hash as a single gram so no vector is ever zero
    if len(text) < n:
        return [text]
    return [text[i:i + n] for i in range(len(text) - n + 1)]


def mock_dense_vector(text: str, descriptions: list[str],
                      dim: int = DEFAULT_DENSE_DIM) -> np.ndarray:
    combined = text
    for desc in descriptions:
        combined += IMAGE_DELIMITER + desc
    counts = np.zeros(dim, dtype=np.float64)
    for gram in _char_ngrams(combined):
        counts[zlib.crc32(gram.encode("utf-8")) % dim] += 1.0
    norm = float(np.linalg.norm(counts))
    if norm == 0.0:  # only reachable for empty combined input
        counts[0] = 1.0
        return counts
    return counts / norm


_DESCRIPTION_SUBJECTS = (
    "product shot", "unboxing photo", "close-up", "lifestyle photo",
    "packaging photo", "size comparison", "screenshot", "promo banner",
)
_DESCRIPTION_DETAILS = (
    "bright background", "hand for scale", "visible logo", "price sticker",
    "worn edges", "glossy finish", "text overlay", "multiple angles",
)


def mock_description(image_ref: str) -> str:
    """Stable pseudo-description; distinct refs get distinct descriptions."""
    digest = hashlib.blake2b(image_ref.encode("utf-8"), digest_size=8).digest()
    subject = _DESCRIPTION_SUBJECTS[digest[0] % len(_DESCRIPTION_SUBJECTS)]
    detail = _DESCRIPTION_DETAILS[digest[1] % len(_DESCRIPTION_DETAILS)]
    return f"{subject} with {detail} ref {digest.hex()}"


def mock_sparse_weights(text: str) -> dict[str, float]:
    counts = Counter(t for t in tokenize(text) if t not in STOPWORDS)
    return {term: 1.0 + math.log(n) for term, n in counts.items()}


class EncoderGateway:
    """Shared, thread-safe front for the three encoder capabilities.

    Mock-mode calls are memoized (they are pure), which also lets ablation
    sweeps over one corpus reuse embeddings. Remote calls run under an
    in-flight cap.
    """

    def __init__(self,
                 dense: EncoderEndpointConfig | None = None,
                 describe: EncoderEndpointConfig | None = None,
                 sparse: EncoderEndpointConfig | None = None,
                 dense_dim: int = DEFAULT_DENSE_DIM,
                 max_in_flight: int = 16):
        self.dense_config = dense or EncoderEndpointConfig(kind="dense")
        self.describe_config = describe or EncoderEndpointConfig(kind="describe")
        self.sparse_config = sparse or EncoderEndpointConfig(kind="sparse")
        self.dense_dim = int(dense_dim)
        if self.dense_dim < 1:
            raise ValidationError("dense_dim must be >= 1", "dense_dim")
        self._in_flight = threading.Semaphore(max_in_flight)
        self._client = httpx.Client()
        self._dense_cache: dict[tuple, np.ndarray] = {}
        self._sparse_cache: dict[str, dict[str, float]] = {}
        self._describe_cache: dict[str, str] = {}
        self._cache_lock = threading.Lock()

    @classmethod
    def mock(cls, dense_dim: int = DEFAULT_DENSE_DIM) -> "EncoderGateway":
        return cls(dense_dim=dense_dim)

    @classmethod
    def from_env(cls, mode: str = "mock",
                 dense_dim: int = DEFAULT_DENSE_DIM) -> "EncoderGateway":
        """Build from JARVIS_DENSE_URL / JARVIS_DESCRIBE_URL / JARVIS_SPARSE_URL."""
        if mode == "mock":
            return cls.mock(dense_dim=dense_dim)
        configs = {}
        for kind in ("dense", "describe", "sparse"):
            url = os.environ.get(ENV_URLS[kind])
            if not url:
                raise ValidationError(
                    f"{ENV_URLS[kind]} must be set for --encoders=remote",
                    field=ENV_URLS[kind])
            configs[kind] = EncoderEndpointConfig(kind=kind, mode="remote",
                                                  base_url=url)
        return cls(dense=configs["dense"], describe=configs["describe"],
                   sparse=configs["sparse"], dense_dim=dense_dim)

    # -- operations ---------------------------------------------------------

    def embed_dense(self, text: str, image_refs: list[str] | tuple[str, ...] = ()
                    ) -> np.ndarray:
        if not text and not image_refs:
            raise ValidationError("embed_dense needs text or image_refs", "text")
        if self.dense_config.mode == "mock":
            key = (text, tuple(image_refs))
            with self._cache_lock:
                hit = self._dense_cache.get(key)
            if hit is not None:
                return hit
            descriptions = [self.describe_image(r) for r in image_refs]
            vec = mock_dense_vector(text, descriptions, self.dense_dim)
            vec.flags.writeable = False
            with self._cache_lock:
                self._dense_cache[key] = vec
            return vec
        payload = {"text": text, "image_refs": list(image_refs)}
        reply = self._post(self.dense_config, payload)
        vec = np.asarray(reply["vector"], dtype=np.float64)
        if vec.shape != (self.dense_dim,):
            raise EncoderUnavailableError(
                f"remote dense endpoint returned dimension {vec.shape}, "
                f"expected ({self.dense_dim},)")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EncoderUnavailableError("remote dense endpoint returned a zero vector")
        # normalize defensively: downstream requires unit norm within 1e-6
        return vec / norm

    def describe_image(self, image_ref: str) -> str:
        if not image_ref:
            raise MissingImageError("empty image reference")
        if self.describe_config.mode == "mock":
            with self._cache_lock:
                hit = self._describe_cache.get(image_ref)
            if hit is None:
                hit = mock_description(image_ref)
                with self._cache_lock:
                    self._describe_cache[image_ref] = hit
            return hit
        reply = self._post(self.describe_config, {"image_ref": image_ref})
        description = reply.get("description", "")
        if not description:
            raise MissingImageError(f"endpoint could not resolve {image_ref!r}")
        return description

    def build_augmented_text(self, review: Review) -> str:
        """Review text joined with the description of each image, in order."""
        parts = [review.text]
        for ref in review.image_refs:
            parts.append(self.describe_image(ref))
        return IMAGE_DELIMITER.join(parts)

    def embed_sparse(self, augmented_text: str) -> dict[str, float]:
        if not augmented_text:
            raise ValidationError("embed_sparse needs a non-empty string", "text")
        if self.sparse_config.mode == "mock":
            with self._cache_lock:
                hit = self._sparse_cache.get(augmented_text)
            if hit is None:
                hit = mock_sparse_weights(augmented_text)
                with self._cache_lock:
                    self._sparse_cache[augmented_text] = hit
            return dict(hit)
        reply = self._post(self.sparse_config, {"text": augmented_text})
        terms = reply.get("terms", {})
        return {t: float(w) for t, w in terms.items()}

    # -- remote plumbing ----------------------------------------------------

    def _post(self, config: EncoderEndpointConfig, payload: dict) -> dict:
        with self._in_flight:
            return post_with_retries(self._client, config, payload,
                                     EncoderUnavailableError)

    def close(self):
        self._client.close()


def post_with_retries(client: httpx.Client, config: EncoderEndpointConfig,
                      payload: dict, error_type: type[Exception]) -> dict:
    """POST canonical JSON with exponential backoff inside a hard deadline.

    The total budget is timeout_ms * (max_retries + 1); backoff sleeps are
    clipped so a call never blocks past it.
    """
    per_call = config.timeout_ms / 1000.0
    deadline = time.monotonic() + per_call * (config.max_retries + 1)
    backoff = _BACKOFF_INITIAL_SECONDS
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            break
        try:
            response = client.post(config.base_url, json=payload,
                                   timeout=min(per_call, remaining))
            if response.status_code >= 500:
                last_error = error_type(
                    f"{config.kind} endpoint returned {response.status_code}")
            elif response.status_code >= 400:
                raise error_type(
                    f"{config.kind} endpoint rejected request "
                    f"({response.status_code}): {response.text[:200]}")
            else:
                return response.json()
        except httpx.HTTPError as exc:
            last_error = error_type(f"{config.kind} endpoint unreachable: {exc}")
        if attempt < config.max_retries:
            sleep_for = min(backoff, max(deadline - time.monotonic(), 0.0))
            if sleep_for > 0:
                time.sleep(sleep_for)
            backoff *= _BACKOFF_FACTOR
    raise last_error or error_type(
        f"{config.kind} endpoint failed after {config.max_retries + 1} attempts")
