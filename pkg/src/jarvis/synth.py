"""Synthetic labeled corpora: planted collusion campaigns over genuine noise.

Campaign reviews derive from one template through synonym paraphrasing and
homoglyph character substitution, share the configured device/IP entities,
and land inside a bounded time spread. Genuine background reviews get unique
users, devices, and IPs, and draw their text from a bundled phrase pool.

Generation is a pure function of the corpus spec: every review uses an RNG
stream derived from (seed, review index), so ordering and parallelism cannot
change the output.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ValidationError
from .records import BehaviorRecord, EntityRef, Review
from .storage import append_jsonl, read_jsonl

#: fixed corpus epoch (2023-11-14T22:13:20Z); corpora are placed relative to
#: it so identical specs yield byte-identical files
BASE_TIMESTAMP = 1_700_000_000

_GENUINE_IMAGE_RATE = 0.1
_ITEMS_PER_GENUINE = 20  # pool size ~ n_genuine / 20


def _asset_text(name: str) -> str:
    return (resources.files("jarvis") / f"assets/{name}").read_text("utf-8")


def _load_phrases() -> tuple[str, ...]:
    return tuple(line.strip() for line in _asset_text("phrases.txt").splitlines()
                 if line.strip())


def _load_homoglyphs() -> dict[str, str]:
    return json.loads(_asset_text("homoglyphs.json"))


def _load_synonyms() -> dict[str, list[str]]:
    return json.loads(_asset_text("synonyms.json"))


PHRASES = _load_phrases()
HOMOGLYPHS = _load_homoglyphs()
SYNONYMS = _load_synonyms()


def _stream_rng(seed: int, tag: str) -> random.Random:
    digest = hashlib.blake2b(f"{seed}:{tag}".encode("utf-8"),
                             digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def rare_char_substitute(text: str, rate: float, rng: random.Random,
                         table: dict[str, str] | None = None) -> str:
    """Swap ~rate of the table-eligible characters for confusable homoglyphs.

    Length-preserving; characters outside the table are never touched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValidationError("rate must be in [0,1]", "rate")
    if rate == 0.0:
        return text
    table = HOMOGLYPHS if table is None else table
    out = []
    for ch in text:
        repl = table.get(ch)
        if repl is not None and rng.random() < rate:
            out.append(repl)
        else:
            out.append(ch)
    return "".join(out)


def paraphrase(text: str, rate: float, rng: random.Random,
               table: dict[str, list[str]] | None = None) -> str:
    """Swap ~rate of the table-known words for a synonym."""
    if rate == 0.0:
        return text
    table = SYNONYMS if table is None else table
    out = []
    for token in text.split(" "):
        core = token.strip(".,!?")
        alts = table.get(core.lower())
        if alts and rng.random() < rate:
            out.append(token.replace(core, alts[rng.randrange(len(alts))], 1))
        else:
            out.append(token)
    return " ".join(out)


@dataclass(frozen=True)
class CampaignSpec:
    """Parameters of one planted collusion campaign."""

    n_colluders: int
    template_text: str
    target_item: str
    shared_entities: tuple[str, ...] = ("device", "ip")
    paraphrase_rate: float = 0.0
    rare_char_substitution_rate: float = 0.0
    time_spread_seconds: int = 86400
    reuse_image: bool = False

    def __post_init__(self):
        object.__setattr__(self, "shared_entities", tuple(self.shared_entities))
        if self.n_colluders < 2:
            raise ValidationError("n_colluders must be >= 2", "n_colluders")
        if not self.template_text:
            raise ValidationError("template_text must be non-empty",
                                  "template_text")
        if not self.target_item:
            raise ValidationError("target_item must be non-empty", "target_item")
        if not set(self.shared_entities) <= {"device", "ip"}:
            raise ValidationError("shared_entities must be a subset of "
                                  "{device, ip}", "shared_entities")
        for name in ("paraphrase_rate", "rare_char_substitution_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must be in [0,1]", name)
        if self.time_spread_seconds < 1:
            raise ValidationError("time_spread_seconds must be >= 1",
                                  "time_spread_seconds")

    def to_dict(self) -> dict:
        return {
            "n_colluders": self.n_colluders,
            "paraphrase_rate": self.paraphrase_rate,
            "rare_char_substitution_rate": self.rare_char_substitution_rate,
            "reuse_image": self.reuse_image,
            "shared_entities": list(self.shared_entities),
            "target_item": self.target_item,
            "template_text": self.template_text,
            "time_spread_seconds": self.time_spread_seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignSpec":
        return cls(
            n_colluders=d["n_colluders"],
            template_text=d["template_text"],
            target_item=d["target_item"],
            shared_entities=tuple(d.get("shared_entities", ("device", "ip"))),
            paraphrase_rate=d.get("paraphrase_rate", 0.0),
            rare_char_substitution_rate=d.get("rare_char_substitution_rate", 0.0),
            time_spread_seconds=d.get("time_spread_seconds", 86400),
            reuse_image=d.get("reuse_image", False),
        )


@dataclass(frozen=True)
class CorpusSpec:
    rng_seed: int
    n_genuine: int = 0
    campaigns: tuple[CampaignSpec, ...] = ()
    time_horizon_days: int = 30

    def __post_init__(self):
        object.__setattr__(self, "campaigns", tuple(self.campaigns))
        if self.n_genuine < 0:
            raise ValidationError("n_genuine must be >= 0", "n_genuine")
        if self.time_horizon_days < 1:
            raise ValidationError("time_horizon_days must be >= 1",
                                  "time_horizon_days")
        total = self.n_genuine + sum(c.n_colluders for c in self.campaigns)
        if total < 1:
            raise ValidationError("corpus must contain at least one review",
                                  "n_genuine")

    def to_dict(self) -> dict:
        return {
            "campaigns": [c.to_dict() for c in self.campaigns],
            "n_genuine": self.n_genuine,
            "rng_seed": self.rng_seed,
            "time_horizon_days": self.time_horizon_days,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        return cls(
            rng_seed=d["rng_seed"],
            n_genuine=d.get("n_genuine", 0),
            campaigns=tuple(CampaignSpec.from_dict(c)
                            for c in d.get("campaigns", ())),
            time_horizon_days=d.get("time_horizon_days", 30),
        )


@dataclass
class Corpus:
    """Generated reviews, behavior records, and ground-truth labels."""

    reviews: list[Review] = field(default_factory=list)
    behaviors: list[BehaviorRecord] = field(default_factory=list)
    labels: dict[str, str] = field(default_factory=dict)

    def write_dir(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("reviews.jsonl", "behaviors.jsonl", "labels.jsonl"):
            (out / name).unlink(missing_ok=True)
        for review in self.reviews:
            append_jsonl(out / "reviews.jsonl",
                         review.to_dict(include_label=False))
        for record in self.behaviors:
            append_jsonl(out / "behaviors.jsonl", record.to_dict())
        for rid in sorted(self.labels):
            append_jsonl(out / "labels.jsonl",
                         {"label": self.labels[rid], "review_id": rid})

    @classmethod
    def read_dir(cls, in_dir: str | Path) -> "Corpus":
        src = Path(in_dir)
        corpus = cls()
        for d in read_jsonl(src / "reviews.jsonl"):
            corpus.reviews.append(Review.from_dict(d))
        for d in read_jsonl(src / "behaviors.jsonl"):
            corpus.behaviors.append(BehaviorRecord.from_dict(d))
        for d in read_jsonl(src / "labels.jsonl"):
            corpus.labels[d["review_id"]] = d["label"]
        return corpus


def _emit_review_behaviors(review: Review, user: EntityRef, device: EntityRef,
                           ip: EntityRef, item: EntityRef,
                           behaviors: list[BehaviorRecord]) -> None:
    ts = review.created_at
    behaviors.append(BehaviorRecord(subject=user, relation="posted",
                                    obj=review.review_id, observed_at=ts))
    behaviors.append(BehaviorRecord(subject=user, relation="logged_in_from",
                                    obj=device, observed_at=ts))
    behaviors.append(BehaviorRecord(subject=user, relation="connected_via",
                                    obj=ip, observed_at=ts))
    behaviors.append(BehaviorRecord(subject=review.review_id,
                                    relation="attached_to", obj=item,
                                    observed_at=ts))


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Deterministic corpus with planted campaigns over genuine background."""
    horizon_s = spec.time_horizon_days * 86400
    for campaign in spec.campaigns:
        if campaign.time_spread_seconds > horizon_s:
            raise ValidationError(
                f"campaign time_spread {campaign.time_spread_seconds}s exceeds "
                f"the corpus horizon {horizon_s}s", "time_spread_seconds")

    corpus = Corpus()
    n_items = max(1, spec.n_genuine // _ITEMS_PER_GENUINE)
    for i in range(spec.n_genuine):
        rng = _stream_rng(spec.rng_seed, f"genuine:{i}")
        rid = f"r-gen-{i:05d}"
        user = EntityRef("user", f"gen-user-{i:05d}")
        device = EntityRef("device", f"gen-dev-{i:05d}")
        ip = EntityRef("ip", f"gen-ip-{i:05d}")
        item = EntityRef("item", f"item-{rng.randrange(n_items):04d}")
        created = BASE_TIMESTAMP + rng.randrange(horizon_s)
        text = ". ".join(rng.sample(PHRASES, rng.randint(2, 4))) + "."
        image_refs = (f"img://gen-{i:05d}",) if rng.random() < _GENUINE_IMAGE_RATE else ()
        review = Review(review_id=rid, item_id=item.entity_id,
                        user_id=user.entity_id, text=text,
                        image_refs=image_refs, created_at=created,
                        label="genuine")
        corpus.reviews.append(review)
        corpus.labels[rid] = "genuine"
        _emit_review_behaviors(review, user, device, ip, item, corpus.behaviors)

    for c_idx, campaign in enumerate(spec.campaigns):
        rng_campaign = _stream_rng(spec.rng_seed, f"campaign:{c_idx}")
        latest_start = max(horizon_s - campaign.time_spread_seconds, 1)
        start = BASE_TIMESTAMP + rng_campaign.randrange(latest_start)
        shared_device = EntityRef("device", f"camp-{c_idx}-dev")
        shared_ip = EntityRef("ip", f"camp-{c_idx}-ip")
        image_ref = f"img://camp-{c_idx}-promo"
        item = EntityRef("item", campaign.target_item)
        for j in range(campaign.n_colluders):
            rng = _stream_rng(spec.rng_seed, f"campaign:{c_idx}:{j}")
            rid = f"r-c{c_idx}-{j:03d}"
            user = EntityRef("user", f"camp-{c_idx}-user-{j:03d}")
            device = (shared_device if "device" in campaign.shared_entities
                      else EntityRef("device", f"camp-{c_idx}-dev-{j:03d}"))
            ip = (shared_ip if "ip" in campaign.shared_entities
                  else EntityRef("ip", f"camp-{c_idx}-ip-{j:03d}"))
            created = start + rng.randrange(campaign.time_spread_seconds)
            text = paraphrase(campaign.template_text,
                              campaign.paraphrase_rate, rng)
            text = rare_char_substitute(
                text, campaign.rare_char_substitution_rate, rng)
            image_refs = (image_ref,) if campaign.reuse_image else ()
            review = Review(review_id=rid, item_id=item.entity_id,
                            user_id=user.entity_id, text=text,
                            image_refs=image_refs, created_at=created,
                            label="deceptive")
            corpus.reviews.append(review)
            corpus.labels[rid] = "deceptive"
            _emit_review_behaviors(review, user, device, ip, item,
                                   corpus.behaviors)
    return corpus
