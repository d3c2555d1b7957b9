"""Evidence-path retrieval, prompt assembly, and adjudication.

``retrieve_evidence`` enumerates short weighted paths out of the evidence
graph; ``assemble_prompt`` renders them into a fixed five-block prompt
(role, task, evidence, reasoning, output schema); ``adjudicate_llm`` sends
the prompt to a pluggable endpoint and parses the structured reply, while
``adjudicate_mock`` is a deterministic rule-based stand-in that lets the
whole pipeline run offline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from string import Template

import httpx

from .encoders import EncoderEndpointConfig, post_with_retries
from .errors import AdjudicationUnavailableError, ValidationError
from .graph import ROLE_EXPANDED, ROLE_RETRIEVED, EvidenceGraph
from .records import Adjudication, Review

DEFAULT_MAX_PATHS = 40
MAX_PATH_EDGES = 3

# mock adjudicator thresholds, calibrated against the synthetic generator so
# planted campaigns fire and background noise does not (test scaffolding,
# not a claim about real fraud)
SHARED_ENTITY_THRESHOLD = 2
MEAN_SIMILARITY_THRESHOLD = 0.7
NEAR_THRESHOLD_FRACTION = 0.8  # "within 20% of threshold"

REFORMAT_INSTRUCTION = (
    "Your previous reply could not be parsed. Answer again using exactly the "
    "fenced block from the output format section: VERDICT, RISK, CHAINS.")

_EMPTY_MARKER = "(none)"


def review_node_key(review_id: str) -> str:
    return f"review:{review_id}"


@dataclass(frozen=True)
class PathEdge:
    kind: str  # rr | re | ee
    relation: str | None = None
    weight: float | None = None

    def render(self) -> str:
        if self.kind == "rr":
            return f"rr:{self.weight:.3f}"
        return f"{self.kind}:{self.relation}"


@dataclass(frozen=True)
class EvidencePath:
    """A short weighted walk from the meta review; one unit of evidence."""

    nodes: tuple[str, ...]
    edges: tuple[PathEdge, ...]
    aggregate_weight: float

    def __post_init__(self):
        if not 1 <= len(self.edges) <= MAX_PATH_EDGES:
            raise ValidationError(
                f"paths carry 1..{MAX_PATH_EDGES} edges", "edges")
        if len(self.nodes) != len(self.edges) + 1:
            raise ValidationError("node/edge sequence lengths disagree", "nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValidationError("paths must not repeat nodes", "nodes")
        if not 0.0 < self.aggregate_weight <= 1.0 + 1e-9:
            raise ValidationError("aggregate_weight must be in (0,1]",
                                  "aggregate_weight")

    @property
    def length(self) -> int:
        return len(self.edges)

    def render(self) -> str:
        parts = [self.nodes[0]]
        for node, edge in zip(self.nodes[1:], self.edges):
            parts.append(f"-[{edge.render()}]-> {node}")
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {
            "aggregate_weight": self.aggregate_weight,
            "edges": [{"kind": e.kind, "relation": e.relation,
                       "weight": e.weight} for e in self.edges],
            "nodes": list(self.nodes),
        }


def _adjacency(g: EvidenceGraph) -> dict[str, list[tuple[str, PathEdge]]]:
    adj: dict[str, list[tuple[str, PathEdge]]] = {}

    def link(a: str, b: str, edge: PathEdge) -> None:
        adj.setdefault(a, []).append((b, edge))
        adj.setdefault(b, []).append((a, edge))

    for (a, b), w in g.rr_edges.items():
        if w > 0.0:  # zero-weight edges cannot appear in (0,1] path weights
            link(review_node_key(a), review_node_key(b), PathEdge("rr", weight=w))
    for rid, entity, rel in g.re_edges:
        link(review_node_key(rid), entity.node_key, PathEdge("re", relation=rel))
    for a, b, rel in g.ee_edges:
        link(a.node_key, b.node_key, PathEdge("ee", relation=rel))
    for neighbors in adj.values():
        neighbors.sort(key=lambda t: (t[0], t[1].kind, t[1].relation or "",
                                      t[1].weight or 0.0))
    return adj


def enumerate_paths(g: EvidenceGraph,
                    max_edges: int = MAX_PATH_EDGES) -> list[EvidencePath]:
    """All simple paths from the meta node, ranked (exhaustive; test oracle
    and small-graph use; retrieve_evidence is the lazy equivalent)."""
    adj = _adjacency(g)
    start = review_node_key(g.meta_review_id)
    out: list[EvidencePath] = []
    stack_nodes = [start]
    stack_edges: list[PathEdge] = []

    def walk(node: str, weight: float) -> None:
        for neighbor, edge in adj.get(node, ()):
            if neighbor in stack_nodes:
                continue
            w = weight * edge.weight if edge.kind == "rr" else weight
            stack_nodes.append(neighbor)
            stack_edges.append(edge)
            out.append(EvidencePath(nodes=tuple(stack_nodes),
                                    edges=tuple(stack_edges),
                                    aggregate_weight=w))
            if len(stack_edges) < max_edges:
                walk(neighbor, w)
            stack_nodes.pop()
            stack_edges.pop()

    walk(start, 1.0)
    out.sort(key=lambda p: (-p.aggregate_weight, p.length, p.nodes))
    return out


def retrieve_evidence(g: EvidenceGraph,
                      max_paths: int = DEFAULT_MAX_PATHS,
                      max_edges: int = MAX_PATH_EDGES) -> list[EvidencePath]:
    """Top evidence paths by (weight desc, length asc, node ids).

    Lazy best-first expansion: a prefix always sorts before its extensions
    (weight is non-increasing, length grows), so popping a heap ordered by
    the ranking key yields the global order without enumerating every path.
    Identical output to ``enumerate_paths(g)[:max_paths]``.
    """
    paths, _ = retrieve_evidence_with_truncation(g, max_paths, max_edges)
    return paths


def retrieve_evidence_with_truncation(
        g: EvidenceGraph, max_paths: int = DEFAULT_MAX_PATHS,
        max_edges: int = MAX_PATH_EDGES) -> tuple[list[EvidencePath], bool]:
    """retrieve_evidence plus whether lower-ranked paths were cut off."""
    import heapq

    adj = _adjacency(g)
    start = review_node_key(g.meta_review_id)
    heap: list[tuple] = []
    counter = 0  # defensive full-tie breaker so PathEdge is never compared

    def push(nodes: tuple[str, ...], edges: tuple[PathEdge, ...],
             weight: float) -> None:
        nonlocal counter
        counter += 1
        heapq.heappush(heap, (-weight, len(edges), nodes, counter, edges))

    for neighbor, edge in adj.get(start, ()):
        weight = edge.weight if edge.kind == "rr" else 1.0
        if weight > 0.0:
            push((start, neighbor), (edge,), weight)

    out: list[EvidencePath] = []
    while heap and len(out) < max_paths:
        neg_weight, length, nodes, _tie, edges = heapq.heappop(heap)
        out.append(EvidencePath(nodes=nodes, edges=edges,
                                aggregate_weight=-neg_weight))
        if length < max_edges:
            seen = set(nodes)
            for neighbor, edge in adj.get(nodes[-1], ()):
                if neighbor in seen:
                    continue
                weight = (-neg_weight) * (edge.weight if edge.kind == "rr"
                                          else 1.0)
                push(nodes + (neighbor,), edges + (edge,), weight)
    return out, bool(heap)


# -- prompt assembly ----------------------------------------------------------


@dataclass(frozen=True)
class PromptBundle:
    """The five prompt blocks plus the rendered text sent to the model."""

    meta_review_id: str
    role_block: str
    task_block: str
    evidence_block: str
    reasoning_block: str
    output_schema_block: str
    rendered_text: str

    def __post_init__(self):
        for name in ("role_block", "task_block", "evidence_block",
                     "reasoning_block", "output_schema_block"):
            if getattr(self, name) not in self.rendered_text:
                raise ValidationError(f"rendered_text must contain {name}", name)


def _load_template() -> Template:
    text = (resources.files("jarvis") / "assets/prompt_template.txt").read_text(
        encoding="utf-8")
    return Template(text)


_ROLE_BLOCK = (
    "You are a senior e-commerce risk control expert and anti-fraud auditor, "
    "responsible for analyzing suspicious reviews based on retrieved "
    "knowledge graph evidence.")

_TASK_BLOCK = (
    "Given the meta-review and its associated knowledge graph evidence below, "
    "determine whether the review is deceptive.")

_REASONING_BLOCK = (
    "## Reasoning steps\n"
    "(1) Entity Consistency Audit: assess whether shared entity activities "
    "exhibit abnormal collusion patterns.\n"
    "(2) Semantic Style Alignment: examine whether retrieved reviews show "
    "unnatural stylistic coordination.")

_OUTPUT_SCHEMA_BLOCK = (
    "## Output format\n"
    "Answer with exactly one fenced block:\n"
    "```\n"
    "VERDICT: fraudulent | genuine | inconclusive\n"
    "RISK: low | medium | high\n"
    "CHAINS:\n"
    "- <evidence chain, one per line>\n"
    "```\n"
    "A fraudulent verdict requires medium or high risk and at least one chain.")


def _lines_or_empty(lines: list[str]) -> str:
    return "\n".join(lines) if lines else _EMPTY_MARKER


_MAX_SIMILARITY_LINES = 200


def assemble_prompt(g: EvidenceGraph, paths: list[EvidencePath], meta: Review,
                    review_store=None,
                    meta_image_descriptions: list[str] | None = None,
                    paths_truncated: bool = False) -> PromptBundle:
    """Render the five-block prompt. Ground-truth labels are never included."""

    def review_text(rid: str) -> str:
        if review_store is None:
            return ""
        review = review_store.get(rid)
        return review.text if review is not None else ""

    descriptions = meta_image_descriptions or []
    meta_lines = [f"review {meta.review_id}", f"text: {meta.text or _EMPTY_MARKER}"]
    if descriptions:
        for desc in descriptions:
            meta_lines.append(f"image description: {desc}")
    else:
        meta_lines.append(f"image description: {_EMPTY_MARKER}")

    review_lines = []
    meta_weights = {rid: w for (a, b), w in g.rr_edges.items()
                    for rid in (a, b) if g.meta_review_id in (a, b)
                    and rid != g.meta_review_id}
    entities_of: dict[str, list[str]] = {}
    for rid, entity, _rel in g.re_edges:
        entities_of.setdefault(rid, []).append(entity.node_key)
    for rid in g.review_ids(roles=(ROLE_RETRIEVED,)):
        sim = meta_weights.get(rid)
        sim_note = f", similarity to meta {sim:.3f}" if sim is not None else ""
        review_lines.append(
            f"- {rid} (retrieved{sim_note}): {review_text(rid) or _EMPTY_MARKER}")
    for rid in g.review_ids(roles=(ROLE_EXPANDED,)):
        via = sorted(entities_of.get(rid, ()))
        via_note = f" via {', '.join(via)}" if via else ""
        review_lines.append(
            f"- {rid} (expanded{via_note}): {review_text(rid) or _EMPTY_MARKER}")

    path_lines = [f"- {p.render()} (weight {p.aggregate_weight:.3f})"
                  for p in paths]
    if paths_truncated:
        path_lines.append(
            "(truncated: lower-ranked paths beyond this list were omitted)")

    ranked_edges = sorted(g.rr_edges.items(), key=lambda kv: (-kv[1], kv[0]))
    sim_lines = [f"- {a} ~ {b}: {w:.3f}"
                 for (a, b), w in ranked_edges[:_MAX_SIMILARITY_LINES]]
    if len(ranked_edges) > _MAX_SIMILARITY_LINES:
        sim_lines.append(f"(truncated: {len(ranked_edges) - _MAX_SIMILARITY_LINES} "
                         "weaker similarity pairs omitted)")
    entity_lines = [f"- {e.node_key}" for e in sorted(g.entity_nodes)]
    sharing_lines = [f"- {a.node_key} -[{rel}]-> {b.node_key}"
                     for a, b, rel in sorted(g.ee_edges)]
    sharing_lines += [f"- review {rid} -[{rel}]-> {e.node_key}"
                      for rid, e, rel in sorted(g.re_edges)]

    evidence_block = "\n".join([
        "## Graph-retrieved evidence",
        "",
        "### Meta-review content (text, image description)",
        "\n".join(meta_lines),
        "",
        "### Retrieved reviews and acquisition paths",
        _lines_or_empty(review_lines),
        "",
        "Acquisition paths:",
        _lines_or_empty(path_lines),
        "",
        "### Similarities between reviews",
        _lines_or_empty(sim_lines),
        "",
        "### Entities (user/device/IP/item)",
        _lines_or_empty(entity_lines),
        "",
        "### Entity-sharing interaction records",
        _lines_or_empty(sharing_lines),
    ])

    rendered = _load_template().substitute(
        role_block=_ROLE_BLOCK,
        task_block=_TASK_BLOCK,
        evidence_block=evidence_block,
        reasoning_block=_REASONING_BLOCK,
        output_schema_block=_OUTPUT_SCHEMA_BLOCK,
    )
    return PromptBundle(
        meta_review_id=meta.review_id,
        role_block=_ROLE_BLOCK,
        task_block=_TASK_BLOCK,
        evidence_block=evidence_block,
        reasoning_block=_REASONING_BLOCK,
        output_schema_block=_OUTPUT_SCHEMA_BLOCK,
        rendered_text=rendered,
    )


# -- reply parsing ------------------------------------------------------------


class ReplyFormatError(ValueError):
    pass


_VERDICT_RE = re.compile(r"VERDICT\s*:\s*(fraudulent|genuine|inconclusive)",
                         re.IGNORECASE)
_RISK_RE = re.compile(r"RISK\s*:\s*(low|medium|high)", re.IGNORECASE)
_CHAIN_RE = re.compile(r"^\s*-\s*(.+?)\s*$", re.MULTILINE)


def parse_reply(text: str) -> tuple[str, str, tuple[str, ...]]:
    """Extract (verdict, risk, chains) from a model reply; tolerant of noise."""
    if not isinstance(text, str):
        raise ReplyFormatError("reply is not text")
    verdict_match = _VERDICT_RE.search(text)
    risk_match = _RISK_RE.search(text)
    if not verdict_match or not risk_match:
        raise ReplyFormatError("missing VERDICT or RISK field")
    chains: tuple[str, ...] = ()
    chain_section = re.search(r"CHAINS\s*:\s*\n(.*)", text,
                              re.IGNORECASE | re.DOTALL)
    if chain_section:
        body = chain_section.group(1).split("```")[0]
        chains = tuple(m.group(1) for m in _CHAIN_RE.finditer(body))
    return verdict_match.group(1).lower(), risk_match.group(1).lower(), chains


def adjudicate_llm(bundle: PromptBundle, endpoint: EncoderEndpointConfig,
                   client: httpx.Client | None = None,
                   now: int = 0) -> Adjudication:
    """Send the prompt, parse the structured reply; one reformat retry, then
    an inconclusive fallback with the raw reply attached."""
    if endpoint.mode != "remote":
        raise ValidationError(
            "adjudicate_llm requires a remote endpoint; use adjudicate_mock "
            "for offline runs", "mode")
    own_client = client is None
    client = client or httpx.Client()
    try:
        reply = post_with_retries(client, endpoint,
                                  {"prompt": bundle.rendered_text},
                                  AdjudicationUnavailableError)
        text = str(reply.get("text", ""))
        adjudication = _reply_to_adjudication(bundle.meta_review_id, text, now)
        if adjudication is not None:
            return adjudication
        retry_prompt = bundle.rendered_text + "\n\n" + REFORMAT_INSTRUCTION
        reply = post_with_retries(client, endpoint, {"prompt": retry_prompt},
                                  AdjudicationUnavailableError)
        retry_text = str(reply.get("text", ""))
        adjudication = _reply_to_adjudication(bundle.meta_review_id, retry_text,
                                              now)
        if adjudication is not None:
            return adjudication
        return Adjudication(
            review_id=bundle.meta_review_id,
            verdict="inconclusive",
            risk_level="low",
            evidence_chains=(f"unparseable model reply: {retry_text[:2000]}",),
            source="model",
            created_at=now)
    finally:
        if own_client:
            client.close()


def _reply_to_adjudication(review_id: str, text: str,
                           now: int) -> Adjudication | None:
    try:
        verdict, risk, chains = parse_reply(text)
        return Adjudication(review_id=review_id, verdict=verdict,
                            risk_level=risk, evidence_chains=chains,
                            source="model", created_at=now)
    except (ReplyFormatError, ValidationError):
        return None


# -- deterministic mock adjudicator --------------------------------------------


def shared_entity_count(g: EvidenceGraph) -> int:
    """Device/IP entity nodes reached by at least two distinct review authors.

    Authors resolve through posted edges; reviews whose author lies outside
    the one-hop entity set count as their own attribution key. Item and user
    entities never count: any popular product is reviewed by many authors,
    and a user entity belongs to exactly one author.
    """
    posted_by: dict[str, str] = {}
    for rid, entity, rel in g.re_edges:
        if rel == "posted":
            posted_by[rid] = entity.node_key
    attribution: dict[EntityRef, set[str]] = {}
    for a, b, _rel in g.ee_edges:
        for user, shared in ((a, b), (b, a)):
            if user.entity_type == "user" and shared.entity_type in ("device", "ip"):
                attribution.setdefault(shared, set()).add(user.node_key)
    for rid, entity, rel in g.re_edges:
        if entity.entity_type in ("device", "ip"):
            key = posted_by.get(rid, review_node_key(rid))
            attribution.setdefault(entity, set()).add(key)
    return sum(1 for keys in attribution.values() if len(keys) >= 2)


def mean_meta_similarity(g: EvidenceGraph) -> float:
    weights = g.meta_rr_weights()
    return sum(weights) / len(weights) if weights else 0.0


def _shared_entity_chains(g: EvidenceGraph) -> list[str]:
    reviews_of_user: dict[EntityRef, set[str]] = {}
    for rid, entity, rel in g.re_edges:
        if rel == "posted":
            reviews_of_user.setdefault(entity, set()).add(rid)
    chains = []
    by_entity: dict[EntityRef, set[str]] = {}
    for a, b, _rel in g.ee_edges:
        for user, shared in ((a, b), (b, a)):
            if user.entity_type == "user" and shared.entity_type in ("device", "ip"):
                by_entity.setdefault(shared, set()).update(
                    reviews_of_user.get(user, ()))
    for rid, entity, _rel in g.re_edges:
        if entity.entity_type in ("device", "ip"):
            by_entity.setdefault(entity, set()).add(rid)
    for entity in sorted(by_entity):
        reviews = sorted(by_entity[entity])
        if len(reviews) >= 2:
            listed = ", ".join(reviews[:8])
            chains.append(
                f"{entity.node_key} links reviews {listed}: coordinated "
                "posting through a shared entity")
    return chains


def adjudicate_mock(g: EvidenceGraph, paths: list[EvidencePath],
                    now: int = 0) -> Adjudication:
    """Rule-based verdict from graph structure; pure function of its inputs.

    Fraudulent/high when at least SHARED_ENTITY_THRESHOLD device/IP entities
    are shared across distinct authors and the meta review's mean rr-edge
    weight reaches MEAN_SIMILARITY_THRESHOLD; fraudulent/medium when exactly
    one condition holds and the other is within 20% of its threshold;
    genuine/low otherwise.
    """
    shared = shared_entity_count(g)
    mean_sim = mean_meta_similarity(g)
    cond_entities = shared >= SHARED_ENTITY_THRESHOLD
    cond_similarity = mean_sim >= MEAN_SIMILARITY_THRESHOLD
    near_entities = shared >= NEAR_THRESHOLD_FRACTION * SHARED_ENTITY_THRESHOLD
    near_similarity = mean_sim >= NEAR_THRESHOLD_FRACTION * MEAN_SIMILARITY_THRESHOLD

    if cond_entities and cond_similarity:
        verdict, risk = "fraudulent", "high"
    elif (cond_entities and near_similarity) or (cond_similarity and near_entities):
        verdict, risk = "fraudulent", "medium"
    else:
        verdict, risk = "genuine", "low"

    chains: list[str] = []
    if verdict == "fraudulent":
        chains.extend(_shared_entity_chains(g)[:3])
        if cond_similarity or near_similarity:
            rr_paths = [p for p in paths if all(e.kind == "rr" for e in p.edges)]
            chains.extend(
                f"{p.render()} (aggregate weight {p.aggregate_weight:.3f})"
                for p in rr_paths[:3])
        if not chains:  # unreachable for integer counts; keeps the invariant
            chains.append(
                f"{shared} shared entities, mean similarity {mean_sim:.3f}")
    return Adjudication(
        review_id=g.meta_review_id,
        verdict=verdict,
        risk_level=risk,
        evidence_chains=tuple(chains),
        source="mock",
        created_at=now)
