"""Heterogeneous evidence graph: seed reviews, entity expansion, closure.

Construction is a four-step composition, each step usable on its own:

    seed -> expand_entities -> expand_reviews -> close_rr_edges

Node set: the meta review, retrieved candidates, entities one behavior hop
from those seeds (author, item, author's devices/IPs), and reviews linked
to those entities within the time gate. Expansion depth is exactly one
entity hop; there is no recursive expansion.

Edge taxonomy: rr (review-review similarity, weighted, undirected, kept only
at or above the edge threshold), re (review-entity association), ee
(entity-entity association, e.g. a user logging in from a device).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import canonical
from .errors import ValidationError
from .index import HybridIndex, ScoredCandidate, sparse_norm
from .records import EntityRef, Review
from .storage import BehaviorStore, ReviewStore

ROLE_META = "meta"
ROLE_RETRIEVED = "retrieved"
ROLE_EXPANDED = "expanded"

#: relation used for the re edge between a review and an entity type
RELATION_FOR_ENTITY_TYPE = {
    "user": "posted",
    "item": "attached_to",
    "device": "logged_in_from",
    "ip": "connected_via",
}


@dataclass(frozen=True)
class GraphConfig:
    delta_t_seconds: int = 259200  # 72h gate on expanded reviews
    max_reviews_per_entity: int = 50
    rr_edge_threshold: float = 0.3

    def __post_init__(self):
        if self.delta_t_seconds < 1:
            raise ValidationError("delta_t_seconds must be >= 1", "delta_t_seconds")
        if self.max_reviews_per_entity < 1:
            raise ValidationError("max_reviews_per_entity must be >= 1",
                                  "max_reviews_per_entity")
        if not 0.0 <= self.rr_edge_threshold <= 1.0:
            raise ValidationError("rr_edge_threshold must be in [0,1]",
                                  "rr_edge_threshold")


def _rr_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass
class EvidenceGraph:
    """Typed nodes and edges around one meta review.

    Built single-threaded per meta review; treat as read-only afterwards.
    """

    meta_review_id: str
    rr_edge_threshold: float = 0.3
    review_roles: dict[str, str] = field(default_factory=dict)
    entity_nodes: set[EntityRef] = field(default_factory=set)
    rr_edges: dict[tuple[str, str], float] = field(default_factory=dict)
    re_edges: set[tuple[str, EntityRef, str]] = field(default_factory=set)
    ee_edges: set[tuple[EntityRef, EntityRef, str]] = field(default_factory=set)
    scored_pairs: set[tuple[str, str]] = field(default_factory=set)
    diagnostics: list[dict] = field(default_factory=list)
    closed: bool = False

    # -- mutation (validating) ----------------------------------------------

    def add_review_node(self, review_id: str, role: str) -> None:
        if review_id in self.review_roles:
            raise ValidationError(f"duplicate review node {review_id!r}",
                                  "review_id")
        self.review_roles[review_id] = role

    def add_rr_edge(self, a: str, b: str, weight: float) -> None:
        if a == b:
            raise ValidationError("rr edges must not be self-loops", "rr")
        if a not in self.review_roles or b not in self.review_roles:
            raise ValidationError("rr edge endpoints must exist", "rr")
        if not self.rr_edge_threshold <= weight <= 1.0 + 1e-9:
            raise ValidationError(
                f"rr weight {weight} outside [{self.rr_edge_threshold}, 1]", "rr")
        self.rr_edges[_rr_key(a, b)] = min(weight, 1.0)

    def add_re_edge(self, review_id: str, entity: EntityRef, relation: str) -> None:
        if review_id not in self.review_roles or entity not in self.entity_nodes:
            raise ValidationError("re edge endpoints must exist", "re")
        self.re_edges.add((review_id, entity, relation))

    def add_ee_edge(self, a: EntityRef, b: EntityRef, relation: str) -> None:
        if a not in self.entity_nodes or b not in self.entity_nodes:
            raise ValidationError("ee edge endpoints must exist", "ee")
        self.ee_edges.add((a, b, relation))

    # -- queries --------------------------------------------------------------

    def review_ids(self, roles: tuple[str, ...] | None = None) -> list[str]:
        if roles is None:
            return sorted(self.review_roles)
        return sorted(r for r, role in self.review_roles.items() if role in roles)

    def seed_ids(self) -> list[str]:
        return self.review_ids(roles=(ROLE_META, ROLE_RETRIEVED))

    def rr_neighbors(self, review_id: str) -> list[tuple[str, float]]:
        out = []
        for (a, b), w in self.rr_edges.items():
            if a == review_id:
                out.append((b, w))
            elif b == review_id:
                out.append((a, w))
        return sorted(out)

    def meta_rr_weights(self) -> list[float]:
        return [w for (a, b), w in sorted(self.rr_edges.items())
                if self.meta_review_id in (a, b)]

    def node_count(self) -> int:
        return len(self.review_roles) + len(self.entity_nodes)

    # -- export ---------------------------------------------------------------

    def to_export_dict(self) -> dict:
        nodes = [
            {"id": rid, "kind": "review", "role": role}
            for rid, role in sorted(self.review_roles.items())
        ] + [
            {"entity_id": e.entity_id, "entity_type": e.entity_type,
             "id": e.node_key, "kind": "entity"}
            for e in sorted(self.entity_nodes)
        ]
        edges = [
            {"kind": "rr", "source": a, "target": b, "weight": w}
            for (a, b), w in sorted(self.rr_edges.items())
        ] + [
            {"kind": "re", "relation": rel, "source": rid, "target": e.node_key}
            for rid, e, rel in sorted(self.re_edges,
                                      key=lambda t: (t[0], t[1], t[2]))
        ] + [
            {"kind": "ee", "relation": rel, "source": a.node_key,
             "target": b.node_key}
            for a, b, rel in sorted(self.ee_edges,
                                    key=lambda t: (t[0], t[1], t[2]))
        ]
        return {
            "diagnostics": sorted(self.diagnostics,
                                  key=lambda d: canonical.dumps(d)),
            "edges": edges,
            "meta_review_id": self.meta_review_id,
            "nodes": nodes,
        }

    def to_canonical_bytes(self) -> bytes:
        return canonical.dumps(self.to_export_dict())


# -- construction steps -------------------------------------------------------


def seed(meta: Review, candidates: list[ScoredCandidate],
         config: GraphConfig) -> EvidenceGraph:
    """Meta review plus retrieved candidates; rr edges where score >= threshold."""
    g = EvidenceGraph(meta_review_id=meta.review_id,
                      rr_edge_threshold=config.rr_edge_threshold)
    g.add_review_node(meta.review_id, ROLE_META)
    for cand in candidates:
        g.add_review_node(cand.review_id, ROLE_RETRIEVED)
        g.scored_pairs.add(_rr_key(meta.review_id, cand.review_id))
        if cand.score >= config.rr_edge_threshold:
            g.add_rr_edge(meta.review_id, cand.review_id, cand.score)
    return g


def expand_entities(g: EvidenceGraph, behaviors: BehaviorStore) -> EvidenceGraph:
    """Attach entities one behavior step from the seed reviews.

    Direct links become re edges (author posts, review attached to item);
    the author's device/IP logins become ee edges.
    """
    users: set[EntityRef] = set()
    for rid in g.seed_ids():
        for user in behaviors.users_who_posted(rid):
            g.entity_nodes.add(user)
            g.add_re_edge(rid, user, "posted")
            users.add(user)
        for item in behaviors.items_of_review(rid):
            g.entity_nodes.add(item)
            g.add_re_edge(rid, item, "attached_to")
    for user in sorted(users):
        for device in behaviors.devices_of_user(user):
            g.entity_nodes.add(device)
            g.add_ee_edge(user, device, "logged_in_from")
        for ip in behaviors.ips_of_user(user):
            g.entity_nodes.add(ip)
            g.add_ee_edge(user, ip, "connected_via")
    return g


def expand_reviews(g: EvidenceGraph, behaviors: BehaviorStore,
                   reviews: ReviewStore, config: GraphConfig) -> EvidenceGraph:
    """Attach reviews linked to graph entities, gated by the time window.

    A review qualifies when its timestamp is within delta_t_seconds of at
    least one seed review's timestamp; each entity attaches its newest
    qualifying reviews first, up to max_reviews_per_entity new nodes.
    """
    seed_times = [reviews.get(rid).created_at for rid in g.seed_ids()
                  if reviews.get(rid) is not None]
    added: list[str] = []
    for entity in sorted(g.entity_nodes):
        fresh = []
        for rid in behaviors.reviews_of_entity(entity):
            if rid in g.review_roles:
                continue
            review = reviews.get(rid)
            if review is None:
                continue
            if not any(abs(review.created_at - t) <= config.delta_t_seconds
                       for t in seed_times):
                continue
            fresh.append(review)
        fresh.sort(key=lambda r: (-r.created_at, r.review_id))
        for review in fresh[:config.max_reviews_per_entity]:
            g.add_review_node(review.review_id, ROLE_EXPANDED)
            added.append(review.review_id)
    # re edges for every graph entity each attached review associates with
    entity_set = g.entity_nodes
    for rid in added:
        for entity in behaviors.entities_of_review(rid):
            if entity in entity_set:
                g.add_re_edge(rid, entity,
                              RELATION_FOR_ENTITY_TYPE[entity.entity_type])
    return g


def close_rr_edges(g: EvidenceGraph, index: HybridIndex,
                   lambda_: float, config: GraphConfig) -> EvidenceGraph:
    """Score every unscored review pair; add edges at or above the threshold.

    Pairs scored at seed time keep their query-derived weight. Pairs lacking
    an embedding are recorded in diagnostics, not failed. Scoring is
    vectorized per graph (einsum for dense, per-graph term matrix for
    sparse), deterministic for identical inputs; after this step the graph
    is marked closed: every pair of embedded review nodes has been scored.
    """
    ids = g.review_ids()
    present = [rid for rid in ids if index.get(rid) is not None]
    missing = [rid for rid in ids if index.get(rid) is None]
    seen_missing = set()
    for rid in missing:
        for other in ids:
            if other == rid:
                continue
            pair = _rr_key(rid, other)
            if pair not in g.scored_pairs and pair not in seen_missing:
                seen_missing.add(pair)
                g.diagnostics.append({
                    "pair": list(pair), "reason": "missing_embedding"})
    n = len(present)
    if n >= 2:
        recs = [index.get(rid) for rid in present]
        dense_m = np.stack([r.dense for r in recs])
        dense_sims = np.clip(np.einsum("ik,jk->ij", dense_m, dense_m), 0.0, 1.0)
        sparse_sims = _pairwise_sparse(recs)
        scores = lambda_ * dense_sims + (1.0 - lambda_) * sparse_sims
        upper_i, upper_j = np.triu_indices(n, k=1)
        values = scores[upper_i, upper_j]
        for flat in np.nonzero(values >= config.rr_edge_threshold)[0]:
            pair = _rr_key(present[upper_i[flat]], present[upper_j[flat]])
            if pair in g.scored_pairs:  # seed pair, keep retrieval weight
                continue
            g.add_rr_edge(pair[0], pair[1], float(values[flat]))
    g.closed = True
    return g


def _pairwise_sparse(recs) -> np.ndarray:
    from scipy import sparse as sp

    vocab = sorted({t for r in recs for t in r.sparse})
    col = {t: i for i, t in enumerate(vocab)}
    n = len(recs)
    data, indices, indptr = [], [], [0]
    norms = np.zeros(n)
    for i, rec in enumerate(recs):
        for t in sorted(rec.sparse):
            indices.append(col[t])
            data.append(rec.sparse[t])
        indptr.append(len(indices))
        norms[i] = sparse_norm(rec.sparse)
    m = sp.csr_matrix((data, indices, indptr),
                      shape=(n, max(len(vocab), 1)))
    dots = (m @ m.T).toarray()
    denom = np.outer(norms, norms)
    sims = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0.0)
    return np.clip(sims, 0.0, 1.0)


def build_evidence_graph(meta: Review, index: HybridIndex,
                         behaviors: BehaviorStore, reviews: ReviewStore,
                         config: GraphConfig,
                         k: int | None = None,
                         lambda_: float | None = None,
                         include_candidates: bool = True,
                         include_entities: bool = True) -> EvidenceGraph:
    """Full composition from one embedded meta review to its evidence graph.

    ``include_candidates=False`` seeds with the meta review alone;
    ``include_entities=False`` skips both expansion steps. Both switches
    exist for ablation runs.
    """
    meta_emb = index.get(meta.review_id)
    if meta_emb is None:
        raise ValidationError(
            f"meta review {meta.review_id!r} has no embedding in the index",
            "review_id")
    lambda_eff = index.config.lambda_ if lambda_ is None else lambda_
    candidates: list[ScoredCandidate] = []
    if include_candidates:
        candidates = index.query_topk(meta_emb, k=k, lambda_=lambda_,
                                      exclude={meta.review_id})
    g = seed(meta, candidates, config)
    if include_entities:
        expand_entities(g, behaviors)
        expand_reviews(g, behaviors, reviews, config)
    close_rr_edges(g, index, lambda_eff, config)
    return g
