"""Hybrid dense/sparse review retrieval, evidence graphs, and adjudication."""

from .detector import CaseResult, ReviewFraudDetector, make_llm_endpoint
from .encoders import EncoderEndpointConfig, EncoderGateway
from .errors import (
    AdjudicationUnavailableError,
    EncoderUnavailableError,
    JarvisError,
    MissingImageError,
    ValidationError,
)
from .evaluation import (
    AblationConfig,
    EvalReport,
    f1_score,
    run_ablation,
    score_run,
)
from .graph import (
    EvidenceGraph,
    GraphConfig,
    build_evidence_graph,
    close_rr_edges,
    expand_entities,
    expand_reviews,
    seed,
)
from .index import (
    HybridIndex,
    IndexConfig,
    ScoredCandidate,
    hybrid_score,
    lexical_score,
)
from .reasoner import (
    EvidencePath,
    PromptBundle,
    adjudicate_llm,
    adjudicate_mock,
    assemble_prompt,
    retrieve_evidence,
)
from .records import (
    Adjudication,
    AuditorDecision,
    BehaviorRecord,
    EmbeddingRecord,
    EntityRef,
    Review,
    validate_behavior,
    validate_for_ingest,
)
from .service import ServiceCore, create_app
from .synth import (
    CampaignSpec,
    Corpus,
    CorpusSpec,
    generate_corpus,
    rare_char_substitute,
)

__version__ = "0.1.0"

__all__ = [
    "AblationConfig", "Adjudication", "AdjudicationUnavailableError",
    "AuditorDecision", "BehaviorRecord", "CampaignSpec", "CaseResult",
    "Corpus", "CorpusSpec", "EmbeddingRecord", "EncoderEndpointConfig",
    "EncoderGateway", "EncoderUnavailableError", "EntityRef", "EvalReport",
    "EvidenceGraph", "EvidencePath", "GraphConfig", "HybridIndex",
    "IndexConfig", "JarvisError", "MissingImageError", "PromptBundle",
    "Review", "ReviewFraudDetector", "ScoredCandidate", "ServiceCore",
    "ValidationError", "adjudicate_llm", "adjudicate_mock", "assemble_prompt",
    "build_evidence_graph", "close_rr_edges", "create_app", "expand_entities",
    "expand_reviews", "f1_score", "generate_corpus", "hybrid_score",
    "lexical_score", "make_llm_endpoint", "rare_char_substitute",
    "retrieve_evidence", "run_ablation", "score_run", "seed",
    "validate_behavior", "validate_for_ingest",
]
