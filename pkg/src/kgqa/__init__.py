"""Knowledge-graph question answering with scored evidence paths.

The pipeline retrieves a question-relevant subgraph from an indexed triple
store, generates weighted relation-path plans, grounds them as scored
evidence paths, and aggregates path terminals into ranked answers.  A
deterministic lexical scorer makes every stage reproducible offline; a
remote chat-endpoint backend swaps in for model-driven scoring.
"""
from __future__ import annotations

from .errors import (
    ConfigError,
    DataError,
    EndpointError,
    KgqaError,
    ParseError,
    ReplyParseError,
    TemplateError,
    UnknownEntityError,
)
from .evaluation import EvalReport, Pipeline, build_report, question_metrics
from .model import EvidencePath, PathStep, Plan, Prediction, QaExample, ScoredCandidate, Triple
from .pathfinder import FinderConfig, aggregate_score, find_evidence_paths, induce_path_tree
from .plangen import PlanSource, generate_plans
from .predictor import predict_aggregate, predict_remote
from .retriever import RetrievalConfig, Subgraph, retrieve_subgraph
from .scoring import ConstantScorer, LexicalScorer, ScorerBackend
from .store import (
    TripleStore,
    enumerate_plans,
    execute_plan,
    load_dataset,
    load_labels,
    load_triples,
)
from .training import LabeledPlan, emit_find_dataset, emit_reason_dataset, label_plans

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstantScorer",
    "DataError",
    "EndpointError",
    "EvalReport",
    "EvidencePath",
    "FinderConfig",
    "KgqaError",
    "LabeledPlan",
    "LexicalScorer",
    "ParseError",
    "PathStep",
    "Pipeline",
    "Plan",
    "PlanSource",
    "Prediction",
    "QaExample",
    "ReplyParseError",
    "RetrievalConfig",
    "ScoredCandidate",
    "ScorerBackend",
    "Subgraph",
    "TemplateError",
    "Triple",
    "TripleStore",
    "UnknownEntityError",
    "aggregate_score",
    "build_report",
    "emit_find_dataset",
    "emit_reason_dataset",
    "enumerate_plans",
    "execute_plan",
    "find_evidence_paths",
    "generate_plans",
    "induce_path_tree",
    "label_plans",
    "load_dataset",
    "load_labels",
    "load_triples",
    "predict_aggregate",
    "predict_remote",
    "question_metrics",
    "retrieve_subgraph",
    "__version__",
]
