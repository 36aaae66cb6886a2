"""Relevance scorers used by retrieval and path finding.

The lexical backend is the deterministic reference scorer: share of the
question's tokens found in the candidate's text, case-folded, split on
non-alphanumeric characters.  Backends are stateless and safe to share
across concurrent per-question workers.
"""
from __future__ import annotations

import re
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .model import Plan, ScoredCandidate, Triple
from .store import base_relation

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> frozenset[str]:
    """Lowercased tokens split on every non-alphanumeric character."""
    return frozenset(m.group(0) for m in _TOKEN.finditer(text.lower()))


def overlap_score(question: str | frozenset[str], text_tokens: frozenset[str]) -> float:
    """|question tokens ∩ text tokens| / |question tokens|, clipped to [0, 1]."""
    q = tokenize(question) if isinstance(question, str) else question
    if not q:
        return 0.0
    return min(1.0, len(q & text_tokens) / len(q))


def rank_candidates(
    scored: Iterable[ScoredCandidate], budget: int | None
) -> list[ScoredCandidate]:
    """Sort by score descending then item ascending; keep at most ``budget``."""
    ordered = sorted(scored, key=lambda c: (-c.score, c.item))
    return ordered if budget is None else ordered[:budget]


@runtime_checkable
class ScorerBackend(Protocol):
    """Behavioural contract for relation and entity relevance scoring."""

    def score_relations(
        self,
        question: str,
        topic_entity: str,
        candidates: Sequence[str],
        budget: int,
    ) -> list[ScoredCandidate]:
        """Score candidate relation labels against the question.

        Returns at most ``budget`` entries, each scored in [0, 1], sorted by
        score descending then label ascending; every returned label comes
        from ``candidates``.
        """
        ...

    def score_entities(
        self,
        question: str,
        plan: Plan | Sequence[str] | None,
        candidate: str,
        context: Sequence[Triple],
    ) -> ScoredCandidate:
        """One relevance score in [0, 1] for ``candidate`` given the triples
        surrounding it."""
        ...


def _plan_relations(plan: Plan | Sequence[str] | None) -> tuple[str, ...]:
    if plan is None:
        return ()
    return plan.relations if isinstance(plan, Plan) else tuple(plan)


class LexicalScorer:
    """Deterministic token-overlap oracle.

    Relation scores use the label text alone (inverse markers stripped).
    Entity scores use the text of the surrounding triples plus the walk's
    relation labels; with no surrounding triples the score is 0.0.
    """

    def score_relations(
        self,
        question: str,
        topic_entity: str,
        candidates: Sequence[str],
        budget: int,
    ) -> list[ScoredCandidate]:
        if not candidates:
            raise ValueError("candidates must be non-empty")
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        q = tokenize(question)
        scored = [
            ScoredCandidate(label, overlap_score(q, tokenize(base_relation(label))))
            for label in sorted(set(candidates))
        ]
        return rank_candidates(scored, budget)

    def score_entities(
        self,
        question: str,
        plan: Plan | Sequence[str] | None,
        candidate: str,
        context: Sequence[Triple],
    ) -> ScoredCandidate:
        if not context:
            return ScoredCandidate(candidate, 0.0)
        tokens: set[str] = set()
        for head, relation, tail in context:
            tokens |= tokenize(head) | tokenize(base_relation(relation)) | tokenize(tail)
        for relation in _plan_relations(plan):
            tokens |= tokenize(base_relation(relation))
        return ScoredCandidate(candidate, overlap_score(question, frozenset(tokens)))


class ConstantScorer:
    """Assigns the same fixed score to everything.

    Useful as a no-op baseline: with filtering disabled it reduces path
    finding to plain walk enumeration.
    """

    def __init__(self, value: float = 1.0):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"value must be in [0, 1], got {value}")
        self.value = value

    def score_relations(
        self,
        question: str,
        topic_entity: str,
        candidates: Sequence[str],
        budget: int,
    ) -> list[ScoredCandidate]:
        if not candidates:
            raise ValueError("candidates must be non-empty")
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        scored = [ScoredCandidate(label, self.value) for label in sorted(set(candidates))]
        return rank_candidates(scored, budget)

    def score_entities(
        self,
        question: str,
        plan: Plan | Sequence[str] | None,
        candidate: str,
        context: Sequence[Triple],
    ) -> ScoredCandidate:
        return ScoredCandidate(candidate, self.value)
