"""Produce the weighted plan list for a question.

Three sources: a KG-derived heuristic for closed-loop runs, a static plan
file, and a remote chat endpoint.  Every source returns at most ``s`` plans
with weights in [0, 1], ordered by weight descending.
"""
from __future__ import annotations

import difflib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import json

from .errors import DataError, EndpointError, ReplyParseError
from .llm import CompletionEndpoint, parse_tagged_scores
from .model import Plan
from .retriever import Subgraph
from .scoring import overlap_score, tokenize
from .store import base_relation, enumerate_plans

logger = logging.getLogger(__name__)

SOURCE_KINDS = ("kg-heuristic", "file", "remote")

REMOTE_PLAN_PROMPT = """Instruction:

You will receive a question. Propose up to {budget} relation chains that could lead from the question's topic entity to its answer in a knowledge graph. List the relations of each chain in walk order, separated by commas, most promising chain first. Use the following XML format for every proposal, counting the budget down inside <count> tags:

<count> [remaining budget] </count>
<choice> first.relation, second.relation </choice>
<score> confidence 0.0-1.0 for this chain </score>

Question:

{question}
"""


@dataclass(frozen=True)
class PlanSource:
    """Where plans come from and the per-kind parameters."""

    kind: str
    max_len: int = 2
    plans_by_id: Mapping[str, tuple[Plan, ...]] | None = None
    endpoint: CompletionEndpoint | None = None
    vocabulary: frozenset[str] = field(default_factory=frozenset)
    repair_cutoff: float = 0.8
    parse_retries: int = 2

    def __post_init__(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"kind must be one of {SOURCE_KINDS}, got {self.kind!r}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")

    @classmethod
    def heuristic(cls, max_len: int = 2) -> "PlanSource":
        return cls(kind="kg-heuristic", max_len=max_len)

    @classmethod
    def from_file(cls, path: str | Path) -> "PlanSource":
        return cls(kind="file", plans_by_id=load_plan_file(path))

    @classmethod
    def remote(
        cls,
        endpoint: CompletionEndpoint,
        vocabulary: frozenset[str],
        max_len: int = 2,
        parse_retries: int = 2,
    ) -> "PlanSource":
        return cls(
            kind="remote",
            endpoint=endpoint,
            vocabulary=vocabulary,
            max_len=max_len,
            parse_retries=parse_retries,
        )


def load_plan_file(path: str | Path) -> dict[str, tuple[Plan, ...]]:
    """Read a JSONL plan file: {"id": qid, "plans": [{"relations", "weight"}]}."""
    out: dict[str, tuple[Plan, ...]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            plans = tuple(
                Plan(relations=tuple(p["relations"]), weight=float(p.get("weight", 1.0)))
                for p in row["plans"]
            )
            out[str(row["id"])] = plans
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}:{line_no}: malformed plan record: {exc}") from exc
    return out


def write_plan_file(plans_by_id: Mapping[str, Sequence[Plan]], path: str | Path) -> int:
    count = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for qid in plans_by_id:
            record = {
                "id": qid,
                "plans": [
                    {"relations": list(p.relations), "weight": p.weight}
                    for p in plans_by_id[qid]
                ],
            }
            handle.write(json.dumps(record) + "\n")
            count += 1
    return count


def plan_weight(question: str, relations: Sequence[str]) -> float:
    """Mean per-relation token overlap with the question."""
    if not relations:
        return 0.0
    q = tokenize(question)
    scores = [overlap_score(q, tokenize(base_relation(r))) for r in relations]
    return sum(scores) / len(scores)


def _heuristic_targets(question: str, subgraph: Subgraph) -> frozenset[str]:
    # Prefer entities whose id or label shares tokens with the question;
    # questions rarely name their answers, so fall back to the subgraph's
    # sink entities (walks end there), then to everything non-topic.
    topics = set(subgraph.topics)
    q = tokenize(question)
    lexical = {
        e
        for e in subgraph.entities - topics
        if overlap_score(q, tokenize(e) | tokenize(subgraph.label_of(e) or "")) > 0.0
    }
    if lexical:
        return frozenset(lexical)
    sinks = set(subgraph.sink_entities()) - topics
    if sinks:
        return frozenset(sinks)
    return frozenset(subgraph.entities - topics)


def _rank(plans: list[Plan], s: int) -> list[Plan]:
    plans.sort(key=lambda p: (-p.weight, len(p.relations), p.relations))
    return plans[:s]


def _generate_heuristic(source: PlanSource, question: str, subgraph: Subgraph, s: int) -> list[Plan]:
    targets = _heuristic_targets(question, subgraph)
    if not targets:
        return []
    candidates = enumerate_plans(subgraph, subgraph.topics, targets, source.max_len)
    weighted = [
        Plan(relations=p.relations, weight=plan_weight(question, p.relations))
        for p in candidates
    ]
    return _rank(weighted, s)


def _generate_from_file(source: PlanSource, qid: str | None, s: int) -> list[Plan]:
    assert source.plans_by_id is not None
    if qid is None or qid not in source.plans_by_id:
        raise DataError(f"plan file has no entry for question id {qid!r}")
    plans = list(source.plans_by_id[qid])
    plans.sort(key=lambda p: -p.weight)  # stable: file order kept on ties
    return plans[:s]


def _repair_label(label: str, vocabulary: frozenset[str], cutoff: float) -> str | None:
    if label in vocabulary:
        return label
    matches = difflib.get_close_matches(label, sorted(vocabulary), n=3, cutoff=cutoff)
    if not matches:
        return None
    best = max(matches, key=lambda v: (difflib.SequenceMatcher(None, label, v).ratio(), v))
    logger.info("repaired unknown relation %r -> %r", label, best)
    return best


def _generate_remote(source: PlanSource, question: str, s: int) -> list[Plan]:
    assert source.endpoint is not None
    prompt = REMOTE_PLAN_PROMPT.format(budget=s, question=question)
    last_error: Exception | None = None
    for _ in range(source.parse_retries + 1):
        reply = source.endpoint.complete(prompt)
        try:
            parsed = parse_tagged_scores(reply, s)
        except ReplyParseError as exc:
            last_error = exc
            continue
        plans: list[Plan] = []
        seen: set[tuple[str, ...]] = set()
        for rank, entry in enumerate(parsed.entries, start=1):
            labels = [part.strip() for part in entry.choice.split(",") if part.strip()]
            if not labels:
                continue
            repaired: list[str] = []
            for label in labels:
                fixed = _repair_label(label, source.vocabulary, source.repair_cutoff)
                if fixed is None:
                    logger.warning("dropping plan with unknown relation %r", label)
                    repaired = []
                    break
                repaired.append(fixed)
            if not repaired or tuple(repaired) in seen:
                continue
            seen.add(tuple(repaired))
            weight = entry.score if entry.score is not None else 1.0 / rank
            plans.append(Plan(relations=tuple(repaired), weight=weight))
        if plans:
            return _rank(plans, s)
        last_error = ReplyParseError("no usable plans in reply")
    raise EndpointError(
        f"remote plan generation failed after {source.parse_retries + 1} attempts: {last_error}"
    )


def generate_plans(
    source: PlanSource,
    question: str,
    subgraph: Subgraph,
    s: int,
    qid: str | None = None,
) -> list[Plan]:
    """At most ``s`` plans, weights descending.

    The kg-heuristic enumerates subgraph walks from the topics to lexically
    question-relevant (or terminal) entities and weights each plan by the
    mean token overlap of its relation labels with the question, so every
    returned plan is executable on the generating subgraph.  The file source
    echoes its entry for ``qid``; the remote source prompts the endpoint and
    repairs hallucinated relation labels against the store vocabulary.
    """
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    if source.kind == "kg-heuristic":
        return _generate_heuristic(source, question, subgraph, s)
    if source.kind == "file":
        return _generate_from_file(source, qid, s)
    return _generate_remote(source, question, s)
