"""Ground weighted plans in a subgraph as scored evidence paths.

For each (topic entity, plan) pair the walk proceeds hop by hop: look up the
entities adjacent along the plan's next relation, score each against the
question using the triples surrounding it, keep the top S entities, and
extend the partial paths through the survivors.  Only full-length paths are
emitted; a walk that dies contributes nothing.  Each path's aggregate score
is the product of its hop scores, optionally folded with the plan weight.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .model import EvidencePath, PathStep, Plan, ScoredCandidate, Triple
from .retriever import Subgraph
from .scoring import ScorerBackend, overlap_score, rank_candidates, tokenize
from .store import base_relation


@dataclass(frozen=True)
class FinderConfig:
    """Path-finding widths.

    ``s``: number of plans consumed per question (highest weight first).
    ``top_s``: entities kept per hop; ``None`` disables filtering.
    ``use_plan_weight``: fold the plan weight into each path's score.
    ``context_cap``: max surrounding triples passed to the entity scorer.
    """

    s: int = 6
    top_s: int | None = 3
    use_plan_weight: bool = True
    context_cap: int = 20

    def __post_init__(self) -> None:
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if self.top_s is not None and self.top_s < 1:
            raise ValueError(f"top_s must be >= 1 or None, got {self.top_s}")
        if self.context_cap < 1:
            raise ValueError(f"context_cap must be >= 1, got {self.context_cap}")


def aggregate_score(
    hop_scores: Sequence[float],
    plan_weight: float = 1.0,
    include_plan_weight: bool = False,
) -> float:
    """Product of hop scores, optionally multiplied by the plan weight.

    The empty product is 1.0.  Inputs must lie in [0, 1], so the result does
    too and never exceeds the smallest hop score.
    """
    for value in list(hop_scores) + [plan_weight]:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"scores must be in [0, 1], got {value}")
    product = math.prod(hop_scores)
    return product * plan_weight if include_plan_weight else product


def build_context(
    subgraph: Subgraph, question: str, entity: str, cap: int
) -> tuple[Triple, ...]:
    """The triples around ``entity``, most question-relevant first, capped."""
    incident = subgraph.incident(entity)
    if len(incident) <= cap:
        return incident
    q = tokenize(question)

    def relevance(triple: Triple) -> float:
        h, r, t = triple
        return overlap_score(q, tokenize(h) | tokenize(base_relation(r)) | tokenize(t))

    ranked = sorted(incident, key=lambda tr: (-relevance(tr), tr))
    return tuple(ranked[:cap])


def induce_path_tree(subgraph: Subgraph, topic: str, plan: Plan | Sequence[str]) -> list[set[str]]:
    """Layered entity sets reachable hop by hop, before any filtering.

    Layer 0 is ``{topic}``; layer i holds everything reachable after the
    plan's first i relations.  Equals running the plan prefix by prefix.
    """
    relations = plan.relations if isinstance(plan, Plan) else tuple(plan)
    layers = [{topic}]
    for relation in relations:
        layers.append({t for e in layers[-1] for t in subgraph.search_adjacent(e, relation)})
    return layers


def find_evidence_paths(
    subgraph: Subgraph,
    question: str,
    topics: Iterable[str],
    plans: Sequence[Plan],
    config: FinderConfig,
    backend: ScorerBackend,
) -> list[EvidencePath]:
    """Walk the top-weighted plans from each topic and emit scored full paths.

    Output is deduplicated by (entity chain, relation chain) keeping the
    best-scoring copy, then sorted by aggregate score descending and path
    string ascending.  ``origin_plan`` indexes into the ``plans`` argument.
    """
    topic_list = sorted(set(topics))
    if not topic_list:
        raise ValueError("topics must be non-empty")
    if not plans:
        raise ValueError("plans must be non-empty")
    ranked_plans = sorted(enumerate(plans), key=lambda ip: (-ip[1].weight, ip[0]))[: config.s]

    score_cache: dict[tuple[tuple[str, ...], str], float] = {}

    def hop_score(plan: Plan, entity: str) -> float:
        key = (plan.relations, entity)
        if key not in score_cache:
            context = build_context(subgraph, question, entity, config.context_cap)
            score_cache[key] = backend.score_entities(question, plan, entity, context).score
        return score_cache[key]

    best: dict[tuple[tuple[str, ...], tuple[str, ...]], EvidencePath] = {}
    for topic in topic_list:
        for origin_idx, plan in ranked_plans:
            if not plan.relations:
                continue
            partials: list[tuple[PathStep, ...]] = [()]
            for relation in plan.relations:
                expansions: list[tuple[tuple[PathStep, ...], str, str]] = []
                tails: set[str] = set()
                for steps in partials:
                    source = steps[-1].target if steps else topic
                    for tail in subgraph.search_adjacent(source, relation):
                        expansions.append((steps, source, tail))
                        tails.add(tail)
                if not tails:
                    partials = []
                    break
                scored = [ScoredCandidate(t, hop_score(plan, t)) for t in sorted(tails)]
                kept = {c.item: c.score for c in rank_candidates(scored, config.top_s)}
                partials = [
                    steps + (PathStep(source, relation, tail, kept[tail]),)
                    for steps, source, tail in expansions
                    if tail in kept
                ]
                if not partials:
                    break
            for steps in partials:
                score = aggregate_score(
                    [st.hop_score for st in steps], plan.weight, config.use_plan_weight
                )
                path = EvidencePath(steps=steps, aggregate_score=score, origin_plan=origin_idx)
                key = (path.chain, path.relations)
                current = best.get(key)
                if current is None or (path.aggregate_score, -path.origin_plan) > (
                    current.aggregate_score,
                    -current.origin_plan,
                ):
                    best[key] = path
    return sorted(best.values(), key=lambda p: (-p.aggregate_score, p.arrow_chain()))


# ---------------------------------------------------------------------------
# Path dump format: one JSON object per line with keys
# chain / relations / hop_scores / score / plan.

def path_to_record(path: EvidencePath) -> dict:
    return {
        "chain": list(path.chain),
        "relations": list(path.relations),
        "hop_scores": list(path.hop_scores),
        "score": path.aggregate_score,
        "plan": path.origin_plan,
    }


def path_from_record(record: dict) -> EvidencePath:
    try:
        chain = record["chain"]
        relations = record["relations"]
        hop_scores = record["hop_scores"]
        steps = tuple(
            PathStep(chain[i], relations[i], chain[i + 1], hop_scores[i])
            for i in range(len(relations))
        )
        return EvidencePath(
            steps=steps, aggregate_score=record["score"], origin_plan=record.get("plan", 0)
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise DataError(f"malformed path record: {exc}") from exc


def write_paths_file(paths: Iterable[EvidencePath], path: str | Path) -> int:
    records = [path_to_record(p) for p in paths]
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return len(records)


def read_paths_file(path: str | Path) -> list[EvidencePath]:
    out: list[EvidencePath] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(path_from_record(json.loads(line)))
    return out
